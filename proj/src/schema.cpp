// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/schema.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "metatool/error.hpp"

namespace metatool::schema {

std::string_view to_string(ParamKind kind) {
    switch (kind) {
        case ParamKind::String: return "string";
        case ParamKind::Integer: return "integer";
        case ParamKind::Number: return "number";
        case ParamKind::Boolean: return "boolean";
        case ParamKind::Enum: return "enum";
    }
    return "?";
}

std::optional<ParamKind> parse_kind(std::string_view text) {
    if (text == "string") return ParamKind::String;
    if (text == "integer") return ParamKind::Integer;
    if (text == "number") return ParamKind::Number;
    if (text == "boolean") return ParamKind::Boolean;
    if (text == "enum") return ParamKind::Enum;
    return std::nullopt;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::WrongTool: return "wrong_tool";
        case ViolationKind::MissingRequired: return "missing_required";
        case ViolationKind::UnknownParam: return "unknown_param";
        case ViolationKind::TooManyPositional: return "too_many_positional";
        case ViolationKind::TypeMismatch: return "type_mismatch";
        case ViolationKind::EnumViolation: return "enum_violation";
        case ViolationKind::RangeViolation: return "range_violation";
        case ViolationKind::StringConstraint: return "string_constraint";
    }
    return "?";
}

std::string_view to_string(PerturbKind kind) {
    switch (kind) {
        case PerturbKind::ValueSubstitution: return "value_substitution";
        case PerturbKind::BoundaryTesting: return "boundary_testing";
        case PerturbKind::ParameterDrop: return "parameter_drop";
    }
    return "?";
}

std::optional<PerturbKind> parse_perturb_kind(std::string_view text) {
    if (text == "value_substitution") return PerturbKind::ValueSubstitution;
    if (text == "boundary_testing") return PerturbKind::BoundaryTesting;
    if (text == "parameter_drop") return PerturbKind::ParameterDrop;
    return std::nullopt;
}

const ParamSpec* ToolSchema::find(std::string_view name) const {
    for (const auto& p : params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

bool ToolSchema::has_optional() const {
    return std::any_of(params.begin(), params.end(), [](const ParamSpec& p) { return !p.required; });
}

bool is_identifier(std::string_view text) {
    if (text.empty()) return false;
    auto head = static_cast<unsigned char>(text[0]);
    if (!(std::isalpha(head) || head == '_')) return false;
    return std::all_of(text.begin() + 1, text.end(), [](char c) {
        auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || u == '_';
    });
}

bool is_dotted_identifier(std::string_view text) {
    std::size_t start = 0;
    while (true) {
        const auto dot = text.find('.', start);
        const auto part = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (!is_identifier(part)) return false;
        if (dot == std::string_view::npos) return true;
        start = dot + 1;
    }
}

void check_schema(const ToolSchema& schema) {
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorCode::InvalidSchema, schema.tool_name + ": " + msg);
    };
    if (!is_dotted_identifier(schema.tool_name)) fail("tool name is not a dotted identifier");
    std::set<std::string> names;
    bool seen_keyword = false;
    for (const auto& p : schema.params) {
        if (!is_identifier(p.name)) fail("parameter name '" + p.name + "' is not an identifier");
        if (!names.insert(p.name).second) fail("duplicate parameter '" + p.name + "'");
        if (p.required && p.default_value) fail("required parameter '" + p.name + "' has a default");
        if (p.positional) {
            if (seen_keyword) fail("positional parameter '" + p.name + "' follows a keyword parameter");
            if (!p.required) fail("positional parameter '" + p.name + "' must be required");
        } else {
            seen_keyword = true;
        }
        if (p.kind == ParamKind::Enum) {
            if (p.enum_values.empty()) fail("enum '" + p.name + "' has no values");
            std::set<std::string> uniq(p.enum_values.begin(), p.enum_values.end());
            if (uniq.size() != p.enum_values.size()) fail("enum '" + p.name + "' repeats a value");
            for (const auto& v : p.enum_values) {
                if (v.find_first_of("'\"\n") != std::string::npos) fail("enum value contains a quote or newline");
            }
        }
        if (p.range && p.range->min > p.range->max) fail("range of '" + p.name + "' has min > max");
        if (p.range && p.kind != ParamKind::Integer && p.kind != ParamKind::Number) {
            fail("range on non-numeric parameter '" + p.name + "'");
        }
        if (p.kind == ParamKind::Number && (p.decimals < 1 || p.decimals > 6)) fail("decimals out of [1,6]");
        if (p.kind == ParamKind::String) {
            if (p.charset.find_first_of("'\"\n\\") != std::string::npos) {
                fail("string charset of '" + p.name + "' contains a quote, backslash or newline");
            }
        }
    }
}

namespace {

std::string render_double_shortest(double v) {
    if (v == 0.0) v = 0.0;
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    std::string out(buf, res.ptr);
    if (out.find_first_of(".eE") == std::string::npos) out += ".0";
    return out;
}

std::string render_fixed(double v, int decimals) {
    if (v == 0.0) v = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    std::string out(buf);
    // "-0.00" would not round-trip through the canonical grammar.
    if (out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

}  // namespace

std::string render_value(const Value& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
                return v ? "True" : "False";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                return render_double_shortest(v);
            } else {
                return "'" + v + "'";
            }
        },
        value);
}

std::string render_value(const Value& value, const ParamSpec& spec) {
    if (spec.kind == ParamKind::Number) {
        if (const auto* d = std::get_if<double>(&value)) return render_fixed(*d, spec.decimals);
        if (const auto* i = std::get_if<std::int64_t>(&value)) {
            return render_fixed(static_cast<double>(*i), spec.decimals);
        }
    }
    return render_value(value);
}

namespace {

std::string render_call(const ToolCall& call, const ToolSchema* schema) {
    std::string out = call.tool_name + "(";
    bool first = true;
    auto sep = [&] {
        if (!first) out += ", ";
        first = false;
    };
    std::vector<const ParamSpec*> positional_specs;
    if (schema) {
        for (const auto& p : schema->params) {
            if (p.positional) positional_specs.push_back(&p);
        }
    }
    for (std::size_t i = 0; i < call.positional.size(); ++i) {
        sep();
        if (i < positional_specs.size()) {
            out += render_value(call.positional[i], *positional_specs[i]);
        } else {
            out += render_value(call.positional[i]);
        }
    }
    for (const auto& [name, value] : call.keyword) {
        sep();
        const ParamSpec* spec = schema ? schema->find(name) : nullptr;
        out += name + "=" + (spec ? render_value(value, *spec) : render_value(value));
    }
    out += ")";
    return out;
}

class CallParser {
public:
    explicit CallParser(std::string_view text) : text_(text) {}

    std::optional<ParsedCall> run(std::string* error) {
        ParsedCall parsed;
        std::vector<std::string> lexemes;
        bool quotes_canonical = true;
        skip_ws();
        const auto name_start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '_' || text_[pos_] == '.')) {
            ++pos_;
        }
        parsed.call.tool_name = std::string(text_.substr(name_start, pos_ - name_start));
        if (!is_dotted_identifier(parsed.call.tool_name)) return fail(error, "expected a dotted tool name");
        skip_ws();
        if (!eat('(')) return fail(error, "expected '('");
        skip_ws();
        if (!eat(')')) {
            while (true) {
                skip_ws();
                std::string key;
                const auto save = pos_;
                if (peek_identifier_then_equals()) {
                    const auto key_start = pos_;
                    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                                   text_[pos_] == '_')) {
                        ++pos_;
                    }
                    key = std::string(text_.substr(key_start, pos_ - key_start));
                    skip_ws();
                    eat('=');
                    skip_ws();
                } else {
                    pos_ = save;
                }
                std::string lexeme;
                auto value = literal(lexeme, quotes_canonical);
                if (!value) return fail(error, "expected a literal at offset " + std::to_string(pos_));
                if (key.empty()) {
                    if (!parsed.call.keyword.empty()) return fail(error, "positional argument after keyword");
                    parsed.call.positional.push_back(*value);
                    lexemes.push_back(lexeme);
                } else {
                    if (parsed.call.keyword.count(key)) return fail(error, "duplicate keyword '" + key + "'");
                    parsed.call.keyword.emplace(key, *value);
                    parsed.keyword_order.push_back(key);
                    lexemes.push_back(key + "=" + lexeme);
                }
                skip_ws();
                if (eat(')')) break;
                if (!eat(',')) return fail(error, "expected ',' or ')'");
            }
        }
        skip_ws();
        if (pos_ != text_.size()) return fail(error, "trailing characters after ')'");

        std::string rebuilt = parsed.call.tool_name + "(";
        for (std::size_t i = 0; i < lexemes.size(); ++i) {
            if (i) rebuilt += ", ";
            rebuilt += lexemes[i];
        }
        rebuilt += ")";
        parsed.canonical_layout = quotes_canonical && rebuilt == text_ &&
                                  std::is_sorted(parsed.keyword_order.begin(), parsed.keyword_order.end());
        return parsed;
    }

private:
    std::optional<ParsedCall> fail(std::string* error, const std::string& msg) {
        if (error) *error = msg;
        return std::nullopt;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool peek_identifier_then_equals() {
        auto p = pos_;
        if (p >= text_.size()) return false;
        const auto head = static_cast<unsigned char>(text_[p]);
        if (!(std::isalpha(head) || head == '_')) return false;
        while (p < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[p])) || text_[p] == '_')) ++p;
        while (p < text_.size() && std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
        return p < text_.size() && text_[p] == '=';
    }

    std::optional<Value> literal(std::string& lexeme, bool& quotes_canonical) {
        const auto start = pos_;
        if (pos_ >= text_.size()) return std::nullopt;
        const char c = text_[pos_];
        if (c == '\'' || c == '"') {
            const auto close = text_.find(c, pos_ + 1);
            if (close == std::string_view::npos) return std::nullopt;
            std::string body(text_.substr(pos_ + 1, close - pos_ - 1));
            if (body.find('\n') != std::string::npos) return std::nullopt;
            if (c == '"') quotes_canonical = false;
            pos_ = close + 1;
            lexeme = std::string(text_.substr(start, pos_ - start));
            return Value{std::move(body)};
        }
        if (text_.substr(pos_, 4) == "True" && !ident_continues(pos_ + 4)) {
            pos_ += 4;
            lexeme = "True";
            return Value{true};
        }
        if (text_.substr(pos_, 5) == "False" && !ident_continues(pos_ + 5)) {
            pos_ += 5;
            lexeme = "False";
            return Value{false};
        }
        auto p = pos_;
        if (p < text_.size() && text_[p] == '-') ++p;
        const auto digits_start = p;
        while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) ++p;
        if (p == digits_start) return std::nullopt;
        bool is_float = false;
        if (p < text_.size() && text_[p] == '.') {
            auto q = p + 1;
            while (q < text_.size() && std::isdigit(static_cast<unsigned char>(text_[q]))) ++q;
            if (q == p + 1) return std::nullopt;
            p = q;
            is_float = true;
        }
        if (ident_continues(p)) return std::nullopt;
        lexeme = std::string(text_.substr(start, p - start));
        pos_ = p;
        if (is_float) {
            double d = 0.0;
            auto res = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), d);
            if (res.ec != std::errc()) return std::nullopt;
            return Value{d};
        }
        std::int64_t i = 0;
        auto res = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), i);
        if (res.ec != std::errc()) return std::nullopt;
        return Value{i};
    }

    bool ident_continues(std::size_t p) const {
        return p < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[p])) || text_[p] == '_');
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string canonical_text(const ToolCall& call) { return render_call(call, nullptr); }

std::string canonical_text(const ToolSchema& schema, const ToolCall& call) { return render_call(call, &schema); }

std::optional<ParsedCall> parse_call(std::string_view text, std::string* error) {
    return CallParser(text).run(error);
}

bool is_canonical_call(std::string_view text) {
    auto parsed = parse_call(text);
    return parsed && parsed->canonical_layout;
}

std::map<std::string, Value> bind(const ToolSchema& schema, const ToolCall& call) {
    std::map<std::string, Value> out;
    std::size_t i = 0;
    for (const auto& p : schema.params) {
        if (!p.positional) continue;
        if (i < call.positional.size()) out.emplace(p.name, call.positional[i]);
        ++i;
    }
    for (const auto& [k, v] : call.keyword) out.emplace(k, v);
    return out;
}

ToolCall make_call(const ToolSchema& schema, const std::map<std::string, Value>& args) {
    ToolCall call;
    call.tool_name = schema.tool_name;
    std::set<std::string> used;
    for (const auto& p : schema.params) {
        if (!p.positional) continue;
        auto it = args.find(p.name);
        if (it == args.end()) break;
        call.positional.push_back(it->second);
        used.insert(p.name);
    }
    for (const auto& [k, v] : args) {
        if (!used.count(k)) call.keyword.emplace(k, v);
    }
    return call;
}

bool ValidityReport::has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

namespace {

std::optional<double> numeric_of(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

void check_value(const ParamSpec& spec, const Value& value, std::vector<Violation>& out) {
    auto add = [&](ViolationKind kind, std::string msg) { out.push_back({kind, spec.name, std::move(msg)}); };
    switch (spec.kind) {
        case ParamKind::String: {
            const auto* s = std::get_if<std::string>(&value);
            if (!s) return add(ViolationKind::TypeMismatch, "expected string");
            if (s->size() > spec.max_length) add(ViolationKind::StringConstraint, "longer than max_length");
            if (s->find_first_not_of(spec.charset) != std::string::npos) {
                add(ViolationKind::StringConstraint, "character outside charset");
            }
            return;
        }
        case ParamKind::Integer: {
            const auto* i = std::get_if<std::int64_t>(&value);
            if (!i) return add(ViolationKind::TypeMismatch, "expected integer");
            if (spec.range && (static_cast<double>(*i) < spec.range->min || static_cast<double>(*i) > spec.range->max)) {
                add(ViolationKind::RangeViolation, "value " + std::to_string(*i) + " outside range");
            }
            return;
        }
        case ParamKind::Number: {
            auto d = numeric_of(value);
            if (!d) return add(ViolationKind::TypeMismatch, "expected number");
            // Same slack as the grammar compiler, measured in units of the last decimal.
            const double scale = std::pow(10.0, spec.decimals);
            if (spec.range && (*d * scale < spec.range->min * scale - 1e-9 || *d * scale > spec.range->max * scale + 1e-9)) {
                add(ViolationKind::RangeViolation, "value outside range");
            }
            return;
        }
        case ParamKind::Boolean:
            if (!std::holds_alternative<bool>(value)) add(ViolationKind::TypeMismatch, "expected boolean");
            return;
        case ParamKind::Enum: {
            const auto* s = std::get_if<std::string>(&value);
            if (!s) return add(ViolationKind::TypeMismatch, "expected enum member");
            if (std::find(spec.enum_values.begin(), spec.enum_values.end(), *s) == spec.enum_values.end()) {
                add(ViolationKind::EnumViolation, "'" + *s + "' is not a member");
            }
            return;
        }
    }
}

}  // namespace

ValidityReport validate_call(const ToolSchema& schema, const ToolCall& call) {
    ValidityReport report;
    auto& out = report.violations;
    if (call.tool_name != schema.tool_name) {
        out.push_back({ViolationKind::WrongTool, "", "expected tool " + schema.tool_name});
    }
    std::vector<const ParamSpec*> positional_specs;
    for (const auto& p : schema.params) {
        if (p.positional) positional_specs.push_back(&p);
    }
    if (call.positional.size() > positional_specs.size()) {
        out.push_back({ViolationKind::TooManyPositional, "", "too many positional arguments"});
    }
    for (const auto& [name, value] : call.keyword) {
        const auto* spec = schema.find(name);
        if (!spec) {
            out.push_back({ViolationKind::UnknownParam, name, "unknown parameter"});
        } else if (spec->positional) {
            out.push_back({ViolationKind::UnknownParam, name, "positional parameter passed by keyword"});
        }
    }
    const auto bound = bind(schema, call);
    for (const auto& p : schema.params) {
        auto it = bound.find(p.name);
        if (it == bound.end()) {
            if (p.required) out.push_back({ViolationKind::MissingRequired, p.name, "missing required parameter"});
            continue;
        }
        if (p.positional && call.keyword.count(p.name)) continue;
        check_value(p, it->second, out);
    }
    return report;
}

std::vector<Value> boundary_values(const ParamSpec& spec, const BoundaryConfig& config,
                                   const std::optional<Value>& current) {
    std::vector<Value> out;
    auto push = [&](Value v) {
        if (current && render_value(*current, spec) == render_value(v, spec)) return;
        for (const auto& e : out) {
            if (render_value(e, spec) == render_value(v, spec)) return;
        }
        out.push_back(std::move(v));
    };
    switch (spec.kind) {
        case ParamKind::Integer:
        case ParamKind::Number:
        case ParamKind::Boolean: {
            if (config.zero) push(Value{std::int64_t{0}});
            if (config.minus_one) push(Value{std::int64_t{-1}});
            if (config.range_ends && spec.range) {
                if (spec.kind == ParamKind::Integer) {
                    push(Value{static_cast<std::int64_t>(std::ceil(spec.range->min))});
                    push(Value{static_cast<std::int64_t>(std::floor(spec.range->max))});
                } else if (spec.kind == ParamKind::Number) {
                    push(Value{spec.range->min});
                    push(Value{spec.range->max});
                }
            }
            break;
        }
        case ParamKind::String:
        case ParamKind::Enum:
            if (config.empty_string) push(Value{std::string()});
            break;
    }
    return out;
}

namespace {

std::optional<Value> random_compliant_other(const ParamSpec& spec, const Value& current, Rng& rng) {
    switch (spec.kind) {
        case ParamKind::Enum: {
            std::vector<std::string> others;
            for (const auto& v : spec.enum_values) {
                if (Value{v} != current) others.push_back(v);
            }
            if (others.empty()) return std::nullopt;
            return Value{others[uniform_index(rng, others.size())]};
        }
        case ParamKind::Boolean: {
            const auto* b = std::get_if<bool>(&current);
            return Value{b ? !*b : true};
        }
        case ParamKind::Integer: {
            std::int64_t lo = -1000;
            std::int64_t hi = 1000;
            if (spec.range) {
                lo = static_cast<std::int64_t>(std::ceil(spec.range->min));
                hi = static_cast<std::int64_t>(std::floor(spec.range->max));
            }
            if (hi - lo < 1) return std::nullopt;
            const auto* cur = std::get_if<std::int64_t>(&current);
            while (true) {
                const auto v = lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
                if (!cur || v != *cur) return Value{v};
            }
        }
        case ParamKind::Number: {
            const double scale = std::pow(10.0, spec.decimals);
            double lo = -1000.0;
            double hi = 1000.0;
            if (spec.range) {
                lo = spec.range->min;
                hi = spec.range->max;
            }
            const auto lo_i = static_cast<std::int64_t>(std::ceil(lo * scale - 1e-9));
            const auto hi_i = static_cast<std::int64_t>(std::floor(hi * scale + 1e-9));
            if (hi_i - lo_i < 1) return std::nullopt;
            const auto cur_text = render_value(current, spec);
            while (true) {
                const auto k = lo_i + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(hi_i - lo_i + 1)));
                Value v{static_cast<double>(k) / scale};
                if (render_value(v, spec) != cur_text) return v;
            }
        }
        case ParamKind::String: {
            if (spec.charset.empty() || spec.max_length == 0) return std::nullopt;
            const std::size_t max_len = std::min<std::size_t>(spec.max_length, 12);
            for (int attempt = 0; attempt < 64; ++attempt) {
                const std::size_t len = 1 + uniform_index(rng, max_len);
                std::string s;
                for (std::size_t i = 0; i < len; ++i) s += spec.charset[uniform_index(rng, spec.charset.size())];
                if (Value{s} != current) return Value{s};
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace

SyntheticEpisode perturb(const ToolSchema& schema, const Trajectory& trajectory, PerturbKind kind, Rng& rng,
                         const BoundaryConfig& boundary) {
    if (!validate_call(schema, trajectory.call).valid()) {
        throw Error(ErrorCode::InvalidCall, "perturb requires a valid base call: " + canonical_text(trajectory.call));
    }
    auto args = bind(schema, trajectory.call);
    SyntheticEpisode episode;
    episode.base = trajectory;
    episode.op = kind;

    std::vector<std::string> present;
    for (const auto& p : schema.params) {
        if (args.count(p.name)) present.push_back(p.name);
    }

    switch (kind) {
        case PerturbKind::ValueSubstitution: {
            std::vector<std::string> candidates;
            for (const auto& name : present) {
                const auto& spec = *schema.find(name);
                Rng probe(0);
                if (random_compliant_other(spec, args.at(name), probe)) candidates.push_back(name);
            }
            if (candidates.empty()) throw Error(ErrorCode::NoPerturbationPossible, "no parameter admits another value");
            const auto& name = candidates[uniform_index(rng, candidates.size())];
            args[name] = *random_compliant_other(*schema.find(name), args.at(name), rng);
            episode.param = name;
            break;
        }
        case PerturbKind::BoundaryTesting: {
            std::vector<std::pair<std::string, std::vector<Value>>> candidates;
            for (const auto& name : present) {
                auto values = boundary_values(*schema.find(name), boundary, args.at(name));
                if (!values.empty()) candidates.emplace_back(name, std::move(values));
            }
            if (candidates.empty()) throw Error(ErrorCode::NoPerturbationPossible, "no boundary value applies");
            const auto& [name, values] = candidates[uniform_index(rng, candidates.size())];
            args[name] = values[uniform_index(rng, values.size())];
            episode.param = name;
            break;
        }
        case PerturbKind::ParameterDrop: {
            if (!schema.has_optional()) throw Error(ErrorCode::NoPerturbationPossible, "schema has no optional parameters");
            std::vector<std::string> optional_present;
            for (const auto& name : present) {
                if (!schema.find(name)->required) optional_present.push_back(name);
            }
            if (optional_present.empty()) {
                throw Error(ErrorCode::NoPerturbationPossible, "call carries no optional parameter");
            }
            const auto name = optional_present[uniform_index(rng, optional_present.size())];
            args.erase(name);
            episode.param = name;
            break;
        }
    }
    episode.perturbed_call = make_call(schema, args);
    return episode;
}

CheckerSandbox::CheckerSandbox(ToolSchema schema, Checker checker)
    : schema_(std::move(schema)), checker_(std::move(checker)) {}

bool CheckerSandbox::execute(const Trajectory& base, const ToolCall& call) const {
    if (!validate_call(schema_, call).valid()) return false;
    return checker_ ? checker_(base, call) : true;
}

std::vector<SyntheticEpisode> generate_episodes(const std::vector<Trajectory>& support, std::size_t n,
                                                const Sandbox& sandbox, Rng& rng, const BoundaryConfig& boundary) {
    if (support.empty()) throw Error(ErrorCode::EmptySupport, "generate_episodes needs support trajectories");
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "episode count must be >= 1");
    constexpr PerturbKind kKinds[] = {PerturbKind::ValueSubstitution, PerturbKind::BoundaryTesting,
                                      PerturbKind::ParameterDrop};
    std::vector<SyntheticEpisode> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& base = support[uniform_index(rng, support.size())];
        std::vector<PerturbKind> order(std::begin(kKinds), std::end(kKinds));
        for (std::size_t j = order.size() - 1; j > 0; --j) std::swap(order[j], order[uniform_index(rng, j + 1)]);
        std::optional<SyntheticEpisode> episode;
        for (auto kind : order) {
            try {
                episode = perturb(sandbox.schema(), base, kind, rng, boundary);
                break;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoPerturbationPossible) throw;
            }
        }
        if (!episode) throw Error(ErrorCode::NoPerturbationPossible, "no operator applies to " + canonical_text(base.call));
        episode->reward = sandbox.execute(base, episode->perturbed_call) ? 1 : 0;
        out.push_back(std::move(*episode));
    }
    return out;
}

}  // namespace metatool::schema
