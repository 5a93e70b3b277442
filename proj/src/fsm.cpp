// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/fsm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <iostream>
#include <map>

#include "metatool/error.hpp"

namespace metatool::fsm {

std::string regex_escape(std::string_view literal) {
    std::string out;
    for (char c : literal) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != ' ') out += '\\';
        out += c;
    }
    return out;
}

namespace {

// One digit position of a same-length range: [lo-hi].
struct DigitSpan {
    int lo;
    int hi;
};

using DigitSeq = std::vector<DigitSpan>;

bool all_char(std::string_view s, char c) {
    return std::all_of(s.begin(), s.end(), [c](char x) { return x == c; });
}

// Digit sequences covering exactly [x, y]; both strings have the same length.
void same_length_seqs(std::string_view x, std::string_view y, DigitSeq prefix, std::vector<DigitSeq>& out) {
    if (x.empty()) {
        out.push_back(std::move(prefix));
        return;
    }
    const int x0 = x[0] - '0';
    const int y0 = y[0] - '0';
    const auto xr = x.substr(1);
    const auto yr = y.substr(1);
    if (x0 == y0) {
        prefix.push_back({x0, x0});
        same_length_seqs(xr, yr, std::move(prefix), out);
        return;
    }
    auto full_tail = [&](DigitSeq p, int lo, int hi) {
        p.push_back({lo, hi});
        for (std::size_t i = 0; i < xr.size(); ++i) p.push_back({0, 9});
        out.push_back(std::move(p));
    };
    int mid_lo = x0;
    int mid_hi = y0;
    if (!all_char(xr, '0')) {
        DigitSeq p = prefix;
        p.push_back({x0, x0});
        same_length_seqs(xr, std::string(xr.size(), '9'), std::move(p), out);
        mid_lo = x0 + 1;
    }
    const bool high_partial = !all_char(yr, '9');
    if (high_partial) mid_hi = y0 - 1;
    if (mid_lo <= mid_hi) full_tail(prefix, mid_lo, mid_hi);
    if (high_partial) {
        DigitSeq p = prefix;
        p.push_back({y0, y0});
        same_length_seqs(std::string(yr.size(), '0'), yr, std::move(p), out);
    }
}

std::vector<DigitSeq> nonneg_range_seqs(std::int64_t lo, std::int64_t hi) {
    std::vector<DigitSeq> out;
    if (lo > hi) return out;
    const auto lo_len = std::to_string(lo).size();
    const auto hi_len = std::to_string(hi).size();
    for (auto len = lo_len; len <= hi_len; ++len) {
        std::int64_t band_lo = len == 1 ? 0 : 1;
        for (std::size_t i = 1; i < len; ++i) band_lo *= 10;
        std::int64_t band_hi = 9;
        for (std::size_t i = 1; i < len; ++i) band_hi = band_hi * 10 + 9;
        const auto a = std::max(lo, band_lo);
        const auto b = std::min(hi, band_hi);
        if (a > b) continue;
        same_length_seqs(std::to_string(a), std::to_string(b), {}, out);
    }
    return out;
}

std::string render_span(const DigitSpan& s) {
    if (s.lo == s.hi) return std::string(1, static_cast<char>('0' + s.lo));
    if (s.lo == 0 && s.hi == 9) return "\\d";
    return std::string("[") + static_cast<char>('0' + s.lo) + "-" + static_cast<char>('0' + s.hi) + "]";
}

// Renders a digit sequence as fixed-point text with `frac` digits after the point.
std::string render_seq(const DigitSeq& seq, int frac) {
    std::string out;
    if (frac > 0 && static_cast<int>(seq.size()) <= frac) {
        out = "0\\.";
        out.append(static_cast<std::size_t>(frac) - seq.size(), '0');
        for (const auto& s : seq) out += render_span(s);
        return out;
    }
    // Collapse runs of identical spans into {n} repetitions.
    const auto point = static_cast<std::ptrdiff_t>(seq.size()) - frac;
    for (std::size_t i = 0; i < seq.size();) {
        if (frac > 0 && static_cast<std::ptrdiff_t>(i) == point) out += "\\.";
        std::size_t j = i + 1;
        while (j < seq.size() && seq[j].lo == seq[i].lo && seq[j].hi == seq[i].hi &&
               !(frac > 0 && static_cast<std::ptrdiff_t>(j) == point)) {
            ++j;
        }
        const auto text = render_span(seq[i]);
        if (j - i >= 3) {
            out += text + "{" + std::to_string(j - i) + "}";
        } else {
            for (std::size_t k = i; k < j; ++k) out += text;
        }
        i = j;
    }
    return out;
}

std::string join_alternatives(const std::vector<std::string>& alts) {
    if (alts.size() == 1) return alts[0];
    std::string out = "(";
    for (std::size_t i = 0; i < alts.size(); ++i) {
        if (i) out += "|";
        out += alts[i];
    }
    return out + ")";
}

}  // namespace

std::string numeric_range_regex(std::int64_t lo, std::int64_t hi, int frac_digits) {
    if (lo > hi) throw Error(ErrorCode::InvalidArgument, "numeric range with lo > hi");
    if (frac_digits < 0) throw Error(ErrorCode::InvalidArgument, "negative fraction digits");
    std::vector<std::string> alts;
    if (lo < 0) {
        const auto mag_lo = hi < 0 ? -hi : 1;
        for (const auto& seq : nonneg_range_seqs(mag_lo, -lo)) alts.push_back("-" + render_seq(seq, frac_digits));
    }
    if (hi >= 0) {
        for (const auto& seq : nonneg_range_seqs(std::max<std::int64_t>(lo, 0), hi)) {
            alts.push_back(render_seq(seq, frac_digits));
        }
    }
    return join_alternatives(alts);
}

namespace {

std::string charset_class(std::string_view charset) {
    std::string out = "[";
    std::string seen;
    for (char c : charset) {
        if (seen.find(c) != std::string::npos) continue;
        seen += c;
        if (!std::isalnum(static_cast<unsigned char>(c))) out += '\\';
        out += c;
    }
    return out + "]";
}

std::string value_regex(const schema::ParamSpec& p, const CompileOptions& options) {
    using schema::ParamKind;
    switch (p.kind) {
        case ParamKind::Boolean:
            return "(True|False)";
        case ParamKind::Enum: {
            std::vector<std::string> alts;
            for (const auto& v : p.enum_values) alts.push_back("'" + regex_escape(v) + "'");
            return join_alternatives(alts);
        }
        case ParamKind::String: {
            if (p.charset.empty() || p.max_length == 0) return "''";
            return "'" + charset_class(p.charset) + "{0," + std::to_string(p.max_length) + "}'";
        }
        case ParamKind::Integer: {
            std::int64_t lo = -options.implicit_integer_bound;
            std::int64_t hi = options.implicit_integer_bound;
            if (p.range) {
                lo = static_cast<std::int64_t>(std::ceil(p.range->min));
                hi = static_cast<std::int64_t>(std::floor(p.range->max));
            }
            if (lo > hi) {
                throw Error(ErrorCode::UnsupportedSchemaFeature, "range of '" + p.name + "' holds no integer");
            }
            return numeric_range_regex(lo, hi);
        }
        case ParamKind::Number: {
            const double scale = std::pow(10.0, p.decimals);
            const double min = p.range ? p.range->min : -options.implicit_number_bound;
            const double max = p.range ? p.range->max : options.implicit_number_bound;
            // Small epsilon so that e.g. 0.1 * 100 is not floored to 9.
            const double lo_d = std::ceil(min * scale - 1e-9);
            const double hi_d = std::floor(max * scale + 1e-9);
            if (lo_d > hi_d) {
                throw Error(ErrorCode::UnsupportedSchemaFeature, "range of '" + p.name + "' holds no representable value");
            }
            if (hi_d - lo_d > static_cast<double>(options.max_number_values)) {
                throw Error(ErrorCode::UnsupportedSchemaFeature,
                            "number parameter '" + p.name + "' spans too many values");
            }
            return numeric_range_regex(static_cast<std::int64_t>(lo_d), static_cast<std::int64_t>(hi_d), p.decimals);
        }
    }
    throw Error(ErrorCode::UnsupportedSchemaFeature, "unsupported kind for parameter '" + p.name + "'");
}

}  // namespace

Pattern compile_schema(const schema::ToolSchema& schema, const CompileOptions& options) {
    schema::check_schema(schema);
    struct Item {
        std::string text;
        bool required;
    };
    std::vector<Item> items;
    std::vector<const schema::ParamSpec*> keywords;
    for (const auto& p : schema.params) {
        if (p.positional) {
            items.push_back({value_regex(p, options), true});
        } else {
            keywords.push_back(&p);
        }
    }
    std::sort(keywords.begin(), keywords.end(),
              [](const auto* a, const auto* b) { return a->name < b->name; });
    for (const auto* p : keywords) items.push_back({p->name + "=" + value_regex(*p, options), p->required});

    // rest[i][first]: the argument list from item i on, `first` meaning nothing emitted yet.
    const auto n = items.size();
    std::vector<std::array<std::string, 2>> rest(n + 1);
    for (std::size_t i = n; i-- > 0;) {
        const auto& it = items[i];
        const auto& later = rest[i + 1][0];
        if (it.required) {
            rest[i][0] = ", " + it.text + later;
            rest[i][1] = it.text + later;
        } else {
            rest[i][0] = "(, " + it.text + ")?" + later;
            const auto& skip = rest[i + 1][1];
            rest[i][1] = skip.empty() ? "(" + it.text + later + ")?" : "(" + it.text + later + "|" + skip + ")";
        }
    }
    return {regex_escape(schema.tool_name) + "\\(" + rest[0][1] + "\\)"};
}

Pattern compile_schemas(std::span<const schema::ToolSchema> schemas, const CompileOptions& options) {
    if (schemas.empty()) throw Error(ErrorCode::InvalidArgument, "no schemas to compile");
    std::vector<std::string> alts;
    for (const auto& s : schemas) alts.push_back("(" + compile_schema(s, options).regex_text + ")");
    return {join_alternatives(alts)};
}

bool TokenDfa::is_accepting(StateId s) const {
    if (s < 0 || static_cast<std::size_t>(s) >= accepting_.size()) {
        throw Error(ErrorCode::InvalidState, "state " + std::to_string(s) + " out of range");
    }
    return accepting_[static_cast<std::size_t>(s)];
}

const std::vector<std::pair<TokenId, StateId>>& TokenDfa::transitions(StateId s) const {
    if (s < 0 || static_cast<std::size_t>(s) >= transitions_.size()) {
        throw Error(ErrorCode::InvalidState, "state " + std::to_string(s) + " out of range");
    }
    return transitions_[static_cast<std::size_t>(s)];
}

std::uint32_t TokenDfa::distance_to_accept(StateId s) const {
    transitions(s);
    return distance_[static_cast<std::size_t>(s)];
}

std::optional<StateId> TokenDfa::step(StateId state, TokenId token) const {
    const auto& row = transitions(state);
    auto it = std::lower_bound(row.begin(), row.end(), token,
                               [](const auto& edge, TokenId t) { return edge.first < t; });
    if (it == row.end() || it->first != token) return std::nullopt;
    return it->second;
}

std::optional<StateId> TokenDfa::run(std::span<const TokenId> tokens) const {
    StateId s = start_;
    for (TokenId t : tokens) {
        auto next = step(s, t);
        if (!next) return std::nullopt;
        s = *next;
    }
    return s;
}

bool TokenDfa::accepts(std::span<const TokenId> tokens) const {
    auto s = run(tokens);
    return s && is_accepting(*s);
}

namespace {

std::string dot_escape(std::string_view text) {
    std::string out;
    for (unsigned char c : text) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += static_cast<char>(c);
        } else if (c < 0x20 || c >= 0x7f) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\\\x%02x", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

}  // namespace

std::string TokenDfa::to_dot(const Vocabulary& vocab) const {
    std::string out = "digraph token_dfa {\n  rankdir=LR;\n";
    for (std::size_t s = 0; s < transitions_.size(); ++s) {
        out += "  s" + std::to_string(s) + " [shape=" + (accepting_[s] ? "doublecircle" : "circle") + "];\n";
    }
    out += "  start [shape=point];\n  start -> s" + std::to_string(start_) + ";\n";
    for (std::size_t s = 0; s < transitions_.size(); ++s) {
        std::map<StateId, std::vector<TokenId>> grouped;
        for (const auto& [tok, dst] : transitions_[s]) grouped[dst].push_back(tok);
        for (const auto& [dst, toks] : grouped) {
            std::string label;
            constexpr std::size_t kShown = 12;
            for (std::size_t i = 0; i < toks.size() && i < kShown; ++i) {
                if (i) label += " ";
                label += toks[i] == eos_ ? "<eos>" : dot_escape(vocab.token(toks[i]));
            }
            if (toks.size() > kShown) label += " (+" + std::to_string(toks.size() - kShown) + ")";
            out += "  s" + std::to_string(s) + " -> s" + std::to_string(dst) + " [label=\"" + label + "\"];\n";
        }
    }
    out += "}\n";
    return out;
}

TokenDfa build_token_dfa(const Pattern& pattern, const Vocabulary& vocab, const TokenDfaOptions& options) {
    return build_token_dfa(compile_regex(pattern.regex_text, options.state_cap), vocab, options);
}

TokenDfa build_token_dfa(const ByteDfa& bytes, const Vocabulary& vocab, const TokenDfaOptions& options) {
    const std::size_t n = bytes.size();
    const auto finished = static_cast<StateId>(n);
    const TokenId eos = vocab.eos_id();
    std::vector<std::vector<std::pair<TokenId, StateId>>> edges(n + 1);

    for (std::size_t s = 0; s < n; ++s) {
        auto& row = edges[s];
        for (std::size_t t = 0; t < vocab.size(); ++t) {
            const auto tok = static_cast<TokenId>(t);
            if (tok == eos) {
                if (bytes.accepting[s]) row.emplace_back(tok, finished);
                continue;
            }
            const auto& text = vocab.token(tok);
            if (text.empty()) continue;
            StateId cur = static_cast<StateId>(s);
            for (unsigned char c : text) {
                cur = bytes.next[static_cast<std::size_t>(cur)][c];
                if (cur == kNoState) break;
            }
            if (cur != kNoState) row.emplace_back(tok, cur);
        }
    }

    // Co-accessibility at the token level, then reachability from start.
    std::vector<std::vector<StateId>> reverse(n + 1);
    for (std::size_t s = 0; s <= n; ++s) {
        for (const auto& [tok, dst] : edges[s]) reverse[static_cast<std::size_t>(dst)].push_back(static_cast<StateId>(s));
    }
    constexpr auto kInf = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> dist(n + 1, kInf);
    std::deque<StateId> queue;
    auto byte_accepting = [&](std::size_t s) { return s == n || bytes.accepting[s]; };
    for (std::size_t s = 0; s <= n; ++s) {
        if (byte_accepting(s)) {
            dist[s] = 0;
            queue.push_back(static_cast<StateId>(s));
        }
    }
    while (!queue.empty()) {
        const auto s = static_cast<std::size_t>(queue.front());
        queue.pop_front();
        for (StateId p : reverse[s]) {
            if (dist[static_cast<std::size_t>(p)] == kInf) {
                dist[static_cast<std::size_t>(p)] = dist[s] + 1;
                queue.push_back(p);
            }
        }
    }

    TokenDfa dfa;
    dfa.eos_ = eos;
    dfa.vocab_size_ = vocab.size();
    const auto start = static_cast<std::size_t>(bytes.start);
    if (dist[start] == kInf) {
        std::clog << "warning: DeadLanguage: no token sequence reaches an accepting state\n";
        dfa.dead_language_ = true;
        dfa.transitions_.resize(2);
        dfa.accepting_ = {false, true};
        dfa.distance_ = {kInf, 0};
        dfa.start_ = 0;
        dfa.finished_ = 1;
        return dfa;
    }

    std::vector<StateId> renumber(n + 1, kNoState);
    std::vector<std::size_t> order{start};
    renumber[start] = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (const auto& [tok, dst] : edges[order[i]]) {
            const auto d = static_cast<std::size_t>(dst);
            if (dist[d] == kInf || renumber[d] != kNoState) continue;
            renumber[d] = static_cast<StateId>(order.size());
            order.push_back(d);
        }
    }
    if (order.size() > options.state_cap + 1) {
        throw Error(ErrorCode::StateBudgetExceeded, "token DFA exceeds " + std::to_string(options.state_cap) + " states");
    }
    if (renumber[n] == kNoState) {
        // Only reachable through EOS, which every reachable accepting state has; defensive.
        renumber[n] = static_cast<StateId>(order.size());
        order.push_back(n);
    }
    dfa.transitions_.resize(order.size());
    dfa.accepting_.resize(order.size());
    dfa.distance_.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto s = order[i];
        dfa.accepting_[i] = byte_accepting(s);
        dfa.distance_[i] = dist[s];
        for (const auto& [tok, dst] : edges[s]) {
            const auto d = static_cast<std::size_t>(dst);
            if (dist[d] == kInf) continue;
            dfa.transitions_[i].emplace_back(tok, renumber[d]);
        }
    }
    dfa.start_ = 0;
    dfa.finished_ = renumber[n];
    return dfa;
}

std::size_t TokenMask::count() const { return static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), true)); }

TokenMask TokenMask::all(std::size_t vocab_size) { return TokenMask{std::vector<bool>(vocab_size, true)}; }

TokenMask allowed_tokens(const TokenDfa& dfa, StateId state, std::size_t remaining) {
    TokenMask mask{std::vector<bool>(dfa.vocab_size(), false)};
    for (const auto& [tok, dst] : dfa.transitions(state)) {
        if (remaining != kUnlimited && tok != dfa.eos_id()) {
            // This token plus the shortest path to acceptance must fit.
            if (remaining == 0 || dfa.distance_to_accept(dst) > remaining - 1) continue;
        }
        mask.allowed[static_cast<std::size_t>(tok)] = true;
    }
    return mask;
}

std::vector<float> mask_logits(std::span<const float> logits, const TokenMask& mask) {
    if (logits.size() != mask.allowed.size()) {
        throw Error(ErrorCode::DimensionMismatch, "logits size " + std::to_string(logits.size()) +
                                                      " != mask size " + std::to_string(mask.allowed.size()));
    }
    std::vector<float> out(logits.begin(), logits.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!mask.allowed[i]) out[i] = -std::numeric_limits<float>::infinity();
    }
    return out;
}

}  // namespace metatool::fsm
