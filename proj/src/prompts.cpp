// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/prompts.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "metatool/error.hpp"
#include "metatool/schema_io.hpp"

namespace metatool::prompts {

namespace {

constexpr std::string_view kSystemHeader = "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\n";
constexpr std::string_view kUserHeader = "<|eot_id|><|start_header_id|>user<|end_header_id|>\n\n";
constexpr std::string_view kAssistantHeader = "<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\n";
constexpr std::string_view kExamplesHeading = "Examples:\n";

std::string render_example(const Example& e) { return "Query: " + e.query + "\nOutput: " + e.output; }

void check_example(const Example& e) {
    auto bad = [](const std::string& s) { return s.find('\n') != std::string::npos; };
    if (bad(e.query) || bad(e.output)) throw Error(ErrorCode::InvalidArgument, "example text contains a newline");
}

// Arguments of `name(...)` split at top-level commas; empty when the text is not a call.
struct CallParts {
    std::string head;
    std::vector<std::string> args;
};

std::optional<CallParts> split_call(std::string_view text) {
    const auto open = text.find('(');
    if (open == std::string_view::npos || text.empty() || text.back() != ')') return std::nullopt;
    CallParts parts;
    parts.head = std::string(text.substr(0, open));
    const auto inner = text.substr(open + 1, text.size() - open - 2);
    std::string cur;
    char quote = 0;
    int depth = 0;
    for (char c : inner) {
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '(' || c == '[') {
            ++depth;
        } else if (c == ')' || c == ']') {
            --depth;
        } else if (c == ',' && depth == 0) {
            parts.args.push_back(cur);
            cur.clear();
            continue;
        }
        cur += c;
    }
    if (quote || depth != 0) return std::nullopt;
    parts.args.push_back(cur);
    for (auto& a : parts.args) {
        const auto b = a.find_first_not_of(' ');
        const auto e = a.find_last_not_of(' ');
        if (b == std::string::npos) return std::nullopt;
        a = a.substr(b, e - b + 1);
    }
    return parts;
}

std::optional<std::string> reorder(std::string_view text, Rng& rng) {
    auto parts = split_call(text);
    if (!parts || parts->args.size() < 2) return std::nullopt;
    const auto n = parts->args.size();
    const auto i = uniform_index(rng, n);
    auto j = uniform_index(rng, n - 1);
    if (j >= i) ++j;
    std::swap(parts->args[i], parts->args[j]);
    std::string out = parts->head + "(";
    for (std::size_t k = 0; k < n; ++k) {
        if (k) out += ", ";
        out += parts->args[k];
    }
    return out + ")";
}

std::string malformed(std::string_view text, Rng& rng, const FormatCheck& well_formed) {
    std::vector<std::string> candidates;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (kDelimiters.find(text[i]) == std::string_view::npos) continue;
        std::string del(text);
        del.erase(i, 1);
        std::string dup(text);
        dup.insert(i, 1, text[i]);
        candidates.push_back(std::move(del));
        candidates.push_back(std::move(dup));
    }
    // Fisher-Yates with the portable index draw.
    for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[uniform_index(rng, i)]);
    for (auto& c : candidates) {
        if (!well_formed(c)) return c;
    }
    throw Error(ErrorCode::InvalidArgument, "no single-delimiter edit breaks the format of '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::Api: return "api";
        case Family::Sql: return "sql";
        case Family::Nav: return "nav";
        case Family::Bash: return "bash";
    }
    return "?";
}

std::optional<Family> parse_family(std::string_view text) {
    for (auto f : kFamilies) {
        if (to_string(f) == text) return f;
    }
    return std::nullopt;
}

std::string_view to_string(NoiseMode m) {
    return m == NoiseMode::ParamReorder ? "param_reorder" : "malformed_syntax";
}

FamilyPack load_pack(const std::filesystem::path& dir, Family family) {
    const auto path = dir / (std::string(to_string(family)) + ".json");
    const auto text = schema::read_file(path);
    FamilyPack pack;
    pack.family = family;
    try {
        const auto doc = nlohmann::json::parse(text);
        pack.docs = doc.at("docs").get<std::string>();
        pack.system_instruction = doc.at("system_instruction").get<std::string>();
        pack.output_noun = doc.at("output_noun").get<std::string>();
        for (const auto& e : doc.at("examples")) {
            pack.examples.push_back({e.at("query").get<std::string>(), e.at("output").get<std::string>()});
            check_example(pack.examples.back());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return pack;
}

PromptSpec make_spec(const FamilyPack& pack, std::string query, std::size_t shots, bool use_docs) {
    PromptSpec spec;
    spec.docs = pack.docs;
    spec.system_instruction = pack.system_instruction;
    spec.output_noun = pack.output_noun;
    spec.examples = pack.examples;
    spec.query = std::move(query);
    spec.shots = shots;
    spec.use_docs = use_docs;
    return spec;
}

std::string build_prefix(const PromptSpec& spec) {
    if (spec.shots > spec.examples.size()) {
        throw Error(ErrorCode::InvalidArgument, "shots (" + std::to_string(spec.shots) + ") exceed the " +
                                                    std::to_string(spec.examples.size()) + " available examples");
    }
    std::vector<std::string> sections;
    if (spec.use_docs && spec.docs && !spec.docs->empty()) sections.push_back(*spec.docs);
    if (!spec.system_instruction.empty()) sections.push_back(spec.system_instruction);
    if (spec.shots > 0) {
        std::string block(kExamplesHeading);
        for (std::size_t i = 0; i < spec.shots; ++i) {
            check_example(spec.examples[i]);
            if (i) block += "\n\n";
            block += render_example(spec.examples[i]);
        }
        sections.push_back(std::move(block));
    }
    std::string out(kSystemHeader);
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) out += "\n\n";
        out += sections[i];
    }
    out += '\n';
    out += kUserHeader;
    return out;
}

std::string build_suffix(const PromptSpec& spec) {
    return spec.query + "\n\nOutput ONLY the exact " + spec.output_noun + " needed, nothing else.\n" +
           std::string(kAssistantHeader);
}

std::string build(const PromptSpec& spec, std::size_t budget, const TokenCounter& count) {
    auto out = build_prefix(spec) + build_suffix(spec);
    const std::size_t n = count ? count(out) : out.size();
    if (n > budget) {
        throw Error(ErrorCode::ContextOverflow,
                    "prompt has " + std::to_string(n) + " tokens, budget is " + std::to_string(budget));
    }
    return out;
}

std::vector<Example> rendered_examples(std::string_view prompt) {
    std::vector<Example> out;
    const auto user = prompt.find(kUserHeader);
    if (user == std::string_view::npos) return out;
    const auto system = prompt.substr(0, user);
    // The heading always follows another section or the system header.
    std::size_t start = system.find("\n\n" + std::string(kExamplesHeading));
    if (start != std::string_view::npos) {
        start += 2 + kExamplesHeading.size();
    } else if (system.substr(kSystemHeader.size()).starts_with(kExamplesHeading)) {
        start = kSystemHeader.size() + kExamplesHeading.size();
    } else {
        return out;
    }
    auto block = system.substr(start);
    if (block.ends_with('\n')) block.remove_suffix(1);
    while (!block.empty()) {
        const auto end = block.find("\n\nQuery: ");
        auto item = block.substr(0, end);
        const auto nl = item.find("\nOutput: ");
        if (!item.starts_with("Query: ") || nl == std::string_view::npos) break;
        out.push_back({std::string(item.substr(7, nl - 7)), std::string(item.substr(nl + 9))});
        if (end == std::string_view::npos) break;
        block.remove_prefix(end + 2);
    }
    return out;
}

Example corrupt(const Example& example, NoiseMode mode, Rng& rng, const FormatCheck& well_formed) {
    if (!well_formed) throw Error(ErrorCode::InvalidArgument, "corrupt needs a format check");
    if (!well_formed(example.output)) {
        throw Error(ErrorCode::InvalidArgument, "example output is already malformed: " + example.output);
    }
    Example out = example;
    if (mode == NoiseMode::ParamReorder) {
        if (auto swapped = reorder(example.output, rng); swapped && !well_formed(*swapped)) {
            out.output = std::move(*swapped);
            return out;
        }
    }
    out.output = malformed(example.output, rng, well_formed);
    return out;
}

std::vector<std::size_t> inject_noise(PromptSpec& spec, const NoiseSpec& noise, Rng& rng,
                                      const FormatCheck& well_formed) {
    if (noise.n_corrupt > spec.shots) {
        throw Error(ErrorCode::InvalidArgument, "n_corrupt exceeds the shot count");
    }
    if (noise.n_corrupt > 0 && noise.modes.empty()) throw Error(ErrorCode::InvalidArgument, "no noise modes given");
    std::vector<std::size_t> order(spec.shots);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    order.resize(noise.n_corrupt);
    std::sort(order.begin(), order.end());
    for (auto pos : order) {
        const auto mode = noise.modes[uniform_index(rng, noise.modes.size())];
        spec.examples[pos] = corrupt(spec.examples[pos], mode, rng, well_formed);
    }
    return order;
}

}  // namespace metatool::prompts
