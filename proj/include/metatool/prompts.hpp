// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metatool/rng.hpp"

namespace metatool::prompts {

enum class Family { Api, Sql, Nav, Bash };

inline constexpr Family kFamilies[] = {Family::Api, Family::Sql, Family::Nav, Family::Bash};

std::string_view to_string(Family f);
/// Accepts "api", "sql", "nav", "bash".
std::optional<Family> parse_family(std::string_view text);

struct Example {
    std::string query;
    std::string output;
};

/// Per-family prompt material: documentation, instruction lines and curated examples.
struct FamilyPack {
    Family family = Family::Api;
    std::string docs;
    // Closing line of the system block, kept when the documentation is dropped.
    std::string system_instruction;
    // Noun in the user-turn line "Output ONLY the exact <noun> needed, nothing else."
    std::string output_noun;
    std::vector<Example> examples;
};

/// Reads `<dir>/<family>.json`; throws Error(Io) or Error(ParseError).
FamilyPack load_pack(const std::filesystem::path& dir, Family family);

struct PromptSpec {
    std::optional<std::string> docs;
    std::string system_instruction;
    std::string output_noun = "code";
    std::vector<Example> examples;
    std::string query;
    std::size_t shots = 0;
    bool use_docs = true;
};

PromptSpec make_spec(const FamilyPack& pack, std::string query, std::size_t shots, bool use_docs);

inline constexpr std::size_t kContextBudget = 4096;

/// Counts tokens of a rendered prompt; the default counts bytes.
using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Renders the chat-template prompt. Throws Error(InvalidArgument) when shots exceed the
/// examples and Error(ContextOverflow) when the prompt exceeds `budget` tokens.
std::string build(const PromptSpec& spec, std::size_t budget = kContextBudget, const TokenCounter& count = {});

/// The part of build() that does not depend on the query (everything before it).
std::string build_prefix(const PromptSpec& spec);
/// The query-dependent tail; build() == build_prefix() + build_suffix().
std::string build_suffix(const PromptSpec& spec);

/// Splits the "Examples:" block of a rendered prompt back into (query, output) pairs.
std::vector<Example> rendered_examples(std::string_view prompt);

enum class NoiseMode { ParamReorder, MalformedSyntax };

std::string_view to_string(NoiseMode m);

/// Format predicate of the family the example belongs to.
using FormatCheck = std::function<bool(std::string_view)>;

// Space counts: it is the only separator in some SQL and bash outputs.
inline constexpr std::string_view kDelimiters = "()[],='\"-|<>*. ";

/// ParamReorder swaps two arguments of a call; MalformedSyntax deletes or duplicates one
/// delimiter. The result always fails `well_formed`. ParamReorder falls back to
/// MalformedSyntax when the output is not a call with two or more arguments, or when the
/// swap still passes. Throws Error(InvalidArgument) if no corruption breaks the format.
Example corrupt(const Example& example, NoiseMode mode, Rng& rng, const FormatCheck& well_formed);

struct NoiseSpec {
    std::size_t n_corrupt = 0;
    std::vector<NoiseMode> modes{NoiseMode::ParamReorder, NoiseMode::MalformedSyntax};
};

/// Corrupts `n_corrupt` of the first `shots` examples at rng-chosen positions; modes are
/// drawn per example. Returns the chosen positions (ascending).
std::vector<std::size_t> inject_noise(PromptSpec& spec, const NoiseSpec& noise, Rng& rng,
                                      const FormatCheck& well_formed);

}  // namespace metatool::prompts
