// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metatool/fsm.hpp"
#include "metatool/prompts.hpp"
#include "metatool/schema.hpp"
#include "metatool/sql.hpp"

namespace metatool::harness {

using prompts::Family;

/// `click[id]`, `type[id][text]`, `scroll[up|down]` or `goto[url]`.
struct NavAction {
    std::string verb;
    std::vector<std::string> args;

    friend bool operator==(const NavAction&, const NavAction&) = default;
};

std::optional<NavAction> parse_nav(std::string_view text);

struct BashFlag {
    std::string name;
    int arity = 0;
};

struct BashCommand {
    std::string name;
    std::vector<BashFlag> flags;
};

/// The commands and flags the bash family accepts.
const std::vector<BashCommand>& bash_allowlist();

/// A pipeline of simple commands; each segment is its word list with quotes kept.
struct BashPipeline {
    std::vector<std::vector<std::string>> segments;
};

/// Accepts allowlisted commands joined by `|`. Words are split on spaces outside
/// quotes; a word starting with `-` must be a flag of its command, and flags with an
/// argument consume the next word. Redirections, `;`, `&`, `$` and backticks are rejected.
std::optional<BashPipeline> parse_bash(std::string_view text, std::string* error = nullptr);

/// Collapses runs of spaces and trims.
std::string normalize_bash(std::string_view text);

/// Data the family checks and patterns depend on.
struct FamilyAssets {
    std::vector<schema::ToolSchema> api_tools;
    sql::Database db;
};

/// Reads `<data>/schemas/api_tools.json` and `<data>/sql/company.json`.
FamilyAssets load_assets(const std::filesystem::path& data_dir);

/// Lenient format check behind the Format error category. api: any call syntax
/// (keyword order and quoting free); sql: inside the supported grammar; nav, bash: the
/// family parser accepts.
bool parses(Family family, std::string_view text);

/// Strict check used by the noise contract and the decoding soundness check. api:
/// canonical layout and valid against one of the tool schemas; other families: same
/// as parses().
bool well_formed(Family family, std::string_view text, const FamilyAssets& assets);

/// Regular language of outputs the constrained decoder may emit. Every string in it
/// passes well_formed().
fsm::Pattern output_pattern(Family family, const FamilyAssets& assets);

}  // namespace metatool::harness
