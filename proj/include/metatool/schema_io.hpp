// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "metatool/schema.hpp"

namespace metatool::schema {

ToolSchema schema_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ToolSchema& schema);
ToolSchema load_schema(const std::filesystem::path& path);

nlohmann::json value_to_json(const Value& value);

/// Support file: one `{"query": ..., "call": "name(k=v)"}` object per line.
std::vector<Trajectory> load_support(const std::filesystem::path& path);

nlohmann::json to_json(const SyntheticEpisode& episode);
SyntheticEpisode episode_from_json(const nlohmann::json& doc);
std::vector<SyntheticEpisode> load_episodes(const std::filesystem::path& path);
void save_episodes(const std::filesystem::path& path, const std::vector<SyntheticEpisode>& episodes);

/// Reads a text file; throws Error(Io).
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace metatool::schema
