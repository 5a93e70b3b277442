// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

// Flat binary tensor archive:
//   "MTCKPT01" | u64 LE manifest length | JSON manifest | raw f64 LE tensors (row-major)
// The manifest is {"meta": {...}, "tensors": [{name, shape, dtype, offset, count}]}.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "metatool/ad.hpp"

namespace metatool::checkpoint {

struct Checkpoint {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::string> order;
    std::map<std::string, ad::Mat> tensors;

    void put(const std::string& name, const ad::Mat& value);
    /// Throws Error(InvalidArgument) when absent.
    const ad::Mat& get(const std::string& name) const;
};

std::string serialize(const Checkpoint& ckpt);
/// Throws Error(ParseError) on a malformed archive.
Checkpoint deserialize(const std::string& bytes);

void save(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load(const std::filesystem::path& path);

Checkpoint from_params(const std::vector<const ad::Param*>& params, nlohmann::json meta = nlohmann::json::object());
/// Copies tensors into `params` by name; shapes must match (DimensionMismatch).
void restore(const std::vector<ad::Param*>& params, const Checkpoint& ckpt);

}  // namespace metatool::checkpoint
