// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metatool/harness.hpp"
#include "metatool/toy_transformer.hpp"

namespace metatool::harness {

struct ToySettings {
    lm::ToyConfig config{4, 64, 4, 256, 2048};
    // Next-token steps on the family packs before the run; 0 keeps the random init.
    std::size_t pretrain_steps = 0;
};

/// Everything `run-grid` reads from its TOML file. Relative paths are resolved
/// against the directory of the file.
struct RunConfig {
    std::string backend = "toy";  // toy | ngram | bridge:HOST:PORT
    std::filesystem::path data_dir;
    std::vector<std::filesystem::path> suites;
    std::vector<std::size_t> shots{0, 1, 2, 3, 4, 5};
    std::vector<bool> docs{true, false};
    std::vector<bool> hypernet{false, true};
    std::vector<std::size_t> noise{0, 1, 2};
    std::uint64_t seed = kDefaultSeed;
    std::size_t beam_width = 1;
    bool constrained = true;
    std::optional<std::filesystem::path> value_checkpoint;
    std::optional<std::filesystem::path> hypernet_checkpoint;
    ToySettings toy;
    int ngram_order = 4;
    // Per-family task cap; 0 runs every task.
    std::size_t max_tasks = 0;

    std::vector<GridCell> grid() const;
};

/// Throws Error(ParseError) on TOML syntax errors, wrong value types and unknown keys.
RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Builds a backend from "toy", "ngram" or "bridge:HOST:PORT". The n-gram model and the
/// optional toy pretraining use the family packs under `data_dir` as their corpus.
std::shared_ptr<const lm::LmBackend> make_backend(const std::string& spec, const ToySettings& toy, int ngram_order,
                                                  std::uint64_t seed, const std::filesystem::path& data_dir);

/// Hypernetwork shape matched to a toy model: same width, every layer but the last.
hypernet::HypernetConfig hypernet_config_for(const lm::ToyConfig& toy, std::size_t embed_dim);

/// Loaded assets, tasks, backend and agent for one run.
struct Runtime {
    RunConfig config;
    FamilyAssets assets;
    std::vector<TaskRecord> tasks;
    std::shared_ptr<const lm::LmBackend> backend;
    std::unique_ptr<LmAgent> agent;

    RunOptions run_options() const;
};

/// Throws Error(BackendUnavailable) when the backend cannot be reached.
std::unique_ptr<Runtime> open_runtime(const RunConfig& config);

}  // namespace metatool::harness
