// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "metatool/families.hpp"
#include "metatool/hypernet.hpp"
#include "metatool/lm.hpp"
#include "metatool/prompts.hpp"
#include "metatool/search.hpp"

namespace metatool::harness {

struct TaskRecord {
    std::string id;
    Family family = Family::Api;
    std::string query;
    // api: {"call"}, sql: {"sql"}, nav: {"action"}, bash: {"accept": [...]}.
    nlohmann::json gold;
    std::optional<std::string> schema_ref;
};

/// One JSON object per line; blank lines are skipped. Throws Error(ParseError) naming
/// the line for malformed records, unknown families, bad gold payloads and duplicate ids.
std::vector<TaskRecord> parse_suite(const std::string& text, const FamilyAssets& assets);
std::vector<TaskRecord> load_suite(const std::filesystem::path& path, const FamilyAssets& assets);

enum class ErrorCategory { None, Semantic, Format, Empty };

std::string_view to_string(ErrorCategory c);

struct Verdict {
    bool success = false;
    ErrorCategory category = ErrorCategory::Empty;
};

/// Empty: no non-whitespace output. Format: parses() rejects the trimmed output.
/// Semantic: parses but the family check fails. api compares tool name and the
/// argument multiset after binding positionals; sql executes both queries and compares
/// result multisets; nav compares parsed actions; bash compares whitespace-normalised
/// text against the accepted alternatives.
Verdict check_success(Family family, std::string_view raw_output, const nlohmann::json& gold,
                      const FamilyAssets& assets);

struct Outcome {
    std::string task_id;
    std::string raw_output;
    bool success = false;
    ErrorCategory category = ErrorCategory::Empty;
    double latency_ms = 0.0;
    bool pass_at_1 = false;
    std::string error;  // set when generation threw
};

struct GridCell {
    std::size_t shots = 5;
    bool use_docs = true;
    bool hypernet_on = false;
    std::size_t noise = 0;
    std::uint64_t seed = kDefaultSeed;

    /// e.g. "s5_d1_h0_n0".
    std::string label() const;
    bool valid() const { return noise <= shots && shots <= 5 && noise <= 2; }
};

/// All 6 x 2 x 2 x 3 combinations of shots, docs, hypernet and noise.
std::vector<GridCell> full_grid(std::uint64_t seed = kDefaultSeed);

/// What an agent sees before the tasks of one (cell, family).
struct CellContext {
    GridCell cell;
    Family family;
    const prompts::PromptSpec* spec = nullptr;  // query left empty
    std::string prefix;                        // build_prefix(*spec)
    const FamilyAssets* assets = nullptr;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    /// Whether hypernet-on cells mean anything for this agent.
    virtual bool supports_adaptation() const { return false; }
    /// Called before each (cell, family); returns adaptation wall time in ms. Throws
    /// Error(BackendUnavailable) when the agent cannot run.
    virtual double prepare(const CellContext& ctx) = 0;
    /// Raw output for one task; `suffix` completes the prompt after the prefix.
    virtual std::string act(const TaskRecord& task, const std::string& suffix) = 0;
};

/// Agent driven by a plain function of (cell, task); for tests and oracle runs.
class ScriptedAgent final : public Agent {
public:
    using Rule = std::function<std::string(const GridCell&, const TaskRecord&)>;
    explicit ScriptedAgent(Rule rule, bool adaptation = true) : rule_(std::move(rule)), adaptation_(adaptation) {}
    std::string name() const override { return "scripted"; }
    bool supports_adaptation() const override { return adaptation_; }
    double prepare(const CellContext& ctx) override;
    std::string act(const TaskRecord& task, const std::string& suffix) override;

private:
    Rule rule_;
    bool adaptation_;
    GridCell cell_;
};

struct LmAgentOptions {
    bool constrained = true;
    std::map<Family, std::size_t> max_new = {
        {Family::Api, 96}, {Family::Sql, 160}, {Family::Nav, 64}, {Family::Bash, 64}};
    std::size_t beam_width = 1;  // 1 = greedy
    std::shared_ptr<const value::ValueNet> value_net;
    // Required for hypernet-on cells; the backend must then be a ToyTransformer.
    std::shared_ptr<const hypernet::HypernetParams> hypernet;
    hypernet::HypernetConfig hypernet_config;
};

/// Agent over an LmBackend. The prompt prefix of each (cell, family) is encoded once
/// and reused for all its tasks. Hypernet-on cells adapt a copy of the toy model with
/// LoRA generated from the documentation and the shown examples.
class LmAgent final : public Agent {
public:
    LmAgent(std::shared_ptr<const lm::LmBackend> backend, LmAgentOptions options, const FamilyAssets& assets);
    std::string name() const override { return backend_->name(); }
    bool supports_adaptation() const override;
    double prepare(const CellContext& ctx) override;
    std::string act(const TaskRecord& task, const std::string& suffix) override;

    const fsm::TokenDfa& dfa(Family family);

private:
    std::shared_ptr<const lm::LmBackend> backend_;
    LmAgentOptions options_;
    const FamilyAssets& assets_;
    std::map<Family, std::unique_ptr<fsm::TokenDfa>> dfas_;
    std::unique_ptr<lm::ToyTransformer> adapted_;
    const lm::LmBackend* active_ = nullptr;
    std::unique_ptr<lm::DecodeState> prefix_state_;
    std::string prefix_;
    Family family_ = Family::Api;
};

struct AdaptationInputs {
    hypernet::Vec v_doc;
    std::vector<hypernet::Vec> v_support;
};

/// Embedding inputs for the hypernetwork: the documentation (or the instruction when
/// documentation is off) and the shown examples; with no examples the support set is
/// the documentation vector alone.
AdaptationInputs adaptation_inputs(const lm::LmBackend& backend, const prompts::PromptSpec& spec);

enum class CellStatus { Ok, NotApplicable, Skipped };

std::string_view to_string(CellStatus s);

struct FamilyStats {
    std::size_t tasks = 0;
    std::size_t successes = 0;
    std::size_t pass_at_1 = 0;
    std::size_t semantic = 0;
    std::size_t format = 0;
    std::size_t empty = 0;
    double latency_ms_total = 0.0;
    double adaptation_ms = 0.0;
    std::vector<std::size_t> corrupted;  // example positions that were corrupted

    std::size_t failures() const { return tasks - successes; }
    double sr() const { return tasks ? 100.0 * static_cast<double>(successes) / static_cast<double>(tasks) : 0.0; }
};

struct CellResult {
    GridCell cell;
    CellStatus status = CellStatus::Ok;
    std::string note;
    std::map<Family, FamilyStats> families;
    std::map<Family, std::vector<Outcome>> outcomes;
};

struct GridReport {
    std::vector<Family> families;
    std::vector<CellResult> cells;
    nlohmann::json environment;

    const CellResult* find(const GridCell& c) const;
};

struct RunOptions {
    std::filesystem::path packs_dir;  // data/families
    std::function<void(const std::string&)> progress;
};

/// Every cell in `grid` yields one CellResult (N/A and skipped cells included) and
/// every task of an Ok cell one Outcome. Noise positions come from an rng seeded by
/// (cell seed, cell label, family).
GridReport run_grid(const std::vector<TaskRecord>& tasks, const std::vector<GridCell>& grid, Agent& agent,
                    const FamilyAssets& assets, const RunOptions& options);

struct HypernetDelta {
    Family family;
    std::size_t pairs = 0;  // matched on/off cells
    std::size_t successes_on = 0, successes_off = 0, tasks = 0;
    std::size_t identical_outputs = 0, compared_outputs = 0;
    double max_abs_cell_delta = 0.0;  // percentage points

    double sr_on() const { return tasks ? 100.0 * static_cast<double>(successes_on) / static_cast<double>(tasks) : 0.0; }
    double sr_off() const { return tasks ? 100.0 * static_cast<double>(successes_off) / static_cast<double>(tasks) : 0.0; }
};

std::vector<HypernetDelta> hypernet_deltas(const GridReport& report);

/// Everything except timings and environment metadata.
nlohmann::json content_json(const GridReport& report);
std::string content_hash(const GridReport& report);
nlohmann::json to_json(const GridReport& report);

enum class ReportFormat { Markdown, Csv };

struct ReportTable {
    std::string name;  // file stem
    std::string title;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Ablation, shot sweep, noise, error breakdown, hypernet delta and per-cell tables.
/// Shot and docs tables use hypernet-on cells when available, else hypernet-off.
std::vector<ReportTable> report_tables(const GridReport& report);

std::string render_markdown(const GridReport& report);
std::string render_csv(const ReportTable& table);

/// Writes report.md or one CSV per table, plus report.json; returns the written paths.
std::vector<std::filesystem::path> emit_report(const GridReport& report, ReportFormat format,
                                               const std::filesystem::path& out_dir);

}  // namespace metatool::harness
