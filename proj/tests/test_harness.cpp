// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include "doctest.h"
#include "metatool/error.hpp"
#include "metatool/harness.hpp"
#include "metatool/schema_io.hpp"

using namespace metatool;
using namespace metatool::harness;

namespace {

const std::filesystem::path kRoot = METATOOL_SOURCE_DIR;

const FamilyAssets& assets() {
    static const FamilyAssets a = load_assets(kRoot / "data");
    return a;
}

std::vector<TaskRecord> all_tasks() {
    std::vector<TaskRecord> out;
    for (auto f : prompts::kFamilies) {
        auto part = load_suite(kRoot / "data/suites" / (std::string(prompts::to_string(f)) + ".jsonl"), assets());
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::string gold_text(const TaskRecord& t) {
    switch (t.family) {
        case Family::Api: return t.gold.at("call");
        case Family::Sql: return t.gold.at("sql");
        case Family::Nav: return t.gold.at("action");
        case Family::Bash: return t.gold.at("accept").at(0);
    }
    return {};
}

RunOptions run_options() {
    RunOptions o;
    o.packs_dir = kRoot / "data/families";
    return o;
}

std::vector<TaskRecord> first_n(const std::vector<TaskRecord>& all, std::size_t n) {
    std::vector<TaskRecord> out;
    std::map<Family, std::size_t> seen;
    for (const auto& t : all) {
        if (seen[t.family]++ < n) out.push_back(t);
    }
    return out;
}

// Records the prompt spec of every (cell, family) it is prepared for.
class SpyAgent final : public Agent {
public:
    std::string name() const override { return "spy"; }
    bool supports_adaptation() const override { return true; }
    double prepare(const CellContext& ctx) override {
        seen.push_back({ctx.cell, ctx.family, *ctx.spec, ctx.prefix});
        return 0.0;
    }
    std::string act(const TaskRecord&, const std::string&) override { return ""; }

    struct Seen {
        GridCell cell;
        Family family;
        prompts::PromptSpec spec;
        std::string prefix;
    };
    std::vector<Seen> seen;
};

}  // namespace

TEST_CASE("suites load and every gold succeeds against itself") {
    const auto tasks = all_tasks();
    CHECK(tasks.size() == 200);
    for (const auto& t : tasks) {
        CAPTURE(t.id);
        const auto v = check_success(t.family, gold_text(t), t.gold, assets());
        CHECK(v.success);
        CHECK(v.category == ErrorCategory::None);
    }
    CHECK(parse_suite("", assets()).empty());
    CHECK(parse_suite("\n\n", assets()).empty());
}

TEST_CASE("suite errors name the line") {
    auto code_and_msg = [](const std::string& text) -> std::pair<ErrorCode, std::string> {
        try {
            parse_suite(text, assets());
        } catch (const Error& e) {
            return {e.code(), e.what()};
        }
        return {ErrorCode::InvalidArgument, "no error"};
    };
    const std::string ok = R"({"id":"x1","family":"nav","query":"q","gold":{"action":"scroll[up]"}})";
    auto [c1, m1] = code_and_msg(ok + "\n" + R"({"id":"x2","family":"excel","query":"q","gold":{}})");
    CHECK(c1 == ErrorCode::ParseError);
    CHECK(m1.find("line 2") != std::string::npos);
    CHECK(code_and_msg(ok + "\n" + ok).first == ErrorCode::ParseError);
    CHECK(code_and_msg("{not json").first == ErrorCode::ParseError);
    CHECK(code_and_msg(R"({"id":"x","family":"nav","query":"q","gold":{"action":"jump[x]"}})").first ==
          ErrorCode::ParseError);
    CHECK(code_and_msg(R"({"id":"x","family":"sql","query":"q","gold":{"sql":"SELECT age FROM employees"}})").first ==
          ErrorCode::ParseError);
    CHECK(code_and_msg(
              R"j({"id":"x","family":"api","query":"q","gold":{"call":"torchvision.models.resnet18(pretrained=True)"},"schema_ref":"nope"})j")
              .first == ErrorCode::ParseError);
    CHECK(code_and_msg(R"({"id":"x","family":"bash","query":"q","gold":{"accept":["rm -rf / ; ls"]}})").first ==
          ErrorCode::ParseError);
}

TEST_CASE("hand-labelled error taxonomy") {
    const auto tasks = all_tasks();
    std::map<std::string, const TaskRecord*> by_id;
    for (const auto& t : tasks) by_id[t.id] = &t;
    const auto cases = nlohmann::json::parse(schema::read_file(kRoot / "fixtures/taxonomy/cases.json"));
    REQUIRE(cases.size() == 30);
    std::set<std::string> labels;
    for (const auto& c : cases) {
        const auto* t = by_id.at(c.at("task").get<std::string>());
        const auto out = c.at("output").get<std::string>();
        CAPTURE(t->id);
        CAPTURE(out);
        const auto v = check_success(t->family, out, t->gold, assets());
        const auto label = c.at("label").get<std::string>();
        labels.insert(label);
        CHECK(to_string(v.category) == label);
        CHECK(v.success == (label == "none"));
    }
    CHECK(labels.size() == 4);
}

TEST_CASE("grid shape and labels") {
    const auto g = full_grid();
    CHECK(g.size() == 72);
    CHECK(std::count_if(g.begin(), g.end(), [](const GridCell& c) { return c.valid(); }) == 60);
    CHECK(GridCell{5, true, false, 0, 42}.label() == "s5_d1_h0_n0");
    CHECK(GridCell{0, false, true, 2, 42}.label() == "s0_d0_h1_n2");
    CHECK(!GridCell{1, true, false, 2, 42}.valid());
}

TEST_CASE("scripted oracle agents give exact success rates") {
    const auto tasks = all_tasks();
    const std::vector<GridCell> grid = {{5, true, false, 0, 42}, {0, false, false, 0, 42}, {2, true, false, 1, 42}};
    ScriptedAgent gold([](const GridCell&, const TaskRecord& t) { return gold_text(t); });
    const auto r = run_grid(tasks, grid, gold, assets(), run_options());
    REQUIRE(r.cells.size() == 3);
    for (const auto& c : r.cells) {
        REQUIRE(c.status == CellStatus::Ok);
        for (const auto& [f, s] : c.families) {
            CHECK(s.tasks == 50);
            CHECK(s.sr() == 100.0);
            CHECK(s.pass_at_1 == 50);
        }
    }
    // Every even-numbered task answered, odd ones left empty.
    ScriptedAgent half([](const GridCell&, const TaskRecord& t) {
        const int n = std::stoi(t.id.substr(t.id.find('-') + 1));
        return n % 2 == 0 ? gold_text(t) : std::string();
    });
    const auto h = run_grid(tasks, grid, half, assets(), run_options());
    for (const auto& c : h.cells) {
        for (const auto& [f, s] : c.families) {
            CHECK(s.sr() == 50.0);
            CHECK(s.empty == 25);
            CHECK(s.failures() == 25);
        }
    }
}

TEST_CASE("cells without meaning are marked, not run") {
    const auto tasks = first_n(all_tasks(), 2);
    ScriptedAgent plain([](const GridCell&, const TaskRecord& t) { return gold_text(t); }, false);
    const auto r = run_grid(tasks, full_grid(), plain, assets(), run_options());
    CHECK(r.cells.size() == 72);
    for (const auto& c : r.cells) {
        const bool runnable = c.cell.valid() && !c.cell.hypernet_on;
        CHECK((c.status == CellStatus::Ok) == runnable);
        if (!runnable) CHECK(c.status == CellStatus::NotApplicable);
        if (!runnable) CHECK(c.outcomes.empty());
    }
    // Tables fall back to hypernet-off cells.
    const auto tables = report_tables(r);
    CHECK(tables.front().title.find("hypernet off") != std::string::npos);
}

TEST_CASE("noise contract holds in every cell") {
    const auto tasks = first_n(all_tasks(), 1);
    SpyAgent spy;
    const auto r = run_grid(tasks, full_grid(), spy, assets(), run_options());
    std::size_t checked = 0;
    for (const auto& s : spy.seen) {
        CAPTURE(s.cell.label());
        CAPTURE(prompts::to_string(s.family));
        const auto& corrupted = r.find(s.cell)->families.at(s.family).corrupted;
        CHECK(corrupted.size() == s.cell.noise);
        std::size_t broken = 0;
        for (std::size_t i = 0; i < s.spec.shots; ++i) {
            const bool bad = !well_formed(s.family, s.spec.examples[i].output, assets());
            broken += bad;
            CHECK(bad == (std::find(corrupted.begin(), corrupted.end(), i) != corrupted.end()));
        }
        CHECK(broken == s.cell.noise);
        CHECK(s.prefix == prompts::build_prefix(s.spec));
        ++checked;
    }
    CHECK(checked == 60 * 4);
}

TEST_CASE("lm agent decodes the forced answers through the real prompt") {
    const auto tasks = first_n(all_tasks(), 3);
    std::vector<std::pair<std::string, std::string>> scripts;
    for (const auto& t : tasks) scripts.emplace_back("\n\n" + t.query + "\n\nOutput ONLY", gold_text(t));
    std::shared_ptr<const lm::LmBackend> backend = lm::ScriptedBackend::forcing_by_key(scripts);
    LmAgentOptions opts;
    opts.constrained = false;
    opts.max_new = {{Family::Api, 200}, {Family::Sql, 200}, {Family::Nav, 200}, {Family::Bash, 200}};
    LmAgent agent(backend, opts, assets());
    CHECK(!agent.supports_adaptation());
    const std::vector<GridCell> grid = {{3, true, false, 1, 42}, {3, true, true, 1, 42}};
    const auto r1 = run_grid(tasks, grid, agent, assets(), run_options());
    REQUIRE(r1.cells[0].status == CellStatus::Ok);
    CHECK(r1.cells[1].status == CellStatus::NotApplicable);
    for (const auto& [f, s] : r1.cells[0].families) CHECK(s.sr() == 100.0);

    const auto r2 = run_grid(tasks, grid, agent, assets(), run_options());
    CHECK(content_hash(r1) == content_hash(r2));

    // Constrained decoding keeps every output inside the family language.
    opts.constrained = true;
    LmAgent masked(backend, opts, assets());
    const auto r3 = run_grid(tasks, {grid[0]}, masked, assets(), run_options());
    for (const auto& [f, outs] : r3.cells[0].outcomes) {
        for (const auto& o : outs) {
            CAPTURE(o.raw_output);
            CHECK(o.error.empty());
            CHECK(well_formed(f, o.raw_output, assets()));
        }
    }
}

TEST_CASE("content hash ignores timings but sees outputs") {
    const auto tasks = first_n(all_tasks(), 2);
    ScriptedAgent gold([](const GridCell&, const TaskRecord& t) { return gold_text(t); });
    auto a = run_grid(tasks, {{5, true, false, 0, 42}}, gold, assets(), run_options());
    auto b = a;
    b.cells[0].families.begin()->second.latency_ms_total += 123.0;
    b.environment["host"] = "elsewhere";
    CHECK(content_hash(a) == content_hash(b));
    b.cells[0].outcomes.begin()->second[0].raw_output += " ";
    CHECK(content_hash(a) != content_hash(b));
    CHECK(content_hash(a).size() == 16);
}

TEST_CASE("report tables and rendering") {
    const auto tasks = all_tasks();
    // Success depends on the cell so the tables have something to show.
    ScriptedAgent agent([](const GridCell& c, const TaskRecord& t) {
        const int n = std::stoi(t.id.substr(t.id.find('-') + 1));
        const bool ok = c.hypernet_on ? n % 5 != 0 : n % 2 == 0;
        if (ok && static_cast<std::size_t>(n) % 10 >= c.noise) return gold_text(t);
        return n % 3 == 0 ? std::string("???") : std::string();
    });
    const auto r = run_grid(tasks, full_grid(), agent, assets(), run_options());
    const auto tables = report_tables(r);
    std::map<std::string, const ReportTable*> by_name;
    for (const auto& t : tables) by_name[t.name] = &t;
    REQUIRE(by_name.count("ablation"));
    const auto& ab = *by_name["ablation"];
    CHECK(ab.title.find("hypernet on") != std::string::npos);
    CHECK(ab.header == std::vector<std::string>{"Configuration", "api", "sql", "nav", "bash", "Avg"});
    CHECK(ab.rows.size() == 4);
    CHECK(ab.rows[0][0] == "Full (5-shot + docs)");
    // Hypernet-on: tasks with n % 5 == 0 fail, 40 of 50 succeed.
    CHECK(ab.rows[0][1] == "80.0");
    CHECK(ab.rows[0][5] == "80.0");
    CHECK(by_name["shots"]->rows.size() == 6);
    const auto& noise = *by_name["noise"];
    CHECK(noise.header.size() == 5);
    CHECK(noise.rows.size() == 5);
    CHECK(noise.rows.back()[0] == "Average");
    const auto& err = *by_name["errors"];
    CHECK(err.rows.back()[0] == "Total");
    CHECK(err.rows.back()[1] == "40");
    const auto& hyp = *by_name["hypernet"];
    REQUIRE(hyp.rows.size() == 4);
    CHECK(hyp.rows[0][1] == "30");
    const auto deltas = hypernet_deltas(r);
    CHECK(deltas[0].pairs == 30);
    CHECK(deltas[0].tasks == 1500);

    const auto md = render_markdown(r);
    CHECK(md.find("| Configuration | api | sql | nav | bash | Avg |") != std::string::npos);
    CHECK(md.find(content_hash(r)) != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "metatool_report_test";
    std::filesystem::remove_all(dir);
    const auto csvs = emit_report(r, ReportFormat::Csv, dir);
    CHECK(csvs.size() == tables.size() + 1);
    const auto md_files = emit_report(r, ReportFormat::Markdown, dir);
    CHECK(std::filesystem::exists(dir / "report.md"));
    CHECK(md_files.size() == 2);
    const auto j = nlohmann::json::parse(schema::read_file(dir / "report.json"));
    CHECK(j.at("content_hash") == content_hash(r));
    CHECK(j.at("cells").size() == 72);
}

TEST_CASE("csv quoting") {
    ReportTable t{"t", "T", {"a", "b,c"}, {{"x\"y", "plain"}, {"line\nbreak", ""}}};
    CHECK(render_csv(t) == "a,\"b,c\"\r\n\"x\"\"y\",plain\r\n\"line\nbreak\",\r\n");
}
