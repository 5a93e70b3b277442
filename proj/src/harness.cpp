// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include "metatool/error.hpp"
#include "metatool/schema_io.hpp"
#include "metatool/toy_transformer.hpp"

namespace metatool::harness {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

const schema::ToolSchema* find_tool(const FamilyAssets& assets, const std::string& name) {
    for (const auto& t : assets.api_tools) {
        if (t.tool_name == name) return &t;
    }
    return nullptr;
}

// Named arguments of a call; positionals are bound through the tool schema when known.
std::map<std::string, std::string> named_args(const schema::ToolCall& call, const FamilyAssets& assets) {
    std::map<std::string, std::string> out;
    if (const auto* tool = find_tool(assets, call.tool_name)) {
        for (const auto& [k, v] : schema::bind(*tool, call)) out[k] = schema::render_value(v);
        // Extra positionals beyond the schema still count.
        std::size_t n_pos = 0;
        for (const auto& p : tool->params) n_pos += p.positional;
        for (std::size_t i = n_pos; i < call.positional.size(); ++i) {
            out["#" + std::to_string(i)] = schema::render_value(call.positional[i]);
        }
        return out;
    }
    for (std::size_t i = 0; i < call.positional.size(); ++i) out["#" + std::to_string(i)] = schema::render_value(call.positional[i]);
    for (const auto& [k, v] : call.keyword) out[k] = schema::render_value(v);
    return out;
}

void check_gold(const TaskRecord& t, const FamilyAssets& assets) {
    const auto& g = t.gold;
    if (!g.is_object()) throw Error(ErrorCode::ParseError, "gold must be an object");
    switch (t.family) {
        case Family::Api: {
            const auto call = g.at("call").get<std::string>();
            if (!well_formed(Family::Api, call, assets)) throw Error(ErrorCode::ParseError, "gold call is not valid: " + call);
            break;
        }
        case Family::Sql: {
            const auto q = g.at("sql").get<std::string>();
            try {
                sql::execute_sql(q, assets.db);
            } catch (const Error& e) {
                throw Error(ErrorCode::ParseError, "gold query fails: " + std::string(e.what()));
            }
            break;
        }
        case Family::Nav:
            if (!parse_nav(g.at("action").get<std::string>())) throw Error(ErrorCode::ParseError, "gold action does not parse");
            break;
        case Family::Bash: {
            const auto& acc = g.at("accept");
            if (!acc.is_array() || acc.empty()) throw Error(ErrorCode::ParseError, "gold accept list is empty");
            for (const auto& a : acc) {
                if (!parse_bash(a.get<std::string>())) throw Error(ErrorCode::ParseError, "gold command does not parse: " + a.dump());
            }
            break;
        }
    }
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string signed_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.1f", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string_view to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::None: return "none";
        case ErrorCategory::Semantic: return "semantic";
        case ErrorCategory::Format: return "format";
        case ErrorCategory::Empty: return "empty";
    }
    return "?";
}

std::string_view to_string(CellStatus s) {
    switch (s) {
        case CellStatus::Ok: return "ok";
        case CellStatus::NotApplicable: return "n/a";
        case CellStatus::Skipped: return "skipped";
    }
    return "?";
}

std::vector<TaskRecord> parse_suite(const std::string& text, const FamilyAssets& assets) {
    std::vector<TaskRecord> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto where = "line " + std::to_string(lineno) + ": ";
        try {
            const auto doc = nlohmann::json::parse(line);
            TaskRecord t;
            t.id = doc.at("id").get<std::string>();
            if (t.id.empty()) throw Error(ErrorCode::ParseError, "empty id");
            const auto fam = doc.at("family").get<std::string>();
            const auto f = prompts::parse_family(fam);
            if (!f) throw Error(ErrorCode::ParseError, "unknown family '" + fam + "'");
            t.family = *f;
            t.query = doc.at("query").get<std::string>();
            t.gold = doc.at("gold");
            if (doc.contains("schema_ref") && !doc.at("schema_ref").is_null()) {
                t.schema_ref = doc.at("schema_ref").get<std::string>();
                if (t.family == Family::Api && !find_tool(assets, *t.schema_ref)) {
                    throw Error(ErrorCode::ParseError, "unknown schema_ref '" + *t.schema_ref + "'");
                }
            }
            check_gold(t, assets);
            if (!ids.insert(t.id).second) throw Error(ErrorCode::ParseError, "duplicate id '" + t.id + "'");
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, where + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError, where + e.what());
        }
    }
    return out;
}

std::vector<TaskRecord> load_suite(const std::filesystem::path& path, const FamilyAssets& assets) {
    try {
        return parse_suite(schema::read_file(path), assets);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError) throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
        throw;
    }
}

Verdict check_success(Family family, std::string_view raw_output, const nlohmann::json& gold,
                      const FamilyAssets& assets) {
    const auto out = trim(raw_output);
    if (out.empty()) return {false, ErrorCategory::Empty};
    if (!parses(family, out)) return {false, ErrorCategory::Format};
    bool ok = false;
    switch (family) {
        case Family::Api: {
            const auto got = schema::parse_call(out);
            const auto want = schema::parse_call(gold.at("call").get<std::string>());
            ok = want && got->call.tool_name == want->call.tool_name &&
                 named_args(got->call, assets) == named_args(want->call, assets);
            break;
        }
        case Family::Sql: {
            sql::Table got;
            try {
                got = sql::execute_sql(out, assets.db);
            } catch (const Error&) {
                // The grammar accepted it, so anything the engine rejects is semantic.
                return {false, ErrorCategory::Semantic};
            }
            ok = sql::same_result(got, sql::execute_sql(gold.at("sql").get<std::string>(), assets.db));
            break;
        }
        case Family::Nav:
            ok = parse_nav(out) == parse_nav(gold.at("action").get<std::string>());
            break;
        case Family::Bash: {
            const auto norm = normalize_bash(out);
            for (const auto& a : gold.at("accept")) ok = ok || normalize_bash(a.get<std::string>()) == norm;
            break;
        }
    }
    return ok ? Verdict{true, ErrorCategory::None} : Verdict{false, ErrorCategory::Semantic};
}

std::string GridCell::label() const {
    return "s" + std::to_string(shots) + "_d" + (use_docs ? "1" : "0") + "_h" + (hypernet_on ? "1" : "0") + "_n" +
           std::to_string(noise);
}

std::vector<GridCell> full_grid(std::uint64_t seed) {
    std::vector<GridCell> out;
    for (std::size_t shots = 0; shots <= 5; ++shots) {
        for (bool docs : {true, false}) {
            for (bool hyper : {false, true}) {
                for (std::size_t noise = 0; noise <= 2; ++noise) out.push_back({shots, docs, hyper, noise, seed});
            }
        }
    }
    return out;
}

double ScriptedAgent::prepare(const CellContext& ctx) {
    cell_ = ctx.cell;
    return 0.0;
}

std::string ScriptedAgent::act(const TaskRecord& task, const std::string&) { return rule_(cell_, task); }

LmAgent::LmAgent(std::shared_ptr<const lm::LmBackend> backend, LmAgentOptions options, const FamilyAssets& assets)
    : backend_(std::move(backend)), options_(std::move(options)), assets_(assets) {
    if (!backend_) throw Error(ErrorCode::BackendUnavailable, "no backend");
    if (options_.beam_width == 0) throw Error(ErrorCode::InvalidArgument, "beam width must be >= 1");
}

bool LmAgent::supports_adaptation() const {
    return options_.hypernet && dynamic_cast<const lm::ToyTransformer*>(backend_.get()) != nullptr;
}

const fsm::TokenDfa& LmAgent::dfa(Family family) {
    auto& slot = dfas_[family];
    if (!slot) {
        slot = std::make_unique<fsm::TokenDfa>(fsm::build_token_dfa(output_pattern(family, assets_), backend_->vocab()));
    }
    return *slot;
}

AdaptationInputs adaptation_inputs(const lm::LmBackend& backend, const prompts::PromptSpec& spec) {
    AdaptationInputs in;
    const std::string doc = spec.use_docs && spec.docs ? *spec.docs : spec.system_instruction;
    in.v_doc = hypernet::to_vec(backend.embed(doc));
    for (std::size_t i = 0; i < spec.shots; ++i) {
        const auto& e = spec.examples[i];
        in.v_support.push_back(hypernet::to_vec(backend.embed("Query: " + e.query + "\nOutput: " + e.output)));
    }
    if (in.v_support.empty()) in.v_support.push_back(in.v_doc);
    return in;
}

double LmAgent::prepare(const CellContext& ctx) {
    adapted_.reset();
    active_ = backend_.get();
    double adapt_ms = 0.0;
    if (ctx.cell.hypernet_on) {
        if (!supports_adaptation()) throw Error(ErrorCode::BackendUnavailable, "backend has no adaptable weights");
        const auto t0 = Clock::now();
        const auto& toy = dynamic_cast<const lm::ToyTransformer&>(*backend_);
        auto in = adaptation_inputs(toy, *ctx.spec);
        const auto context = hypernet::make_context(std::move(in.v_doc), std::move(in.v_support), *options_.hypernet);
        const auto pairs = hypernet::generate_all(context, *options_.hypernet, options_.hypernet_config);
        adapted_ = toy.adapted(hypernet::to_deltas(pairs, options_.hypernet_config));
        adapt_ms = ms_since(t0);
        active_ = adapted_.get();
    }
    if (options_.constrained) dfa(ctx.family);
    family_ = ctx.family;
    prefix_ = ctx.prefix;
    prefix_state_ = active_->start(active_->tokenize(prefix_));
    return adapt_ms;
}

std::string LmAgent::act(const TaskRecord& task, const std::string& suffix) {
    if (!prefix_state_) throw Error(ErrorCode::InvalidState, "act before prepare");
    const auto it = options_.max_new.find(family_);
    const std::size_t max_new = it == options_.max_new.end() ? lm::kDefaultMaxNew : it->second;
    const fsm::TokenDfa* mask = options_.constrained ? &dfa(family_) : nullptr;
    if (options_.beam_width <= 1) {
        auto state = prefix_state_->clone();
        state->extend(active_->tokenize(suffix));
        lm::DecodeOptions o;
        o.max_new = max_new;
        o.dfa = mask;
        return lm::greedy_continue(*active_, *state, o).text;
    }
    search::ValueFn v = search::constant_value(1.0);
    if (options_.value_net) {
        const auto* backend = active_;
        value::Embedder embed = [backend](std::string_view t) { return backend->embed(t); };
        v = search::value_function(*options_.value_net, embed, task.query);
    }
    search::BeamOptions b;
    b.width = options_.beam_width;
    b.max_steps = max_new;
    b.dfa = mask;
    return search::beam_decode(*active_, prefix_ + suffix, v, b).action_text;
}

const CellResult* GridReport::find(const GridCell& c) const {
    for (const auto& r : cells) {
        if (r.cell.shots == c.shots && r.cell.use_docs == c.use_docs && r.cell.hypernet_on == c.hypernet_on &&
            r.cell.noise == c.noise && r.cell.seed == c.seed) {
            return &r;
        }
    }
    return nullptr;
}

GridReport run_grid(const std::vector<TaskRecord>& tasks, const std::vector<GridCell>& grid, Agent& agent,
                    const FamilyAssets& assets, const RunOptions& options) {
    GridReport report;
    std::map<Family, std::vector<const TaskRecord*>> by_family;
    for (const auto& t : tasks) by_family[t.family].push_back(&t);
    for (auto f : prompts::kFamilies) {
        if (by_family.count(f)) report.families.push_back(f);
    }
    std::map<Family, prompts::FamilyPack> packs;
    for (auto f : report.families) packs[f] = prompts::load_pack(options.packs_dir, f);

    for (const auto& cell : grid) {
        CellResult res;
        res.cell = cell;
        if (!cell.valid()) {
            res.status = CellStatus::NotApplicable;
            res.note = "noise exceeds shots";
        } else if (cell.hypernet_on && !agent.supports_adaptation()) {
            res.status = CellStatus::NotApplicable;
            res.note = "agent has no adaptable weights";
        }
        for (auto fam : report.families) {
            if (res.status != CellStatus::Ok) break;
            auto spec = prompts::make_spec(packs[fam], "", cell.shots, cell.use_docs);
            Rng rng(derive_seed(cell.seed, cell.label() + "/" + std::string(prompts::to_string(fam))));
            const prompts::FormatCheck check = [&](std::string_view t) { return well_formed(fam, t, assets); };
            auto& stats = res.families[fam];
            stats.corrupted = prompts::inject_noise(spec, {cell.noise}, rng, check);
            CellContext ctx{cell, fam, &spec, prompts::build_prefix(spec), &assets};
            try {
                stats.adaptation_ms = agent.prepare(ctx);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::BackendUnavailable) throw;
                res.status = CellStatus::Skipped;
                res.note = e.what();
                break;
            }
            auto& outs = res.outcomes[fam];
            for (const auto* task : by_family[fam]) {
                Outcome o;
                o.task_id = task->id;
                spec.query = task->query;
                const auto t0 = Clock::now();
                try {
                    prompts::build(spec);
                    o.raw_output = agent.act(*task, prompts::build_suffix(spec));
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::BackendUnavailable) {
                        res.status = CellStatus::Skipped;
                        res.note = e.what();
                        break;
                    }
                    o.error = e.what();
                }
                o.latency_ms = ms_since(t0);
                const auto v = check_success(fam, o.raw_output, task->gold, assets);
                o.success = v.success;
                o.category = v.category;
                // One greedy attempt per task, so the first attempt is the only one.
                o.pass_at_1 = o.success;
                ++stats.tasks;
                stats.successes += o.success;
                stats.pass_at_1 += o.pass_at_1;
                stats.semantic += o.category == ErrorCategory::Semantic;
                stats.format += o.category == ErrorCategory::Format;
                stats.empty += o.category == ErrorCategory::Empty;
                stats.latency_ms_total += o.latency_ms;
                outs.push_back(std::move(o));
            }
        }
        if (options.progress) {
            options.progress(cell.label() + " " + std::string(to_string(res.status)) +
                             (res.note.empty() ? "" : " (" + res.note + ")"));
        }
        report.cells.push_back(std::move(res));
    }
    report.environment = {{"agent", agent.name()}, {"tasks", tasks.size()}, {"grid_cells", grid.size()}};
    return report;
}

std::vector<HypernetDelta> hypernet_deltas(const GridReport& report) {
    std::vector<HypernetDelta> out;
    for (auto fam : report.families) {
        HypernetDelta d;
        d.family = fam;
        for (const auto& on : report.cells) {
            if (!on.cell.hypernet_on || on.status != CellStatus::Ok) continue;
            auto twin = on.cell;
            twin.hypernet_on = false;
            const auto* off = report.find(twin);
            if (!off || off->status != CellStatus::Ok) continue;
            const auto& a = on.families.at(fam);
            const auto& b = off->families.at(fam);
            ++d.pairs;
            d.successes_on += a.successes;
            d.successes_off += b.successes;
            d.tasks += a.tasks;
            d.max_abs_cell_delta = std::max(d.max_abs_cell_delta, std::fabs(a.sr() - b.sr()));
            const auto& oa = on.outcomes.at(fam);
            const auto& ob = off->outcomes.at(fam);
            for (std::size_t i = 0; i < std::min(oa.size(), ob.size()); ++i) {
                ++d.compared_outputs;
                d.identical_outputs += oa[i].raw_output == ob[i].raw_output;
            }
        }
        out.push_back(d);
    }
    return out;
}

nlohmann::json content_json(const GridReport& report) {
    nlohmann::json doc;
    doc["families"] = nlohmann::json::array();
    for (auto f : report.families) doc["families"].push_back(std::string(prompts::to_string(f)));
    doc["cells"] = nlohmann::json::array();
    for (const auto& c : report.cells) {
        nlohmann::json jc = {{"label", c.cell.label()},
                             {"shots", c.cell.shots},
                             {"use_docs", c.cell.use_docs},
                             {"hypernet_on", c.cell.hypernet_on},
                             {"noise", c.cell.noise},
                             {"seed", c.cell.seed},
                             {"status", std::string(to_string(c.status))},
                             {"note", c.note}};
        for (const auto& [f, s] : c.families) {
            const auto name = std::string(prompts::to_string(f));
            jc["families"][name] = {{"tasks", s.tasks},       {"successes", s.successes}, {"pass_at_1", s.pass_at_1},
                                    {"semantic", s.semantic}, {"format", s.format},       {"empty", s.empty},
                                    {"corrupted", s.corrupted}};
            auto& jo = jc["outcomes"][name];
            jo = nlohmann::json::array();
            for (const auto& o : c.outcomes.at(f)) {
                jo.push_back({o.task_id, o.raw_output, o.success, std::string(to_string(o.category)), o.error});
            }
        }
        doc["cells"].push_back(std::move(jc));
    }
    return doc;
}

std::string content_hash(const GridReport& report) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(content_json(report).dump())));
    return buf;
}

nlohmann::json to_json(const GridReport& report) {
    auto doc = content_json(report);
    doc["content_hash"] = content_hash(report);
    doc["environment"] = report.environment;
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        for (const auto& [f, s] : report.cells[i].families) {
            const auto name = std::string(prompts::to_string(f));
            doc["cells"][i]["timing"][name] = {
                {"mean_latency_ms", s.tasks ? s.latency_ms_total / static_cast<double>(s.tasks) : 0.0},
                {"adaptation_ms", s.adaptation_ms}};
        }
    }
    return doc;
}

std::vector<ReportTable> report_tables(const GridReport& report) {
    bool use_h = false;
    for (const auto& c : report.cells) use_h = use_h || (c.cell.hypernet_on && c.status == CellStatus::Ok);
    const std::uint64_t seed = report.cells.empty() ? kDefaultSeed : report.cells.front().cell.seed;
    auto stats = [&](std::size_t shots, bool docs, std::size_t noise, Family f) -> const FamilyStats* {
        const auto* c = report.find({shots, docs, use_h, noise, seed});
        if (!c || c->status != CellStatus::Ok) return nullptr;
        const auto it = c->families.find(f);
        return it == c->families.end() ? nullptr : &it->second;
    };
    std::vector<std::string> fam_names;
    for (auto f : report.families) fam_names.emplace_back(prompts::to_string(f));
    const std::string mode = use_h ? "hypernet on" : "hypernet off";

    // A row of SRs per family plus their mean; n/a when any family is missing.
    auto sr_row = [&](std::string label, std::size_t shots, bool docs, std::size_t noise) {
        std::vector<std::string> row{std::move(label)};
        double sum = 0.0;
        bool complete = true;
        for (auto f : report.families) {
            const auto* s = stats(shots, docs, noise, f);
            if (!s) {
                complete = false;
                row.push_back("n/a");
                continue;
            }
            sum += s->sr();
            row.push_back(pct(s->sr()));
        }
        row.push_back(complete && !report.families.empty() ? pct(sum / static_cast<double>(report.families.size())) : "n/a");
        return row;
    };

    std::vector<ReportTable> out;
    {
        ReportTable t{"ablation", "Ablation: execution success rate (%), noise 0, " + mode, {"Configuration"}, {}};
        t.header.insert(t.header.end(), fam_names.begin(), fam_names.end());
        t.header.push_back("Avg");
        t.rows.push_back(sr_row("Full (5-shot + docs)", 5, true, 0));
        t.rows.push_back(sr_row("0-shot + docs", 0, true, 0));
        t.rows.push_back(sr_row("5-shot + no docs", 5, false, 0));
        t.rows.push_back(sr_row("0-shot + no docs", 0, false, 0));
        out.push_back(std::move(t));
    }
    {
        ReportTable t{"shots", "Shot sweep: execution success rate (%), docs on, noise 0, " + mode, {"Shots"}, {}};
        t.header.insert(t.header.end(), fam_names.begin(), fam_names.end());
        t.header.push_back("Average");
        for (std::size_t s = 0; s <= 5; ++s) t.rows.push_back(sr_row(std::to_string(s) + "-shot", s, true, 0));
        out.push_back(std::move(t));
    }
    {
        ReportTable t{"noise",
                      "Noisy examples: execution success rate (%), 5-shot, docs on, " + mode,
                      {"Family", "Clean (0/5)", "1/5 Noisy", "2/5 Noisy", "Δ(0→2)"},
                      {}};
        std::vector<double> sums(3, 0.0);
        std::vector<bool> complete(3, true);
        for (auto f : report.families) {
            std::vector<std::string> row{std::string(prompts::to_string(f))};
            std::vector<const FamilyStats*> s;
            for (std::size_t n = 0; n <= 2; ++n) {
                s.push_back(stats(5, true, n, f));
                row.push_back(s.back() ? pct(s.back()->sr()) : "n/a");
                if (s.back()) {
                    sums[n] += s.back()->sr();
                } else {
                    complete[n] = false;
                }
            }
            row.push_back(s[0] && s[2] ? signed_pct(s[2]->sr() - s[0]->sr()) : "n/a");
            t.rows.push_back(std::move(row));
        }
        std::vector<std::string> avg{"Average"};
        const double k = static_cast<double>(std::max<std::size_t>(1, report.families.size()));
        for (std::size_t n = 0; n <= 2; ++n) avg.push_back(complete[n] ? pct(sums[n] / k) : "n/a");
        avg.push_back(complete[0] && complete[2] ? signed_pct((sums[2] - sums[0]) / k) : "n/a");
        t.rows.push_back(std::move(avg));
        out.push_back(std::move(t));
    }
    {
        ReportTable t{"errors",
                      "Failure breakdown, 5-shot, docs on, noise 0, " + mode,
                      {"Family", "Failures", "Semantic", "Format", "Empty"},
                      {}};
        FamilyStats total;
        bool any = false;
        for (auto f : report.families) {
            const auto* s = stats(5, true, 0, f);
            if (!s) {
                t.rows.push_back({std::string(prompts::to_string(f)), "n/a", "n/a", "n/a", "n/a"});
                continue;
            }
            any = true;
            total.tasks += s->tasks;
            total.successes += s->successes;
            total.semantic += s->semantic;
            total.format += s->format;
            total.empty += s->empty;
            t.rows.push_back({std::string(prompts::to_string(f)), std::to_string(s->failures()),
                              std::to_string(s->semantic), std::to_string(s->format), std::to_string(s->empty)});
        }
        if (any) {
            t.rows.push_back({"Total", std::to_string(total.failures()), std::to_string(total.semantic),
                              std::to_string(total.format), std::to_string(total.empty)});
        }
        out.push_back(std::move(t));
    }
    {
        ReportTable t{"errors_all",
                      "Failure breakdown over every evaluated cell",
                      {"Family", "Cells", "Tasks", "Failures", "Semantic", "Format", "Empty"},
                      {}};
        for (auto f : report.families) {
            FamilyStats s;
            std::size_t cells = 0;
            for (const auto& c : report.cells) {
                if (c.status != CellStatus::Ok) continue;
                const auto& x = c.families.at(f);
                ++cells;
                s.tasks += x.tasks;
                s.successes += x.successes;
                s.semantic += x.semantic;
                s.format += x.format;
                s.empty += x.empty;
            }
            t.rows.push_back({std::string(prompts::to_string(f)), std::to_string(cells), std::to_string(s.tasks),
                              std::to_string(s.failures()), std::to_string(s.semantic), std::to_string(s.format),
                              std::to_string(s.empty)});
        }
        out.push_back(std::move(t));
    }
    {
        ReportTable t{"hypernet",
                      "Hypernetwork on vs off over matched cells",
                      {"Family", "Pairs", "SR off (%)", "SR on (%)", "Δ (pp)", "Max |cell Δ| (pp)", "Identical outputs"},
                      {}};
        for (const auto& d : hypernet_deltas(report)) {
            const auto name = std::string(prompts::to_string(d.family));
            if (d.pairs == 0) {
                t.rows.push_back({name, "0", "n/a", "n/a", "n/a", "n/a", "n/a"});
                continue;
            }
            t.rows.push_back({name, std::to_string(d.pairs), pct(d.sr_off()), pct(d.sr_on()),
                              signed_pct(d.sr_on() - d.sr_off()), pct(d.max_abs_cell_delta),
                              std::to_string(d.identical_outputs) + "/" + std::to_string(d.compared_outputs)});
        }
        out.push_back(std::move(t));
    }
    {
        ReportTable t{"cells",
                      "All cells",
                      {"Cell", "Status", "Family", "Tasks", "Successes", "SR (%)", "Pass@1 (%)", "Semantic", "Format",
                       "Empty", "Mean latency (ms)", "Adaptation (ms)"},
                      {}};
        for (const auto& c : report.cells) {
            if (c.status != CellStatus::Ok) {
                t.rows.push_back({c.cell.label(), std::string(to_string(c.status)), "", "", "", "", "", "", "", "", "",
                                  ""});
                continue;
            }
            for (const auto& [f, s] : c.families) {
                const double p1 = s.tasks ? 100.0 * static_cast<double>(s.pass_at_1) / static_cast<double>(s.tasks) : 0.0;
                t.rows.push_back({c.cell.label(), "ok", std::string(prompts::to_string(f)), std::to_string(s.tasks),
                                  std::to_string(s.successes), pct(s.sr()), pct(p1), std::to_string(s.semantic),
                                  std::to_string(s.format), std::to_string(s.empty),
                                  fixed(s.tasks ? s.latency_ms_total / static_cast<double>(s.tasks) : 0.0, 2),
                                  fixed(s.adaptation_ms, 2)});
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::string render_markdown(const GridReport& report) {
    std::string md = "# Grid report\n\n";
    md += "- content hash: `" + content_hash(report) + "`\n";
    for (const auto& [k, v] : report.environment.items()) md += "- " + k + ": " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
    std::size_t ok = 0, na = 0, skipped = 0;
    for (const auto& c : report.cells) {
        ok += c.status == CellStatus::Ok;
        na += c.status == CellStatus::NotApplicable;
        skipped += c.status == CellStatus::Skipped;
    }
    md += "- cells: " + std::to_string(ok) + " evaluated, " + std::to_string(na) + " not applicable, " +
          std::to_string(skipped) + " skipped\n";
    for (const auto& t : report_tables(report)) {
        md += "\n## " + t.title + "\n\n|";
        for (const auto& h : t.header) md += " " + h + " |";
        md += "\n|";
        for (std::size_t i = 0; i < t.header.size(); ++i) md += i == 0 ? "---|" : "---:|";
        md += "\n";
        for (const auto& r : t.rows) {
            md += "|";
            for (const auto& cell : r) md += " " + cell + " |";
            md += "\n";
        }
    }
    return md;
}

std::string render_csv(const ReportTable& table) {
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    auto line = [&](const std::vector<std::string>& cells) {
        std::string l;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) l += ',';
            l += field(cells[i]);
        }
        return l + "\r\n";
    };
    std::string out = line(table.header);
    for (const auto& r : table.rows) out += line(r);
    return out;
}

std::vector<std::filesystem::path> emit_report(const GridReport& report, ReportFormat format,
                                               const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    if (format == ReportFormat::Markdown) {
        written.push_back(out_dir / "report.md");
        schema::write_file(written.back(), render_markdown(report));
    } else {
        for (const auto& t : report_tables(report)) {
            written.push_back(out_dir / (t.name + ".csv"));
            schema::write_file(written.back(), render_csv(t));
        }
    }
    written.push_back(out_dir / "report.json");
    schema::write_file(written.back(), to_json(report).dump(1) + "\n");
    return written;
}

}  // namespace metatool::harness
