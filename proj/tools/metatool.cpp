// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "metatool/checkpoint.hpp"
#include "metatool/error.hpp"
#include "metatool/families.hpp"
#include "metatool/harness.hpp"
#include "metatool/hypernet.hpp"
#include "metatool/run_config.hpp"
#include "metatool/schema_io.hpp"
#include "metatool/search.hpp"
#include "metatool/value.hpp"

using namespace metatool;

namespace {

struct BackendArgs {
    std::string backend = "toy";
    std::string data = "data";
    int layers = 4;
    std::uint64_t seed = kDefaultSeed;

    void add(CLI::App* app) {
        app->add_option("--backend", backend, "toy, ngram or bridge:HOST:PORT")->capture_default_str();
        app->add_option("--data", data, "data directory (family packs, schemas)")->capture_default_str();
        app->add_option("--layers", layers, "toy transformer layers")->capture_default_str();
        app->add_option("--seed", seed)->capture_default_str();
    }
    harness::ToySettings toy() const {
        harness::ToySettings t;
        t.config.n_layers = layers;
        return t;
    }
    std::shared_ptr<const lm::LmBackend> open() const { return harness::make_backend(backend, toy(), 4, seed, data); }
};

std::vector<float> embed_text(std::string_view s) { return lm::hash_embed(s); }

std::string support_text(const schema::Trajectory& t) { return "Query: " + t.query + "\nOutput: " + schema::canonical_text(t.call); }

struct AdaptationSource {
    hypernet::Vec v_doc;
    std::vector<hypernet::Vec> v_support;
};

AdaptationSource adaptation_source(const schema::ToolSchema& tool, const std::vector<schema::Trajectory>& support,
                                   const lm::LmBackend& backend) {
    AdaptationSource src;
    src.v_doc = hypernet::to_vec(backend.embed(tool.doc_text.empty() ? tool.tool_name : tool.doc_text));
    for (const auto& t : support) src.v_support.push_back(hypernet::to_vec(backend.embed(support_text(t))));
    if (src.v_support.empty()) src.v_support.push_back(src.v_doc);
    return src;
}

int compile_schema_cmd(const std::string& path, bool show_regex, const std::string& dot) {
    const auto tool = schema::load_schema(path);
    std::cout << schema::to_json(tool).dump(2) << "\n";
    const auto pattern = fsm::compile_schema(tool);
    const auto bytes = fsm::compile_regex(pattern.regex_text);
    std::cerr << "ok: " << tool.tool_name << ", " << tool.params.size() << " parameters, byte DFA with " << bytes.size()
              << " states\n";
    if (show_regex) std::cout << pattern.regex_text << "\n";
    if (!dot.empty()) {
        const auto dfa = fsm::build_token_dfa(bytes, Vocabulary::byte_level());
        schema::write_file(dot, dfa.to_dot(Vocabulary::byte_level()));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metatool: constrained tool-call generation and evaluation"};
    app.require_subcommand(1);

    // compile-schema
    auto* cs = app.add_subcommand("compile-schema", "validate a tool schema and print it in canonical form");
    std::string cs_path, cs_dot;
    bool cs_regex = false;
    cs->add_option("schema", cs_path)->required()->check(CLI::ExistingFile);
    cs->add_flag("--regex", cs_regex, "also print the call pattern");
    cs->add_option("--dot", cs_dot, "write the byte-token DFA as DOT");

    // generate
    auto* gen = app.add_subcommand("generate", "decode one output for a prompt");
    BackendArgs gen_backend;
    gen_backend.add(gen);
    std::string gen_schema, gen_family, gen_prompt, gen_search = "greedy", gen_value, gen_dot;
    bool gen_constrained = false;
    std::size_t gen_width = 4, gen_max_new = 96;
    gen->add_option("--schema", gen_schema, "tool schema JSON")->check(CLI::ExistingFile);
    gen->add_option("--family", gen_family, "api, sql, nav or bash output language");
    gen->add_option("--prompt", gen_prompt)->required();
    gen->add_flag("--constrained", gen_constrained, "mask tokens outside the output language");
    gen->add_option("--search", gen_search)->check(CLI::IsMember({"greedy", "beam"}))->capture_default_str();
    gen->add_option("--width", gen_width)->capture_default_str();
    gen->add_option("--value", gen_value, "value network checkpoint for beam scoring")->check(CLI::ExistingFile);
    gen->add_option("--max-new", gen_max_new)->capture_default_str();
    gen->add_option("--dot", gen_dot, "write the token DFA as DOT");

    // gen-episodes
    auto* ge = app.add_subcommand("gen-episodes", "perturb support trajectories into rewarded episodes");
    std::string ge_schema, ge_support, ge_out;
    std::size_t ge_n = 200;
    std::uint64_t ge_seed = kDefaultSeed;
    ge->add_option("--schema", ge_schema)->required()->check(CLI::ExistingFile);
    ge->add_option("--support", ge_support)->required()->check(CLI::ExistingFile);
    ge->add_option("--n", ge_n)->capture_default_str();
    ge->add_option("--seed", ge_seed)->capture_default_str();
    ge->add_option("--out", ge_out)->required();

    // train-value
    auto* tv = app.add_subcommand("train-value", "TD(0) training of the value network on episodes");
    std::string tv_episodes, tv_out;
    value::TrainOptions tv_opts;
    int tv_hidden = 64;
    tv->add_option("--episodes", tv_episodes)->required()->check(CLI::ExistingFile);
    tv->add_option("--out", tv_out)->required();
    tv->add_option("--updates", tv_opts.updates)->capture_default_str();
    tv->add_option("--batch", tv_opts.batch)->capture_default_str();
    tv->add_option("--step-size", tv_opts.step_size)->capture_default_str();
    tv->add_option("--hidden", tv_hidden)->capture_default_str();
    tv->add_option("--seed", tv_opts.seed)->capture_default_str();

    // train-hypernet
    auto* th = app.add_subcommand("train-hypernet", "behaviour-clone the hypernetwork on a support set");
    BackendArgs th_backend;
    th_backend.add(th);
    std::string th_schema, th_support, th_out;
    hypernet::TrainOptions th_opts;
    th->add_option("--schema", th_schema)->required()->check(CLI::ExistingFile);
    th->add_option("--support", th_support)->required()->check(CLI::ExistingFile);
    th->add_option("--out", th_out)->required();
    th->add_option("--steps", th_opts.steps)->capture_default_str();
    th->add_option("--lr", th_opts.lr)->capture_default_str();
    th->add_flag("--adam", th_opts.adam);

    // hypernet-gen
    auto* hg = app.add_subcommand("hypernet-gen", "generate LoRA factors for a schema and support set");
    BackendArgs hg_backend;
    hg_backend.add(hg);
    std::string hg_schema, hg_support, hg_out, hg_ckpt;
    hg->add_option("--schema", hg_schema)->required()->check(CLI::ExistingFile);
    hg->add_option("--support", hg_support)->required()->check(CLI::ExistingFile);
    hg->add_option("--hypernet", hg_ckpt, "trained hypernetwork checkpoint (default: seeded init)")
        ->check(CLI::ExistingFile);
    hg->add_option("--out", hg_out)->required();

    // run-grid
    auto* rg = app.add_subcommand("run-grid", "evaluate the ablation grid and write reports");
    std::string rg_config, rg_out = "reports", rg_format = "both";
    bool rg_quiet = false;
    rg->add_option("--config", rg_config)->required()->check(CLI::ExistingFile);
    rg->add_option("--out", rg_out)->capture_default_str();
    rg->add_option("--format", rg_format)->check(CLI::IsMember({"markdown", "csv", "both"}))->capture_default_str();
    rg->add_flag("--quiet", rg_quiet);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cs) return compile_schema_cmd(cs_path, cs_regex, cs_dot);

        if (*gen) {
            if (gen_schema.empty() == gen_family.empty() && gen_constrained) {
                throw Error(ErrorCode::InvalidArgument, "--constrained needs exactly one of --schema or --family");
            }
            const auto backend = gen_backend.open();
            std::optional<fsm::TokenDfa> dfa;
            if (gen_constrained) {
                fsm::Pattern pattern;
                if (!gen_schema.empty()) {
                    pattern = fsm::compile_schema(schema::load_schema(gen_schema));
                } else {
                    const auto family = prompts::parse_family(gen_family);
                    if (!family) throw Error(ErrorCode::InvalidArgument, "unknown family '" + gen_family + "'");
                    pattern = harness::output_pattern(*family, harness::load_assets(gen_backend.data));
                }
                dfa = fsm::build_token_dfa(pattern, backend->vocab());
                if (!gen_dot.empty()) schema::write_file(gen_dot, dfa->to_dot(backend->vocab()));
            }
            const auto t0 = std::chrono::steady_clock::now();
            std::string text;
            if (gen_search == "beam") {
                search::ValueFn v = search::constant_value(1.0);
                std::shared_ptr<value::ValueNet> net;
                if (!gen_value.empty()) {
                    net = std::make_shared<value::ValueNet>(value::ValueNet::from_checkpoint(checkpoint::load(gen_value)));
                    v = search::value_function(*net, embed_text, gen_prompt);
                }
                search::BeamOptions b;
                b.width = gen_width;
                b.max_steps = gen_max_new;
                b.dfa = dfa ? &*dfa : nullptr;
                const auto best = search::beam_decode(*backend, gen_prompt, v, b);
                text = best.action_text;
                std::cerr << "logp " << best.logp << "  v " << best.v << "  score " << best.score << "\n";
            } else {
                lm::DecodeOptions o;
                o.max_new = gen_max_new;
                o.dfa = dfa ? &*dfa : nullptr;
                const auto r = lm::greedy_decode(*backend, std::string_view(gen_prompt), o);
                text = r.text;
                std::cerr << "logp " << r.logprob << (r.hit_eos ? "" : "  (budget reached)") << "\n";
            }
            std::cerr << "elapsed "
                      << std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()
                      << " ms\n";
            std::cout << text << "\n";
            return 0;
        }

        if (*ge) {
            const auto tool = schema::load_schema(ge_schema);
            const auto support = schema::load_support(ge_support);
            schema::CheckerSandbox sandbox(tool);
            Rng rng(ge_seed);
            const auto episodes = schema::generate_episodes(support, ge_n, sandbox, rng);
            schema::save_episodes(ge_out, episodes);
            std::size_t positive = 0;
            for (const auto& e : episodes) positive += e.reward > 0;
            std::cerr << "wrote " << episodes.size() << " episodes (" << positive << " rewarded) to " << ge_out << "\n";
            return 0;
        }

        if (*tv) {
            const auto episodes = schema::load_episodes(tv_episodes);
            std::vector<value::Transition> transitions;
            for (const auto& e : episodes) {
                auto t = value::episode_transitions(embed_text, e);
                transitions.insert(transitions.end(), t.begin(), t.end());
            }
            value::ValueConfig vc;
            vc.input_dim = static_cast<int>(2 * lm::kEmbedDim + 1);
            vc.hidden = tv_hidden;
            value::ValueNet net(vc, tv_opts.seed);
            const auto losses = value::train(net, transitions, tv_opts);
            checkpoint::save(tv_out, net.to_checkpoint(tv_opts.seed));
            std::cerr << "trained on " << transitions.size() << " transitions; td loss " << losses.front() << " -> "
                      << losses.back() << "; wrote " << tv_out << "\n";
            return 0;
        }

        if (*th || *hg) {
            auto& ba = *th ? th_backend : hg_backend;
            if (ba.backend != "toy") throw Error(ErrorCode::InvalidArgument, "adaptation needs the toy backend");
            const auto backend = ba.open();
            const auto& toy = dynamic_cast<const lm::ToyTransformer&>(*backend);
            const auto tool = schema::load_schema(*th ? th_schema : hg_schema);
            const auto support = schema::load_support(*th ? th_support : hg_support);
            const auto src = adaptation_source(tool, support, toy);
            if (*th) {
                const auto config = harness::hypernet_config_for(toy.config(), toy.embed_dim());
                auto params = hypernet::init_params(config, derive_seed(ba.seed, "hypernet"));
                std::vector<hypernet::BcExample> examples;
                for (const auto& t : support) {
                    hypernet::BcExample ex;
                    ex.v_doc = src.v_doc;
                    ex.v_support = src.v_support;
                    const auto prompt = toy.tokenize("Query: " + t.query + "\nOutput: ");
                    const auto target = toy.tokenize(schema::canonical_text(t.call));
                    ex.tokens.assign(prompt.begin(), prompt.end());
                    ex.target_start = ex.tokens.size();
                    ex.tokens.insert(ex.tokens.end(), target.begin(), target.end());
                    ex.tokens.push_back(toy.vocab().eos_id());
                    examples.push_back(std::move(ex));
                }
                th_opts.seed = ba.seed;
                lm::ToyTransformer model(toy);
                const auto losses = hypernet::train(params, config, model, examples, th_opts);
                checkpoint::save(th_out, hypernet::to_checkpoint(params, config, ba.seed));
                std::cerr << "bc loss " << losses.front() << " -> " << losses.back() << "; wrote " << th_out << "\n";
                return 0;
            }
            hypernet::HypernetConfig config;
            hypernet::HypernetParams params;
            if (!hg_ckpt.empty()) {
                std::tie(params, config) = hypernet::from_checkpoint(checkpoint::load(hg_ckpt));
            } else {
                config = harness::hypernet_config_for(toy.config(), toy.embed_dim());
                params = hypernet::init_params(config, derive_seed(ba.seed, "hypernet"));
            }
            const auto t0 = std::chrono::steady_clock::now();
            const auto ctx = hypernet::make_context(src.v_doc, src.v_support, params);
            const auto pairs = hypernet::generate_all(ctx, params, config);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            checkpoint::save(hg_out, hypernet::lora_checkpoint(pairs, config));
            std::cerr << "generated " << pairs.size() << " LoRA pairs (r=" << config.r << ", d=" << config.d_model
                      << ") in " << ms << " ms; wrote " << hg_out << "\n";
            return 0;
        }

        if (*rg) {
            const auto config = harness::load_run_config(rg_config);
            const auto rt = harness::open_runtime(config);
            auto opts = rt->run_options();
            if (!rg_quiet) opts.progress = [](const std::string& s) { std::cerr << s << "\n"; };
            const auto t0 = std::chrono::steady_clock::now();
            auto report = harness::run_grid(rt->tasks, config.grid(), *rt->agent, rt->assets, opts);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report.environment["config"] = rg_config;
            report.environment["wall_seconds"] = secs;
            std::vector<std::filesystem::path> written;
            if (rg_format != "csv") {
                auto w = harness::emit_report(report, harness::ReportFormat::Markdown, rg_out);
                written.insert(written.end(), w.begin(), w.end());
            }
            if (rg_format != "markdown") {
                auto w = harness::emit_report(report, harness::ReportFormat::Csv, rg_out);
                written.insert(written.end(), w.begin(), w.end());
            }
            std::size_t errored = 0;
            for (const auto& c : report.cells) {
                bool bad = c.status == harness::CellStatus::Skipped;
                for (const auto& [f, outs] : c.outcomes) {
                    for (const auto& o : outs) bad = bad || !o.error.empty();
                }
                errored += bad;
            }
            std::cerr << "grid done in " << secs << " s; content hash " << harness::content_hash(report) << "; "
                      << written.size() << " files in " << rg_out << "\n";
            if (errored) {
                std::cerr << errored << " cell(s) errored\n";
                return 2;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
