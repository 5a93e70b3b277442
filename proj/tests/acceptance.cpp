// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//   acceptance [--report-dir DIR] [--only N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "metatool/ad.hpp"
#include "metatool/error.hpp"
#include "metatool/fsm.hpp"
#include "metatool/harness.hpp"
#include "metatool/hypernet.hpp"
#include "metatool/run_config.hpp"
#include "metatool/schema_io.hpp"
#include "metatool/search.hpp"
#include "metatool/toy_transformer.hpp"
#include "metatool/value.hpp"
#include "oracles.hpp"

using namespace metatool;
using harness::Family;

namespace {

const std::filesystem::path kRoot = METATOOL_SOURCE_DIR;
std::filesystem::path g_report_dir;

struct Result {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

const harness::FamilyAssets& assets() {
    static const auto a = harness::load_assets(kRoot / "data");
    return a;
}

std::vector<harness::TaskRecord> all_tasks() {
    std::vector<harness::TaskRecord> out;
    for (auto f : prompts::kFamilies) {
        auto part = harness::load_suite(kRoot / "data/suites" / (std::string(prompts::to_string(f)) + ".jsonl"), assets());
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

harness::RunOptions run_options() {
    harness::RunOptions o;
    o.packs_dir = kRoot / "data/families";
    return o;
}

// 1. Every constrained generation of the toy model is well formed.
Result soundness() {
    const auto t0 = Clock::now();
    auto config = harness::load_run_config(kRoot / "configs/run.toml");
    auto rt = harness::open_runtime(config);
    const std::vector<harness::GridCell> cells{
        {0, false, false, 0, 42}, {1, true, false, 1, 42}, {3, false, true, 2, 42},
        {5, true, true, 0, 42},   {2, true, false, 2, 42},
    };
    const auto report = harness::run_grid(rt->tasks, cells, *rt->agent, rt->assets, rt->run_options());
    std::size_t total = 0, bad = 0, format = 0;
    std::map<Family, std::size_t> per_family;
    std::string first_bad;
    for (const auto& c : report.cells) {
        if (c.status != harness::CellStatus::Ok) return {false, "cell " + c.cell.label() + " not run: " + c.note};
        for (const auto& [fam, outs] : c.outcomes) {
            for (const auto& o : outs) {
                ++total;
                ++per_family[fam];
                const bool ok = o.error.empty() && harness::well_formed(fam, o.raw_output, rt->assets);
                if (!ok) {
                    ++bad;
                    if (first_bad.empty()) first_bad = o.task_id + ": '" + o.raw_output + "' " + o.error;
                }
                format += o.category == harness::ErrorCategory::Format;
            }
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << total << " generations (";
    for (auto f : prompts::kFamilies) d << prompts::to_string(f) << " " << per_family[f] << (f == Family::Bash ? "" : ", ");
    d << "), " << bad << " not well formed, " << format << " format errors, " << fmt("%.1f s", secs);
    if (!first_bad.empty()) d << "; first: " << first_bad;
    return {total >= 1000 && per_family.size() == 4 && bad == 0 && format == 0 && secs < 120.0, d.str()};
}

// 2. DFA language of random small schemas equals the brute-force call set.
schema::ToolSchema random_schema(Rng& rng, int index) {
    schema::ToolSchema s;
    s.tool_name = index % 3 == 0 ? "svc.op" + std::to_string(index) : "t" + std::to_string(index);
    std::vector<std::string> names{"alpha", "b", "mode", "n_max", "q", "zeta"};
    std::shuffle(names.begin(), names.end(), rng);
    const std::size_t n_params = 1 + uniform_index(rng, 3);
    const std::vector<std::string> words{"x", "up", "a-b", "c.d", "ok", "r 2", "zz"};
    std::size_t product = 1;
    for (std::size_t i = 0; i < n_params; ++i) {
        schema::ParamSpec p;
        p.name = names[i];
        p.kind = static_cast<schema::ParamKind>(uniform_index(rng, 5));
        switch (p.kind) {
            case schema::ParamKind::String:
                p.charset = std::vector<std::string>{"ab", "x .", "01-"}[uniform_index(rng, 3)];
                p.max_length = 1 + uniform_index(rng, 2);
                break;
            case schema::ParamKind::Integer: {
                const double lo = -12.0 + static_cast<double>(uniform_index(rng, 18));
                p.range = schema::Range{lo, lo + static_cast<double>(uniform_index(rng, 16))};
                break;
            }
            case schema::ParamKind::Number: {
                p.decimals = 1 + static_cast<int>(uniform_index(rng, 2));
                const double step = p.decimals == 1 ? 0.1 : 0.01;
                const double lo = (-5.0 + static_cast<double>(uniform_index(rng, 9))) * step;
                p.range = schema::Range{lo, lo + step * static_cast<double>(uniform_index(rng, 12))};
                break;
            }
            case schema::ParamKind::Enum: {
                auto pool = words;
                std::shuffle(pool.begin(), pool.end(), rng);
                pool.resize(1 + uniform_index(rng, 4));
                p.enum_values = pool;
                break;
            }
            case schema::ParamKind::Boolean:
                break;
        }
        p.required = uniform_index(rng, 3) != 0;
        p.positional = p.required && i == 0 && uniform_index(rng, 2) == 0;
        product *= oracle::literal_domain(p).size() + (p.required ? 0 : 1);
        if (product > 4000) break;
        s.params.push_back(p);
    }
    return s;
}

Result language_equivalence() {
    Rng rng(derive_seed(kDefaultSeed, "acceptance/schemas"));
    std::size_t strings = 0, mismatched = 0;
    std::set<schema::ParamKind> kinds;
    std::string first;
    for (int i = 0; i < 20; ++i) {
        const auto s = random_schema(rng, i);
        schema::check_schema(s);
        for (const auto& p : s.params) kinds.insert(p.kind);
        const auto want = oracle::enumerate_calls(s);
        auto got = fsm::enumerate_language(fsm::compile_regex(fsm::compile_schema(s).regex_text), 128);
        std::sort(got.begin(), got.end());
        std::string bad_text;
        for (const auto& text : got) {
            const auto parsed = schema::parse_call(text);
            const bool ok = parsed && schema::validate_call(s, parsed->call).valid() &&
                            schema::canonical_text(s, parsed->call) == text;
            if (!ok && bad_text.empty()) bad_text = text;
        }
        const bool round_trip = bad_text.empty();
        strings += want.size();
        if (got != want || !round_trip) {
            ++mismatched;
            if (first.empty()) {
                std::vector<std::string> only_dfa, only_oracle;
                std::set_difference(got.begin(), got.end(), want.begin(), want.end(), std::back_inserter(only_dfa));
                std::set_difference(want.begin(), want.end(), got.begin(), got.end(), std::back_inserter(only_oracle));
                first = "; first mismatch " + s.tool_name + " (" + std::to_string(got.size()) + " vs " +
                        std::to_string(want.size()) + ")";
                if (!only_dfa.empty()) first += ", DFA only: " + only_dfa.front();
                if (!only_oracle.empty()) first += ", oracle only: " + only_oracle.front();
                if (!round_trip) first += ", no round trip: " + bad_text;
            }
        }
    }
    return {mismatched == 0 && kinds.size() == 5,
            "20 schemas, " + std::to_string(strings) + " calls, " + std::to_string(kinds.size()) + " parameter kinds, " +
                std::to_string(mismatched) + " mismatched" + first};
}

// 3. Shapes, gradients, zero heads, identity adapters.
Result shapes_and_gradients() {
    hypernet::HypernetConfig c;
    c.d_model = 4;
    c.r = 2;
    c.f = 3;
    c.z_dim = 5;
    c.doc_dim = 3;
    c.n_layers = 2;
    c.hidden = 6;
    c.init_scale = 1.0;
    auto p = hypernet::init_params(c, 21);
    for (auto* t : {&p.wq, &p.wk, &p.wv}) t->value += ad::random_normal(3, 3, 0.3, 5);
    hypernet::Vec doc(3), s1(3), s2(3);
    doc << 0.4, -0.3, 0.8;
    s1 << 0.1, 0.9, -0.2;
    s2 << -0.7, 0.2, 0.5;
    const std::vector<hypernet::Vec> support{s1, s2};

    bool shapes = true;
    const auto ctx = hypernet::make_context(doc, support, p);
    const auto pairs = hypernet::generate_all(ctx, p, c);
    shapes = pairs.size() == static_cast<std::size_t>(c.n_layers) * c.modules.size();
    for (const auto& pair : pairs) {
        shapes = shapes && pair.A.rows() == c.r && pair.A.cols() == c.d_model && pair.B.rows() == c.d_model &&
                 pair.B.cols() == c.r;
    }

    // Hypernetwork: random linear functional of every generated factor.
    std::map<std::pair<int, hypernet::AttnModule>, std::pair<ad::Mat, ad::Mat>> weights;
    std::uint64_t salt = 100;
    for (int l = 0; l < c.n_layers; ++l) {
        for (auto m : c.modules) {
            weights[{l, m}] = {ad::random_normal(c.r, c.d_model, 1.0, ++salt), ad::random_normal(c.d_model, c.r, 1.0, ++salt)};
        }
    }
    auto loss_on = [&](ad::Tape& t) {
        auto lora = hypernet::forward_lora(t, p, c, doc, support);
        ad::Var total;
        for (auto& [key, pair] : lora) {
            auto term = ad::add(t, ad::sum(t, ad::mul(t, pair.A, t.constant(weights[key].first))),
                                ad::sum(t, ad::mul(t, pair.B, t.constant(weights[key].second))));
            total = total ? ad::add(t, total, term) : term;
        }
        return total;
    };
    double worst_h = 0.0;
    {
        auto params = p.list();
        ad::zero_grads(params);
        ad::Tape tape;
        tape.backward(loss_on(tape));
        auto numeric = ad::numeric_gradients(params, [&] {
            ad::Tape t;
            return loss_on(t)->value(0, 0);
        });
        for (std::size_t i = 0; i < params.size(); ++i) {
            worst_h = std::max(worst_h, ad::max_relative_error(params[i]->grad, numeric[i], 1e-7));
        }
    }

    // Value net TD loss.
    value::ValueConfig vc;
    vc.input_dim = 4;
    vc.hidden = 4;
    vc.gamma = 0.9;
    value::ValueNet net(vc, 5);
    for (auto* q : net.params()) q->value += ad::random_normal(q->value.rows(), q->value.cols(), 0.3, 17);
    value::Vec a(4), b(4);
    a << 0.3, -0.8, 0.1, 0.5;
    b << -0.5, 0.4, 0.9, -0.2;
    const std::vector<value::Transition> batch{{a, 0, 0.0, b, false}, {b, 1, 1.0, a, true}, {a, 0, 0.0, a, false}};
    double worst_v = 0.0;
    {
        auto params = net.params();
        ad::zero_grads(params);
        ad::Tape tape;
        tape.backward(net.td_loss(tape, batch));
        auto numeric = ad::numeric_gradients(params, [&] {
            ad::Tape t;
            return net.td_loss(t, batch)->value(0, 0);
        });
        for (std::size_t i = 0; i < params.size(); ++i) {
            worst_v = std::max(worst_v, ad::max_relative_error(params[i]->grad, numeric[i], 1e-7));
        }
    }

    auto zeroed = p;
    for (auto& h : zeroed.heads) {
        h.w.value.setZero();
        h.b.value.setZero();
    }
    bool zero = true;
    for (const auto& pair : hypernet::generate_all(hypernet::make_context(doc, support, zeroed), zeroed, c)) {
        zero = zero && pair.A.isZero(0.0) && pair.B.isZero(0.0);
    }

    bool identity = true;
    for (int d : {4, 7}) {
        const Eigen::MatrixXd w = ad::random_normal(d, d, 1.0, static_cast<std::uint64_t>(d));
        hypernet::LoraPair pair;
        pair.A = ad::random_normal(2, d, 1.0, 3);
        pair.B = Eigen::MatrixXd::Zero(d, 2);
        identity = identity && hypernet::apply_lora(w, pair, c.alpha, 2) == w;
    }

    const bool grads = worst_h < 1e-3 && worst_v < 1e-3;
    return {shapes && grads && zero && identity,
            std::to_string(pairs.size()) + " LoRA pairs shaped (r,d)/(d,r): " + (shapes ? "yes" : "no") +
                "; max rel grad error hypernet " + fmt("%.2e", worst_h) + ", value " + fmt("%.2e", worst_v) +
                "; zero heads give A=B=0: " + (zero ? "yes" : "no") + "; B=0 is identity: " + (identity ? "yes" : "no")};
}

// 4. Closed-form parameter count against enumeration; paper-scale figure.
std::uint64_t enumerate_scalars(const hypernet::HypernetParams& p) {
    std::uint64_t n = 0;
    for (const auto* t : p.list()) {
        for (Eigen::Index r = 0; r < t->value.rows(); ++r) {
            for (Eigen::Index col = 0; col < t->value.cols(); ++col) {
                (void)t->value(r, col);
                ++n;
            }
        }
    }
    return n;
}

Result parameter_accounting() {
    std::vector<hypernet::HypernetConfig> configs;
    hypernet::HypernetConfig small;
    small.d_model = 4;
    small.r = 2;
    small.f = 3;
    small.z_dim = 5;
    small.doc_dim = 3;
    small.n_layers = 2;
    small.hidden = 6;
    configs.push_back(small);
    auto qv = small;
    qv.modules = {hypernet::AttnModule::Q, hypernet::AttnModule::V};
    qv.d_model = 9;
    configs.push_back(qv);
    const lm::ToyConfig toy{4, 64, 4, 256, 2048};
    configs.push_back(harness::hypernet_config_for(toy, 384));
    bool exact = true;
    std::string counts;
    for (const auto& c : configs) {
        const auto closed = hypernet::count_params(c);
        const auto listed = enumerate_scalars(hypernet::init_params(c, 1));
        exact = exact && closed == listed;
        counts += (counts.empty() ? "" : ", ") + std::to_string(closed) + "=" + std::to_string(listed);
    }
    const auto total = hypernet::count_params(hypernet::paper_config(), hypernet::kEncoderParams);
    const double dev = (static_cast<double>(total) - 227.8e6) / 227.8e6;
    return {exact, "closed form = enumeration (" + counts + "); paper config + 22.7M encoder = " + std::to_string(total) +
                       " vs reported 227.8M (" + fmt("%+.2f%%", 100.0 * dev) + ", soft check)"};
}

// 5. TD(0) on the three-state chain.
Result td_chain() {
    const auto t0 = Clock::now();
    const double gamma = 0.9;
    // Dynamic programming on s0 -> s1 -> s2 -> end with reward 1 on leaving s2.
    std::vector<double> dp(3, 0.0);
    for (int it = 0; it < 200; ++it) dp = {gamma * dp[1], gamma * dp[2], 1.0};
    auto hot = [](int i) {
        value::Vec v = value::Vec::Zero(3);
        v(i) = 1.0;
        return v;
    };
    const std::vector<value::Transition> chain{
        {hot(0), 0, 0.0, hot(1), false}, {hot(1), 0, 0.0, hot(2), false}, {hot(2), 0, 1.0, hot(2), true}};
    value::ValueConfig c;
    c.input_dim = 3;
    c.hidden = 0;
    c.gamma = gamma;
    value::ValueNet net(c, 1);
    value::TrainOptions o;
    o.updates = 10000;
    o.batch = 8;
    o.step_size = 2.0;
    value::train(net, chain, o);
    double worst = 0.0;
    std::string vals;
    for (int s = 0; s < 3; ++s) {
        const double v = net.predict(hot(s));
        worst = std::max(worst, std::abs(v - dp[static_cast<std::size_t>(s)]));
        vals += fmt(" %.4f", v) + fmt("/%.4f", dp[static_cast<std::size_t>(s)]);
    }
    const double secs = seconds_since(t0);
    return {worst < 0.05 && secs < 30.0, "learned/DP" + vals + ", max error " + fmt("%.4f", worst) + " after " +
                                             std::to_string(o.updates) + " updates, " + fmt("%.2f s", secs)};
}

// 6. Full-width beam returns the brute-force argmax.
std::unique_ptr<lm::ScriptedBackend> hashed_backend(std::uint64_t salt) {
    return std::make_unique<lm::ScriptedBackend>(Vocabulary::byte_level(), [salt](std::span<const TokenId> ctx) {
        std::uint64_t h = splitmix64(salt);
        for (auto t : ctx) h = splitmix64(h ^ static_cast<std::uint64_t>(t));
        std::vector<float> out(257);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>((splitmix64(h + i) % 10000) / 1000.0);
        return out;
    });
}

double oracle_logp(const lm::LmBackend& lm, const std::string& prompt, const std::string& text) {
    auto ctx = lm.tokenize(prompt);
    auto ids = lm.tokenize(text);
    ids.push_back(lm.vocab().eos_id());
    double total = 0.0;
    for (auto id : ids) {
        const auto logits = lm.next_logits(ctx);
        double mx = -std::numeric_limits<double>::infinity();
        for (float x : logits) mx = std::max(mx, static_cast<double>(x));
        double z = 0.0;
        for (float x : logits) z += std::exp(static_cast<double>(x) - mx);
        total += static_cast<double>(logits[static_cast<std::size_t>(id)]) - mx - std::log(z);
        ctx.push_back(id);
    }
    return total;
}

Result beam_exactness() {
    const std::vector<std::string> languages{
        "f\\(q='(a|b|c)'\\)",           "go\\((north|south|east|west)\\)", "set\\(x=[0-9], y=(True|False)\\)",
        "(ls|cd|pwd)( -[al])?",          "(SELECT|DELETE) [ab]{1,2}",       "ping\\(n=(1[0-9]|2[0-5])\\)",
        "t\\(a=(True|False)(, b='[xy]{0,2}')?\\)",
    };
    std::size_t runs = 0, argmax_ok = 0, invariance_ok = 0, largest = 0;
    for (std::size_t li = 0; li < languages.size(); ++li) {
        const auto bytes = fsm::compile_regex(languages[li]);
        const auto language = fsm::enumerate_language(bytes, 64);
        if (language.empty() || language.size() > 64) return {false, "language " + languages[li] + " not enumerable"};
        largest = std::max(largest, language.size());
        std::size_t longest = 0;
        for (const auto& s : language) longest = std::max(longest, s.size());
        for (std::uint64_t salt = 1; salt <= 4; ++salt) {
            auto lm = hashed_backend(1000 * li + salt);
            auto dfa = fsm::build_token_dfa(bytes, lm->vocab());
            const std::string prompt = "q" + std::to_string(salt) + ": ";
            search::ValueFn v = [salt](std::string_view t) {
                return 0.01 + 0.98 * static_cast<double>(fnv1a64(t, salt) % 100000) / 100000.0;
            };
            std::string best, best_lik;
            double best_score = -std::numeric_limits<double>::infinity(), best_lp = best_score;
            for (const auto& s : language) {
                const double lp = oracle_logp(*lm, prompt, s);
                const double sc = lp + std::log(v(s));
                if (sc > best_score) {
                    best_score = sc;
                    best = s;
                }
                if (lp > best_lp) {
                    best_lp = lp;
                    best_lik = s;
                }
            }
            search::BeamOptions o;
            o.width = language.size();
            o.max_steps = longest + 1;
            o.dfa = &dfa;
            const auto got = search::beam_decode(*lm, prompt, v, o);
            argmax_ok += got.action_text == best && std::abs(got.score - best_score) < 1e-9 * std::max(1.0, std::abs(best_score));
            // Constant V must reproduce pure-likelihood beam search at every width.
            bool same = search::beam_decode(*lm, prompt, search::constant_value(0.37), o).action_text == best_lik;
            for (std::size_t k : {1, 2, 4}) {
                auto narrow = o;
                narrow.width = k;
                same = same && search::beam_decode(*lm, prompt, search::constant_value(0.37), narrow).action_text ==
                                   search::propose(*lm, prompt, narrow).front().text;
            }
            invariance_ok += same;
            ++runs;
        }
    }
    return {argmax_ok == runs && invariance_ok == runs,
            std::to_string(languages.size()) + " languages (up to " + std::to_string(largest) + " strings) x 4 models: argmax " +
                std::to_string(argmax_ok) + "/" + std::to_string(runs) + ", constant-V invariance " +
                std::to_string(invariance_ok) + "/" + std::to_string(runs)};
}

// 7. Full grid twice on the toy transformer.
Result grid_reproduction() {
    const auto t0 = Clock::now();
    const auto config = harness::load_run_config(kRoot / "configs/run.toml");
    std::vector<std::string> hashes;
    std::vector<std::vector<harness::HypernetDelta>> deltas;
    std::vector<double> times;
    harness::GridReport last;
    for (int run = 0; run < 2; ++run) {
        const auto t = Clock::now();
        auto rt = harness::open_runtime(config);
        last = harness::run_grid(rt->tasks, config.grid(), *rt->agent, rt->assets, rt->run_options());
        hashes.push_back(harness::content_hash(last));
        deltas.push_back(harness::hypernet_deltas(last));
        times.push_back(seconds_since(t));
    }
    std::size_t ok = 0;
    for (const auto& c : last.cells) ok += c.status == harness::CellStatus::Ok;
    bool same_deltas = deltas[0].size() == deltas[1].size() && deltas[0].size() == 4;
    std::string delta_text;
    for (std::size_t i = 0; same_deltas && i < deltas[0].size(); ++i) {
        const auto& a = deltas[0][i];
        const auto& b = deltas[1][i];
        same_deltas = a.family == b.family && a.successes_on == b.successes_on && a.successes_off == b.successes_off &&
                      a.pairs == b.pairs;
        delta_text += std::string(i ? ", " : "") + std::string(prompts::to_string(a.family)) + " " +
                      fmt("%+.1f", a.sr_on() - a.sr_off());
    }
    const auto tables = harness::report_tables(last);
    std::set<std::string> names;
    for (const auto& t : tables) {
        if (!t.rows.empty()) names.insert(t.name);
    }
    bool shapes = true;
    for (const char* n : {"ablation", "shots", "noise", "errors", "hypernet"}) shapes = shapes && names.count(n);
    const auto md = harness::render_markdown(last);
    if (!g_report_dir.empty()) {
        harness::emit_report(last, harness::ReportFormat::Markdown, g_report_dir);
        harness::emit_report(last, harness::ReportFormat::Csv, g_report_dir);
    }
    const double total = seconds_since(t0);
    return {hashes[0] == hashes[1] && same_deltas && shapes && ok == 60 && last.cells.size() == 72 && total < 7200.0,
            "hash " + hashes[0] + (hashes[0] == hashes[1] ? " == " : " != ") + hashes[1] + "; " + std::to_string(ok) +
                "/72 cells run; SR delta on-off: " + delta_text + "; tables " + std::to_string(names.size()) +
                ", markdown " + std::to_string(md.size()) + " bytes; runs " + fmt("%.0f s", times[0]) + " + " +
                fmt("%.0f s", times[1])};
}

// 8. Hand-labelled error categories.
Result taxonomy() {
    const auto tasks = all_tasks();
    std::map<std::string, const harness::TaskRecord*> by_id;
    for (const auto& t : tasks) by_id[t.id] = &t;
    const auto cases = nlohmann::json::parse(schema::read_file(kRoot / "fixtures/taxonomy/cases.json"));
    std::size_t agree = 0;
    std::map<std::string, std::size_t> per_label;
    std::string first;
    for (const auto& c : cases) {
        const auto* t = by_id.at(c.at("task").get<std::string>());
        const auto label = c.at("label").get<std::string>();
        const auto v = harness::check_success(t->family, c.at("output").get<std::string>(), t->gold, assets());
        ++per_label[label];
        if (harness::to_string(v.category) == label && v.success == (label == "none")) {
            ++agree;
        } else if (first.empty()) {
            first = "; first disagreement " + t->id + " got " + std::string(harness::to_string(v.category));
        }
    }
    std::string labels;
    for (const auto& [l, n] : per_label) labels += (labels.empty() ? "" : ", ") + l + " " + std::to_string(n);
    return {cases.size() == 30 && agree == cases.size(),
            std::to_string(agree) + "/" + std::to_string(cases.size()) + " agree (" + labels + ")" + first};
}

// 9. Exactly `noise` shown examples fail the format check in every cell.
class SpyAgent final : public harness::Agent {
public:
    std::string name() const override { return "spy"; }
    bool supports_adaptation() const override { return true; }
    double prepare(const harness::CellContext& ctx) override {
        seen.push_back({ctx.cell, ctx.family, *ctx.spec});
        return 0.0;
    }
    std::string act(const harness::TaskRecord&, const std::string&) override { return ""; }
    struct Seen {
        harness::GridCell cell;
        Family family;
        prompts::PromptSpec spec;
    };
    std::vector<Seen> seen;
};

Result noise_contract() {
    std::vector<harness::TaskRecord> tasks;
    std::set<Family> have;
    for (const auto& t : all_tasks()) {
        if (have.insert(t.family).second) tasks.push_back(t);
    }
    SpyAgent spy;
    harness::run_grid(tasks, harness::full_grid(), spy, assets(), run_options());
    std::size_t checked = 0, held = 0, corrupted_total = 0;
    for (const auto& s : spy.seen) {
        std::size_t broken = 0;
        for (std::size_t i = 0; i < s.spec.shots; ++i) broken += !harness::well_formed(s.family, s.spec.examples[i].output, assets());
        // The prompt text must carry exactly the examples that were checked.
        const auto prompt = prompts::build(s.spec);
        bool rendered = true;
        for (std::size_t i = 0; i < s.spec.shots; ++i) rendered = rendered && prompt.find(s.spec.examples[i].output) != std::string::npos;
        held += broken == s.cell.noise && rendered;
        corrupted_total += broken;
        ++checked;
    }
    return {checked == 240 && held == checked,
            std::to_string(held) + "/" + std::to_string(checked) + " (cell, family) pairs with exactly n_corrupt malformed examples, " +
                std::to_string(corrupted_total) + " corrupted in total"};
}

// 10. build() against the golden prompt files.
Result prompt_goldens() {
    const std::map<Family, std::string> queries{
        {Family::Api, "Load MobileNet for efficient image classification"},
        {Family::Sql, "Find departments with total salary exceeding 500000"},
        {Family::Nav, "Add the first product to the shopping cart"},
        {Family::Bash, "Search for the word \"error\" in all log files"},
    };
    std::size_t same = 0, total = 0;
    std::string first;
    for (auto f : prompts::kFamilies) {
        const auto pack = prompts::load_pack(kRoot / "data/families", f);
        for (std::size_t shots : {3, 5}) {
            for (bool docs : {true, false}) {
                const auto name = std::string(prompts::to_string(f)) + "_" + std::to_string(shots) + "shot_docs_" +
                                  (docs ? "on" : "off") + ".txt";
                const auto want = schema::read_file(kRoot / "fixtures/prompts" / name);
                const auto got = prompts::build(prompts::make_spec(pack, queries.at(f), shots, docs));
                ++total;
                if (got == want) {
                    ++same;
                } else if (first.empty()) {
                    first = "; first difference in " + name;
                }
            }
        }
    }
    return {total == 16 && same == total, std::to_string(same) + "/" + std::to_string(total) + " byte-identical" + first};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--report-dir" && i + 1 < argc) {
            g_report_dir = argv[++i];
        } else if (a == "--only" && i + 1 < argc) {
            only.insert(std::stoi(argv[++i]));
        } else {
            std::cerr << "usage: acceptance [--report-dir DIR] [--only N]...\n";
            return 2;
        }
    }
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
        {"constrained decoding soundness", soundness},
        {"schema language equivalence", language_equivalence},
        {"hypernetwork and value shapes/gradients", shapes_and_gradients},
        {"parameter accounting", parameter_accounting},
        {"TD(0) chain oracle", td_chain},
        {"beam search exactness", beam_exactness},
        {"ablation grid reproduction", grid_reproduction},
        {"error taxonomy", taxonomy},
        {"noise injection contract", noise_contract},
        {"prompt golden files", prompt_goldens},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(n)) continue;
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        failed += !r.pass;
        std::cout << (r.pass ? "PASS" : "FAIL") << " [" << n << "] " << criteria[i].first << ": " << r.detail << std::endl;
    }
    return failed ? 1 : 0;
}
