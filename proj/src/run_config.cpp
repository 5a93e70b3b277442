// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/run_config.hpp"

#include <set>

#include "metatool/bridge.hpp"
#include "metatool/checkpoint.hpp"
#include "metatool/error.hpp"
#include "metatool/schema_io.hpp"
#include "toml.hpp"

namespace metatool::harness {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::ParseError, "run config: " + msg); }

void check_keys(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [k, v] : t) {
        if (!allowed.count(std::string(k.str()))) bad("unknown key '" + where + std::string(k.str()) + "'");
    }
}

template <typename T>
T get(const toml::table& t, const char* key, T fallback) {
    const auto* node = t.get(key);
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node->value_exact<bool>()) return *v;
        bad(std::string("'") + key + "' must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node->value_exact<std::string>()) return *v;
        bad(std::string("'") + key + "' must be a string");
    } else {
        auto v = node->value_exact<std::int64_t>();
        if (!v || *v < 0) bad(std::string("'") + key + "' must be a non-negative integer");
        return static_cast<T>(*v);
    }
}

template <typename T>
std::vector<T> get_list(const toml::table& t, const char* key, std::vector<T> fallback) {
    const auto* node = t.get(key);
    if (!node) return fallback;
    const auto* arr = node->as_array();
    if (!arr || arr->empty()) bad(std::string("'") + key + "' must be a non-empty array");
    std::vector<T> out;
    for (const auto& el : *arr) {
        if constexpr (std::is_same_v<T, bool>) {
            auto v = el.value_exact<bool>();
            if (!v) bad(std::string("'") + key + "' must hold booleans");
            out.push_back(*v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            auto v = el.value_exact<std::string>();
            if (!v) bad(std::string("'") + key + "' must hold strings");
            out.push_back(*v);
        } else {
            auto v = el.value_exact<std::int64_t>();
            if (!v || *v < 0) bad(std::string("'") + key + "' must hold non-negative integers");
            out.push_back(static_cast<T>(*v));
        }
    }
    return out;
}

std::vector<std::string> pack_corpus(const std::filesystem::path& data_dir) {
    std::vector<std::string> docs;
    for (auto f : prompts::kFamilies) {
        const auto p = prompts::load_pack(data_dir / "families", f);
        docs.push_back(p.docs);
        docs.push_back(p.system_instruction);
        for (const auto& e : p.examples) docs.push_back("Query: " + e.query + "\nOutput: " + e.output);
    }
    return docs;
}

}  // namespace

std::vector<GridCell> RunConfig::grid() const {
    std::vector<GridCell> out;
    for (auto s : shots) {
        for (bool d : docs) {
            for (bool h : hypernet) {
                for (auto n : noise) out.push_back({s, d, h, n, seed});
            }
        }
    }
    return out;
}

RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
    toml::table doc;
    try {
        doc = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        bad(std::string(e.description()) + " at line " + std::to_string(e.source().begin.line));
    }
    check_keys(doc,
               {"backend", "data", "suites", "seed", "beam_width", "constrained", "value_checkpoint",
                "hypernet_checkpoint", "ngram_order", "max_tasks", "grid", "toy"},
               "");
    auto path = [&](const std::string& p) {
        const std::filesystem::path q(p);
        return q.is_absolute() ? q : base_dir / q;
    };
    RunConfig c;
    c.backend = get<std::string>(doc, "backend", c.backend);
    c.data_dir = path(get<std::string>(doc, "data", "data"));
    for (const auto& s : get_list<std::string>(doc, "suites", {})) c.suites.push_back(path(s));
    if (c.suites.empty()) {
        for (auto f : prompts::kFamilies) c.suites.push_back(c.data_dir / "suites" / (std::string(prompts::to_string(f)) + ".jsonl"));
    }
    c.seed = get<std::uint64_t>(doc, "seed", c.seed);
    c.beam_width = get<std::size_t>(doc, "beam_width", c.beam_width);
    if (c.beam_width == 0) bad("'beam_width' must be at least 1");
    c.constrained = get<bool>(doc, "constrained", c.constrained);
    const auto value_ckpt = get<std::string>(doc, "value_checkpoint", "");
    if (!value_ckpt.empty()) c.value_checkpoint = path(value_ckpt);
    const auto hyper_ckpt = get<std::string>(doc, "hypernet_checkpoint", "");
    if (!hyper_ckpt.empty()) c.hypernet_checkpoint = path(hyper_ckpt);
    c.ngram_order = static_cast<int>(get<std::size_t>(doc, "ngram_order", 4));
    if (c.ngram_order < 1) bad("'ngram_order' must be at least 1");
    c.max_tasks = get<std::size_t>(doc, "max_tasks", 0);

    if (const auto* g = doc.get_as<toml::table>("grid")) {
        check_keys(*g, {"shots", "docs", "hypernet", "noise"}, "grid.");
        c.shots = get_list<std::size_t>(*g, "shots", c.shots);
        c.docs = get_list<bool>(*g, "docs", c.docs);
        c.hypernet = get_list<bool>(*g, "hypernet", c.hypernet);
        c.noise = get_list<std::size_t>(*g, "noise", c.noise);
        for (auto s : c.shots) {
            if (s > 5) bad("grid.shots values must be 0..5");
        }
        for (auto n : c.noise) {
            if (n > 2) bad("grid.noise values must be 0..2");
        }
    } else if (doc.contains("grid")) {
        bad("'grid' must be a table");
    }
    if (const auto* t = doc.get_as<toml::table>("toy")) {
        check_keys(*t, {"layers", "d_model", "heads", "d_ff", "max_context", "pretrain_steps"}, "toy.");
        auto& tc = c.toy.config;
        tc.n_layers = static_cast<int>(get<std::size_t>(*t, "layers", static_cast<std::size_t>(tc.n_layers)));
        tc.d_model = static_cast<int>(get<std::size_t>(*t, "d_model", static_cast<std::size_t>(tc.d_model)));
        tc.n_heads = static_cast<int>(get<std::size_t>(*t, "heads", static_cast<std::size_t>(tc.n_heads)));
        tc.d_ff = static_cast<int>(get<std::size_t>(*t, "d_ff", static_cast<std::size_t>(tc.d_ff)));
        tc.max_context = static_cast<int>(get<std::size_t>(*t, "max_context", static_cast<std::size_t>(tc.max_context)));
        c.toy.pretrain_steps = get<std::size_t>(*t, "pretrain_steps", 0);
        if (tc.n_layers < 2) bad("toy.layers must be at least 2");
    } else if (doc.contains("toy")) {
        bad("'toy' must be a table");
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const auto text = schema::read_file(path);
    try {
        return parse_run_config(text, path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::shared_ptr<const lm::LmBackend> make_backend(const std::string& spec, const ToySettings& toy, int ngram_order,
                                                  std::uint64_t seed, const std::filesystem::path& data_dir) {
    if (spec == "toy") {
        auto model = std::make_shared<lm::ToyTransformer>(toy.config, seed);
        if (toy.pretrain_steps > 0) {
            lm::LmTrainOptions o;
            o.steps = toy.pretrain_steps;
            o.seed = seed;
            lm::train_language_model(*model, pack_corpus(data_dir), o);
        }
        return model;
    }
    if (spec == "ngram") return lm::fit_ngram(pack_corpus(data_dir), ngram_order);
    if (spec.rfind("bridge:", 0) == 0) {
        const auto rest = spec.substr(7);
        const auto colon = rest.rfind(':');
        std::string host = rest;
        std::uint16_t port = bridge::kDefaultPort;
        if (colon != std::string::npos) {
            host = rest.substr(0, colon);
            try {
                port = static_cast<std::uint16_t>(std::stoul(rest.substr(colon + 1)));
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidArgument, "bad bridge port in '" + spec + "'");
            }
        }
        return bridge::BridgeBackend::connect(host, port);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown backend '" + spec + "' (toy, ngram or bridge:HOST:PORT)");
}

hypernet::HypernetConfig hypernet_config_for(const lm::ToyConfig& toy, std::size_t embed_dim) {
    hypernet::HypernetConfig c;
    c.d_model = toy.d_model;
    c.n_layers = std::max(1, toy.n_layers - 1);
    c.doc_dim = static_cast<int>(embed_dim);
    return c;
}

RunOptions Runtime::run_options() const {
    RunOptions o;
    o.packs_dir = config.data_dir / "families";
    return o;
}

std::unique_ptr<Runtime> open_runtime(const RunConfig& config) {
    auto rt = std::make_unique<Runtime>();
    rt->config = config;
    rt->assets = load_assets(config.data_dir);
    for (const auto& s : config.suites) {
        auto part = load_suite(s, rt->assets);
        std::size_t kept = 0;
        for (auto& t : part) {
            if (config.max_tasks && kept >= config.max_tasks) break;
            rt->tasks.push_back(std::move(t));
            ++kept;
        }
    }
    rt->backend = make_backend(config.backend, config.toy, config.ngram_order, config.seed, config.data_dir);

    LmAgentOptions o;
    o.constrained = config.constrained;
    o.beam_width = config.beam_width;
    if (config.value_checkpoint) {
        o.value_net = std::make_shared<value::ValueNet>(value::ValueNet::from_checkpoint(checkpoint::load(*config.value_checkpoint)));
    }
    if (const auto* toy = dynamic_cast<const lm::ToyTransformer*>(rt->backend.get())) {
        if (config.hypernet_checkpoint) {
            auto [params, hc] = hypernet::from_checkpoint(checkpoint::load(*config.hypernet_checkpoint));
            o.hypernet = std::make_shared<hypernet::HypernetParams>(std::move(params));
            o.hypernet_config = hc;
        } else {
            o.hypernet_config = hypernet_config_for(toy->config(), toy->embed_dim());
            o.hypernet = std::make_shared<hypernet::HypernetParams>(
                hypernet::init_params(o.hypernet_config, derive_seed(config.seed, "hypernet")));
        }
    }
    rt->agent = std::make_unique<LmAgent>(rt->backend, o, rt->assets);
    return rt;
}

}  // namespace metatool::harness
