// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/hypernet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metatool/error.hpp"
#include "metatool/rng.hpp"

namespace metatool::hypernet {

namespace {

constexpr const char* kHeadNames[4] = {"head.a_left", "head.a_right", "head.b_left", "head.b_right"};

void check_dim(const Vec& v, int dim, const char* what) {
    if (v.size() != dim) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has " + std::to_string(v.size()) +
                                                      " entries, expected " + std::to_string(dim));
    }
}

ad::Mat reshape_row_major(const Vec& v, int rows, int cols) {
    ad::Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = v(r * cols + c);
    }
    return m;
}

AttnModule module_from_string(const std::string& s) {
    if (s == "q_proj") return AttnModule::Q;
    if (s == "k_proj") return AttnModule::K;
    if (s == "v_proj") return AttnModule::V;
    throw Error(ErrorCode::InvalidArgument, "unknown module '" + s + "'");
}

}  // namespace

void HypernetConfig::validate() const {
    if (d_model < 1 || r < 1 || f < 1 || z_dim < 1 || doc_dim < 1 || n_layers < 1 || hidden < 1) {
        throw Error(ErrorCode::InvalidArgument, "hypernetwork dimensions must be positive");
    }
    if (modules.empty()) throw Error(ErrorCode::InvalidArgument, "hypernetwork needs at least one module");
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
}

HypernetConfig paper_config() {
    HypernetConfig c;
    c.d_model = 3072;
    return c;
}

nlohmann::json to_json(const HypernetConfig& config) {
    nlohmann::json modules = nlohmann::json::array();
    for (auto m : config.modules) modules.push_back(std::string(lm::to_string(m)));
    return {{"d_model", config.d_model}, {"r", config.r},           {"alpha", config.alpha},
            {"f", config.f},             {"z_dim", config.z_dim},   {"doc_dim", config.doc_dim},
            {"n_layers", config.n_layers}, {"hidden", config.hidden}, {"modules", modules},
            {"init_scale", config.init_scale}};
}

HypernetConfig config_from_json(const nlohmann::json& doc) {
    HypernetConfig c;
    c.d_model = doc.value("d_model", c.d_model);
    c.r = doc.value("r", c.r);
    c.alpha = doc.value("alpha", c.alpha);
    c.f = doc.value("f", c.f);
    c.z_dim = doc.value("z_dim", c.z_dim);
    c.doc_dim = doc.value("doc_dim", c.doc_dim);
    c.n_layers = doc.value("n_layers", c.n_layers);
    c.hidden = doc.value("hidden", c.hidden);
    c.init_scale = doc.value("init_scale", c.init_scale);
    if (doc.contains("modules")) {
        c.modules.clear();
        for (const auto& m : doc.at("modules")) c.modules.push_back(module_from_string(m.get<std::string>()));
    }
    c.validate();
    return c;
}

std::vector<ad::Param*> HypernetParams::list() {
    std::vector<ad::Param*> out{&wq, &wk, &wv, &w1, &b1, &w2, &b2, &e_layer};
    for (auto& h : heads) {
        out.push_back(&h.w);
        out.push_back(&h.b);
    }
    return out;
}

std::vector<const ad::Param*> HypernetParams::list() const {
    auto mut = const_cast<HypernetParams*>(this)->list();
    return {mut.begin(), mut.end()};
}

std::pair<int, int> factor_shape(const HypernetConfig& c, Matrix matrix, Side side) {
    if (matrix == Matrix::A) return side == Side::Left ? std::pair{c.r, c.f} : std::pair{c.f, c.d_model};
    return side == Side::Left ? std::pair{c.d_model, c.f} : std::pair{c.f, c.r};
}

HypernetParams init_params(const HypernetConfig& config, std::uint64_t seed) {
    config.validate();
    const int D = config.doc_dim;
    HypernetParams p;
    p.wq = ad::Param("agg.wq", ad::Mat::Identity(D, D));
    p.wk = ad::Param("agg.wk", ad::Mat::Identity(D, D));
    p.wv = ad::Param("agg.wv", ad::Mat::Identity(D, D));
    p.w1 = ad::Param("mlp.w1", ad::random_normal(config.hidden, 2 * D, 1.0 / std::sqrt(2.0 * D),
                                                 derive_seed(seed, "mlp.w1")));
    p.b1 = ad::Param("mlp.b1", ad::Mat::Zero(1, config.hidden));
    p.w2 = ad::Param("mlp.w2", ad::random_normal(config.z_dim, config.hidden, 1.0 / std::sqrt(config.hidden),
                                                 derive_seed(seed, "mlp.w2")));
    p.b2 = ad::Param("mlp.b2", ad::Mat::Zero(1, config.z_dim));
    p.e_layer = ad::Param("e_layer", ad::random_normal(config.embedding_rows(), config.z_dim, 0.02,
                                                       derive_seed(seed, "e_layer")));
    for (int h = 0; h < 4; ++h) {
        const auto [rows, cols] = factor_shape(config, static_cast<Matrix>(h / 2), static_cast<Side>(h % 2));
        const std::string name = kHeadNames[h];
        p.heads[h].w = ad::Param(name + ".w", ad::random_normal(rows * cols, config.z_dim,
                                                                 config.init_scale / std::sqrt(config.z_dim),
                                                                 derive_seed(seed, name)));
        p.heads[h].b = ad::Param(name + ".b", ad::Mat::Zero(1, rows * cols));
    }
    return p;
}

int module_index(const HypernetConfig& config, AttnModule module) {
    auto it = std::find(config.modules.begin(), config.modules.end(), module);
    if (it == config.modules.end()) {
        throw Error(ErrorCode::InvalidIndex, "module " + std::string(lm::to_string(module)) + " is not adapted");
    }
    return static_cast<int>(it - config.modules.begin());
}

int embedding_index(const HypernetConfig& config, int layer, int module_index, Matrix matrix, Side side) {
    if (layer < 0 || layer >= config.n_layers || module_index < 0 || module_index >= config.n_modules()) {
        throw Error(ErrorCode::InvalidIndex, "layer " + std::to_string(layer) + " module " +
                                                 std::to_string(module_index) + " outside the embedding table");
    }
    return ((layer * config.n_modules() + module_index) * 2 + static_cast<int>(matrix)) * 2 + static_cast<int>(side);
}

Vec to_vec(const std::vector<float>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

Vec aggregate_prototype(const Vec& v_doc, const std::vector<Vec>& v_support, const HypernetParams& params) {
    if (v_support.empty()) throw Error(ErrorCode::EmptySupport, "prototype needs at least one support vector");
    const int D = static_cast<int>(params.wq.value.rows());
    check_dim(v_doc, D, "v_doc");
    const Vec q = params.wq.value * v_doc;
    std::vector<double> scores;
    for (const auto& s : v_support) {
        check_dim(s, D, "support vector");
        scores.push_back(q.dot(params.wk.value * s) / std::sqrt(static_cast<double>(D)));
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (auto& s : scores) z += (s = std::exp(s - mx));
    Vec out = Vec::Zero(D);
    for (std::size_t i = 0; i < v_support.size(); ++i) out += (scores[i] / z) * (params.wv.value * v_support[i]);
    return out;
}

ContextVectors make_context(Vec v_doc, std::vector<Vec> v_support, const HypernetParams& params) {
    ContextVectors c;
    c.v_proto = aggregate_prototype(v_doc, v_support, params);
    c.v_doc = std::move(v_doc);
    c.v_support = std::move(v_support);
    return c;
}

Vec base_latent(const Vec& v_doc, const Vec& v_proto, const HypernetParams& params) {
    const int D = static_cast<int>(params.w1.value.cols() / 2);
    check_dim(v_doc, D, "v_doc");
    check_dim(v_proto, D, "v_proto");
    Vec x(2 * D);
    x << v_doc, v_proto;
    const Vec h = (params.w1.value * x + params.b1.value.transpose()).array().tanh().matrix();
    return params.w2.value * h + params.b2.value.transpose();
}

Vec latent_for(const Vec& z_base, int layer, AttnModule module, Matrix matrix, Side side,
               const HypernetParams& params, const HypernetConfig& config) {
    const int row = embedding_index(config, layer, module_index(config, module), matrix, side);
    check_dim(z_base, config.z_dim, "z_base");
    return z_base + params.e_layer.value.row(row).transpose();
}

LoraPair generate_lora(const ContextVectors& context, int layer, AttnModule module, const HypernetParams& params,
                       const HypernetConfig& config) {
    if (params.heads[1].w.value.rows() != static_cast<Eigen::Index>(config.f) * config.d_model ||
        params.e_layer.value.rows() != config.embedding_rows()) {
        throw Error(ErrorCode::DimensionMismatch, "hypernetwork parameters do not match the config");
    }
    const Vec z_base = base_latent(context.v_doc, context.v_proto, params);
    ad::Mat factors[4];
    for (int h = 0; h < 4; ++h) {
        const auto matrix = static_cast<Matrix>(h / 2);
        const auto side = static_cast<Side>(h % 2);
        const Vec z = latent_for(z_base, layer, module, matrix, side, params, config);
        const Vec out = params.heads[h].w.value * z + params.heads[h].b.value.transpose();
        const auto [rows, cols] = factor_shape(config, matrix, side);
        factors[h] = reshape_row_major(out, rows, cols);
    }
    LoraPair pair;
    pair.A = factors[0] * factors[1];
    pair.B = factors[2] * factors[3];
    pair.layer = layer;
    pair.module = module;
    return pair;
}

std::vector<LoraPair> generate_all(const ContextVectors& context, const HypernetParams& params,
                                   const HypernetConfig& config) {
    std::vector<LoraPair> out;
    for (int l = 0; l < config.n_layers; ++l) {
        for (auto m : config.modules) out.push_back(generate_lora(context, l, m, params, config));
    }
    return out;
}

Eigen::MatrixXd apply_lora(const Eigen::MatrixXd& w, const LoraPair& pair, double alpha, int r) {
    if (r < 1) throw Error(ErrorCode::InvalidArgument, "rank must be >= 1");
    const auto d_out = w.rows();
    const auto d_in = w.cols();
    if (pair.A.rows() != r || pair.A.cols() != d_in || pair.B.rows() != d_out || pair.B.cols() != r) {
        throw Error(ErrorCode::DimensionMismatch, "LoRA factors do not match the weight shape");
    }
    return w + (alpha / r) * (pair.B * pair.A);
}

std::vector<lm::WeightDelta> to_deltas(const std::vector<LoraPair>& pairs, const HypernetConfig& config) {
    std::vector<lm::WeightDelta> out;
    for (const auto& p : pairs) out.push_back({p.layer, p.module, config.scaling() * (p.B * p.A)});
    return out;
}

std::uint64_t count_params(const HypernetConfig& c, std::uint64_t encoder_params) {
    c.validate();
    using U = std::uint64_t;
    const U D = static_cast<U>(c.doc_dim), Z = static_cast<U>(c.z_dim), H = static_cast<U>(c.hidden);
    const U r = static_cast<U>(c.r), f = static_cast<U>(c.f), d = static_cast<U>(c.d_model);
    const U aggregator = 3 * D * D;
    const U mlp = H * 2 * D + H + Z * H + Z;
    const U table = static_cast<U>(c.embedding_rows()) * Z;
    // Each head maps z to rows*cols outputs with a bias.
    const U heads = (r * f + f * d + d * f + f * r) * (Z + 1);
    return aggregator + mlp + table + heads + encoder_params;
}

std::map<std::pair<int, AttnModule>, TapeLora> forward_lora(ad::Tape& t, HypernetParams& p, const HypernetConfig& config,
                                                             const Vec& v_doc, const std::vector<Vec>& v_support) {
    if (v_support.empty()) throw Error(ErrorCode::EmptySupport, "prototype needs at least one support vector");
    const int D = config.doc_dim;
    check_dim(v_doc, D, "v_doc");
    ad::Mat support(static_cast<Eigen::Index>(v_support.size()), D);
    for (std::size_t i = 0; i < v_support.size(); ++i) {
        check_dim(v_support[i], D, "support vector");
        support.row(static_cast<Eigen::Index>(i)) = v_support[i].transpose();
    }
    auto doc = t.constant(v_doc.transpose());
    auto sup = t.constant(support);
    auto q = ad::matmul_bt(t, doc, t.param(p.wq));
    auto k = ad::matmul_bt(t, sup, t.param(p.wk));
    auto v = ad::matmul_bt(t, sup, t.param(p.wv));
    auto attn = ad::softmax_rows(t, ad::scale(t, ad::matmul_bt(t, q, k), 1.0 / std::sqrt(static_cast<double>(D))));
    auto proto = ad::matmul(t, attn, v);
    auto x = ad::concat_cols(t, {doc, proto});
    auto b1 = t.param(p.b1);
    auto h = ad::tanh(t, ad::linear(t, x, t.param(p.w1), &b1));
    auto b2 = t.param(p.b2);
    auto z_base = ad::linear(t, h, t.param(p.w2), &b2);
    auto table = t.param(p.e_layer);
    ad::Var hw[4], hb[4];
    for (int i = 0; i < 4; ++i) {
        hw[i] = t.param(p.heads[i].w);
        hb[i] = t.param(p.heads[i].b);
    }
    std::map<std::pair<int, AttnModule>, TapeLora> out;
    for (int l = 0; l < config.n_layers; ++l) {
        for (int mi = 0; mi < config.n_modules(); ++mi) {
            ad::Var factors[4];
            for (int i = 0; i < 4; ++i) {
                const auto matrix = static_cast<Matrix>(i / 2);
                const auto side = static_cast<Side>(i % 2);
                auto z = ad::add(t, z_base, ad::slice_rows(t, table, embedding_index(config, l, mi, matrix, side), 1));
                const auto [rows, cols] = factor_shape(config, matrix, side);
                factors[i] = ad::reshape(t, ad::linear(t, z, hw[i], &hb[i]), rows, cols);
            }
            out[{l, config.modules[static_cast<std::size_t>(mi)]}] =
                TapeLora{ad::matmul(t, factors[0], factors[1]), ad::matmul(t, factors[2], factors[3])};
        }
    }
    return out;
}

lm::DeltaVars delta_vars(ad::Tape& t, const std::map<std::pair<int, AttnModule>, TapeLora>& lora,
                         const HypernetConfig& config) {
    lm::DeltaVars out;
    for (const auto& [key, pair] : lora) out[key] = ad::scale(t, ad::matmul(t, pair.B, pair.A), config.scaling());
    return out;
}

std::vector<double> train(HypernetParams& params, const HypernetConfig& config, lm::ToyTransformer& model,
                          const std::vector<BcExample>& examples, const TrainOptions& options) {
    if (examples.empty()) throw Error(ErrorCode::EmptyBatch, "no training examples");
    if (config.d_model != model.config().d_model || config.n_layers > model.config().n_layers) {
        throw Error(ErrorCode::DimensionMismatch, "hypernetwork config does not fit the target model");
    }
    Rng rng(options.seed);
    auto plist = params.list();
    ad::Adam adam(options.lr);
    std::vector<double> losses;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const auto& ex = examples[uniform_index(rng, examples.size())];
        if (ex.tokens.size() < 2 || ex.target_start == 0 || ex.target_start >= ex.tokens.size()) {
            throw Error(ErrorCode::InvalidArgument, "example needs a non-empty prompt and target");
        }
        ad::Tape tape;
        auto lora = forward_lora(tape, params, config, ex.v_doc, ex.v_support);
        auto deltas = delta_vars(tape, lora, config);
        std::vector<int> input(ex.tokens.begin(), ex.tokens.end() - 1);
        std::vector<int> target(input.size(), -1);
        for (std::size_t i = ex.target_start; i < ex.tokens.size(); ++i) target[i - 1] = ex.tokens[i];
        auto loss = ad::cross_entropy_rows(tape, model.forward(tape, input, &deltas), target);
        ad::zero_grads(plist);
        tape.backward(loss);
        if (options.adam) {
            adam.step(plist);
        } else {
            ad::sgd_step(plist, options.lr);
        }
        losses.push_back(loss->value(0, 0));
    }
    return losses;
}

checkpoint::Checkpoint to_checkpoint(const HypernetParams& params, const HypernetConfig& config, std::uint64_t seed) {
    return checkpoint::from_params(params.list(), {{"kind", "hypernet"}, {"config", to_json(config)}, {"seed", seed}});
}

std::pair<HypernetParams, HypernetConfig> from_checkpoint(const checkpoint::Checkpoint& ckpt) {
    if (ckpt.meta.value("kind", "") != "hypernet") throw Error(ErrorCode::ParseError, "not a hypernetwork checkpoint");
    auto config = config_from_json(ckpt.meta.at("config"));
    auto params = init_params(config, ckpt.meta.value("seed", kDefaultSeed));
    checkpoint::restore(params.list(), ckpt);
    return {std::move(params), config};
}

checkpoint::Checkpoint lora_checkpoint(const std::vector<LoraPair>& pairs, const HypernetConfig& config) {
    checkpoint::Checkpoint ckpt;
    ckpt.meta = {{"kind", "lora"}, {"r", config.r}, {"alpha", config.alpha}, {"d_model", config.d_model}};
    for (const auto& p : pairs) {
        const std::string base = "layers." + std::to_string(p.layer) + "." + std::string(lm::to_string(p.module));
        ckpt.put(base + ".A", p.A);
        ckpt.put(base + ".B", p.B);
    }
    return ckpt;
}

}  // namespace metatool::hypernet
