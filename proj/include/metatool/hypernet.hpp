// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "metatool/ad.hpp"
#include "metatool/checkpoint.hpp"
#include "metatool/toy_transformer.hpp"

namespace metatool::hypernet {

using lm::AttnModule;
using Vec = Eigen::VectorXd;

enum class Matrix { A = 0, B = 1 };
enum class Side { Left = 0, Right = 1 };

struct HypernetConfig {
    int d_model = 64;
    int r = 16;
    double alpha = 32.0;
    int f = 64;
    int z_dim = 512;
    int doc_dim = 384;
    int n_layers = 7;
    int hidden = 2048;
    std::vector<AttnModule> modules{AttnModule::Q, AttnModule::K, AttnModule::V};
    // Std of the factor-head weights is init_scale / sqrt(z_dim).
    double init_scale = 0.1;

    /// Throws Error(InvalidArgument) on a non-positive dimension or empty module list.
    void validate() const;
    double scaling() const { return alpha / r; }
    int n_modules() const { return static_cast<int>(modules.size()); }
    /// Number of E_layer rows: layers x modules x {A,B} x {left,right}.
    int embedding_rows() const { return 4 * n_layers * n_modules(); }
};

/// Backbone dimensions used for the reported parameter accounting.
HypernetConfig paper_config();

nlohmann::json to_json(const HypernetConfig& config);
HypernetConfig config_from_json(const nlohmann::json& doc);

struct FactorHead {
    ad::Param w;  // out x z_dim
    ad::Param b;  // 1 x out
};

struct HypernetParams {
    // Prototype aggregator (doc_dim x doc_dim each).
    ad::Param wq, wk, wv;
    // Shared MLP: [v_doc, v_proto] -> hidden -> z_base.
    ad::Param w1, b1, w2, b2;
    ad::Param e_layer;  // embedding_rows x z_dim
    // Indexed by matrix * 2 + side: A-left (r*f), A-right (f*d), B-left (d*f), B-right (f*r).
    FactorHead heads[4];

    std::vector<ad::Param*> list();
    std::vector<const ad::Param*> list() const;
};

HypernetParams init_params(const HypernetConfig& config, std::uint64_t seed);

/// Row of E_layer for (layer, module, matrix, side); throws Error(InvalidIndex).
int embedding_index(const HypernetConfig& config, int layer, int module_index, Matrix matrix, Side side);
int module_index(const HypernetConfig& config, AttnModule module);

/// Output shape (rows, cols) of the factor for (matrix, side).
std::pair<int, int> factor_shape(const HypernetConfig& config, Matrix matrix, Side side);

struct ContextVectors {
    Vec v_doc;
    std::vector<Vec> v_support;
    Vec v_proto;
};

struct LoraPair {
    Eigen::MatrixXd A;  // r x d
    Eigen::MatrixXd B;  // d x r
    int layer = 0;
    AttnModule module = AttnModule::Q;
};

Vec to_vec(const std::vector<float>& v);

/// Scaled dot-product attention with v_doc as the query over the support set.
Vec aggregate_prototype(const Vec& v_doc, const std::vector<Vec>& v_support, const HypernetParams& params);

/// Builds the context (embeddings plus prototype).
ContextVectors make_context(Vec v_doc, std::vector<Vec> v_support, const HypernetParams& params);

Vec base_latent(const Vec& v_doc, const Vec& v_proto, const HypernetParams& params);

Vec latent_for(const Vec& z_base, int layer, AttnModule module, Matrix matrix, Side side,
               const HypernetParams& params, const HypernetConfig& config);

LoraPair generate_lora(const ContextVectors& context, int layer, AttnModule module, const HypernetParams& params,
                       const HypernetConfig& config);

/// One pair per (layer, module) for layers 0..n_layers-1.
std::vector<LoraPair> generate_all(const ContextVectors& context, const HypernetParams& params,
                                   const HypernetConfig& config);

/// W + (alpha / r) * B * A.
Eigen::MatrixXd apply_lora(const Eigen::MatrixXd& w, const LoraPair& pair, double alpha, int r);

/// Scaled updates ready for ToyTransformer::adapted.
std::vector<lm::WeightDelta> to_deltas(const std::vector<LoraPair>& pairs, const HypernetConfig& config);

/// Closed-form learnable-scalar count, plus `encoder_params` for an external encoder.
std::uint64_t count_params(const HypernetConfig& config, std::uint64_t encoder_params = 0);

/// Parameter count of the MiniLM-class sentence encoder used in the accounting.
inline constexpr std::uint64_t kEncoderParams = 22'700'000;

// Differentiable path -----------------------------------------------------------------

struct TapeLora {
    ad::Var A;
    ad::Var B;
};

/// Records the full generation on `tape` and returns factors keyed by (layer, module).
/// Parameters enter as trainable leaves.
std::map<std::pair<int, AttnModule>, TapeLora> forward_lora(ad::Tape& tape, HypernetParams& params,
                                                             const HypernetConfig& config, const Vec& v_doc,
                                                             const std::vector<Vec>& v_support);

/// Scaled deltas (alpha / r) * B * A as tape variables.
lm::DeltaVars delta_vars(ad::Tape& tape, const std::map<std::pair<int, AttnModule>, TapeLora>& lora,
                         const HypernetConfig& config);

// Training -----------------------------------------------------------------------------

/// One behaviour-cloning example: token ids of prompt + target; loss on target positions.
struct BcExample {
    Vec v_doc;
    std::vector<Vec> v_support;
    std::vector<int> tokens;
    std::size_t target_start = 0;
};

struct TrainOptions {
    std::size_t steps = 200;
    double lr = 1e-3;
    bool adam = false;
    std::uint64_t seed = kDefaultSeed;
};

/// Cross-entropy of the adapted (frozen) toy model on target tokens; updates only the
/// hypernetwork. Returns per-step losses.
std::vector<double> train(HypernetParams& params, const HypernetConfig& config, lm::ToyTransformer& model,
                          const std::vector<BcExample>& examples, const TrainOptions& options);

checkpoint::Checkpoint to_checkpoint(const HypernetParams& params, const HypernetConfig& config, std::uint64_t seed);
/// Rebuilds params and config from a checkpoint.
std::pair<HypernetParams, HypernetConfig> from_checkpoint(const checkpoint::Checkpoint& ckpt);

checkpoint::Checkpoint lora_checkpoint(const std::vector<LoraPair>& pairs, const HypernetConfig& config);

}  // namespace metatool::hypernet
