// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "metatool/ad.hpp"
#include "metatool/lm.hpp"

namespace metatool::lm {

struct ToyConfig {
    int n_layers = 8;
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 256;
    int max_context = 4096;
};

enum class AttnModule { Q = 0, K = 1, V = 2 };

std::string_view to_string(AttnModule m);

/// Additive update for one attention projection (already scaled).
struct WeightDelta {
    int layer = 0;
    AttnModule module = AttnModule::Q;
    Eigen::MatrixXd delta;  // d_model x d_model
};

/// Deltas as tape variables, keyed by (layer, module).
using DeltaVars = std::map<std::pair<int, AttnModule>, ad::Var>;

/// Pre-LN decoder-only transformer over the byte vocabulary. Projection weights are
/// stored as d_out x d_in, so y = W x. The unembedding is tied to the token embedding.
class ToyTransformer final : public LmBackend {
public:
    explicit ToyTransformer(ToyConfig config = {}, std::uint64_t seed = kDefaultSeed);
    ToyTransformer(const ToyTransformer& other);
    ToyTransformer& operator=(const ToyTransformer&) = delete;

    std::string name() const override { return "toy"; }
    const Vocabulary& vocab() const override { return vocab_; }
    std::unique_ptr<DecodeState> start(std::span<const TokenId> context) const override;
    std::size_t context_limit() const override { return static_cast<std::size_t>(config_.max_context); }

    const ToyConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<ad::Param*> params();
    std::vector<const ad::Param*> params() const;

    /// Projection weight for (layer, module) before any delta.
    const Eigen::MatrixXd& projection(int layer, AttnModule module) const;

    /// A copy whose inference weights include `deltas` (added to the base weights).
    std::unique_ptr<ToyTransformer> adapted(const std::vector<WeightDelta>& deltas) const;
    const std::vector<WeightDelta>& deltas() const { return deltas_; }

    /// Rebuilds the single-precision inference weights after the parameters change.
    void refresh();

    /// Differentiable forward over `tokens`, returning T x V logits. Base weights enter
    /// as parameters when `train_base` is set and as constants otherwise; `deltas`
    /// (if any) are added to the matching projections. Deltas applied via adapted()
    /// are not included.
    ad::Var forward(ad::Tape& tape, const std::vector<int>& tokens, const DeltaVars* deltas = nullptr,
                    bool train_base = false);

    struct FloatLayer {
        Eigen::RowVectorXf ln1_g, ln1_b, ln2_g, ln2_b, b1, b2;
        Eigen::MatrixXf wq_t, wk_t, wv_t, wo_t, w1_t, w2_t;  // transposed: x_row * w_t
    };
    struct FloatWeights {
        Eigen::MatrixXf tok_emb, pos_emb;
        Eigen::RowVectorXf lnf_g, lnf_b;
        std::vector<FloatLayer> layers;
    };
    const FloatWeights& float_weights() const { return fw_; }

private:
    struct Layer {
        ad::Param ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
    };

    void init(std::uint64_t seed);

    ToyConfig config_;
    std::uint64_t seed_;
    Vocabulary vocab_;
    ad::Param tok_emb_, pos_emb_, lnf_g_, lnf_b_;
    std::vector<Layer> layers_;
    std::vector<WeightDelta> deltas_;
    FloatWeights fw_;
};

struct LmTrainOptions {
    std::size_t steps = 200;
    std::size_t seq_len = 128;
    double lr = 3e-3;
    std::uint64_t seed = kDefaultSeed;
};

/// Next-token training of the base weights on random windows of `documents` (each
/// followed by EOS) with Adam. Returns the per-step losses.
std::vector<double> train_language_model(ToyTransformer& model, const std::vector<std::string>& documents,
                                         const LmTrainOptions& options);

}  // namespace metatool::lm
