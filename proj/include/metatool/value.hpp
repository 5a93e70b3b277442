// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "metatool/ad.hpp"
#include "metatool/checkpoint.hpp"
#include "metatool/rng.hpp"
#include "metatool/schema.hpp"

namespace metatool::value {

using Vec = Eigen::VectorXd;

struct Transition {
    Vec s;
    int a = 0;
    double r = 0.0;
    Vec s_next;
    bool terminal = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    /// Appends; evicts the oldest item once full.
    void push(Transition t);
    /// `n` draws with replacement; throws Error(EmptyBatch) when the buffer is empty.
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<Transition>& items() const { return items_; }

private:
    std::size_t capacity_;
    std::deque<Transition> items_;
};

struct ValueConfig {
    int input_dim = 769;
    // Width of the tanh hidden layer; 0 gives a linear logit.
    int hidden = 64;
    double gamma = 0.99;
    std::size_t sync_every = 100;
};

/// V(s) = sigmoid(MLP(s)) with a hard-synced target copy.
class ValueNet {
public:
    ValueNet(ValueConfig config, std::uint64_t seed);

    const ValueConfig& config() const { return config_; }

    /// Throws Error(DimensionMismatch) on a wrong feature size.
    double predict(const Vec& s) const;
    double predict_target(const Vec& s) const;

    /// Mean squared TD error before the step; targets use the target net and are not
    /// differentiated. Terminal transitions use target = r.
    double td_update(const std::vector<Transition>& batch, double step_size);

    /// Loss on `tape` with the online weights as trainable leaves.
    ad::Var td_loss(ad::Tape& tape, const std::vector<Transition>& batch);

    void sync_target();
    std::size_t updates() const { return updates_; }

    std::vector<ad::Param*> params();
    std::vector<const ad::Param*> params() const;
    std::vector<const ad::Param*> target_params() const;
    /// FNV-1a over the raw target weights.
    std::uint64_t target_hash() const;

    checkpoint::Checkpoint to_checkpoint(std::uint64_t seed) const;
    static ValueNet from_checkpoint(const checkpoint::Checkpoint& ckpt);

private:
    struct Weights {
        ad::Param w1, b1, w2, b2;
    };
    static double forward(const Weights& w, const ValueConfig& c, const Vec& s);
    void check_input(const Vec& s) const;
    std::vector<ad::Param*> list(Weights& w);

    ValueConfig config_;
    Weights online_;
    Weights target_;
    std::size_t updates_ = 0;
};

using Embedder = std::function<std::vector<float>(std::string_view)>;

/// concat(embed(query), embed(partial call), step / max_steps).
Vec state_features(const Embedder& embed, std::string_view query, std::string_view partial, std::size_t step,
                   std::size_t max_steps);

/// Episode steps: s0 = (query, "", 0) -> s1 = (query, call, 1) with reward 0, then a
/// terminal step from s1 carrying the episode reward.
inline constexpr std::size_t kEpisodeSteps = 2;

std::vector<Transition> episode_transitions(const Embedder& embed, const schema::SyntheticEpisode& episode);

struct TrainOptions {
    std::size_t updates = 2000;
    std::size_t batch = 32;
    double step_size = 0.05;
    std::size_t capacity = 100000;
    std::uint64_t seed = kDefaultSeed;
};

std::vector<double> train(ValueNet& net, const std::vector<Transition>& transitions, const TrainOptions& options);

}  // namespace metatool::value
