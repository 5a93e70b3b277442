// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/value.hpp"

#include <cmath>
#include <cstring>

#include "metatool/error.hpp"

namespace metatool::value {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorCode::InvalidArgument, "replay capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
    if (!items_.empty() && (t.s.size() != items_.front().s.size())) {
        throw Error(ErrorCode::DimensionMismatch, "transition feature size differs from the buffer");
    }
    if (t.s.size() != t.s_next.size()) throw Error(ErrorCode::DimensionMismatch, "s and s_next differ in size");
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw Error(ErrorCode::EmptyBatch, "replay buffer is empty");
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[uniform_index(rng, items_.size())]);
    return out;
}

ValueNet::ValueNet(ValueConfig config, std::uint64_t seed) : config_(config) {
    if (config.input_dim < 1 || config.hidden < 0) throw Error(ErrorCode::InvalidArgument, "bad value-net shape");
    if (config.gamma < 0.0 || config.gamma > 1.0) throw Error(ErrorCode::InvalidArgument, "gamma must be in [0,1]");
    if (config.sync_every == 0) throw Error(ErrorCode::InvalidArgument, "sync_every must be >= 1");
    const int in = config.input_dim;
    if (config.hidden > 0) {
        const int h = config.hidden;
        online_.w1 = ad::Param("w1", ad::random_normal(h, in, 1.0 / std::sqrt(in), derive_seed(seed, "value.w1")));
        online_.b1 = ad::Param("b1", ad::Mat::Zero(1, h));
        online_.w2 = ad::Param("w2", ad::random_normal(1, h, 1.0 / std::sqrt(h), derive_seed(seed, "value.w2")));
    } else {
        online_.w2 = ad::Param("w2", ad::Mat::Zero(1, in));
    }
    online_.b2 = ad::Param("b2", ad::Mat::Zero(1, 1));
    target_ = online_;
}

std::vector<ad::Param*> ValueNet::list(Weights& w) {
    if (config_.hidden > 0) return {&w.w1, &w.b1, &w.w2, &w.b2};
    return {&w.w2, &w.b2};
}

std::vector<ad::Param*> ValueNet::params() { return list(online_); }

std::vector<const ad::Param*> ValueNet::params() const {
    auto v = const_cast<ValueNet*>(this)->list(const_cast<Weights&>(online_));
    return {v.begin(), v.end()};
}

std::vector<const ad::Param*> ValueNet::target_params() const {
    auto v = const_cast<ValueNet*>(this)->list(const_cast<Weights&>(target_));
    return {v.begin(), v.end()};
}

void ValueNet::check_input(const Vec& s) const {
    if (s.size() != config_.input_dim) {
        throw Error(ErrorCode::DimensionMismatch, "state has " + std::to_string(s.size()) + " features, expected " +
                                                      std::to_string(config_.input_dim));
    }
}

double ValueNet::forward(const Weights& w, const ValueConfig& c, const Vec& s) {
    if (c.hidden > 0) {
        const Vec h = (w.w1.value * s + w.b1.value.transpose()).array().tanh().matrix();
        return sigmoid((w.w2.value * h)(0, 0) + w.b2.value(0, 0));
    }
    return sigmoid((w.w2.value * s)(0, 0) + w.b2.value(0, 0));
}

double ValueNet::predict(const Vec& s) const {
    check_input(s);
    return forward(online_, config_, s);
}

double ValueNet::predict_target(const Vec& s) const {
    check_input(s);
    return forward(target_, config_, s);
}

ad::Var ValueNet::td_loss(ad::Tape& t, const std::vector<Transition>& batch) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "TD update needs at least one transition");
    const auto n = static_cast<Eigen::Index>(batch.size());
    ad::Mat states(n, config_.input_dim);
    ad::Mat targets(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& tr = batch[static_cast<std::size_t>(i)];
        check_input(tr.s);
        states.row(i) = tr.s.transpose();
        targets(i, 0) = tr.terminal ? tr.r : tr.r + config_.gamma * predict_target(tr.s_next);
    }
    auto x = t.constant(states);
    ad::Var logit;
    auto b2 = t.param(online_.b2);
    if (config_.hidden > 0) {
        auto b1 = t.param(online_.b1);
        auto h = ad::tanh(t, ad::linear(t, x, t.param(online_.w1), &b1));
        logit = ad::linear(t, h, t.param(online_.w2), &b2);
    } else {
        logit = ad::linear(t, x, t.param(online_.w2), &b2);
    }
    return ad::mean(t, ad::square(t, ad::sub(t, t.constant(targets), ad::sigmoid(t, logit))));
}

double ValueNet::td_update(const std::vector<Transition>& batch, double step_size) {
    auto p = params();
    ad::zero_grads(p);
    ad::Tape tape;
    auto loss = td_loss(tape, batch);
    tape.backward(loss);
    ad::sgd_step(p, step_size);
    if (++updates_ % config_.sync_every == 0) sync_target();
    return loss->value(0, 0);
}

void ValueNet::sync_target() { target_ = online_; }

std::uint64_t ValueNet::target_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* p : target_params()) {
        const auto bytes = std::string_view(reinterpret_cast<const char*>(p->value.data()),
                                            static_cast<std::size_t>(p->value.size()) * sizeof(double));
        h = fnv1a64(bytes, h);
    }
    return h;
}

checkpoint::Checkpoint ValueNet::to_checkpoint(std::uint64_t seed) const {
    nlohmann::json meta = {{"kind", "value"},
                           {"seed", seed},
                           {"input_dim", config_.input_dim},
                           {"hidden", config_.hidden},
                           {"gamma", config_.gamma},
                           {"sync_every", config_.sync_every}};
    return checkpoint::from_params(params(), meta);
}

ValueNet ValueNet::from_checkpoint(const checkpoint::Checkpoint& ckpt) {
    if (ckpt.meta.value("kind", "") != "value") throw Error(ErrorCode::ParseError, "not a value-net checkpoint");
    ValueConfig c;
    c.input_dim = ckpt.meta.at("input_dim").get<int>();
    c.hidden = ckpt.meta.at("hidden").get<int>();
    c.gamma = ckpt.meta.at("gamma").get<double>();
    c.sync_every = ckpt.meta.at("sync_every").get<std::size_t>();
    ValueNet net(c, ckpt.meta.value("seed", kDefaultSeed));
    checkpoint::restore(net.params(), ckpt);
    net.sync_target();
    return net;
}

Vec state_features(const Embedder& embed, std::string_view query, std::string_view partial, std::size_t step,
                   std::size_t max_steps) {
    if (max_steps == 0) throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 1");
    const auto q = embed(query);
    const auto p = embed(partial);
    Vec out(static_cast<Eigen::Index>(q.size() + p.size() + 1));
    Eigen::Index i = 0;
    for (float x : q) out(i++) = x;
    for (float x : p) out(i++) = x;
    out(i) = static_cast<double>(step) / static_cast<double>(max_steps);
    return out;
}

std::vector<Transition> episode_transitions(const Embedder& embed, const schema::SyntheticEpisode& episode) {
    const auto& q = episode.base.query;
    const auto call = schema::canonical_text(episode.perturbed_call);
    auto s0 = state_features(embed, q, "", 0, kEpisodeSteps);
    auto s1 = state_features(embed, q, call, 1, kEpisodeSteps);
    auto s2 = state_features(embed, q, call, 2, kEpisodeSteps);
    return {Transition{s0, 0, 0.0, s1, false}, Transition{s1, 1, static_cast<double>(episode.reward), s2, true}};
}

std::vector<double> train(ValueNet& net, const std::vector<Transition>& transitions, const TrainOptions& options) {
    if (transitions.empty()) throw Error(ErrorCode::EmptyBatch, "no transitions to train on");
    ReplayBuffer buffer(options.capacity);
    for (const auto& t : transitions) buffer.push(t);
    Rng rng(options.seed);
    std::vector<double> losses;
    losses.reserve(options.updates);
    for (std::size_t i = 0; i < options.updates; ++i) {
        losses.push_back(net.td_update(buffer.sample(options.batch, rng), options.step_size));
    }
    return losses;
}

}  // namespace metatool::value
