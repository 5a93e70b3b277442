// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

// Small reverse-mode autodiff over dense double matrices.

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace metatool::ad {

using Mat = Eigen::MatrixXd;

/// A trainable tensor: value plus accumulated gradient.
struct Param {
    std::string name;
    Mat value;
    Mat grad;

    Param() = default;
    Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Node {
    Mat value;
    Mat grad;
    std::function<void(Node&)> backward;
    Param* param = nullptr;
    bool requires_grad = false;

    /// Adds `g` into this node's gradient (allocating on first use).
    void accumulate(const Mat& g);
};

using Var = std::shared_ptr<Node>;

/// Records operations in creation order; backward() replays them in reverse.
class Tape {
public:
    Var constant(Mat value);
    /// Leaf bound to `p`; backward() adds into p.grad.
    Var param(Param& p);

    /// Records an op node; `backward` runs only if some input requires a gradient.
    Var record(Mat value, const std::vector<Var>& inputs, std::function<void(Node&)> backward);

    /// Seeds d(out)/d(out) = 1 (out must be 1x1) and propagates.
    void backward(const Var& out);

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Var> nodes_;
};

// All ops record onto the tape that owns their first argument's graph.
Var matmul(Tape& t, const Var& a, const Var& b);          // a * b
Var matmul_bt(Tape& t, const Var& a, const Var& b);       // a * b^T
Var add(Tape& t, const Var& a, const Var& b);
Var sub(Tape& t, const Var& a, const Var& b);
Var mul(Tape& t, const Var& a, const Var& b);             // elementwise
Var scale(Tape& t, const Var& a, double s);
Var add_row(Tape& t, const Var& a, const Var& row);       // broadcast 1xC over rows
Var linear(Tape& t, const Var& x, const Var& w, const Var* b);  // x * w^T (+ b)
Var tanh(Tape& t, const Var& a);
Var sigmoid(Tape& t, const Var& a);
Var gelu(Tape& t, const Var& a);                          // tanh approximation
Var log(Tape& t, const Var& a);
Var square(Tape& t, const Var& a);
Var sum(Tape& t, const Var& a);
Var mean(Tape& t, const Var& a);
Var transpose(Tape& t, const Var& a);
/// Row-major reshape.
Var reshape(Tape& t, const Var& a, Eigen::Index rows, Eigen::Index cols);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var concat_rows(Tape& t, const std::vector<Var>& parts);
Var slice_cols(Tape& t, const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Tape& t, const Var& a, Eigen::Index start, Eigen::Index count);
/// Rows of `table` selected by `ids`.
Var gather_rows(Tape& t, const Var& table, const std::vector<int>& ids);
/// Row-wise softmax; with `causal`, entry (i, j) for j > i + offset is excluded.
Var softmax_rows(Tape& t, const Var& a, bool causal = false, Eigen::Index offset = 0);
Var layer_norm_rows(Tape& t, const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
/// Mean over rows of -log softmax(logits)[row, target[row]]; rows with target < 0 are skipped.
Var cross_entropy_rows(Tape& t, const Var& logits, const std::vector<int>& targets);

/// Row-major flatten/unflatten helpers for checkpoints and finite differences.
std::vector<double> flatten(const std::vector<Param*>& params);
void unflatten(const std::vector<Param*>& params, const std::vector<double>& flat);
std::size_t count(const std::vector<Param*>& params);

/// Max over entries of |a-g| / max(|a|, |g|, atol-floor). Used by gradient checks.
double max_relative_error(const Mat& analytic, const Mat& numeric, double floor = 1e-6);

/// Central finite-difference gradient of `loss` with respect to every parameter entry.
std::vector<Mat> numeric_gradients(const std::vector<Param*>& params, const std::function<double()>& loss,
                                   double h = 1e-5);

/// Plain stochastic gradient descent: value -= lr * grad.
void sgd_step(const std::vector<Param*>& params, double lr);

/// Adam with bias correction; moment buffers are keyed by parameter position.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(const std::vector<Param*>& params);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

void zero_grads(const std::vector<Param*>& params);

/// Gaussian init N(0, std^2) from the portable sampler.
Mat random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::uint64_t seed);

}  // namespace metatool::ad
