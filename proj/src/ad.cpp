// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/ad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metatool/error.hpp"
#include "metatool/rng.hpp"

namespace metatool::ad {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
                                                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                                      "x" + std::to_string(b.cols()));
    }
}

void backprop(const Var& v, const Mat& g) {
    if (v->requires_grad) v->accumulate(g);
}

}  // namespace

void Node::accumulate(const Mat& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

Var Tape::constant(Mat value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    nodes_.push_back(n);
    return n;
}

Var Tape::param(Param& p) {
    auto n = std::make_shared<Node>();
    n->value = p.value;
    n->param = &p;
    n->requires_grad = true;
    nodes_.push_back(n);
    return n;
}

Var Tape::record(Mat value, const std::vector<Var>& inputs, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v->requires_grad; });
    if (n->requires_grad) n->backward = std::move(backward);
    nodes_.push_back(n);
    return n;
}

void Tape::backward(const Var& out) {
    if (out->value.size() != 1) throw Error(ErrorCode::DimensionMismatch, "backward needs a scalar output");
    out->grad = Mat::Ones(1, 1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.size() == 0) continue;
        if (n.backward) n.backward(n);
        if (n.param) {
            if (n.param->grad.size() == 0) n.param->grad = Mat::Zero(n.value.rows(), n.value.cols());
            n.param->grad += n.grad;
        }
    }
}

Var matmul(Tape& t, const Var& a, const Var& b) {
    if (a->value.cols() != b->value.rows()) throw Error(ErrorCode::DimensionMismatch, "matmul inner dims differ");
    return t.record(a->value * b->value, {a, b}, [a, b](Node& n) {
        backprop(a, n.grad * b->value.transpose());
        backprop(b, a->value.transpose() * n.grad);
    });
}

Var matmul_bt(Tape& t, const Var& a, const Var& b) {
    if (a->value.cols() != b->value.cols()) throw Error(ErrorCode::DimensionMismatch, "matmul_bt inner dims differ");
    return t.record(a->value * b->value.transpose(), {a, b}, [a, b](Node& n) {
        backprop(a, n.grad * b->value);
        backprop(b, n.grad.transpose() * a->value);
    });
}

Var add(Tape& t, const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    return t.record(a->value + b->value, {a, b}, [a, b](Node& n) {
        backprop(a, n.grad);
        backprop(b, n.grad);
    });
}

Var sub(Tape& t, const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "sub");
    return t.record(a->value - b->value, {a, b}, [a, b](Node& n) {
        backprop(a, n.grad);
        backprop(b, -n.grad);
    });
}

Var mul(Tape& t, const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "mul");
    return t.record(a->value.cwiseProduct(b->value), {a, b}, [a, b](Node& n) {
        backprop(a, n.grad.cwiseProduct(b->value));
        backprop(b, n.grad.cwiseProduct(a->value));
    });
}

Var scale(Tape& t, const Var& a, double s) {
    return t.record(a->value * s, {a}, [a, s](Node& n) { backprop(a, n.grad * s); });
}

Var add_row(Tape& t, const Var& a, const Var& row) {
    if (row->value.rows() != 1 || row->value.cols() != a->value.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "add_row expects a 1xC row");
    }
    Mat v = a->value.rowwise() + row->value.row(0);
    return t.record(std::move(v), {a, row}, [a, row](Node& n) {
        backprop(a, n.grad);
        backprop(row, n.grad.colwise().sum());
    });
}

Var linear(Tape& t, const Var& x, const Var& w, const Var* b) {
    auto y = matmul_bt(t, x, w);
    return b ? add_row(t, y, *b) : y;
}

Var tanh(Tape& t, const Var& a) {
    Mat v = a->value.array().tanh().matrix();
    return t.record(v, {a}, [a](Node& n) {
        backprop(a, n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix()));
    });
}

Var sigmoid(Tape& t, const Var& a) {
    Mat v = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
    return t.record(v, {a}, [a](Node& n) {
        backprop(a, n.grad.cwiseProduct((n.value.array() * (1.0 - n.value.array())).matrix()));
    });
}

namespace {
constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC = 0.044715;
}  // namespace

Var gelu(Tape& t, const Var& a) {
    const auto& x = a->value.array();
    Mat v = (0.5 * x * (1.0 + (kGeluK * (x + kGeluC * x.cube())).tanh())).matrix();
    return t.record(v, {a}, [a](Node& n) {
        const auto& x = a->value.array();
        const auto th = (kGeluK * (x + kGeluC * x.cube())).tanh();
        const auto d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th.square()) * kGeluK * (1.0 + 3.0 * kGeluC * x.square());
        backprop(a, n.grad.cwiseProduct(d.matrix()));
    });
}

Var log(Tape& t, const Var& a) {
    return t.record(a->value.array().log().matrix(), {a},
                    [a](Node& n) { backprop(a, n.grad.cwiseQuotient(a->value)); });
}

Var square(Tape& t, const Var& a) {
    return t.record(a->value.array().square().matrix(), {a},
                    [a](Node& n) { backprop(a, 2.0 * n.grad.cwiseProduct(a->value)); });
}

Var sum(Tape& t, const Var& a) {
    Mat v(1, 1);
    v(0, 0) = a->value.sum();
    return t.record(v, {a}, [a](Node& n) {
        backprop(a, Mat::Constant(a->value.rows(), a->value.cols(), n.grad(0, 0)));
    });
}

Var mean(Tape& t, const Var& a) {
    const auto count = static_cast<double>(a->value.size());
    return scale(t, sum(t, a), 1.0 / count);
}

Var transpose(Tape& t, const Var& a) {
    return t.record(a->value.transpose(), {a}, [a](Node& n) { backprop(a, n.grad.transpose()); });
}

namespace {

Mat reshape_row_major(const Mat& m, Eigen::Index rows, Eigen::Index cols) {
    Mat out(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j, ++k) out(k / cols, k % cols) = m(i, j);
    }
    return out;
}

}  // namespace

Var reshape(Tape& t, const Var& a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a->value.size()) throw Error(ErrorCode::DimensionMismatch, "reshape changes element count");
    const auto r0 = a->value.rows();
    const auto c0 = a->value.cols();
    return t.record(reshape_row_major(a->value, rows, cols), {a},
                    [a, r0, c0](Node& n) { backprop(a, reshape_row_major(n.grad, r0, c0)); });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat of nothing");
    const auto rows = parts[0]->value.rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p->value.rows() != rows) throw Error(ErrorCode::DimensionMismatch, "concat_cols row mismatch");
        cols += p->value.cols();
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p->value.cols()) = p->value;
        at += p->value.cols();
    }
    return t.record(std::move(v), parts, [parts](Node& n) {
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            backprop(p, n.grad.middleCols(at, p->value.cols()));
            at += p->value.cols();
        }
    });
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat of nothing");
    const auto cols = parts[0]->value.cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p->value.cols() != cols) throw Error(ErrorCode::DimensionMismatch, "concat_rows column mismatch");
        rows += p->value.rows();
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p->value.rows()) = p->value;
        at += p->value.rows();
    }
    return t.record(std::move(v), parts, [parts](Node& n) {
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            backprop(p, n.grad.middleRows(at, p->value.rows()));
            at += p->value.rows();
        }
    });
}

Var slice_cols(Tape& t, const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || start + count > a->value.cols()) throw Error(ErrorCode::DimensionMismatch, "slice_cols out of range");
    return t.record(a->value.middleCols(start, count), {a}, [a, start, count](Node& n) {
        Mat g = Mat::Zero(a->value.rows(), a->value.cols());
        g.middleCols(start, count) = n.grad;
        backprop(a, g);
    });
}

Var slice_rows(Tape& t, const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || start + count > a->value.rows()) throw Error(ErrorCode::DimensionMismatch, "slice_rows out of range");
    return t.record(a->value.middleRows(start, count), {a}, [a, start, count](Node& n) {
        Mat g = Mat::Zero(a->value.rows(), a->value.cols());
        g.middleRows(start, count) = n.grad;
        backprop(a, g);
    });
}

Var gather_rows(Tape& t, const Var& table, const std::vector<int>& ids) {
    Mat v(static_cast<Eigen::Index>(ids.size()), table->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table->value.rows()) throw Error(ErrorCode::InvalidIndex, "gather row out of range");
        v.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
    }
    return t.record(std::move(v), {table}, [table, ids](Node& n) {
        Mat g = Mat::Zero(table->value.rows(), table->value.cols());
        for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
        backprop(table, g);
    });
}

Var softmax_rows(Tape& t, const Var& a, bool causal, Eigen::Index offset) {
    const auto& x = a->value;
    Mat y = Mat::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::Index limit = causal ? std::min<Eigen::Index>(x.cols(), i + offset + 1) : x.cols();
        if (limit <= 0) continue;
        const double mx = x.row(i).head(limit).maxCoeff();
        double s = 0.0;
        for (Eigen::Index j = 0; j < limit; ++j) {
            y(i, j) = std::exp(x(i, j) - mx);
            s += y(i, j);
        }
        y.row(i).head(limit) /= s;
    }
    return t.record(y, {a}, [a](Node& n) {
        const Mat& y = n.value;
        Mat g = y.cwiseProduct(n.grad);
        const Eigen::VectorXd dots = g.rowwise().sum();
        g -= y.cwiseProduct(dots.replicate(1, y.cols()));
        backprop(a, g);
    });
}

Var layer_norm_rows(Tape& t, const Var& x, const Var& gain, const Var& bias, double eps) {
    const auto rows = x->value.rows();
    const auto cols = x->value.cols();
    if (gain->value.rows() != 1 || gain->value.cols() != cols || bias->value.rows() != 1 || bias->value.cols() != cols) {
        throw Error(ErrorCode::DimensionMismatch, "layer_norm gain/bias must be 1xC");
    }
    Mat xhat(rows, cols);
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mu = x->value.row(i).mean();
        const double var = (x->value.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (x->value.row(i).array() - mu) * inv_std(i);
    }
    Mat y = (xhat.array().rowwise() * gain->value.row(0).array()).matrix();
    y.rowwise() += bias->value.row(0);
    return t.record(std::move(y), {x, gain, bias}, [x, gain, bias, xhat, inv_std](Node& n) {
        const auto cols = static_cast<double>(xhat.cols());
        backprop(bias, n.grad.colwise().sum());
        backprop(gain, n.grad.cwiseProduct(xhat).colwise().sum());
        if (!x->requires_grad) return;
        Mat dxhat = (n.grad.array().rowwise() * gain->value.row(0).array()).matrix();
        Mat dx(xhat.rows(), xhat.cols());
        for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
            const double m1 = dxhat.row(i).sum() / cols;
            const double m2 = dxhat.row(i).dot(xhat.row(i)) / cols;
            dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
        }
        backprop(x, dx);
    });
}

Var cross_entropy_rows(Tape& t, const Var& logits, const std::vector<int>& targets) {
    const auto& z = logits->value;
    if (static_cast<Eigen::Index>(targets.size()) != z.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "one target per logits row required");
    }
    Mat probs(z.rows(), z.cols());
    double total = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double mx = z.row(i).maxCoeff();
        const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
        probs.row(i) = (z.row(i).array() - lse).exp();
        const int tgt = targets[static_cast<std::size_t>(i)];
        if (tgt < 0) continue;
        if (tgt >= z.cols()) throw Error(ErrorCode::InvalidIndex, "target outside vocabulary");
        total -= z(i, tgt) - lse;
        ++counted;
    }
    if (counted == 0) throw Error(ErrorCode::EmptyBatch, "cross entropy over no targets");
    Mat v(1, 1);
    v(0, 0) = total / counted;
    return t.record(v, {logits}, [logits, probs, targets, counted](Node& n) {
        Mat g = probs;
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            const int tgt = targets[static_cast<std::size_t>(i)];
            if (tgt < 0) {
                g.row(i).setZero();
            } else {
                g(i, tgt) -= 1.0;
            }
        }
        backprop(logits, g * (n.grad(0, 0) / counted));
    });
}

std::vector<double> flatten(const std::vector<Param*>& params) {
    std::vector<double> out;
    for (const auto* p : params) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) out.push_back(p->value(i, j));
        }
    }
    return out;
}

void unflatten(const std::vector<Param*>& params, const std::vector<double>& flat) {
    if (flat.size() != count(params)) throw Error(ErrorCode::DimensionMismatch, "flat parameter size mismatch");
    std::size_t k = 0;
    for (auto* p : params) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) p->value(i, j) = flat[k++];
        }
    }
}

std::size_t count(const std::vector<Param*>& params) {
    std::size_t n = 0;
    for (const auto* p : params) n += static_cast<std::size_t>(p->value.size());
    return n;
}

double max_relative_error(const Mat& analytic, const Mat& numeric, double floor) {
    require_same_shape(analytic, numeric, "max_relative_error");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data()[i];
        const double g = numeric.data()[i];
        const double denom = std::max({std::abs(a), std::abs(g), floor});
        worst = std::max(worst, std::abs(a - g) / denom);
    }
    return worst;
}

std::vector<Mat> numeric_gradients(const std::vector<Param*>& params, const std::function<double()>& loss, double h) {
    std::vector<Mat> out;
    for (auto* p : params) {
        Mat g(p->value.rows(), p->value.cols());
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            double& x = p->value.data()[i];
            const double saved = x;
            x = saved + h;
            const double up = loss();
            x = saved - h;
            const double down = loss();
            x = saved;
            g.data()[i] = (up - down) / (2.0 * h);
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace metatool::ad

namespace metatool::ad {

void sgd_step(const std::vector<Param*>& params, double lr) {
    for (auto* p : params) {
        if (p->grad.size() == p->value.size()) p->value -= lr * p->grad;
    }
}

void Adam::step(const std::vector<Param*>& params) {
    if (m_.empty()) {
        for (auto* p : params) {
            m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (m_.size() != params.size()) throw Error(ErrorCode::DimensionMismatch, "Adam parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto* p = params[i];
        if (p->grad.size() != p->value.size()) continue;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p->grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
        p->value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

void zero_grads(const std::vector<Param*>& params) {
    for (auto* p : params) p->zero_grad();
}

Mat random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal_sample(rng, 0.0, stddev);
    }
    return m;
}

}  // namespace metatool::ad
