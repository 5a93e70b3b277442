// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/toy_transformer.hpp"

#include <cmath>

#include "metatool/error.hpp"

namespace metatool::lm {

using Eigen::Index;
using MatF = Eigen::MatrixXf;
using RowMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string_view to_string(AttnModule m) {
    switch (m) {
        case AttnModule::Q: return "q_proj";
        case AttnModule::K: return "k_proj";
        case AttnModule::V: return "v_proj";
    }
    return "?";
}

ToyTransformer::ToyTransformer(ToyConfig config, std::uint64_t seed)
    : config_(config), seed_(seed), vocab_(Vocabulary::byte_level()) {
    if (config_.n_layers < 1 || config_.d_model < 1 || config_.n_heads < 1 || config_.d_ff < 1 ||
        config_.max_context < 1) {
        throw Error(ErrorCode::InvalidArgument, "toy transformer dimensions must be positive");
    }
    if (config_.d_model % config_.n_heads != 0) {
        throw Error(ErrorCode::InvalidArgument, "d_model must be divisible by n_heads");
    }
    init(seed);
    refresh();
}

ToyTransformer::ToyTransformer(const ToyTransformer& other) = default;

void ToyTransformer::init(std::uint64_t seed) {
    const Index d = config_.d_model;
    const Index f = config_.d_ff;
    const Index v = static_cast<Index>(vocab_.size());
    const double std_base = 0.02;
    const double std_out = 0.02 / std::sqrt(2.0 * config_.n_layers);
    auto normal = [&](const std::string& name, Index r, Index c, double s) {
        return ad::Param(name, ad::random_normal(r, c, s, derive_seed(seed, name)));
    };
    auto ones = [](const std::string& name, Index c) { return ad::Param(name, ad::Mat::Ones(1, c)); };
    auto zeros = [](const std::string& name, Index r, Index c) { return ad::Param(name, ad::Mat::Zero(r, c)); };
    tok_emb_ = normal("tok_emb", v, d, std_base);
    pos_emb_ = normal("pos_emb", config_.max_context, d, std_base);
    lnf_g_ = ones("lnf_g", d);
    lnf_b_ = zeros("lnf_b", 1, d);
    layers_.clear();
    for (int l = 0; l < config_.n_layers; ++l) {
        const auto p = "layer" + std::to_string(l) + ".";
        Layer L{ones(p + "ln1_g", d),
                zeros(p + "ln1_b", 1, d),
                normal(p + "q_proj", d, d, std_base),
                normal(p + "k_proj", d, d, std_base),
                normal(p + "v_proj", d, d, std_base),
                normal(p + "o_proj", d, d, std_out),
                ones(p + "ln2_g", d),
                zeros(p + "ln2_b", 1, d),
                normal(p + "mlp_in", f, d, std_base),
                zeros(p + "mlp_in_b", 1, f),
                normal(p + "mlp_out", d, f, std_out),
                zeros(p + "mlp_out_b", 1, d)};
        layers_.push_back(std::move(L));
    }
}

std::vector<ad::Param*> ToyTransformer::params() {
    std::vector<ad::Param*> out{&tok_emb_, &pos_emb_, &lnf_g_, &lnf_b_};
    for (auto& L : layers_) {
        for (auto* p : {&L.ln1_g, &L.ln1_b, &L.wq, &L.wk, &L.wv, &L.wo, &L.ln2_g, &L.ln2_b, &L.w1, &L.b1, &L.w2, &L.b2}) {
            out.push_back(p);
        }
    }
    return out;
}

std::vector<const ad::Param*> ToyTransformer::params() const {
    auto mutable_params = const_cast<ToyTransformer*>(this)->params();
    return {mutable_params.begin(), mutable_params.end()};
}

const Eigen::MatrixXd& ToyTransformer::projection(int layer, AttnModule module) const {
    if (layer < 0 || layer >= config_.n_layers) throw Error(ErrorCode::InvalidIndex, "layer out of range");
    const auto& L = layers_[static_cast<std::size_t>(layer)];
    switch (module) {
        case AttnModule::Q: return L.wq.value;
        case AttnModule::K: return L.wk.value;
        case AttnModule::V: return L.wv.value;
    }
    throw Error(ErrorCode::InvalidIndex, "unknown module");
}

std::unique_ptr<ToyTransformer> ToyTransformer::adapted(const std::vector<WeightDelta>& deltas) const {
    auto copy = std::make_unique<ToyTransformer>(*this);
    for (const auto& dw : deltas) {
        const auto& w = projection(dw.layer, dw.module);
        if (dw.delta.rows() != w.rows() || dw.delta.cols() != w.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "weight delta shape differs from the projection");
        }
    }
    copy->deltas_.insert(copy->deltas_.end(), deltas.begin(), deltas.end());
    copy->refresh();
    return copy;
}

void ToyTransformer::refresh() {
    fw_.tok_emb = tok_emb_.value.cast<float>();
    fw_.pos_emb = pos_emb_.value.cast<float>();
    fw_.lnf_g = lnf_g_.value.row(0).cast<float>();
    fw_.lnf_b = lnf_b_.value.row(0).cast<float>();
    fw_.layers.clear();
    for (int l = 0; l < config_.n_layers; ++l) {
        const auto& L = layers_[static_cast<std::size_t>(l)];
        ad::Mat wq = L.wq.value;
        ad::Mat wk = L.wk.value;
        ad::Mat wv = L.wv.value;
        for (const auto& dw : deltas_) {
            if (dw.layer != l) continue;
            if (dw.module == AttnModule::Q) wq += dw.delta;
            if (dw.module == AttnModule::K) wk += dw.delta;
            if (dw.module == AttnModule::V) wv += dw.delta;
        }
        FloatLayer F;
        F.ln1_g = L.ln1_g.value.row(0).cast<float>();
        F.ln1_b = L.ln1_b.value.row(0).cast<float>();
        F.ln2_g = L.ln2_g.value.row(0).cast<float>();
        F.ln2_b = L.ln2_b.value.row(0).cast<float>();
        F.b1 = L.b1.value.row(0).cast<float>();
        F.b2 = L.b2.value.row(0).cast<float>();
        F.wq_t = wq.transpose().cast<float>();
        F.wk_t = wk.transpose().cast<float>();
        F.wv_t = wv.transpose().cast<float>();
        F.wo_t = L.wo.value.transpose().cast<float>();
        F.w1_t = L.w1.value.transpose().cast<float>();
        F.w2_t = L.w2.value.transpose().cast<float>();
        fw_.layers.push_back(std::move(F));
    }
}

namespace {

void layer_norm_rows_f(const MatF& x, const Eigen::RowVectorXf& g, const Eigen::RowVectorXf& b, MatF& out) {
    out.resize(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const float mu = x.row(i).mean();
        const float var = (x.row(i).array() - mu).square().mean();
        const float inv = 1.0f / std::sqrt(var + 1e-5f);
        out.row(i) = ((x.row(i).array() - mu) * inv * g.array() + b.array()).matrix();
    }
}

void gelu_inplace(MatF& x) {
    constexpr float k = 0.7978845608f;
    constexpr float c = 0.044715f;
    x = (0.5f * x.array() * (1.0f + (k * (x.array() + c * x.array().cube())).tanh())).matrix();
}

class ToyState final : public DecodeState {
public:
    ToyState(const ToyTransformer& model, std::span<const TokenId> context)
        : model_(&model),
          d_(model.config().d_model),
          k_cache_(static_cast<std::size_t>(model.config().n_layers)),
          v_cache_(static_cast<std::size_t>(model.config().n_layers)) {
        extend(context);
    }

    std::span<const float> logits() const override {
        if (len_ == 0) throw Error(ErrorCode::InvalidArgument, "toy transformer needs a non-empty context");
        if (!fresh_) {
            const auto& fw = model_->float_weights();
            MatF last = Eigen::Map<const RowMatF>(final_x_.data() + (len_ - 1) * static_cast<std::size_t>(d_), 1, d_);
            MatF normed;
            layer_norm_rows_f(last, fw.lnf_g, fw.lnf_b, normed);
            Eigen::VectorXf z = fw.tok_emb * normed.row(0).transpose();
            logits_.assign(z.data(), z.data() + z.size());
            fresh_ = true;
        }
        return logits_;
    }

    void push(TokenId token) override { extend(std::span<const TokenId>(&token, 1)); }

    void extend(std::span<const TokenId> tokens) override {
        if (tokens.empty()) return;
        check_tokens(model_->vocab(), tokens);
        const auto& cfg = model_->config();
        if (len_ + tokens.size() > static_cast<std::size_t>(cfg.max_context)) {
            throw Error(ErrorCode::ContextOverflow, "context of " + std::to_string(len_ + tokens.size()) +
                                                       " tokens exceeds " + std::to_string(cfg.max_context));
        }
        const auto& fw = model_->float_weights();
        const auto n = static_cast<Index>(tokens.size());
        const auto l0 = static_cast<Index>(len_);
        const Index total = l0 + n;
        const Index dh = d_ / cfg.n_heads;
        const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));

        MatF x(n, d_);
        for (Index i = 0; i < n; ++i) x.row(i) = fw.tok_emb.row(tokens[static_cast<std::size_t>(i)]) + fw.pos_emb.row(l0 + i);

        MatF h, q, k, v, attn(n, d_), scores;
        for (std::size_t l = 0; l < fw.layers.size(); ++l) {
            const auto& F = fw.layers[l];
            layer_norm_rows_f(x, F.ln1_g, F.ln1_b, h);
            q.noalias() = h * F.wq_t;
            k.noalias() = h * F.wk_t;
            v.noalias() = h * F.wv_t;
            append_rows(k_cache_[l], k);
            append_rows(v_cache_[l], v);
            Eigen::Map<const RowMatF> kc(k_cache_[l].data(), total, d_);
            Eigen::Map<const RowMatF> vc(v_cache_[l].data(), total, d_);
            for (Index hd = 0; hd < cfg.n_heads; ++hd) {
                scores.noalias() = q.middleCols(hd * dh, dh) * kc.middleCols(hd * dh, dh).transpose();
                for (Index i = 0; i < n; ++i) {
                    const Index limit = l0 + i + 1;
                    auto row = scores.row(i);
                    row.head(limit) *= inv_sqrt;
                    const float mx = row.head(limit).maxCoeff();
                    row.head(limit) = (row.head(limit).array() - mx).exp().matrix();
                    row.head(limit) /= row.head(limit).sum();
                    if (limit < total) row.tail(total - limit).setZero();
                }
                attn.middleCols(hd * dh, dh).noalias() = scores * vc.middleCols(hd * dh, dh);
            }
            x.noalias() += attn * F.wo_t;
            layer_norm_rows_f(x, F.ln2_g, F.ln2_b, h);
            MatF mid = h * F.w1_t;
            mid.rowwise() += F.b1;
            gelu_inplace(mid);
            MatF out = mid * F.w2_t;
            out.rowwise() += F.b2;
            x += out;
        }
        append_rows(final_x_, x);
        len_ = static_cast<std::size_t>(total);
        fresh_ = false;
    }

    std::size_t length() const override { return len_; }

    void truncate(std::size_t n) override {
        if (n >= len_) return;
        const auto keep = n * static_cast<std::size_t>(d_);
        for (auto& c : k_cache_) c.resize(keep);
        for (auto& c : v_cache_) c.resize(keep);
        final_x_.resize(keep);
        len_ = n;
        fresh_ = false;
    }

    std::unique_ptr<DecodeState> clone() const override { return std::make_unique<ToyState>(*this); }

private:
    static void append_rows(std::vector<float>& buf, const MatF& m) {
        const auto old = buf.size();
        buf.resize(old + static_cast<std::size_t>(m.size()));
        Eigen::Map<RowMatF>(buf.data() + old, m.rows(), m.cols()) = m;
    }

    const ToyTransformer* model_;
    Index d_;
    std::vector<std::vector<float>> k_cache_, v_cache_;
    std::vector<float> final_x_;
    std::size_t len_ = 0;
    mutable std::vector<float> logits_;
    mutable bool fresh_ = false;
};

}  // namespace

std::unique_ptr<DecodeState> ToyTransformer::start(std::span<const TokenId> context) const {
    return std::make_unique<ToyState>(*this, context);
}

ad::Var ToyTransformer::forward(ad::Tape& tape, const std::vector<int>& tokens, const DeltaVars* deltas,
                                bool train_base) {
    const auto T = static_cast<Index>(tokens.size());
    if (T == 0) throw Error(ErrorCode::InvalidArgument, "forward over an empty sequence");
    if (T > config_.max_context) throw Error(ErrorCode::ContextOverflow, "sequence longer than the context window");
    for (int t : tokens) {
        if (!vocab_.valid(t)) throw Error(ErrorCode::InvalidToken, "token id outside vocabulary");
    }
    auto leaf = [&](ad::Param& p) { return train_base ? tape.param(p) : tape.constant(p.value); };
    auto projection_var = [&](ad::Param& p, int layer, AttnModule m) {
        auto w = leaf(p);
        if (deltas) {
            auto it = deltas->find({layer, m});
            if (it != deltas->end()) w = ad::add(tape, w, it->second);
        }
        return w;
    };
    const Index d = config_.d_model;
    const Index dh = d / config_.n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    auto tok = leaf(tok_emb_);
    std::vector<int> positions(tokens.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    auto x = ad::add(tape, ad::gather_rows(tape, tok, tokens), ad::gather_rows(tape, leaf(pos_emb_), positions));
    for (int l = 0; l < config_.n_layers; ++l) {
        auto& L = layers_[static_cast<std::size_t>(l)];
        auto h = ad::layer_norm_rows(tape, x, leaf(L.ln1_g), leaf(L.ln1_b));
        auto q = ad::matmul_bt(tape, h, projection_var(L.wq, l, AttnModule::Q));
        auto k = ad::matmul_bt(tape, h, projection_var(L.wk, l, AttnModule::K));
        auto v = ad::matmul_bt(tape, h, projection_var(L.wv, l, AttnModule::V));
        std::vector<ad::Var> heads;
        for (Index hd = 0; hd < config_.n_heads; ++hd) {
            auto qh = ad::slice_cols(tape, q, hd * dh, dh);
            auto kh = ad::slice_cols(tape, k, hd * dh, dh);
            auto vh = ad::slice_cols(tape, v, hd * dh, dh);
            auto p = ad::softmax_rows(tape, ad::scale(tape, ad::matmul_bt(tape, qh, kh), inv_sqrt), true);
            heads.push_back(ad::matmul(tape, p, vh));
        }
        x = ad::add(tape, x, ad::matmul_bt(tape, ad::concat_cols(tape, heads), leaf(L.wo)));
        auto h2 = ad::layer_norm_rows(tape, x, leaf(L.ln2_g), leaf(L.ln2_b));
        auto b1 = leaf(L.b1);
        auto b2 = leaf(L.b2);
        auto mid = ad::gelu(tape, ad::linear(tape, h2, leaf(L.w1), &b1));
        x = ad::add(tape, x, ad::linear(tape, mid, leaf(L.w2), &b2));
    }
    auto xf = ad::layer_norm_rows(tape, x, leaf(lnf_g_), leaf(lnf_b_));
    return ad::matmul_bt(tape, xf, tok);
}

std::vector<double> train_language_model(ToyTransformer& model, const std::vector<std::string>& documents,
                                         const LmTrainOptions& options) {
    std::vector<int> stream;
    for (const auto& doc : documents) {
        for (unsigned char c : doc) stream.push_back(c);
        stream.push_back(model.vocab().eos_id());
    }
    if (stream.size() < 2) throw Error(ErrorCode::EmptyCorpus, "language-model corpus is empty");
    const std::size_t window = std::min(options.seq_len + 1, stream.size());
    Rng rng(options.seed);
    ad::Adam adam(options.lr);
    auto params = model.params();
    std::vector<double> losses;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const auto start = uniform_index(rng, stream.size() - window + 1);
        std::vector<int> input(stream.begin() + static_cast<std::ptrdiff_t>(start),
                               stream.begin() + static_cast<std::ptrdiff_t>(start + window - 1));
        std::vector<int> target(stream.begin() + static_cast<std::ptrdiff_t>(start + 1),
                                stream.begin() + static_cast<std::ptrdiff_t>(start + window));
        ad::zero_grads(params);
        ad::Tape tape;
        auto logits = model.forward(tape, input, nullptr, true);
        auto loss = ad::cross_entropy_rows(tape, logits, target);
        tape.backward(loss);
        adam.step(params);
        losses.push_back(loss->value(0, 0));
    }
    model.refresh();
    return losses;
}

}  // namespace metatool::lm
