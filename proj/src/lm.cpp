// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metatool/error.hpp"
#include "metatool/rng.hpp"

namespace metatool::lm {

namespace {
constexpr float kNegInf = -std::numeric_limits<float>::infinity();
}

std::vector<float> hash_embed(std::string_view text, std::size_t dim) {
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
    std::vector<float> out(dim, 0.0f);
    const std::string padded = "^^" + std::string(text) + "$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        const auto h = fnv1a64(std::string_view(padded).substr(i, 3));
        const float sign = (h >> 63) ? -1.0f : 1.0f;
        out[static_cast<std::size_t>(h % dim)] += sign;
    }
    double norm = 0.0;
    for (float v : out) norm += static_cast<double>(v) * v;
    if (norm > 0.0) {
        const auto inv = static_cast<float>(1.0 / std::sqrt(norm));
        for (auto& v : out) v *= inv;
    }
    return out;
}

void DecodeState::extend(std::span<const TokenId> tokens) {
    for (TokenId t : tokens) push(t);
}

std::vector<float> LmBackend::next_logits(std::span<const TokenId> context) const {
    auto state = start(context);
    auto l = state->logits();
    return {l.begin(), l.end()};
}

void check_tokens(const Vocabulary& vocab, std::span<const TokenId> tokens) {
    for (TokenId t : tokens) {
        if (!vocab.valid(t)) throw Error(ErrorCode::InvalidToken, "token id " + std::to_string(t) + " outside vocabulary");
    }
}

namespace {

// Session for backends whose logits are a pure function of the whole context.
class ContextState final : public DecodeState {
public:
    using Fn = std::function<std::vector<float>(std::span<const TokenId>)>;

    ContextState(const Vocabulary& vocab, Fn fn, std::span<const TokenId> context)
        : vocab_(&vocab), fn_(std::move(fn)), context_(context.begin(), context.end()) {
        check_tokens(vocab, context);
    }

    std::span<const float> logits() const override {
        if (!fresh_) {
            cache_ = fn_(context_);
            fresh_ = true;
        }
        return cache_;
    }
    void push(TokenId token) override {
        check_tokens(*vocab_, std::span<const TokenId>(&token, 1));
        context_.push_back(token);
        fresh_ = false;
    }
    std::size_t length() const override { return context_.size(); }
    void truncate(std::size_t n) override {
        if (n < context_.size()) {
            context_.resize(n);
            fresh_ = false;
        }
    }
    std::unique_ptr<DecodeState> clone() const override { return std::make_unique<ContextState>(*this); }

private:
    const Vocabulary* vocab_;
    Fn fn_;
    std::vector<TokenId> context_;
    mutable std::vector<float> cache_;
    mutable bool fresh_ = false;
};

}  // namespace

NgramBackend::NgramBackend(std::span<const std::string> documents, int order)
    : vocab_(Vocabulary::byte_level()), order_(order) {
    if (order < 1 || order > 5) throw Error(ErrorCode::InvalidArgument, "n-gram order must be in [1,5]");
    std::size_t total_bytes = 0;
    for (const auto& d : documents) total_bytes += d.size();
    if (total_bytes == 0) throw Error(ErrorCode::EmptyCorpus, "n-gram corpus is empty");
    for (const auto& doc : documents) {
        auto ids = vocab_.tokenize(doc);
        ids.push_back(vocab_.eos_id());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            // Count every context length so that short contexts near the start are covered.
            for (int k = 0; k < order_ && static_cast<std::size_t>(k) <= i; ++k) {
                std::vector<TokenId> ctx(ids.begin() + static_cast<std::ptrdiff_t>(i) - k,
                                         ids.begin() + static_cast<std::ptrdiff_t>(i));
                auto& c = table_[ctx];
                ++c.next[ids[i]];
                ++c.total;
            }
        }
    }
}

std::vector<float> NgramBackend::distribution(std::span<const TokenId> context) const {
    const auto v = vocab_.size();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), context.size());
    std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(k), context.end());
    std::vector<float> out(v);
    auto it = table_.find(key);
    const double total = it == table_.end() ? 0.0 : static_cast<double>(it->second.total);
    const double denom = std::log(total + static_cast<double>(v));
    const auto base = static_cast<float>(-denom);
    std::fill(out.begin(), out.end(), base);
    if (it != table_.end()) {
        for (const auto& [tok, count] : it->second.next) {
            out[static_cast<std::size_t>(tok)] = static_cast<float>(std::log(count + 1.0) - denom);
        }
    }
    return out;
}

std::unique_ptr<DecodeState> NgramBackend::start(std::span<const TokenId> context) const {
    return std::make_unique<ContextState>(
        vocab_, [this](std::span<const TokenId> ctx) { return distribution(ctx); }, context);
}

std::unique_ptr<NgramBackend> fit_ngram(std::string_view corpus, int order) {
    std::vector<std::string> docs{std::string(corpus)};
    return std::make_unique<NgramBackend>(docs, order);
}

std::unique_ptr<NgramBackend> fit_ngram(std::span<const std::string> documents, int order) {
    return std::make_unique<NgramBackend>(documents, order);
}

ScriptedBackend::ScriptedBackend(Vocabulary vocab, Rule rule) : vocab_(std::move(vocab)), rule_(std::move(rule)) {
    if (!rule_) throw Error(ErrorCode::InvalidArgument, "scripted backend needs a rule");
}

namespace {

// Next token of `script` given that the context ends with some prefix of it.
TokenId continue_script(std::span<const TokenId> context, const std::vector<TokenId>& script, TokenId eos) {
    for (std::size_t k = std::min(script.size(), context.size()); k > 0; --k) {
        if (std::equal(script.begin(), script.begin() + static_cast<std::ptrdiff_t>(k),
                       context.end() - static_cast<std::ptrdiff_t>(k))) {
            return k < script.size() ? script[k] : eos;
        }
    }
    return script.empty() ? eos : script[0];
}

std::vector<float> one_hot_logits(std::size_t v, TokenId hot) {
    std::vector<float> out(v, kNegInf);
    out[static_cast<std::size_t>(hot)] = 0.0f;
    return out;
}

}  // namespace

std::unique_ptr<ScriptedBackend> ScriptedBackend::forcing(std::string text) {
    auto vocab = Vocabulary::byte_level();
    auto script = vocab.tokenize(text);
    const auto eos = vocab.eos_id();
    const auto v = vocab.size();
    return std::make_unique<ScriptedBackend>(std::move(vocab), [script, eos, v](std::span<const TokenId> ctx) {
        return one_hot_logits(v, continue_script(ctx, script, eos));
    });
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::forcing_by_key(std::vector<std::pair<std::string, std::string>> scripts) {
    auto vocab = Vocabulary::byte_level();
    std::vector<std::pair<std::string, std::vector<TokenId>>> table;
    for (auto& [key, text] : scripts) table.emplace_back(key, vocab.tokenize(text));
    const auto eos = vocab.eos_id();
    const auto v = vocab.size();
    auto copy = vocab;
    return std::make_unique<ScriptedBackend>(std::move(vocab), [table, eos, v, copy](std::span<const TokenId> ctx) {
        const auto text = copy.detokenize(ctx);
        const std::vector<TokenId>* best = nullptr;
        std::size_t best_pos = 0;
        for (const auto& [key, script] : table) {
            const auto pos = text.rfind(key);
            if (pos == std::string::npos) continue;
            if (!best || pos >= best_pos) {
                best = &script;
                best_pos = pos;
            }
        }
        if (!best) return one_hot_logits(v, eos);
        return one_hot_logits(v, continue_script(ctx, *best, eos));
    });
}

std::unique_ptr<DecodeState> ScriptedBackend::start(std::span<const TokenId> context) const {
    return std::make_unique<ContextState>(vocab_, rule_, context);
}

std::vector<double> log_softmax(std::span<const float> logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (float x : logits) mx = std::max(mx, static_cast<double>(x));
    std::vector<double> out(logits.size(), -std::numeric_limits<double>::infinity());
    if (!std::isfinite(mx)) return out;
    double sum = 0.0;
    for (float x : logits) {
        if (std::isfinite(x)) sum += std::exp(static_cast<double>(x) - mx);
    }
    const double lse = mx + std::log(sum);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (std::isfinite(logits[i])) out[i] = static_cast<double>(logits[i]) - lse;
    }
    return out;
}

DecodeResult greedy_continue(const LmBackend& backend, DecodeState& state, const DecodeOptions& options) {
    if (options.max_new == 0) throw Error(ErrorCode::InvalidArgument, "max_new must be >= 1");
    const auto eos = backend.vocab().eos_id();
    DecodeResult result;
    fsm::StateId dfa_state = options.dfa ? options.dfa->start() : fsm::kNoState;
    std::vector<float> masked;
    for (std::size_t step = 0; step < options.max_new; ++step) {
        // The budget counts emitted tokens; a masked decode that spends it ends in an
        // accepting state without an explicit EOS.
        const auto raw = state.logits();
        std::span<const float> view = raw;
        if (options.dfa) {
            masked = fsm::mask_logits(raw, fsm::allowed_tokens(*options.dfa, dfa_state, options.max_new - step));
            view = masked;
        }
        TokenId best = -1;
        float best_value = kNegInf;
        for (std::size_t i = 0; i < view.size(); ++i) {
            if (view[i] > best_value) {
                best_value = view[i];
                best = static_cast<TokenId>(i);
            }
        }
        if (best < 0) {
            throw Error(ErrorCode::DecodeDeadEnd, "no allowed token with finite logit at step " + std::to_string(step));
        }
        if (options.observer) options.observer(step, view, best);
        result.logprob += log_softmax(raw)[static_cast<std::size_t>(best)];
        if (best == eos) {
            result.hit_eos = true;
            break;
        }
        if (options.dfa) dfa_state = *options.dfa->step(dfa_state, best);
        result.tokens.push_back(best);
        state.push(best);
    }
    result.text = backend.detokenize(result.tokens);
    return result;
}

DecodeResult greedy_decode(const LmBackend& backend, std::span<const TokenId> prompt, const DecodeOptions& options) {
    auto state = backend.start(prompt);
    return greedy_continue(backend, *state, options);
}

DecodeResult greedy_decode(const LmBackend& backend, std::string_view prompt, const DecodeOptions& options) {
    const auto ids = backend.tokenize(prompt);
    return greedy_decode(backend, std::span<const TokenId>(ids), options);
}

}  // namespace metatool::lm
