// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metatool/fsm.hpp"
#include "metatool/vocab.hpp"

namespace metatool::lm {

inline constexpr std::size_t kEmbedDim = 384;
inline constexpr std::size_t kDefaultMaxNew = 64;

/// Hashed character-trigram features of "^^" + text + "$", L2-normalised.
std::vector<float> hash_embed(std::string_view text, std::size_t dim = kEmbedDim);

/// Incremental decoding session: a context plus the logits for its next token.
class DecodeState {
public:
    virtual ~DecodeState() = default;

    /// Next-token logits for the current context (size = vocabulary size).
    virtual std::span<const float> logits() const = 0;
    virtual void push(TokenId token) = 0;
    virtual void extend(std::span<const TokenId> tokens);
    virtual std::size_t length() const = 0;
    /// Drops tokens so that `n` remain.
    virtual void truncate(std::size_t n) = 0;
    virtual std::unique_ptr<DecodeState> clone() const = 0;
};

class LmBackend {
public:
    virtual ~LmBackend() = default;

    virtual std::string name() const = 0;
    virtual const Vocabulary& vocab() const = 0;

    virtual std::vector<TokenId> tokenize(std::string_view text) const { return vocab().tokenize(text); }
    virtual std::string detokenize(std::span<const TokenId> ids) const { return vocab().detokenize(ids); }

    /// Starts a session over `context`. Throws Error(InvalidToken) on bad ids.
    virtual std::unique_ptr<DecodeState> start(std::span<const TokenId> context) const = 0;

    std::vector<float> next_logits(std::span<const TokenId> context) const;

    virtual bool has_embed() const { return true; }
    virtual std::vector<float> embed(std::string_view text) const { return hash_embed(text); }
    virtual std::size_t embed_dim() const { return kEmbedDim; }
    /// Maximum context length in tokens.
    virtual std::size_t context_limit() const { return 4096; }
};

/// Throws Error(InvalidToken) unless every id is in the vocabulary.
void check_tokens(const Vocabulary& vocab, std::span<const TokenId> tokens);

/// Byte-level n-gram model with add-one smoothing; logits are log-probabilities.
class NgramBackend final : public LmBackend {
public:
    /// Each document is followed by EOS during counting.
    NgramBackend(std::span<const std::string> documents, int order);

    std::string name() const override { return "ngram"; }
    const Vocabulary& vocab() const override { return vocab_; }
    std::unique_ptr<DecodeState> start(std::span<const TokenId> context) const override;

    int order() const { return order_; }
    /// Log-probabilities of the next token given the last `order-1` tokens of `context`.
    std::vector<float> distribution(std::span<const TokenId> context) const;

private:
    struct Counts {
        std::map<TokenId, std::uint32_t> next;
        std::uint64_t total = 0;
    };
    Vocabulary vocab_;
    int order_;
    std::map<std::vector<TokenId>, Counts> table_;
};

std::unique_ptr<NgramBackend> fit_ngram(std::string_view corpus, int order);
std::unique_ptr<NgramBackend> fit_ngram(std::span<const std::string> documents, int order);

/// Test double whose logits come from a caller-supplied rule over the full context.
class ScriptedBackend final : public LmBackend {
public:
    using Rule = std::function<std::vector<float>(std::span<const TokenId>)>;

    ScriptedBackend(Vocabulary vocab, Rule rule);

    /// Forces `text` after any context: the next token continues the longest suffix of the
    /// context that is a prefix of the script (EOS once complete). Other tokens get -inf.
    static std::unique_ptr<ScriptedBackend> forcing(std::string text);

    /// Like `forcing`, but the script is chosen per prompt: the last entry of `scripts`
    /// whose key occurs in the context wins. Contexts matching no key force EOS.
    static std::unique_ptr<ScriptedBackend> forcing_by_key(std::vector<std::pair<std::string, std::string>> scripts);

    std::string name() const override { return "scripted"; }
    const Vocabulary& vocab() const override { return vocab_; }
    std::unique_ptr<DecodeState> start(std::span<const TokenId> context) const override;

    const Rule& rule() const { return rule_; }

private:
    Vocabulary vocab_;
    Rule rule_;
};

/// Called once per decoding step with the (masked) logits and the chosen token.
using StepObserver = std::function<void(std::size_t step, std::span<const float> logits, TokenId chosen)>;

struct DecodeOptions {
    std::size_t max_new = kDefaultMaxNew;
    const fsm::TokenDfa* dfa = nullptr;
    StepObserver observer;
};

struct DecodeResult {
    std::string text;
    std::vector<TokenId> tokens;  // without EOS
    bool hit_eos = false;
    double logprob = 0.0;  // sum of log-softmax of chosen tokens (EOS included)
};

/// Argmax decoding after optional DFA masking. With a DFA the mask is budget-aware, so the
/// output always ends in an accepting state. Throws Error(DecodeDeadEnd) when no allowed
/// token has a finite logit.
DecodeResult greedy_decode(const LmBackend& backend, std::span<const TokenId> prompt, const DecodeOptions& options = {});
DecodeResult greedy_decode(const LmBackend& backend, std::string_view prompt, const DecodeOptions& options = {});

/// Continues an existing session (which is advanced in place).
DecodeResult greedy_continue(const LmBackend& backend, DecodeState& state, const DecodeOptions& options = {});

/// log-softmax in double precision; -inf entries stay -inf.
std::vector<double> log_softmax(std::span<const float> logits);

}  // namespace metatool::lm
