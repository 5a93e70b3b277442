// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metatool/schema.hpp"
#include "metatool/vocab.hpp"

namespace metatool::fsm {

using StateId = std::int32_t;
inline constexpr StateId kNoState = -1;
inline constexpr std::size_t kDefaultStateCap = 100000;

/// Regular expression text over bytes. Supported syntax: literals, `\` escapes, `.`,
/// `[...]` / `[^...]` classes, groups, `|`, `?`, `*`, `+`, `{m}`, `{m,}`, `{m,n}`.
struct Pattern {
    std::string regex_text;
};

std::string regex_escape(std::string_view literal);

/// Regex for the decimal renderings of integers in [lo, hi]; with `frac_digits > 0`
/// the value is read as a fixed-point number scaled by 10^frac_digits.
std::string numeric_range_regex(std::int64_t lo, std::int64_t hi, int frac_digits = 0);

struct CompileOptions {
    // Bounds applied to numeric parameters that carry no range.
    std::int64_t implicit_integer_bound = 999999999;
    double implicit_number_bound = 999999.0;
    // Number parameters whose scaled range exceeds this many values are rejected.
    std::int64_t max_number_values = 1000000000000000;
};

/// Pattern whose language is the set of canonical serializations of valid calls.
Pattern compile_schema(const schema::ToolSchema& schema, const CompileOptions& options = {});

/// Alternation of several tool patterns (one call to any of the tools).
Pattern compile_schemas(std::span<const schema::ToolSchema> schemas, const CompileOptions& options = {});

/// Deterministic automaton over bytes; `next[s][b] == kNoState` means no transition.
/// Every state is reachable from `start` and can reach an accepting state (trimmed),
/// except for a lone non-accepting start when the language is empty.
struct ByteDfa {
    std::vector<std::array<StateId, 256>> next;
    std::vector<bool> accepting;
    StateId start = 0;

    std::size_t size() const { return next.size(); }
    bool empty_language() const;
    bool matches(std::string_view text) const;
};

ByteDfa compile_regex(std::string_view regex, std::size_t state_cap = kDefaultStateCap);

struct TokenDfaOptions {
    std::size_t state_cap = kDefaultStateCap;
};

/// Automaton over token ids. EOS is legal exactly in accepting states and leads to
/// `finished`, an accepting state with no outgoing transitions.
class TokenDfa {
public:
    StateId start() const { return start_; }
    StateId finished() const { return finished_; }
    std::size_t num_states() const { return transitions_.size(); }
    std::size_t vocab_size() const { return vocab_size_; }
    TokenId eos_id() const { return eos_; }
    bool is_accepting(StateId s) const;
    bool dead_language() const { return dead_language_; }
    const std::vector<std::pair<TokenId, StateId>>& transitions(StateId s) const;

    /// Minimum number of tokens from `s` to an accepting state (0 when accepting).
    std::uint32_t distance_to_accept(StateId s) const;

    /// Successor state, or nullopt for a violating token. Throws Error(InvalidState).
    std::optional<StateId> step(StateId state, TokenId token) const;

    /// Runs a whole token sequence from start; nullopt on violation.
    std::optional<StateId> run(std::span<const TokenId> tokens) const;
    bool accepts(std::span<const TokenId> tokens) const;

    std::string to_dot(const Vocabulary& vocab) const;

private:
    friend TokenDfa build_token_dfa(const Pattern&, const Vocabulary&, const TokenDfaOptions&);
    friend TokenDfa build_token_dfa(const ByteDfa&, const Vocabulary&, const TokenDfaOptions&);

    std::vector<std::vector<std::pair<TokenId, StateId>>> transitions_;
    std::vector<bool> accepting_;
    std::vector<std::uint32_t> distance_;
    StateId start_ = 0;
    StateId finished_ = 0;
    TokenId eos_ = 0;
    std::size_t vocab_size_ = 0;
    bool dead_language_ = false;
};

TokenDfa build_token_dfa(const Pattern& pattern, const Vocabulary& vocab, const TokenDfaOptions& options = {});
TokenDfa build_token_dfa(const ByteDfa& bytes, const Vocabulary& vocab, const TokenDfaOptions& options = {});

/// Allowed-token bitset for one automaton state.
struct TokenMask {
    std::vector<bool> allowed;

    std::size_t count() const;
    static TokenMask all(std::size_t vocab_size);
};

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Tokens legal in `state`. `remaining` counts non-EOS tokens still allowed; tokens
/// after which no accepting state is reachable within that budget are excluded.
/// EOS never consumes budget.
TokenMask allowed_tokens(const TokenDfa& dfa, StateId state, std::size_t remaining = kUnlimited);

/// Disallowed entries become -inf; allowed entries are copied bit for bit.
std::vector<float> mask_logits(std::span<const float> logits, const TokenMask& mask);

/// All strings of the automaton's language with at most `max_len` bytes, sorted.
/// Throws Error(InvalidArgument) past `limit` strings.
std::vector<std::string> enumerate_language(const ByteDfa& dfa, std::size_t max_len, std::size_t limit = 1000000);

}  // namespace metatool::fsm
