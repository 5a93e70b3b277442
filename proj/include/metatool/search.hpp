// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "metatool/fsm.hpp"
#include "metatool/lm.hpp"
#include "metatool/value.hpp"

namespace metatool::search {

/// A finished token sequence proposed by the beam.
struct Candidate {
    std::vector<TokenId> tokens;  // without EOS
    std::string text;
    double logp = 0.0;            // includes the EOS step when hit_eos
    bool hit_eos = false;
};

struct ScoredCandidate {
    std::string action_text;
    double logp = 0.0;
    double v = 0.0;
    double score = 0.0;
};

/// Success-probability estimate for a completed action; must lie in (0, 1].
using ValueFn = std::function<double(std::string_view action)>;

struct BeamOptions {
    std::size_t width = 4;
    std::size_t max_steps = lm::kDefaultMaxNew;
    const fsm::TokenDfa* dfa = nullptr;
};

/// Token-level beam search. Every step ranks all expansions (EOS included) of the live
/// beams by cumulative log-likelihood and keeps the best `width`; EOS expansions leave
/// the beam as candidates. Returns the finished candidates, best first. Throws
/// Error(DeadEnd) when nothing finishes.
std::vector<Candidate> propose(const lm::LmBackend& backend, std::span<const TokenId> prompt,
                               const BeamOptions& options);
std::vector<Candidate> propose(const lm::LmBackend& backend, std::string_view prompt, const BeamOptions& options);

/// score = logp + log v. Throws Error(InvalidArgument) unless 0 < v <= 1.
ScoredCandidate score(const Candidate& candidate, double v);
ScoredCandidate score(const Candidate& candidate, const ValueFn& value);

/// Highest-scoring candidate from propose(); ties go to the lexicographically smallest text.
ScoredCandidate beam_decode(const lm::LmBackend& backend, std::string_view prompt, const ValueFn& value,
                            const BeamOptions& options);

/// V over the successor state (query, action, step 1).
ValueFn value_function(const value::ValueNet& net, value::Embedder embed, std::string query);

/// Constant value function.
ValueFn constant_value(double v);

}  // namespace metatool::search
