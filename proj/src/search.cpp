// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/search.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>

#include "metatool/error.hpp"

namespace metatool::search {

namespace {

struct Live {
    std::vector<TokenId> tokens;
    double logp = 0.0;
    fsm::StateId dfa_state = fsm::kNoState;
    std::unique_ptr<lm::DecodeState> state;
};

struct Expansion {
    std::size_t parent;
    TokenId token;
    double logp;
};

// Lexicographic comparison of a+[ta] against b+[tb].
bool seq_less(const std::vector<TokenId>& a, TokenId ta, const std::vector<TokenId>& b, TokenId tb) {
    const std::size_t na = a.size() + 1;
    const std::size_t nb = b.size() + 1;
    for (std::size_t i = 0; i < std::min(na, nb); ++i) {
        const TokenId x = i < a.size() ? a[i] : ta;
        const TokenId y = i < b.size() ? b[i] : tb;
        if (x != y) return x < y;
    }
    return na < nb;
}

Candidate finish(const lm::LmBackend& backend, std::vector<TokenId> tokens, double logp, bool hit_eos) {
    Candidate c;
    c.text = backend.detokenize(tokens);
    c.tokens = std::move(tokens);
    c.logp = logp;
    c.hit_eos = hit_eos;
    return c;
}

}  // namespace

std::vector<Candidate> propose(const lm::LmBackend& backend, std::span<const TokenId> prompt,
                               const BeamOptions& options) {
    if (options.width == 0) throw Error(ErrorCode::InvalidArgument, "beam width must be >= 1");
    if (options.max_steps == 0) throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 1");
    const TokenId eos = backend.vocab().eos_id();
    const std::size_t K = options.width;

    std::vector<Live> beams;
    beams.push_back(Live{{}, 0.0, options.dfa ? options.dfa->start() : fsm::kNoState, backend.start(prompt)});
    std::vector<Candidate> finished;

    for (std::size_t step = 0; step < options.max_steps && !beams.empty(); ++step) {
        std::vector<Expansion> expansions;
        for (std::size_t b = 0; b < beams.size(); ++b) {
            const auto raw = beams[b].state->logits();
            const auto lp = lm::log_softmax(raw);
            std::vector<bool> allowed;
            if (options.dfa) {
                allowed = fsm::allowed_tokens(*options.dfa, beams[b].dfa_state, options.max_steps - step).allowed;
            }
            for (std::size_t t = 0; t < lp.size(); ++t) {
                if (options.dfa && !allowed[t]) continue;
                if (!std::isfinite(lp[t])) continue;
                expansions.push_back({b, static_cast<TokenId>(t), beams[b].logp + lp[t]});
            }
        }
        const auto better = [&](const Expansion& x, const Expansion& y) {
            if (x.logp != y.logp) return x.logp > y.logp;
            return seq_less(beams[x.parent].tokens, x.token, beams[y.parent].tokens, y.token);
        };
        const std::size_t keep = std::min(K, expansions.size());
        std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                          better);
        expansions.resize(keep);

        std::vector<Live> next;
        for (const auto& e : expansions) {
            const auto& parent = beams[e.parent];
            if (e.token == eos) {
                finished.push_back(finish(backend, parent.tokens, e.logp, true));
                continue;
            }
            Live child;
            child.tokens = parent.tokens;
            child.tokens.push_back(e.token);
            child.logp = e.logp;
            child.dfa_state = options.dfa ? *options.dfa->step(parent.dfa_state, e.token) : fsm::kNoState;
            child.state = parent.state->clone();
            child.state->push(e.token);
            next.push_back(std::move(child));
        }
        beams = std::move(next);
    }
    // Beams that ran out of budget end here; with a DFA they sit in accepting states.
    for (auto& b : beams) finished.push_back(finish(backend, std::move(b.tokens), b.logp, false));
    if (finished.empty()) throw Error(ErrorCode::DeadEnd, "every beam died before finishing");
    std::stable_sort(finished.begin(), finished.end(), [](const Candidate& a, const Candidate& b) {
        if (a.logp != b.logp) return a.logp > b.logp;
        return a.tokens < b.tokens;
    });
    if (finished.size() > K) finished.resize(K);
    return finished;
}

std::vector<Candidate> propose(const lm::LmBackend& backend, std::string_view prompt, const BeamOptions& options) {
    const auto ids = backend.tokenize(prompt);
    return propose(backend, std::span<const TokenId>(ids), options);
}

ScoredCandidate score(const Candidate& candidate, double v) {
    if (!(v > 0.0) || v > 1.0) throw Error(ErrorCode::InvalidArgument, "value estimate must lie in (0, 1]");
    return ScoredCandidate{candidate.text, candidate.logp, v, candidate.logp + std::log(v)};
}

ScoredCandidate score(const Candidate& candidate, const ValueFn& value) { return score(candidate, value(candidate.text)); }

ScoredCandidate beam_decode(const lm::LmBackend& backend, std::string_view prompt, const ValueFn& value,
                            const BeamOptions& options) {
    const auto candidates = propose(backend, prompt, options);
    std::optional<ScoredCandidate> best;
    for (const auto& c : candidates) {
        auto s = score(c, value);
        if (!best || s.score > best->score || (s.score == best->score && s.action_text < best->action_text)) {
            best = std::move(s);
        }
    }
    return *best;
}

ValueFn value_function(const value::ValueNet& net, value::Embedder embed, std::string query) {
    return [&net, embed = std::move(embed), query = std::move(query)](std::string_view action) {
        return net.predict(value::state_features(embed, query, action, 1, value::kEpisodeSteps));
    };
}

ValueFn constant_value(double v) {
    return [v](std::string_view) { return v; };
}

}  // namespace metatool::search
