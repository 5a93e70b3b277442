// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "metatool/error.hpp"
#include "metatool/fsm.hpp"
#include "metatool/lm.hpp"
#include "metatool/toy_transformer.hpp"

using namespace metatool;
using namespace metatool::lm;

namespace {

fsm::TokenDfa enum_dfa(const std::string& tool) {
    schema::ToolSchema s;
    s.tool_name = tool;
    schema::ParamSpec q;
    q.name = "q";
    q.kind = schema::ParamKind::Enum;
    q.enum_values = {"a", "b"};
    s.params = {q};
    return fsm::build_token_dfa(fsm::compile_schema(s), Vocabulary::byte_level());
}

ToyConfig small_config() {
    ToyConfig c;
    c.n_layers = 2;
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ff = 32;
    c.max_context = 64;
    return c;
}

}  // namespace

TEST_CASE("vocabulary round trip over random byte strings") {
    auto vocab = Vocabulary::byte_level();
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        std::string s(uniform_index(rng, 40), '\0');
        for (auto& c : s) c = static_cast<char>(uniform_index(rng, 256));
        CHECK(vocab.detokenize(vocab.tokenize(s)) == s);
    }
    Vocabulary multi({"a", "b", "ab", "abc", "<eos>"}, 4);
    CHECK(multi.tokenize("abcab") == std::vector<TokenId>{3, 2});
    CHECK(multi.detokenize(multi.tokenize("abcab")) == "abcab");
    CHECK_THROWS_AS(multi.tokenize("x"), Error);
}

TEST_CASE("bigram counts favour the observed continuation") {
    auto lm = fit_ngram("ababab", 2);
    const std::vector<TokenId> ctx{'a'};
    auto logits = lm->next_logits(ctx);
    CHECK(logits.size() == 257);
    CHECK(logits['b'] > logits['a']);
    // Hand count: after 'a' the bigram table holds b:3, so P(b|a) = (3+1)/(3+257).
    CHECK(std::exp(logits['b']) == doctest::Approx(4.0 / 260.0));
    CHECK(std::exp(logits['a']) == doctest::Approx(1.0 / 260.0));
}

TEST_CASE("unigram logits ignore context and empty context gives unigram") {
    auto uni = fit_ngram("hello world", 1);
    const std::vector<TokenId> a{'h'};
    const std::vector<TokenId> b{'x', 'y'};
    CHECK(uni->next_logits(a) == uni->next_logits(b));
    auto tri = fit_ngram("hello world", 3);
    const std::vector<TokenId> empty;
    auto l = tri->next_logits(empty);
    // 11 bytes + EOS = 12 unigram events.
    CHECK(std::exp(l['l']) == doctest::Approx(4.0 / (12.0 + 257.0)));
    CHECK(fit_ngram("abc", 3)->next_logits(a) == fit_ngram("abc", 3)->next_logits(a));
}

TEST_CASE("n-gram errors") {
    try {
        fit_ngram("", 2);
        FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyCorpus);
    }
    CHECK_THROWS_AS(fit_ngram("abc", 0), Error);
    auto lm = fit_ngram("abc", 2);
    const std::vector<TokenId> bad{999};
    try {
        lm->next_logits(bad);
        FAIL("expected InvalidToken");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidToken);
    }
}

TEST_CASE("scripted backend forces its text") {
    auto lm = ScriptedBackend::forcing("f(q='a')");
    auto out = greedy_decode(*lm, std::string_view("prompt: "));
    CHECK(out.text == "f(q='a')");
    CHECK(out.hit_eos);
    auto dfa = enum_dfa("f");
    DecodeOptions opts;
    opts.dfa = &dfa;
    CHECK(greedy_decode(*lm, std::string_view("prompt: "), opts).text == "f(q='a')");
}

TEST_CASE("mismatching DFA dead-ends the scripted decode") {
    auto lm = ScriptedBackend::forcing("f(q='a')");
    auto dfa = enum_dfa("g");
    DecodeOptions opts;
    opts.dfa = &dfa;
    try {
        greedy_decode(*lm, std::string_view("prompt: "), opts);
        FAIL("expected DecodeDeadEnd");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DecodeDeadEnd);
    }
}

TEST_CASE("masked greedy never picks a -inf logit and ends accepted") {
    auto lm = fit_ngram("g(q='b') f(q='a') hello there f(q='b')", 3);
    auto dfa = enum_dfa("f");
    Rng rng(42);
    for (int task = 0; task < 1000; ++task) {
        std::string prompt(1 + uniform_index(rng, 12), ' ');
        for (auto& c : prompt) c = static_cast<char>('a' + uniform_index(rng, 26));
        DecodeOptions opts;
        opts.dfa = &dfa;
        opts.max_new = 8 + uniform_index(rng, 8);
        opts.observer = [](std::size_t, std::span<const float> logits, TokenId chosen) {
            REQUIRE(std::isfinite(logits[static_cast<std::size_t>(chosen)]));
        };
        auto out = greedy_decode(*lm, std::string_view(prompt), opts);
        auto parsed = schema::parse_call(out.text);
        REQUIRE(parsed);
        CHECK((out.text == "f(q='a')" || out.text == "f(q='b')"));
    }
}

TEST_CASE("permissive mask matches unmasked decoding") {
    auto lm = fit_ngram("the quick brown fox jumps over the lazy dog", 4);
    // Accept everything: any byte string.
    auto dfa = fsm::build_token_dfa(fsm::Pattern{"(.|\\n)*"}, lm->vocab());
    for (const char* prompt : {"the", "qu", "x", "lazy d"}) {
        DecodeOptions plain;
        plain.max_new = 20;
        DecodeOptions masked = plain;
        masked.dfa = &dfa;
        auto a = greedy_decode(*lm, std::string_view(prompt), plain);
        auto b = greedy_decode(*lm, std::string_view(prompt), masked);
        CHECK(a.tokens == b.tokens);
        CHECK(a.logprob == b.logprob);
    }
}

TEST_CASE("hash embedding is normalised and deterministic") {
    auto a = hash_embed("torchvision models");
    auto b = hash_embed("torchvision models");
    CHECK(a.size() == 384);
    CHECK(a == b);
    double n = 0.0;
    for (float x : a) n += static_cast<double>(x) * x;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hash_embed("") != std::vector<float>(384, 0.0f));
}

TEST_CASE("toy transformer is deterministic per seed") {
    ToyTransformer a(small_config(), 42);
    ToyTransformer b(small_config(), 42);
    ToyTransformer c(small_config(), 7);
    const std::vector<TokenId> ctx{'h', 'i', '!'};
    CHECK(a.next_logits(ctx) == b.next_logits(ctx));
    CHECK(a.next_logits(ctx) != c.next_logits(ctx));
    ToyTransformer full;
    CHECK(full.config().n_layers == 8);
    CHECK(full.config().d_model == 64);
    CHECK(full.config().n_heads == 4);
    CHECK(full.projection(0, AttnModule::Q).rows() == 64);
    CHECK(full.projection(7, AttnModule::V).cols() == 64);
}

TEST_CASE("incremental, batched and tape forward passes agree") {
    ToyTransformer model(small_config(), 3);
    const std::vector<TokenId> ctx{'a', 'b', 'c', 'd', 'e', 'f'};
    auto batched = model.start(ctx);
    auto incremental = model.start({});
    for (auto t : ctx) incremental->push(t);
    auto lb = batched->logits();
    auto li = incremental->logits();
    for (std::size_t i = 0; i < lb.size(); ++i) CHECK(lb[i] == doctest::Approx(li[i]).epsilon(1e-4));

    ad::Tape tape;
    std::vector<int> ids(ctx.begin(), ctx.end());
    auto logits = model.forward(tape, ids);
    for (Eigen::Index v = 0; v < 257; ++v) {
        CHECK(logits->value(5, v) == doctest::Approx(lb[static_cast<std::size_t>(v)]).epsilon(1e-4));
    }

    auto fork = batched->clone();
    fork->push('z');
    batched->truncate(3);
    batched->extend(std::vector<TokenId>{'d', 'e', 'f'});
    auto again = batched->logits();
    for (std::size_t i = 0; i < lb.size(); ++i) CHECK(again[i] == doctest::Approx(lb[i]).epsilon(1e-5));
    CHECK(fork->length() == 7);
}

TEST_CASE("weight deltas change inference and match the tape path") {
    ToyTransformer model(small_config(), 5);
    WeightDelta dw{0, AttnModule::V, ad::random_normal(16, 16, 0.5, 9)};
    auto adapted = model.adapted({dw});
    const std::vector<TokenId> ctx{'x', 'y', 'z'};
    CHECK(adapted->next_logits(ctx) != model.next_logits(ctx));
    ad::Tape tape;
    DeltaVars deltas{{{0, AttnModule::V}, tape.constant(dw.delta)}};
    auto logits = model.forward(tape, {'x', 'y', 'z'}, &deltas);
    auto inf = adapted->next_logits(ctx);
    for (Eigen::Index v = 0; v < 257; ++v) {
        CHECK(logits->value(2, v) == doctest::Approx(inf[static_cast<std::size_t>(v)]).epsilon(1e-4));
    }
    auto zero = model.adapted({WeightDelta{1, AttnModule::Q, ad::Mat::Zero(16, 16)}});
    CHECK(zero->next_logits(ctx) == model.next_logits(ctx));
}

TEST_CASE("toy transformer gradients match finite differences") {
    ToyConfig c;
    c.n_layers = 1;
    c.d_model = 4;
    c.n_heads = 2;
    c.d_ff = 8;
    c.max_context = 8;
    ToyTransformer model(c, 11);
    const std::vector<int> input{'a', 'b', 'c'};
    const std::vector<int> target{'b', 'c', 'd'};
    auto params = model.params();
    // Skip the large embedding tables; check every other tensor entry by entry.
    std::vector<ad::Param*> checked(params.begin() + 2, params.end());
    auto loss = [&] {
        ad::Tape t;
        return ad::cross_entropy_rows(t, model.forward(t, input, nullptr, true), target)->value(0, 0);
    };
    ad::zero_grads(params);
    ad::Tape tape;
    auto l = ad::cross_entropy_rows(tape, model.forward(tape, input, nullptr, true), target);
    tape.backward(l);
    auto numeric = ad::numeric_gradients(checked, loss);
    for (std::size_t i = 0; i < checked.size(); ++i) {
        CAPTURE(checked[i]->name);
        CHECK(ad::max_relative_error(checked[i]->grad, numeric[i], 1e-7) < 1e-3);
    }
}

TEST_CASE("language-model training lowers the loss") {
    ToyTransformer model(small_config(), 1);
    LmTrainOptions opts;
    opts.steps = 60;
    opts.seq_len = 24;
    opts.lr = 1e-2;
    auto losses = train_language_model(model, {"f(q='a') f(q='b') f(q='a') f(q='b')"}, opts);
    double head = 0.0;
    double tail = 0.0;
    for (int i = 0; i < 10; ++i) {
        head += losses[static_cast<std::size_t>(i)];
        tail += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
    }
    CHECK(tail < head * 0.6);
}

TEST_CASE("context overflow is reported") {
    ToyTransformer model(small_config(), 1);
    std::vector<TokenId> ctx(65, 'a');
    try {
        model.start(ctx);
        FAIL("expected ContextOverflow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ContextOverflow);
    }
}
