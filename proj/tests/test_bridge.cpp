// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "metatool/bridge.hpp"
#include "metatool/error.hpp"
#include "metatool/harness.hpp"
#include "mock_bridge.hpp"

using namespace metatool;
using namespace metatool::bridge;

namespace {

const std::filesystem::path kRoot = METATOOL_SOURCE_DIR;

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("f32 payload encoding") {
    // 1.0f is 00 00 80 3f little-endian; base64 of those bytes is AACAPw==.
    const std::vector<float> one{1.0f};
    CHECK(encode_f32(one) == "AACAPw==");
    // -2.5f = 0xc0200000 -> 00 00 20 c0.
    const std::vector<float> v{1.0f, -2.5f};
    CHECK(encode_f32(v) == "AACAPwAAIMA=");
    const std::vector<float> odd{0.1f, -std::numeric_limits<float>::infinity(), 3.4028235e38f, 1e-45f};
    const auto back = decode_f32(encode_f32(odd));
    REQUIRE(back.size() == odd.size());
    for (std::size_t i = 0; i < odd.size(); ++i) CHECK(std::memcmp(&back[i], &odd[i], 4) == 0);
    CHECK(decode_f32("").empty());
    CHECK(code_of([] { decode_f32("AACA"); }) == ErrorCode::Protocol);  // 3 bytes
    CHECK(code_of([] { decode_f32("not base64!"); }) == ErrorCode::Protocol);
    CHECK(decode_bytes(encode_bytes(std::string("\0\xff<|eot|>", 9))) == std::string("\0\xff<|eot|>", 9));
}

TEST_CASE("bridge client matches the local backend") {
    const auto local = lm::fit_ngram("click[login-btn]\nclick[logout-btn]\nscroll[down]\n", 3);
    mock::BridgeServer server(*local);
    {
        auto remote = BridgeBackend::connect("127.0.0.1", server.port());
        CHECK(remote->name() == "bridge:mock-model");
        CHECK(remote->vocab().size() == local->vocab().size());
        CHECK(remote->embed_dim() == 384);
        CHECK(remote->context_limit() == local->context_limit());

        const auto ids = remote->tokenize("click[");
        CHECK(ids == local->tokenize("click["));
        CHECK(remote->detokenize(ids) == "click[");
        const auto a = remote->logits(ids);
        const auto b = local->next_logits(ids);
        REQUIRE(a.size() == b.size());
        CHECK(std::memcmp(a.data(), b.data(), a.size() * 4) == 0);
        CHECK(remote->embed("hello") == local->embed("hello"));

        // Constrained greedy decoding gives the same text through either backend.
        const auto dfa = fsm::build_token_dfa(fsm::Pattern{"click\\[[a-z-]{1,12}\\]|scroll\\[(up|down)\\]"}, remote->vocab());
        lm::DecodeOptions o;
        o.max_new = 24;
        o.dfa = &dfa;
        const auto r1 = lm::greedy_decode(*remote, std::string_view("click"), o);
        const auto r2 = lm::greedy_decode(*local, std::string_view("click"), o);
        CHECK(r1.text == r2.text);
        CHECK(r1.logprob == r2.logprob);
    }
    server.stop();
}

TEST_CASE("protocol errors keep the connection usable") {
    const auto local = lm::fit_ngram("abcabc", 2);
    mock::BridgeServer server(*local);
    {
        auto remote = BridgeBackend::connect("127.0.0.1", server.port());
        // Unknown token ids are refused by the server; the next request still works.
        CHECK(code_of([&] { remote->detokenize(std::vector<TokenId>{100000}); }) == ErrorCode::Protocol);
        CHECK(remote->detokenize(remote->tokenize("ab")) == "ab");

        server.set_override([](const nlohmann::json& req) -> std::optional<std::string> {
            if (req.value("op", "") != "logits") return std::nullopt;
            nlohmann::json r = {{"v", 1}, {"id", req["id"]}, {"ok", true}, {"logits", encode_f32(std::vector<float>(3, 0.f))}};
            return r.dump();
        });
        CHECK(code_of([&] { remote->logits(std::vector<TokenId>{0}); }) == ErrorCode::Protocol);

        server.set_override([](const nlohmann::json& req) -> std::optional<std::string> {
            nlohmann::json r = {{"v", 1}, {"id", req["id"].get<int>() + 1}, {"ok", true}, {"text", "x"}};
            return r.dump();
        });
        CHECK(code_of([&] { remote->detokenize(std::vector<TokenId>{0}); }) == ErrorCode::Protocol);

        server.set_override([](const nlohmann::json& req) -> std::optional<std::string> {
            nlohmann::json r = {{"v", 2}, {"id", req["id"]}, {"ok", true}, {"text", "x"}};
            return r.dump();
        });
        CHECK(code_of([&] { remote->detokenize(std::vector<TokenId>{0}); }) == ErrorCode::Protocol);

        server.set_override([](const nlohmann::json& req) -> std::optional<std::string> {
            nlohmann::json r = {{"v", 1}, {"id", req["id"]}, {"ok", true}, {"embedding", encode_f32(std::vector<float>(5, 0.f))}};
            return r.dump();
        });
        CHECK(code_of([&] { remote->embed("x"); }) == ErrorCode::Protocol);
        server.set_override({});
        CHECK(remote->embed("x").size() == 384);
    }
    server.stop();
}

TEST_CASE("info validation") {
    nlohmann::json info = {{"vocab_size", 2}, {"eos_id", 1},        {"embed_dim", 384},
                           {"context", 4096}, {"model", "m"},       {"tokens", {encode_bytes("a"), ""}}};
    CHECK(info_from_json(info).tokens == std::vector<std::string>{"a", ""});
    info["vocab_size"] = 3;
    CHECK(code_of([&] { info_from_json(info); }) == ErrorCode::Protocol);
    info["vocab_size"] = 2;
    info["eos_id"] = 2;
    CHECK(code_of([&] { info_from_json(info); }) == ErrorCode::Protocol);
    info.erase("model");
    CHECK(code_of([&] { info_from_json(info); }) == ErrorCode::Protocol);
}

TEST_CASE("unreachable bridge is reported as unavailable") {
    std::uint16_t port = 0;
    {
        // Grab a free port, then close it.
        boost::asio::io_context io;
        boost::asio::ip::tcp::acceptor a(io, {boost::asio::ip::make_address("127.0.0.1"), 0});
        port = a.local_endpoint().port();
    }
    CHECK(code_of([&] { BridgeBackend::connect("127.0.0.1", port, std::chrono::seconds(2)); }) ==
          ErrorCode::BackendUnavailable);
}

TEST_CASE("ten api tasks end to end through the bridge") {
    using namespace metatool::harness;
    const auto assets = load_assets(kRoot / "data");
    auto tasks = load_suite(kRoot / "data/suites/api.jsonl", assets);
    tasks.resize(10);
    std::vector<std::pair<std::string, std::string>> scripts;
    for (const auto& t : tasks) scripts.emplace_back("\n\n" + t.query + "\n\nOutput ONLY", t.gold.at("call").get<std::string>());
    const auto local = lm::ScriptedBackend::forcing_by_key(scripts);
    mock::BridgeServer server(*local);
    {
        std::shared_ptr<const lm::LmBackend> remote = BridgeBackend::connect("127.0.0.1", server.port());
        LmAgent agent(remote, {}, assets);
        RunOptions ro;
        ro.packs_dir = kRoot / "data/families";
        const auto r = run_grid(tasks, {{3, true, false, 0, 42}}, agent, assets, ro);
        REQUIRE(r.cells[0].status == CellStatus::Ok);
        const auto& s = r.cells[0].families.at(Family::Api);
        CHECK(s.tasks == 10);
        CHECK(s.successes == 10);
        CHECK(s.format == 0);
        CHECK(server.requests() > 10);
    }
    server.stop();
}
