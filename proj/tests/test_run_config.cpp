// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "metatool/error.hpp"
#include "metatool/run_config.hpp"

using namespace metatool;
using namespace metatool::harness;

namespace {

const std::filesystem::path kRoot = METATOOL_SOURCE_DIR;

std::string error_of(std::string_view text) {
    try {
        parse_run_config(text, "/base");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        return e.what();
    }
    FAIL("no error thrown");
    return {};
}

}  // namespace

TEST_CASE("defaults describe the full grid") {
    const auto c = parse_run_config("", "/base");
    CHECK(c.backend == "toy");
    CHECK(c.data_dir == std::filesystem::path("/base/data"));
    REQUIRE(c.suites.size() == 4);
    CHECK(c.suites[1] == std::filesystem::path("/base/data/suites/sql.jsonl"));
    CHECK(c.grid().size() == 72);
    CHECK(c.seed == 42);
    CHECK(c.constrained);
    CHECK(c.beam_width == 1);
    CHECK(!c.value_checkpoint);
    CHECK(c.toy.config.n_layers == 4);
    CHECK(c.toy.pretrain_steps == 0);
}

TEST_CASE("values and relative paths") {
    const auto c = parse_run_config(R"(
backend = "ngram"
data = "d"
suites = ["s/a.jsonl", "/abs/b.jsonl"]
seed = 7
beam_width = 4
constrained = false
value_checkpoint = "v.bin"
ngram_order = 3
max_tasks = 10
[grid]
shots = [5]
docs = [false]
hypernet = [true]
noise = [1, 2]
[toy]
layers = 2
d_model = 32
)",
                                    "/base");
    CHECK(c.backend == "ngram");
    CHECK(c.data_dir == std::filesystem::path("/base/d"));
    CHECK(c.suites == std::vector<std::filesystem::path>{"/base/s/a.jsonl", "/abs/b.jsonl"});
    CHECK(c.seed == 7);
    CHECK(c.beam_width == 4);
    CHECK(!c.constrained);
    CHECK(*c.value_checkpoint == std::filesystem::path("/base/v.bin"));
    CHECK(c.ngram_order == 3);
    CHECK(c.max_tasks == 10);
    const auto g = c.grid();
    REQUIRE(g.size() == 2);
    CHECK(g[0].label() == "s5_d0_h1_n1");
    CHECK(g[1].seed == 7);
    CHECK(c.toy.config.n_layers == 2);
    CHECK(c.toy.config.d_model == 32);
    CHECK(c.toy.config.d_ff == 256);
}

TEST_CASE("config errors") {
    CHECK(error_of("colour = 1").find("unknown key 'colour'") != std::string::npos);
    CHECK(error_of("[grid]\nsize = 1").find("unknown key 'grid.size'") != std::string::npos);
    CHECK(error_of("seed = \"x\"").find("'seed' must be a non-negative integer") != std::string::npos);
    CHECK(error_of("seed = -1").find("non-negative") != std::string::npos);
    CHECK(error_of("constrained = 1").find("boolean") != std::string::npos);
    CHECK(error_of("beam_width = 0").find("at least 1") != std::string::npos);
    CHECK(error_of("[grid]\nshots = [6]").find("0..5") != std::string::npos);
    CHECK(error_of("[grid]\nnoise = [3]").find("0..2") != std::string::npos);
    CHECK(error_of("[grid]\ndocs = []").find("non-empty") != std::string::npos);
    CHECK(error_of("[grid]\ndocs = [1]").find("booleans") != std::string::npos);
    CHECK(error_of("grid = 3").find("table") != std::string::npos);
    CHECK(error_of("[toy]\nlayers = 1").find("at least 2") != std::string::npos);
    CHECK(error_of("seed = = 2").find("line 1") != std::string::npos);
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"run.toml", "smoke.toml"}) {
        CAPTURE(name);
        const auto c = load_run_config(kRoot / "configs" / name);
        CHECK(std::filesystem::exists(c.data_dir / "families"));
        for (const auto& s : c.suites) CHECK(std::filesystem::exists(s));
    }
    CHECK(load_run_config(kRoot / "configs/run.toml").grid().size() == 72);
}

TEST_CASE("backend specs") {
    ToySettings toy;
    toy.config = {2, 16, 2, 32, 64};
    auto model = make_backend("toy", toy, 3, 1, kRoot / "data");
    CHECK(model->name().find("toy") != std::string::npos);
    auto ngram = make_backend("ngram", toy, 3, 1, kRoot / "data");
    CHECK(!ngram->tokenize("SELECT").empty());
    CHECK_THROWS_AS(make_backend("gpt", toy, 3, 1, kRoot / "data"), Error);
    CHECK_THROWS_AS(make_backend("bridge:localhost:port", toy, 3, 1, kRoot / "data"), Error);
    const auto hc = hypernet_config_for(toy.config, 384);
    CHECK(hc.d_model == 16);
    CHECK(hc.n_layers == 1);
    CHECK(hc.doc_dim == 384);
}
