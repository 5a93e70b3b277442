// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "metatool/error.hpp"
#include "metatool/prompts.hpp"
#include "metatool/schema.hpp"
#include "metatool/schema_io.hpp"

using namespace metatool;
using namespace metatool::prompts;

namespace {

const std::filesystem::path kRoot = METATOOL_SOURCE_DIR;

std::string golden_query(Family f) {
    switch (f) {
        case Family::Api: return "Load MobileNet for efficient image classification";
        case Family::Sql: return "Find departments with total salary exceeding 500000";
        case Family::Nav: return "Add the first product to the shopping cart";
        case Family::Bash: return "Search for the word \"error\" in all log files";
    }
    return {};
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::InvalidArgument;
}

const FormatCheck kCanonical = [](std::string_view t) { return schema::is_canonical_call(t); };

}  // namespace

TEST_CASE("build matches the golden prompt files byte for byte") {
    for (auto f : kFamilies) {
        const auto pack = load_pack(kRoot / "data/families", f);
        REQUIRE(pack.examples.size() == 5);
        for (std::size_t shots : {3, 5}) {
            for (bool docs : {true, false}) {
                const auto name = std::string(to_string(f)) + "_" + std::to_string(shots) + "shot_docs_" +
                                  (docs ? "on" : "off") + ".txt";
                CAPTURE(name);
                const auto want = schema::read_file(kRoot / "fixtures/prompts" / name);
                const auto got = build(make_spec(pack, golden_query(f), shots, docs));
                CHECK(got == want);
            }
        }
    }
}

TEST_CASE("prompt layout details") {
    const auto pack = load_pack(kRoot / "data/families", Family::Api);
    auto spec = make_spec(pack, "q", 0, false);
    const auto bare = build(spec);
    CHECK(bare ==
          "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\n"
          "Output ONLY the code. No imports, no explanations.\n"
          "<|eot_id|><|start_header_id|>user<|end_header_id|>\n\n"
          "q\n\nOutput ONLY the exact code needed, nothing else.\n"
          "<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\n");
    CHECK(bare.find("Examples:") == std::string::npos);
    CHECK(build(spec) == bare);
    CHECK(build_prefix(spec) + build_suffix(spec) == bare);

    spec.shots = 1;
    spec.use_docs = true;
    const auto one = build(spec);
    CHECK(one.find("# Model Loading API") != std::string::npos);
    CHECK(one.find("Examples:\nQuery: Load a pre-trained ResNet50 model for image classification\n"
                   "Output: torchvision.models.resnet50(pretrained=True)\n<|eot_id|>") != std::string::npos);

    // The expected completion of the api golden prompt is a canonical call.
    CHECK(schema::is_canonical_call("torchvision.models.mobilenet_v2(pretrained=True)"));
}

TEST_CASE("rendering is injective over the grid of settings") {
    std::set<std::string> seen;
    std::size_t n = 0;
    for (auto f : kFamilies) {
        const auto pack = load_pack(kRoot / "data/families", f);
        for (std::size_t shots = 0; shots <= 5; ++shots) {
            for (bool docs : {true, false}) {
                for (const char* q : {"a", "b"}) {
                    const auto text = build(make_spec(pack, q, shots, docs));
                    seen.insert(text);
                    ++n;
                    const auto back = rendered_examples(text);
                    REQUIRE(back.size() == shots);
                    for (std::size_t i = 0; i < shots; ++i) {
                        CHECK(back[i].query == pack.examples[i].query);
                        CHECK(back[i].output == pack.examples[i].output);
                    }
                }
            }
        }
    }
    CHECK(seen.size() == n);
}

TEST_CASE("build errors") {
    const auto pack = load_pack(kRoot / "data/families", Family::Sql);
    auto spec = make_spec(pack, "q", 6, true);
    CHECK(code_of([&] { build(spec); }) == ErrorCode::InvalidArgument);
    spec.shots = 5;
    CHECK(code_of([&] { build(spec, 100); }) == ErrorCode::ContextOverflow);
    const auto text = build(spec);
    CHECK(build(spec, text.size()) == text);
    CHECK(code_of([&] { build(spec, text.size() - 1); }) == ErrorCode::ContextOverflow);
    // A custom counter replaces byte counting.
    CHECK(build(spec, 10, [](std::string_view) { return std::size_t{10}; }) == text);
    spec.query = std::string(5000, 'x');
    CHECK(code_of([&] { build(spec); }) == ErrorCode::ContextOverflow);
    CHECK(code_of([&] { load_pack(kRoot / "no-such-dir", Family::Api); }) == ErrorCode::Io);
    CHECK(parse_family("nav") == Family::Nav);
    CHECK(!parse_family("gui"));
}

TEST_CASE("corrupt: reorder and delimiter edits") {
    Rng rng(42);
    auto r = corrupt({"q", "f(a=1, b=2)"}, NoiseMode::ParamReorder, rng, kCanonical);
    CHECK(r.output == "f(b=2, a=1)");
    CHECK(r.query == "q");

    // Single-argument calls fall back to a delimiter edit.
    std::set<std::string> allowed = {"f(a=1", "fa=1)", "f(a1)", "f((a=1)", "f(a==1)", "f(a=1))"};
    for (int i = 0; i < 20; ++i) {
        auto m = corrupt({"q", "f(a=1)"}, i % 2 ? NoiseMode::MalformedSyntax : NoiseMode::ParamReorder, rng, kCanonical);
        CHECK(allowed.count(m.output) == 1);
        CHECK(!schema::is_canonical_call(m.output));
    }
    // Deleting the closing parenthesis is one of the reachable edits.
    bool saw_drop = false;
    for (int i = 0; i < 200 && !saw_drop; ++i) {
        saw_drop = corrupt({"q", "f(a=1)"}, NoiseMode::MalformedSyntax, rng, kCanonical).output == "f(a=1";
    }
    CHECK(saw_drop);

    CHECK(code_of([&] { corrupt({"q", "f(a=1"}, NoiseMode::MalformedSyntax, rng, kCanonical); }) ==
          ErrorCode::InvalidArgument);
    FormatCheck always = [](std::string_view) { return true; };
    CHECK(code_of([&] { corrupt({"q", "f(a=1)"}, NoiseMode::MalformedSyntax, rng, always); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("inject_noise corrupts exactly n examples") {
    const auto pack = load_pack(kRoot / "data/families", Family::Api);
    for (std::size_t shots = 0; shots <= 5; ++shots) {
        for (std::size_t n = 0; n <= std::min<std::size_t>(2, shots); ++n) {
            Rng rng(derive_seed(42, std::to_string(shots) + "/" + std::to_string(n)));
            auto spec = make_spec(pack, "q", shots, true);
            const auto pos = inject_noise(spec, {n}, rng, kCanonical);
            CHECK(pos.size() == n);
            const auto shown = rendered_examples(build(spec));
            REQUIRE(shown.size() == shots);
            std::size_t bad = 0;
            for (std::size_t i = 0; i < shots; ++i) {
                const bool broken = !schema::is_canonical_call(shown[i].output);
                bad += broken;
                CHECK(broken == std::binary_search(pos.begin(), pos.end(), i));
            }
            CHECK(bad == n);
        }
    }
    auto spec = make_spec(pack, "q", 1, true);
    Rng rng(1);
    CHECK(code_of([&] { inject_noise(spec, {2}, rng, kCanonical); }) == ErrorCode::InvalidArgument);
}
