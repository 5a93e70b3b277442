// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "metatool/families.hpp"
#include "metatool/rng.hpp"

using namespace metatool;
using namespace metatool::harness;

namespace {

const std::filesystem::path kRoot = METATOOL_SOURCE_DIR;

// Random walk through the automaton; stops at an accepting state with probability 1/4
// or when no transition is left.
std::string sample(const fsm::ByteDfa& dfa, Rng& rng) {
    std::string out;
    auto s = dfa.start;
    for (;;) {
        std::vector<int> moves;
        for (int b = 0; b < 256; ++b) {
            if (dfa.next[s][b] != fsm::kNoState) moves.push_back(b);
        }
        if (dfa.accepting[s] && (moves.empty() || uniform_index(rng, 4) == 0)) return out;
        REQUIRE(!moves.empty());
        const int b = moves[uniform_index(rng, moves.size())];
        out += static_cast<char>(b);
        s = dfa.next[s][b];
    }
}

}  // namespace

TEST_CASE("nav parser") {
    CHECK(parse_nav("click[submit-btn]") == NavAction{"click", {"submit-btn"}});
    CHECK(parse_nav("type[search-box][wireless headphones]") ==
          NavAction{"type", {"search-box", "wireless headphones"}});
    CHECK(parse_nav("scroll[down]"));
    CHECK(parse_nav("goto[https://shop.example.com/orders]"));
    CHECK(!parse_nav("scroll[left]"));
    CHECK(!parse_nav("click[a b]"));
    CHECK(!parse_nav("click[]"));
    CHECK(!parse_nav("click[x]y"));
    CHECK(!parse_nav("press[enter]"));
    CHECK(!parse_nav("type[box]"));
    CHECK(!parse_nav("goto[http://a b]"));
}

TEST_CASE("bash parser and allowlist") {
    const auto p = parse_bash("ps aux | grep python | wc -l");
    REQUIRE(p);
    CHECK(p->segments.size() == 3);
    CHECK(p->segments[1] == std::vector<std::string>{"grep", "python"});
    CHECK(parse_bash("find . -name \"*.py\" -type f"));
    CHECK(parse_bash("tail -n 20 app.log"));
    CHECK(parse_bash("grep -r 'TODO list' src"));
    std::string err;
    CHECK(!parse_bash("ls --l", &err));
    CHECK(err.find("--l") != std::string::npos);
    CHECK(!parse_bash("tail -n", &err));
    CHECK(!parse_bash("curl http://x", &err));
    CHECK(!parse_bash("ls > out.txt"));
    CHECK(!parse_bash("ls; rm -r /"));
    CHECK(!parse_bash("echo $HOME"));
    CHECK(!parse_bash("ls | "));
    CHECK(!parse_bash("echo 'open"));
    CHECK(normalize_bash("  ls   -la \t x ") == "ls -la x");
}

TEST_CASE("lenient and strict api checks") {
    const auto assets = load_assets(kRoot / "data");
    const std::string canon = "torchvision.models.resnet18(pretrained=True)";
    CHECK(well_formed(Family::Api, canon, assets));
    CHECK(parses(Family::Api, "torchvision.models.resnet18( pretrained = True )"));
    CHECK(!well_formed(Family::Api, "torchvision.models.resnet18( pretrained = True )", assets));
    CHECK(parses(Family::Api, "torchvision.models.nosuch(pretrained=True)"));
    CHECK(!well_formed(Family::Api, "torchvision.models.nosuch(pretrained=True)", assets));
    CHECK(!parses(Family::Api, "torchvision.models.resnet18(pretrained=True"));
}

TEST_CASE("every sampled pattern string is well formed") {
    const auto assets = load_assets(kRoot / "data");
    Rng rng(7);
    for (auto f : prompts::kFamilies) {
        CAPTURE(prompts::to_string(f));
        const auto dfa = fsm::compile_regex(output_pattern(f, assets).regex_text);
        REQUIRE(!dfa.empty_language());
        for (int i = 0; i < 300; ++i) {
            const auto s = sample(dfa, rng);
            CAPTURE(s);
            CHECK(well_formed(f, s, assets));
        }
    }
}

TEST_CASE("suite gold outputs lie inside the constrained language") {
    const auto assets = load_assets(kRoot / "data");
    // Gold strings the decoder should be able to produce.
    const auto nav = fsm::compile_regex(output_pattern(Family::Nav, assets).regex_text);
    CHECK(nav.matches("type[search-box][wireless headphones]"));
    const auto bash = fsm::compile_regex(output_pattern(Family::Bash, assets).regex_text);
    CHECK(bash.matches("ps aux | wc -l"));
    CHECK(bash.matches("find . -name \"*.py\" -type f"));
    const auto sqlp = fsm::compile_regex(output_pattern(Family::Sql, assets).regex_text);
    CHECK(sqlp.matches("SELECT name FROM employees WHERE salary > 90000"));
}
