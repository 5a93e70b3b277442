// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "metatool/error.hpp"
#include "metatool/schema.hpp"
#include "metatool/schema_io.hpp"

using namespace metatool;
using namespace metatool::schema;

namespace {

ParamSpec string_param(std::string name, bool required = true) {
    ParamSpec p;
    p.name = std::move(name);
    p.kind = ParamKind::String;
    p.required = required;
    return p;
}

ParamSpec int_param(std::string name, double lo, double hi, bool required = true) {
    ParamSpec p;
    p.name = std::move(name);
    p.kind = ParamKind::Integer;
    p.required = required;
    p.range = Range{lo, hi};
    return p;
}

ParamSpec enum_param(std::string name, std::vector<std::string> values, bool required = true) {
    ParamSpec p;
    p.name = std::move(name);
    p.kind = ParamKind::Enum;
    p.required = required;
    p.enum_values = std::move(values);
    return p;
}

ToolSchema make_schema(std::vector<ParamSpec> params, std::string name = "f") {
    ToolSchema s;
    s.tool_name = std::move(name);
    s.params = std::move(params);
    return s;
}

ToolCall call_of(std::string name, std::map<std::string, Value> kw) {
    ToolCall c;
    c.tool_name = std::move(name);
    c.keyword = std::move(kw);
    return c;
}

}  // namespace

TEST_CASE("validate_call reports nothing for a minimal valid call") {
    auto s = make_schema({string_param("q")});
    CHECK(validate_call(s, call_of("f", {{"q", std::string("x")}})).valid());
}

TEST_CASE("validate_call flags a missing required parameter") {
    auto s = make_schema({string_param("q")});
    auto r = validate_call(s, call_of("f", {}));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == ViolationKind::MissingRequired);
    CHECK(r.violations[0].param == "q");
}

TEST_CASE("validate_call range check agrees with brute force") {
    auto s = make_schema({int_param("n", 0, 10)});
    for (std::int64_t v = -5; v <= 15; ++v) {
        const bool in_range = v >= 0 && v <= 10;
        auto r = validate_call(s, call_of("f", {{"n", v}}));
        CHECK(r.valid() == in_range);
        CHECK(r.has(ViolationKind::RangeViolation) == !in_range);
    }
}

TEST_CASE("validate_call covers unknown params, type and enum violations") {
    auto s = make_schema({enum_param("color", {"red", "blue"}), int_param("n", 0, 3, false)});
    auto r = validate_call(s, call_of("f", {{"color", std::string("green")}, {"n", std::string("x")}, {"z", true}}));
    CHECK(r.has(ViolationKind::EnumViolation));
    CHECK(r.has(ViolationKind::TypeMismatch));
    CHECK(r.has(ViolationKind::UnknownParam));
    CHECK(r.violations.size() == 3);
    CHECK(validate_call(s, call_of("g", {{"color", std::string("red")}})).has(ViolationKind::WrongTool));
}

TEST_CASE("check_schema enforces invariants") {
    CHECK_THROWS_AS(check_schema(make_schema({string_param("a"), string_param("a")})), Error);
    CHECK_THROWS_AS(check_schema(make_schema({enum_param("e", {})})), Error);
    CHECK_THROWS_AS(check_schema(make_schema({int_param("n", 5, 1)})), Error);
    auto p = string_param("q");
    p.default_value = std::string("x");
    CHECK_THROWS_AS(check_schema(make_schema({p})), Error);
    try {
        check_schema(make_schema({enum_param("e", {})}));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidSchema);
    }
    CHECK_NOTHROW(check_schema(make_schema({string_param("q"), int_param("n", 0, 1, false)})));
}

TEST_CASE("canonical text sorts keywords and round-trips through the parser") {
    auto s = make_schema({int_param("zeta", 0, 9), enum_param("alpha", {"x", "y"}), string_param("mid", false)});
    auto c = call_of("f", {{"zeta", std::int64_t{3}}, {"alpha", std::string("y")}, {"mid", std::string("a b")}});
    const auto text = canonical_text(s, c);
    CHECK(text == "f(alpha='y', mid='a b', zeta=3)");
    auto parsed = parse_call(text);
    REQUIRE(parsed);
    CHECK(parsed->call == c);
    CHECK(is_canonical_call(text));
    CHECK_FALSE(is_canonical_call("f(zeta=3, alpha='y', mid='a b')"));
    CHECK_FALSE(is_canonical_call("f(alpha=\"y\", mid='a b', zeta=3)"));
    CHECK_FALSE(is_canonical_call("f(alpha='y',mid='a b', zeta=3)"));
    auto lenient = parse_call("  f( zeta = 3 ,alpha=\"y\", mid='a b' ) ");
    REQUIRE(lenient);
    CHECK(lenient->call == c);
}

TEST_CASE("positional arguments render first") {
    ParamSpec task = string_param("task");
    task.positional = true;
    auto s = make_schema({task, string_param("model")}, "pipeline");
    auto parsed = parse_call("pipeline('summarization', model='t5-small')");
    REQUIRE(parsed);
    CHECK(validate_call(s, parsed->call).valid());
    CHECK(canonical_text(s, parsed->call) == "pipeline('summarization', model='t5-small')");
    CHECK_FALSE(parse_call("pipeline(model='x', 'y')"));
}

TEST_CASE("number rendering uses fixed decimals") {
    ParamSpec p;
    p.name = "x";
    p.kind = ParamKind::Number;
    p.decimals = 2;
    CHECK(render_value(Value{1.5}, p) == "1.50");
    CHECK(render_value(Value{std::int64_t{3}}, p) == "3.00");
    CHECK(render_value(Value{-0.001}, p) == "0.00");
    CHECK(render_value(Value{true}) == "True");
}

TEST_CASE("parser rejects malformed text") {
    for (const char* bad : {"", "f", "f(", "f(a=)", "f(a=1,)", "f(a=1) x", "f(a='x)", "f(a=1, a=2)", "(a=1)"}) {
        CAPTURE(bad);
        CHECK_FALSE(parse_call(bad));
    }
    CHECK(parse_call("f()"));
}

TEST_CASE("ValueSubstitution picks the only other enum member") {
    auto s = make_schema({enum_param("color", {"red", "blue"})});
    Trajectory t{"q", call_of("f", {{"color", std::string("red")}}), true};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        auto ep = perturb(s, t, PerturbKind::ValueSubstitution, rng);
        CHECK(ep.perturbed_call.keyword.at("color") == Value{std::string("blue")});
    }
}

TEST_CASE("ValueSubstitution keeps the call valid") {
    ParamSpec num;
    num.name = "w";
    num.kind = ParamKind::Number;
    num.range = Range{-1.0, 2.5};
    auto s = make_schema({enum_param("color", {"red", "blue", "green"}), int_param("n", 0, 10), num,
                          string_param("label", false)});
    Trajectory t{"q",
                 call_of("f", {{"color", std::string("red")}, {"n", std::int64_t{5}}, {"w", 0.5},
                               {"label", std::string("x")}}),
                 true};
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        auto ep = perturb(s, t, PerturbKind::ValueSubstitution, rng);
        CHECK(validate_call(s, ep.perturbed_call).valid());
        CHECK(ep.perturbed_call != t.call);
        // Exactly the reported field differs.
        for (const auto& [k, v] : t.call.keyword) {
            if (k != ep.param) CHECK(ep.perturbed_call.keyword.at(k) == v);
        }
    }
}

TEST_CASE("BoundaryTesting draws from the boundary set") {
    auto s = make_schema({int_param("n", 0, 10)});
    Trajectory t{"q", call_of("f", {{"n", std::int64_t{5}}}), true};
    std::set<std::int64_t> seen;
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        auto ep = perturb(s, t, PerturbKind::BoundaryTesting, rng);
        seen.insert(std::get<std::int64_t>(ep.perturbed_call.keyword.at("n")));
    }
    CHECK(seen == std::set<std::int64_t>{0, -1, 10});

    BoundaryConfig no_ends;
    no_ends.range_ends = false;
    auto values = boundary_values(s.params[0], no_ends, Value{std::int64_t{0}});
    REQUIRE(values.size() == 1);
    CHECK(values[0] == Value{std::int64_t{-1}});
    auto strings = boundary_values(string_param("q"), {}, Value{std::string("a")});
    REQUIRE(strings.size() == 1);
    CHECK(strings[0] == Value{std::string()});
}

TEST_CASE("ParameterDrop removes only optional parameters") {
    auto s = make_schema({string_param("q"), int_param("k", 1, 5, false)});
    Trajectory t{"q", call_of("f", {{"q", std::string("x")}, {"k", std::int64_t{2}}}), true};
    Rng rng(1);
    auto ep = perturb(s, t, PerturbKind::ParameterDrop, rng);
    CHECK(ep.perturbed_call == call_of("f", {{"q", std::string("x")}}));
    CHECK(ep.param == "k");

    auto required_only = make_schema({string_param("q")});
    Trajectory t2{"q", call_of("f", {{"q", std::string("x")}}), true};
    try {
        perturb(required_only, t2, PerturbKind::ParameterDrop, rng);
        FAIL("expected NoPerturbationPossible");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoPerturbationPossible);
    }
}

TEST_CASE("generate_episodes is deterministic and sandbox-scored") {
    auto s = make_schema({enum_param("color", {"red", "blue"}), int_param("n", 0, 10, false)});
    Trajectory t{"paint it", call_of("f", {{"color", std::string("red")}, {"n", std::int64_t{4}}}), true};
    CheckerSandbox sandbox(s);
    Rng a(42);
    Rng b(42);
    auto ea = generate_episodes({t}, 3, sandbox, a);
    auto eb = generate_episodes({t}, 3, sandbox, b);
    REQUIRE(ea.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(to_json(ea[i]).dump() == to_json(eb[i]).dump());

    Rng c(7);
    auto many = generate_episodes({t}, 300, sandbox, c);
    for (const auto& ep : many) {
        const bool valid = validate_call(s, ep.perturbed_call).valid();
        CHECK(ep.reward == (valid ? 1 : 0));
        if (ep.op == PerturbKind::ValueSubstitution && ep.param == "color") CHECK(ep.reward == 1);
        if (ep.op == PerturbKind::ParameterDrop) CHECK(ep.reward == 1);
    }
    CHECK(std::any_of(many.begin(), many.end(), [](const auto& e) { return e.reward == 0; }));
}

TEST_CASE("dropping a required field scores zero") {
    auto s = make_schema({string_param("q")});
    CheckerSandbox sandbox(s);
    Trajectory t{"x", call_of("f", {{"q", std::string("x")}}), true};
    CHECK_FALSE(sandbox.execute(t, call_of("f", {})));
}

TEST_CASE("generate_episodes rejects empty support") {
    CheckerSandbox sandbox(make_schema({string_param("q")}));
    Rng rng(42);
    try {
        generate_episodes({}, 3, sandbox, rng);
        FAIL("expected EmptySupport");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySupport);
    }
}

TEST_CASE("schema JSON round trip") {
    auto s = make_schema({enum_param("color", {"red", "blue"}), int_param("n", 0, 10, false)}, "paint.apply");
    s.doc_text = "Paints things.";
    auto back = schema_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
    CHECK(back.params[1].range->max == 10.0);
}

TEST_CASE("shipped schemas load and validate") {
    const std::filesystem::path data = std::filesystem::path(METATOOL_SOURCE_DIR) / "data";
    const auto catalog = nlohmann::json::parse(read_file(data / "schemas" / "api_tools.json"));
    REQUIRE(!catalog.at("tools").empty());
    for (const auto& t : catalog.at("tools")) {
        CAPTURE(t.dump());
        CHECK_NOTHROW(check_schema(schema_from_json(t)));
    }
    CHECK_NOTHROW(check_schema(load_schema(data / "cli" / "weather.json")));
}
