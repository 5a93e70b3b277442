// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "metatool/rng.hpp"

namespace metatool::schema {

enum class ParamKind { String, Integer, Number, Boolean, Enum };

std::string_view to_string(ParamKind kind);
std::optional<ParamKind> parse_kind(std::string_view text);

/// A literal argument value. Enum members are carried as strings.
using Value = std::variant<bool, std::int64_t, double, std::string>;

/// Characters a string parameter may contain unless the schema overrides it.
inline constexpr std::string_view kDefaultCharset =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _.,:/@-";

struct Range {
    double min = 0.0;
    double max = 0.0;
};

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::String;
    bool required = true;
    // Positional parameters are rendered before keywords, in declaration order.
    bool positional = false;
    std::optional<Range> range;
    std::vector<std::string> enum_values;
    std::optional<Value> default_value;
    int decimals = 2;
    std::size_t max_length = 64;
    std::string charset = std::string(kDefaultCharset);
};

struct ToolSchema {
    std::string tool_name;
    std::vector<ParamSpec> params;
    std::string doc_text;

    const ParamSpec* find(std::string_view name) const;
    bool has_optional() const;
};

/// Throws Error(InvalidSchema) when a structural invariant is broken.
void check_schema(const ToolSchema& schema);

struct ToolCall {
    std::string tool_name;
    std::vector<Value> positional;
    std::map<std::string, Value> keyword;

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

std::string render_value(const Value& value);
std::string render_value(const Value& value, const ParamSpec& spec);

/// `name(p0, p1, k1=v1, k2=v2)` with keywords sorted.
std::string canonical_text(const ToolCall& call);
std::string canonical_text(const ToolSchema& schema, const ToolCall& call);

struct ParsedCall {
    ToolCall call;
    // Argument lexemes in source order, used by the strict-format check.
    std::vector<std::string> keyword_order;
    bool canonical_layout = false;
};

/// Lenient parser: flexible whitespace, single or double quotes, any keyword order.
std::optional<ParsedCall> parse_call(std::string_view text, std::string* error = nullptr);

/// Lenient parse plus canonical layout: sorted keywords, `, ` separators, no extra spaces.
bool is_canonical_call(std::string_view text);

bool is_identifier(std::string_view text);
bool is_dotted_identifier(std::string_view text);

/// Binds positional arguments to their parameter names.
std::map<std::string, Value> bind(const ToolSchema& schema, const ToolCall& call);
ToolCall make_call(const ToolSchema& schema, const std::map<std::string, Value>& args);

enum class ViolationKind {
    WrongTool,
    MissingRequired,
    UnknownParam,
    TooManyPositional,
    TypeMismatch,
    EnumViolation,
    RangeViolation,
    StringConstraint,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string param;
    std::string message;
};

struct ValidityReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
    bool has(ViolationKind kind) const;
};

ValidityReport validate_call(const ToolSchema& schema, const ToolCall& call);

struct Trajectory {
    std::string query;
    ToolCall call;
    bool success = true;
};

enum class PerturbKind { ValueSubstitution, BoundaryTesting, ParameterDrop };

std::string_view to_string(PerturbKind kind);
std::optional<PerturbKind> parse_perturb_kind(std::string_view text);

struct SyntheticEpisode {
    Trajectory base;
    PerturbKind op = PerturbKind::ValueSubstitution;
    std::string param;
    ToolCall perturbed_call;
    int reward = 0;
};

/// Edge-case values injected by BoundaryTesting.
struct BoundaryConfig {
    bool zero = true;
    bool minus_one = true;
    bool empty_string = true;
    bool range_ends = true;
};

/// Candidate boundary values for one parameter, excluding `current`.
std::vector<Value> boundary_values(const ParamSpec& spec, const BoundaryConfig& config,
                                   const std::optional<Value>& current);

SyntheticEpisode perturb(const ToolSchema& schema, const Trajectory& trajectory, PerturbKind kind,
                         Rng& rng, const BoundaryConfig& boundary = {});

/// Executes a candidate call; reward 1 iff the call is valid and the task checker passes.
class Sandbox {
public:
    virtual ~Sandbox() = default;
    virtual const ToolSchema& schema() const = 0;
    virtual bool execute(const Trajectory& base, const ToolCall& call) const = 0;
};

class CheckerSandbox final : public Sandbox {
public:
    using Checker = std::function<bool(const Trajectory&, const ToolCall&)>;

    explicit CheckerSandbox(ToolSchema schema, Checker checker = {});

    const ToolSchema& schema() const override { return schema_; }
    bool execute(const Trajectory& base, const ToolCall& call) const override;

private:
    ToolSchema schema_;
    Checker checker_;
};

std::vector<SyntheticEpisode> generate_episodes(const std::vector<Trajectory>& support, std::size_t n,
                                                const Sandbox& sandbox, Rng& rng,
                                                const BoundaryConfig& boundary = {});

}  // namespace metatool::schema
