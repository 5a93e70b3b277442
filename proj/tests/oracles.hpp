// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used as test oracles. Written independently of the
// library code paths they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "metatool/schema.hpp"

namespace oracle {

using metatool::schema::ParamKind;
using metatool::schema::ParamSpec;
using metatool::schema::ToolSchema;

// Every rendered literal a parameter can take (small domains only).
inline std::vector<std::string> literal_domain(const ParamSpec& p) {
    std::vector<std::string> out;
    switch (p.kind) {
        case ParamKind::Boolean:
            out = {"True", "False"};
            break;
        case ParamKind::Enum:
            for (const auto& v : p.enum_values) out.push_back("'" + v + "'");
            break;
        case ParamKind::Integer: {
            const long lo = static_cast<long>(std::ceil(p.range->min));
            const long hi = static_cast<long>(std::floor(p.range->max));
            for (long v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
            break;
        }
        case ParamKind::Number: {
            // Walk the fixed-point grid with integer arithmetic.
            long scale = 1;
            for (int i = 0; i < p.decimals; ++i) scale *= 10;
            const long lo = static_cast<long>(std::ceil(p.range->min * scale - 1e-9));
            const long hi = static_cast<long>(std::floor(p.range->max * scale + 1e-9));
            for (long k = lo; k <= hi; ++k) {
                const long mag = k < 0 ? -k : k;
                std::string frac = std::to_string(mag % scale);
                while (static_cast<int>(frac.size()) < p.decimals) frac = "0" + frac;
                out.push_back(std::string(k < 0 ? "-" : "") + std::to_string(mag / scale) + "." + frac);
            }
            break;
        }
        case ParamKind::String: {
            std::vector<std::string> level{""};
            out.push_back("''");
            for (std::size_t len = 1; len <= p.max_length; ++len) {
                std::vector<std::string> next;
                for (const auto& s : level) {
                    for (char c : p.charset) next.push_back(s + c);
                }
                for (const auto& s : next) out.push_back("'" + s + "'");
                level = std::move(next);
            }
            break;
        }
    }
    return out;
}

// All canonical call strings of a small schema, sorted.
inline std::vector<std::string> enumerate_calls(const ToolSchema& schema) {
    std::vector<const ParamSpec*> order;
    for (const auto& p : schema.params) {
        if (p.positional) order.push_back(&p);
    }
    std::vector<const ParamSpec*> kw;
    for (const auto& p : schema.params) {
        if (!p.positional) kw.push_back(&p);
    }
    std::sort(kw.begin(), kw.end(), [](auto* a, auto* b) { return a->name < b->name; });
    order.insert(order.end(), kw.begin(), kw.end());

    std::set<std::string> out;
    std::vector<std::string> parts;
    auto rec = [&](auto&& self, std::size_t i) -> void {
        if (i == order.size()) {
            std::string s = schema.tool_name + "(";
            for (std::size_t k = 0; k < parts.size(); ++k) s += (k ? ", " : "") + parts[k];
            out.insert(s + ")");
            return;
        }
        const auto* p = order[i];
        if (!p->required) self(self, i + 1);
        for (const auto& lit : literal_domain(*p)) {
            parts.push_back(p->positional ? lit : p->name + "=" + lit);
            self(self, i + 1);
            parts.pop_back();
        }
    };
    rec(rec, 0);
    return {out.begin(), out.end()};
}

}  // namespace oracle
