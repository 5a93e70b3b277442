// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace metatool::sql {

/// NULL, integer, real or text.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

struct Table {
    std::vector<std::string> columns;
    std::vector<Row> rows;
};

/// Table names are matched case-insensitively.
using Database = std::map<std::string, Table>;

/// `{"tables": {"name": {"columns": [...], "rows": [[...], ...]}}}`.
Database database_from_json(const nlohmann::json& doc);
Database load_database(const std::filesystem::path& path);

/// Supported subset:
///   SELECT (* | item, ...) FROM table [alias] [JOIN table alias ON col = col]
///   [WHERE cond] [GROUP BY col, ...] [HAVING cond] [ORDER BY expr [ASC|DESC], ...] [LIMIT n]
/// where item is `alias.*`, a column, a literal or COUNT/AVG/SUM/MIN/MAX(col | *) with an
/// optional AS name, and cond combines comparisons with AND, OR, NOT and parentheses.
/// Keywords are case-insensitive. Throws Error(SqlUnsupported) on anything outside the
/// subset and Error(SqlSemanticError) on unknown or ambiguous tables and columns.
Table execute_sql(std::string_view query, const Database& db);

/// True when `query` is inside the supported grammar (names are not resolved).
bool parses(std::string_view query);

/// Order-insensitive multiset equality of rows. Column names are ignored; integers and
/// reals compare numerically with a relative tolerance of 1e-9.
bool same_result(const Table& a, const Table& b);

std::string to_string(const Cell& cell);

}  // namespace metatool::sql
