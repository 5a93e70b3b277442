// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/families.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "metatool/error.hpp"
#include "metatool/schema_io.hpp"

namespace metatool::harness {

namespace {

bool id_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

// Unquoted characters a bash word may contain.
bool bash_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("._*/~+:=,@%-").find(c) != std::string_view::npos;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string alternation(const std::vector<std::string>& literals) {
    std::vector<std::string> escaped;
    for (const auto& l : literals) escaped.push_back(fsm::regex_escape(l));
    return "(" + join(escaped, "|") + ")";
}

std::string bash_pattern() {
    const std::string word = "([A-Za-z0-9._*/~][A-Za-z0-9._*/~+:=,@%-]{0,15}|\"[A-Za-z0-9._* /-]{1,16}\"|'[A-Za-z0-9._* /-]{1,16}')";
    const std::string arg = "([+-]?[0-9]{1,4}[kMG]?|" + word + ")";
    std::vector<std::string> commands;
    for (const auto& cmd : bash_allowlist()) {
        std::vector<std::string> f0;
        std::vector<std::string> f1;
        for (const auto& f : cmd.flags) (f.arity == 0 ? f0 : f1).push_back(f.name);
        std::vector<std::string> choices{word};
        if (!f0.empty()) choices.push_back(alternation(f0));
        if (!f1.empty()) choices.push_back(alternation(f1) + " " + arg);
        commands.push_back(fsm::regex_escape(cmd.name) + "( (" + join(choices, "|") + ")){0,3}");
    }
    const auto segment = "(" + join(commands, "|") + ")";
    return segment + "( \\| " + segment + "){0,2}";
}

std::string nav_pattern() {
    return "click\\[[a-z0-9_-]{1,24}\\]"
           "|type\\[[a-z0-9_-]{1,24}\\]\\[[A-Za-z0-9 @._-]{1,32}\\]"
           "|scroll\\[(up|down)\\]"
           "|goto\\[https?://[a-z0-9./_-]{1,40}\\]";
}

std::string sql_pattern(const sql::Database& db) {
    std::set<std::string> tables;
    std::set<std::string> columns;
    for (const auto& [name, table] : db) {
        tables.insert(name);
        columns.insert(table.columns.begin(), table.columns.end());
    }
    const std::string alias = "(e|d|p)";
    const std::string col = "(" + alias + "\\.)?" + alternation({columns.begin(), columns.end()});
    const std::string agg = "((COUNT|AVG|SUM|MIN|MAX)\\(" + col + "\\)|COUNT\\(\\*\\))";
    const std::string names = "(avg_salary|total_salary|n_employees|n_projects|total|cnt)";
    const std::string item = "(" + col + "|" + agg + "( (AS|as) " + names + ")?)";
    const std::string select = "(\\*|" + alias + "\\.\\*|" + item + "(, " + item + "){0,2})";
    const std::string table = alternation({tables.begin(), tables.end()});
    const std::string lit = "([0-9]{1,7}|'[A-Za-z0-9 _-]{1,20}')";
    const std::string op = "(=|!=|<|<=|>|>=)";
    const std::string cond = col + " " + op + " " + lit + "( (AND|OR) " + col + " " + op + " " + lit + ")?";
    return "SELECT " + select + " FROM " + table + "( " + alias + ")?" +  //
           "( JOIN " + table + " " + alias + " ON " + col + " = " + col + ")?" +
           "( WHERE " + cond + ")?" +
           "( GROUP BY " + col + "(, " + col + ")?" + "( HAVING " + agg + " " + op + " [0-9]{1,7})?)?" +
           "( ORDER BY (" + col + "|" + agg + ")( (ASC|DESC))?)?" +
           "( LIMIT [0-9]{1,3})?";
}

}  // namespace

std::optional<NavAction> parse_nav(std::string_view text) {
    const auto open = text.find('[');
    if (open == std::string_view::npos || open == 0) return std::nullopt;
    NavAction a;
    a.verb = std::string(text.substr(0, open));
    std::size_t i = open;
    while (i < text.size()) {
        if (text[i] != '[') return std::nullopt;
        const auto close = text.find(']', i + 1);
        if (close == std::string_view::npos || close == i + 1) return std::nullopt;
        const auto arg = text.substr(i + 1, close - i - 1);
        if (arg.find('\n') != std::string_view::npos) return std::nullopt;
        a.args.emplace_back(arg);
        i = close + 1;
    }
    auto is_id = [](const std::string& s) { return std::all_of(s.begin(), s.end(), id_char); };
    if (a.verb == "click") {
        if (a.args.size() != 1 || !is_id(a.args[0])) return std::nullopt;
    } else if (a.verb == "type") {
        if (a.args.size() != 2 || !is_id(a.args[0])) return std::nullopt;
    } else if (a.verb == "scroll") {
        if (a.args.size() != 1 || (a.args[0] != "up" && a.args[0] != "down")) return std::nullopt;
    } else if (a.verb == "goto") {
        if (a.args.size() != 1 || a.args[0].find_first_of(" \t") != std::string::npos) return std::nullopt;
    } else {
        return std::nullopt;
    }
    return a;
}

const std::vector<BashCommand>& bash_allowlist() {
    static const std::vector<BashCommand> list = {
        {"awk", {{"-F", 1}}},
        {"cat", {{"-n", 0}}},
        {"chmod", {{"-R", 0}}},
        {"cp", {{"-r", 0}}},
        {"cut", {{"-d", 1}, {"-f", 1}, {"-c", 1}}},
        {"date", {}},
        {"df", {{"-h", 0}}},
        {"du", {{"-s", 0}, {"-h", 0}, {"-sh", 0}, {"-a", 0}}},
        {"echo", {{"-n", 0}}},
        {"find",
         {{"-name", 1}, {"-iname", 1}, {"-type", 1}, {"-mtime", 1}, {"-size", 1}, {"-maxdepth", 1}, {"-empty", 0}}},
        {"grep",
         {{"-r", 0}, {"-i", 0}, {"-n", 0}, {"-c", 0}, {"-l", 0}, {"-v", 0}, {"-w", 0}, {"-ri", 0}, {"-rn", 0},
          {"-rl", 0}, {"-e", 1}}},
        {"head", {{"-n", 1}, {"-c", 1}}},
        {"ls", {{"-l", 0}, {"-a", 0}, {"-h", 0}, {"-t", 0}, {"-r", 0}, {"-S", 0}, {"-R", 0}, {"-la", 0}, {"-lh", 0},
                {"-lt", 0}, {"-1", 0}}},
        {"mkdir", {{"-p", 0}}},
        {"mv", {}},
        {"ps", {}},
        {"pwd", {}},
        {"rm", {{"-r", 0}, {"-f", 0}, {"-rf", 0}}},
        {"sort", {{"-n", 0}, {"-r", 0}, {"-u", 0}, {"-nr", 0}, {"-k", 1}, {"-t", 1}}},
        {"tail", {{"-n", 1}, {"-f", 0}}},
        {"tar", {{"-czf", 1}, {"-xzf", 1}, {"-tf", 1}, {"-C", 1}}},
        {"touch", {}},
        {"uniq", {{"-c", 0}, {"-d", 0}}},
        {"wc", {{"-l", 0}, {"-w", 0}, {"-c", 0}}},
        {"whoami", {}},
        {"xargs", {{"-n", 1}}},
    };
    return list;
}

std::optional<BashPipeline> parse_bash(std::string_view text, std::string* error) {
    auto fail = [&](const std::string& msg) -> std::optional<BashPipeline> {
        if (error) *error = msg;
        return std::nullopt;
    };
    // Split into words and '|' separators.
    std::vector<std::string> words;
    std::string cur;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == ' ' || c == '\t') {
            if (in_word) words.push_back(std::move(cur));
            cur.clear();
            in_word = false;
        } else if (c == '|') {
            if (in_word) words.push_back(std::move(cur));
            cur.clear();
            in_word = false;
            words.emplace_back("|");
        } else if (c == '\'' || c == '"') {
            const auto close = text.find(c, i + 1);
            if (close == std::string_view::npos) return fail("unterminated quote");
            const auto body = text.substr(i, close - i + 1);
            if (body.find('\n') != std::string_view::npos) return fail("newline inside quotes");
            cur += body;
            in_word = true;
            i = close;
        } else if (bash_word_char(c)) {
            cur += c;
            in_word = true;
        } else {
            return fail(std::string("unsupported character '") + c + "'");
        }
    }
    if (in_word) words.push_back(std::move(cur));

    BashPipeline out;
    out.segments.emplace_back();
    for (auto& w : words) {
        if (w == "|") {
            out.segments.emplace_back();
        } else {
            out.segments.back().push_back(std::move(w));
        }
    }
    for (const auto& seg : out.segments) {
        if (seg.empty()) return fail("empty pipeline segment");
        const auto& list = bash_allowlist();
        const auto cmd = std::find_if(list.begin(), list.end(), [&](const BashCommand& c) { return c.name == seg[0]; });
        if (cmd == list.end()) return fail("unknown command '" + seg[0] + "'");
        for (std::size_t i = 1; i < seg.size(); ++i) {
            if (seg[i].size() < 2 || seg[i][0] != '-') continue;
            const auto flag = std::find_if(cmd->flags.begin(), cmd->flags.end(),
                                           [&](const BashFlag& f) { return f.name == seg[i]; });
            if (flag == cmd->flags.end()) return fail("unknown flag '" + seg[i] + "' for " + cmd->name);
            if (i + static_cast<std::size_t>(flag->arity) >= seg.size()) return fail("flag '" + seg[i] + "' needs an argument");
            i += static_cast<std::size_t>(flag->arity);
        }
        for (const auto& w : seg) {
            if (w == "-") return fail("bare '-'");
        }
    }
    return out;
}

std::string normalize_bash(std::string_view text) {
    std::string out;
    bool space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            space = !out.empty();
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

FamilyAssets load_assets(const std::filesystem::path& data_dir) {
    FamilyAssets assets;
    const auto tools_path = data_dir / "schemas" / "api_tools.json";
    try {
        const auto doc = nlohmann::json::parse(schema::read_file(tools_path));
        for (const auto& t : doc.at("tools")) assets.api_tools.push_back(schema::schema_from_json(t));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, tools_path.string() + ": " + e.what());
    }
    assets.db = sql::load_database(data_dir / "sql" / "company.json");
    return assets;
}

bool parses(Family family, std::string_view text) {
    switch (family) {
        case Family::Api: return schema::parse_call(text).has_value();
        case Family::Sql: return sql::parses(text);
        case Family::Nav: return parse_nav(text).has_value();
        case Family::Bash: return parse_bash(text).has_value();
    }
    return false;
}

bool well_formed(Family family, std::string_view text, const FamilyAssets& assets) {
    if (family != Family::Api) return parses(family, text);
    if (!schema::is_canonical_call(text)) return false;
    const auto parsed = schema::parse_call(text);
    for (const auto& tool : assets.api_tools) {
        if (tool.tool_name == parsed->call.tool_name) return schema::validate_call(tool, parsed->call).valid();
    }
    return false;
}

fsm::Pattern output_pattern(Family family, const FamilyAssets& assets) {
    switch (family) {
        case Family::Api: return fsm::compile_schemas(assets.api_tools);
        case Family::Sql: return {sql_pattern(assets.db)};
        case Family::Nav: return {nav_pattern()};
        case Family::Bash: return {bash_pattern()};
    }
    return {};
}

}  // namespace metatool::harness
