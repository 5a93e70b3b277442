// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/sql.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>

#include "metatool/error.hpp"
#include "metatool/schema_io.hpp"

namespace metatool::sql {

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

[[noreturn]] void unsupported(const std::string& msg) { throw Error(ErrorCode::SqlUnsupported, msg); }
[[noreturn]] void semantic(const std::string& msg) { throw Error(ErrorCode::SqlSemanticError, msg); }

// ---- lexer ----

enum class Tok { Ident, Int, Real, Str, Sym, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifiers keep their case; symbols are the operator text
};

const std::set<std::string> kKeywords = {"SELECT", "FROM", "JOIN", "INNER", "ON",  "WHERE", "GROUP",
                                         "BY",     "HAVING", "ORDER", "ASC",  "DESC", "LIMIT", "AND",
                                         "OR",     "NOT",  "AS",    "NULL"};

const std::set<std::string> kAggregates = {"COUNT", "AVG", "SUM", "MIN", "MAX"};

std::vector<Token> lex(std::string_view q) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < q.size()) {
        const char c = q[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < q.size() && (std::isalnum(static_cast<unsigned char>(q[j])) || q[j] == '_')) ++j;
            out.push_back({Tok::Ident, std::string(q.substr(i, j - i))});
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < q.size() && std::isdigit(static_cast<unsigned char>(q[j]))) ++j;
            bool real = false;
            if (j + 1 < q.size() && q[j] == '.' && std::isdigit(static_cast<unsigned char>(q[j + 1]))) {
                real = true;
                ++j;
                while (j < q.size() && std::isdigit(static_cast<unsigned char>(q[j]))) ++j;
            }
            if (j < q.size() && (std::isalpha(static_cast<unsigned char>(q[j])) || q[j] == '_')) {
                unsupported("malformed number near '" + std::string(q.substr(i, j - i + 1)) + "'");
            }
            if (j - i > 18) unsupported("number literal too long");
            out.push_back({real ? Tok::Real : Tok::Int, std::string(q.substr(i, j - i))});
            i = j;
        } else if (c == '\'') {
            std::string s;
            std::size_t j = i + 1;
            for (;;) {
                if (j >= q.size()) unsupported("unterminated string literal");
                if (q[j] == '\'') {
                    if (j + 1 < q.size() && q[j + 1] == '\'') {
                        s += '\'';
                        j += 2;
                        continue;
                    }
                    break;
                }
                s += q[j++];
            }
            out.push_back({Tok::Str, std::move(s)});
            i = j + 1;
        } else {
            static const char* two[] = {"<=", ">=", "<>", "!="};
            bool matched = false;
            for (const char* op : two) {
                if (q.substr(i, 2) == op) {
                    out.push_back({Tok::Sym, op});
                    i += 2;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (std::string_view(",().*=<>;-").find(c) == std::string_view::npos) {
                unsupported(std::string("unexpected character '") + c + "'");
            }
            out.push_back({Tok::Sym, std::string(1, c)});
            ++i;
        }
    }
    out.push_back({Tok::End, ""});
    return out;
}

// ---- syntax tree ----

struct ColRef {
    std::string qual;  // lower case, may be empty
    std::string name;  // lower case
    int index = -1;    // resolved source column
    int output = -1;   // ORDER BY reference to a select alias
};

struct Expr {
    enum Kind { Col, Lit, Agg, Cmp, And, Or, Not } kind = Lit;
    ColRef col;
    Cell lit;
    std::string fn;  // aggregate name or comparison operator
    bool star = false;
    std::vector<Expr> kids;
};

struct Item {
    bool star = false;
    std::string star_qual;  // empty for a bare '*'
    Expr expr;
    std::string alias;
    std::string label;
};

struct TableRef {
    std::string name;   // lower case
    std::string alias;  // lower case, empty if none
};

struct OrderKey {
    Expr expr;
    bool desc = false;
};

struct Query {
    std::vector<Item> items;
    TableRef from;
    std::optional<TableRef> join;
    std::optional<Expr> on;
    std::optional<Expr> where;
    std::vector<ColRef> group_by;
    std::optional<Expr> having;
    std::vector<OrderKey> order;
    std::optional<std::int64_t> limit;
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Query parse() {
        Query q;
        expect_kw("SELECT");
        q.items.push_back(item());
        while (sym(",")) q.items.push_back(item());
        expect_kw("FROM");
        q.from = table_ref();
        if (kw("INNER")) {
            expect_kw("JOIN");
            join(q);
        } else if (kw("JOIN")) {
            join(q);
        }
        if (kw("WHERE")) q.where = condition();
        if (kw("GROUP")) {
            expect_kw("BY");
            q.group_by.push_back(colref());
            while (sym(",")) q.group_by.push_back(colref());
        }
        if (kw("HAVING")) q.having = condition();
        if (kw("ORDER")) {
            expect_kw("BY");
            do {
                OrderKey k;
                k.expr = operand();
                if (kw("DESC")) {
                    k.desc = true;
                } else {
                    kw("ASC");
                }
                q.order.push_back(std::move(k));
            } while (sym(","));
        }
        if (kw("LIMIT")) {
            if (peek().kind != Tok::Int) unsupported("LIMIT needs an integer");
            q.limit = std::stoll(next().text);
        }
        sym(";");
        if (peek().kind != Tok::End) unsupported("unexpected '" + peek().text + "'");
        return q;
    }

private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    bool is_kw(const Token& t, std::string_view k) const { return t.kind == Tok::Ident && upper(t.text) == k; }
    bool kw(std::string_view k) {
        if (!is_kw(peek(), k)) return false;
        ++pos_;
        return true;
    }
    void expect_kw(std::string_view k) {
        if (!kw(k)) unsupported("expected " + std::string(k) + " near '" + peek().text + "'");
    }
    bool sym(std::string_view s) {
        if (peek().kind != Tok::Sym || peek().text != s) return false;
        ++pos_;
        return true;
    }
    void expect_sym(std::string_view s) {
        if (!sym(s)) unsupported("expected '" + std::string(s) + "' near '" + peek().text + "'");
    }
    std::string name() {
        const auto& t = peek();
        if (t.kind != Tok::Ident || kKeywords.count(upper(t.text))) unsupported("expected a name near '" + t.text + "'");
        ++pos_;
        return lower(t.text);
    }

    TableRef table_ref() {
        TableRef t;
        t.name = name();
        if (kw("AS")) {
            t.alias = name();
        } else if (peek().kind == Tok::Ident && !kKeywords.count(upper(peek().text))) {
            t.alias = name();
        }
        return t;
    }

    void join(Query& q) {
        q.join = table_ref();
        expect_kw("ON");
        Expr e;
        e.kind = Expr::Cmp;
        e.kids.push_back(column_expr());
        expect_sym("=");
        e.fn = "=";
        e.kids.push_back(column_expr());
        q.on = std::move(e);
    }

    ColRef colref() {
        ColRef c;
        c.name = name();
        if (sym(".")) {
            c.qual = c.name;
            c.name = name();
        }
        return c;
    }

    Expr column_expr() {
        Expr e;
        e.kind = Expr::Col;
        e.col = colref();
        return e;
    }

    Item item() {
        Item it;
        const auto start = pos_;
        if (sym("*")) {
            it.star = true;
            return it;
        }
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Sym && peek(1).text == "." && peek(2).kind == Tok::Sym &&
            peek(2).text == "*") {
            it.star = true;
            it.star_qual = name();
            pos_ += 2;
            return it;
        }
        it.expr = operand();
        for (auto i = start; i < pos_; ++i) it.label += toks_[i].text;
        if (kw("AS")) it.alias = name();
        return it;
    }

    Expr operand() {
        const auto& t = peek();
        Expr e;
        if (t.kind == Tok::Int || t.kind == Tok::Real || (t.kind == Tok::Sym && t.text == "-")) {
            const bool neg = sym("-");
            const auto& n = next();
            if (n.kind == Tok::Int) {
                e.lit = (neg ? -1 : 1) * std::stoll(n.text);
            } else if (n.kind == Tok::Real) {
                e.lit = (neg ? -1.0 : 1.0) * std::stod(n.text);
            } else {
                unsupported("expected a number after '-'");
            }
            return e;
        }
        if (t.kind == Tok::Str) {
            e.lit = next().text;
            return e;
        }
        if (is_kw(t, "NULL")) {
            ++pos_;
            return e;
        }
        if (t.kind == Tok::Ident && kAggregates.count(upper(t.text)) && peek(1).kind == Tok::Sym &&
            peek(1).text == "(") {
            e.kind = Expr::Agg;
            e.fn = upper(next().text);
            expect_sym("(");
            if (sym("*")) {
                if (e.fn != "COUNT") unsupported(e.fn + "(*) is not supported");
                e.star = true;
            } else {
                e.col = colref();
            }
            expect_sym(")");
            return e;
        }
        return column_expr();
    }

    Expr condition() {
        Expr left = conjunction();
        while (kw("OR")) {
            Expr e;
            e.kind = Expr::Or;
            e.kids.push_back(std::move(left));
            e.kids.push_back(conjunction());
            left = std::move(e);
        }
        return left;
    }

    Expr conjunction() {
        Expr left = predicate();
        while (kw("AND")) {
            Expr e;
            e.kind = Expr::And;
            e.kids.push_back(std::move(left));
            e.kids.push_back(predicate());
            left = std::move(e);
        }
        return left;
    }

    Expr predicate() {
        if (kw("NOT")) {
            Expr e;
            e.kind = Expr::Not;
            e.kids.push_back(predicate());
            return e;
        }
        if (sym("(")) {
            Expr e = condition();
            expect_sym(")");
            return e;
        }
        Expr e;
        e.kind = Expr::Cmp;
        e.kids.push_back(operand());
        const auto& t = peek();
        static const std::set<std::string> ops = {"=", "!=", "<>", "<", "<=", ">", ">="};
        if (t.kind != Tok::Sym || !ops.count(t.text)) unsupported("expected a comparison near '" + t.text + "'");
        e.fn = next().text;
        if (e.fn == "<>") e.fn = "!=";
        e.kids.push_back(operand());
        return e;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ---- evaluation ----

std::optional<double> as_number(const Cell& c) {
    if (auto i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    if (auto d = std::get_if<double>(&c)) return *d;
    return std::nullopt;
}

// -1, 0, 1, or nullopt when the values are not comparable (NULL or mixed types).
std::optional<int> compare(const Cell& a, const Cell& b) {
    const auto x = as_number(a);
    const auto y = as_number(b);
    if (x && y) return (*x < *y) ? -1 : (*x > *y ? 1 : 0);
    const auto* s = std::get_if<std::string>(&a);
    const auto* t = std::get_if<std::string>(&b);
    if (s && t) return s->compare(*t) < 0 ? -1 : (*s == *t ? 0 : 1);
    return std::nullopt;
}

// Total order used for sorting; NULLs first, then numbers, then text.
bool sort_less(const Cell& a, const Cell& b) {
    auto rank = [](const Cell& c) { return std::holds_alternative<std::monostate>(c) ? 0 : (as_number(c) ? 1 : 2); };
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    const auto c = compare(a, b);
    return c && *c < 0;
}

struct Source {
    std::string qual;  // alias if given, else table name
    const Table* table;
    std::size_t offset;
};

class Executor {
public:
    Executor(Query q, const Database& db) : q_(std::move(q)), db_(db) {}

    Table run() {
        add_source(q_.from);
        if (q_.join) add_source(*q_.join);
        bind_all();

        std::vector<Row> rows;
        const auto& left = *sources_[0].table;
        if (q_.join) {
            const auto& right = *sources_[1].table;
            for (const auto& l : left.rows) {
                for (const auto& r : right.rows) {
                    Row row = l;
                    row.insert(row.end(), r.begin(), r.end());
                    if (truth(*q_.on, row, nullptr)) rows.push_back(std::move(row));
                }
            }
        } else {
            rows = left.rows;
        }
        if (q_.where) {
            std::vector<Row> kept;
            for (auto& r : rows) {
                if (truth(*q_.where, r, nullptr)) kept.push_back(std::move(r));
            }
            rows = std::move(kept);
        }

        Table out;
        for (const auto& it : q_.items) {
            if (it.star) {
                for (const auto& s : sources_) {
                    if (!it.star_qual.empty() && it.star_qual != s.qual) continue;
                    for (const auto& c : s.table->columns) out.columns.push_back(c);
                }
            } else {
                out.columns.push_back(it.alias.empty() ? it.label : it.alias);
            }
        }

        std::vector<std::pair<Row, std::vector<Cell>>> produced;  // output row, sort keys
        if (grouped()) {
            for (const auto& it : q_.items) {
                if (it.star) semantic("'*' cannot be combined with grouping");
            }
            std::vector<std::vector<const Row*>> groups;
            std::map<std::string, std::size_t> index;
            if (q_.group_by.empty()) groups.emplace_back();
            for (const auto& r : rows) {
                if (q_.group_by.empty()) {
                    groups[0].push_back(&r);
                    continue;
                }
                std::string key;
                for (const auto& g : q_.group_by) key += std::to_string(r[g.index].index()) + ":" + to_string(r[g.index]) + '\x1f';
                auto [it, fresh] = index.emplace(key, groups.size());
                if (fresh) groups.emplace_back();
                groups[it->second].push_back(&r);
            }
            for (const auto& g : groups) {
                if (q_.having && !truth(*q_.having, g.empty() ? empty_row() : *g[0], &g)) continue;
                const Row& first = g.empty() ? empty_row() : *g[0];
                Row o;
                for (const auto& it : q_.items) o.push_back(eval(it.expr, first, &g));
                produced.push_back({o, order_keys(first, &g, o)});
            }
        } else {
            for (const auto& r : rows) {
                Row o;
                for (const auto& it : q_.items) {
                    if (!it.star) {
                        o.push_back(eval(it.expr, r, nullptr));
                        continue;
                    }
                    for (const auto& s : sources_) {
                        if (!it.star_qual.empty() && it.star_qual != s.qual) continue;
                        o.insert(o.end(), r.begin() + static_cast<std::ptrdiff_t>(s.offset),
                                 r.begin() + static_cast<std::ptrdiff_t>(s.offset + s.table->columns.size()));
                    }
                }
                produced.push_back({o, order_keys(r, nullptr, o)});
            }
        }
        if (!q_.order.empty()) {
            std::stable_sort(produced.begin(), produced.end(), [&](const auto& a, const auto& b) {
                for (std::size_t k = 0; k < q_.order.size(); ++k) {
                    const auto& x = a.second[k];
                    const auto& y = b.second[k];
                    if (sort_less(x, y)) return !q_.order[k].desc;
                    if (sort_less(y, x)) return q_.order[k].desc;
                }
                return false;
            });
        }
        if (q_.limit) {
            if (*q_.limit < 0) unsupported("negative LIMIT");
            if (produced.size() > static_cast<std::size_t>(*q_.limit)) produced.resize(static_cast<std::size_t>(*q_.limit));
        }
        for (auto& p : produced) out.rows.push_back(std::move(p.first));
        return out;
    }

private:
    const Row& empty_row() {
        if (!empty_) {
            std::size_t n = 0;
            for (const auto& s : sources_) n += s.table->columns.size();
            empty_ = Row(n);
        }
        return *empty_;
    }

    void add_source(const TableRef& t) {
        const Table* found = nullptr;
        for (const auto& [name, table] : db_) {
            if (lower(name) == t.name) found = &table;
        }
        if (!found) semantic("unknown table '" + t.name + "'");
        Source s{t.alias.empty() ? t.name : t.alias, found, 0};
        for (const auto& prev : sources_) {
            s.offset += prev.table->columns.size();
            if (prev.qual == s.qual) semantic("duplicate table name '" + s.qual + "'");
        }
        sources_.push_back(s);
    }

    void resolve(ColRef& c) {
        int hit = -1;
        int count = 0;
        for (const auto& s : sources_) {
            if (!c.qual.empty() && c.qual != s.qual) continue;
            for (std::size_t i = 0; i < s.table->columns.size(); ++i) {
                if (lower(s.table->columns[i]) == c.name) {
                    hit = static_cast<int>(s.offset + i);
                    ++count;
                }
            }
        }
        const auto shown = c.qual.empty() ? c.name : c.qual + "." + c.name;
        if (count == 0) semantic("unknown column '" + shown + "'");
        if (count > 1) semantic("ambiguous column '" + shown + "'");
        c.index = hit;
    }

    void bind(Expr& e) {
        if (e.kind == Expr::Col || (e.kind == Expr::Agg && !e.star)) resolve(e.col);
        for (auto& k : e.kids) bind(k);
    }

    void bind_all() {
        for (const auto& it : q_.items) {
            if (!it.star || it.star_qual.empty()) continue;
            bool ok = false;
            for (const auto& s : sources_) ok = ok || s.qual == it.star_qual;
            if (!ok) semantic("unknown table '" + it.star_qual + "'");
        }
        for (auto& it : q_.items) {
            if (!it.star) bind(it.expr);
        }
        if (q_.on) bind(*q_.on);
        if (q_.where) {
            if (has_agg(*q_.where)) semantic("aggregate in WHERE");
            bind(*q_.where);
        }
        for (auto& g : q_.group_by) resolve(g);
        if (q_.having) bind(*q_.having);
        for (auto& k : q_.order) {
            if (k.expr.kind == Expr::Col && k.expr.col.qual.empty()) {
                for (std::size_t i = 0; i < q_.items.size(); ++i) {
                    if (!q_.items[i].alias.empty() && q_.items[i].alias == k.expr.col.name) {
                        k.expr.col.output = static_cast<int>(i);
                    }
                }
                if (k.expr.col.output >= 0) continue;
            }
            bind(k.expr);
        }
    }

    static bool has_agg(const Expr& e) {
        if (e.kind == Expr::Agg) return true;
        return std::any_of(e.kids.begin(), e.kids.end(), has_agg);
    }

    bool grouped() const {
        if (!q_.group_by.empty() || q_.having) return true;
        for (const auto& it : q_.items) {
            if (!it.star && has_agg(it.expr)) return true;
        }
        for (const auto& k : q_.order) {
            if (has_agg(k.expr)) return true;
        }
        return false;
    }

    std::vector<Cell> order_keys(const Row& r, const std::vector<const Row*>* group, const Row& out) {
        std::vector<Cell> keys;
        for (const auto& k : q_.order) {
            if (k.expr.kind == Expr::Col && k.expr.col.output >= 0) {
                keys.push_back(out[static_cast<std::size_t>(k.expr.col.output)]);
            } else {
                keys.push_back(eval(k.expr, r, group));
            }
        }
        return keys;
    }

    Cell aggregate(const Expr& e, const std::vector<const Row*>& group) {
        if (e.fn == "COUNT") {
            if (e.star) return static_cast<std::int64_t>(group.size());
            std::int64_t n = 0;
            for (const auto* r : group) n += !std::holds_alternative<std::monostate>((*r)[e.col.index]);
            return n;
        }
        std::vector<Cell> vals;
        for (const auto* r : group) {
            const auto& c = (*r)[e.col.index];
            if (!std::holds_alternative<std::monostate>(c)) vals.push_back(c);
        }
        if (vals.empty()) return std::monostate{};
        if (e.fn == "MIN" || e.fn == "MAX") {
            Cell best = vals[0];
            for (const auto& v : vals) {
                if (e.fn == "MIN" ? sort_less(v, best) : sort_less(best, v)) best = v;
            }
            return best;
        }
        bool all_int = true;
        double sum = 0.0;
        std::int64_t isum = 0;
        for (const auto& v : vals) {
            const auto x = as_number(v);
            if (!x) semantic(e.fn + " over a text column");
            if (auto i = std::get_if<std::int64_t>(&v)) {
                isum += *i;
            } else {
                all_int = false;
            }
            sum += *x;
        }
        if (e.fn == "SUM") return all_int ? Cell{isum} : Cell{sum};
        return sum / static_cast<double>(vals.size());
    }

    Cell eval(const Expr& e, const Row& r, const std::vector<const Row*>* group) {
        switch (e.kind) {
            case Expr::Col: return r[static_cast<std::size_t>(e.col.index)];
            case Expr::Lit: return e.lit;
            case Expr::Agg:
                if (!group) semantic("aggregate outside a grouped query");
                return aggregate(e, *group);
            default: return static_cast<std::int64_t>(truth(e, r, group));
        }
    }

    bool truth(const Expr& e, const Row& r, const std::vector<const Row*>* group) {
        switch (e.kind) {
            case Expr::And: return truth(e.kids[0], r, group) && truth(e.kids[1], r, group);
            case Expr::Or: return truth(e.kids[0], r, group) || truth(e.kids[1], r, group);
            case Expr::Not: return !truth(e.kids[0], r, group);
            case Expr::Cmp: {
                const auto c = compare(eval(e.kids[0], r, group), eval(e.kids[1], r, group));
                if (!c) return false;
                if (e.fn == "=") return *c == 0;
                if (e.fn == "!=") return *c != 0;
                if (e.fn == "<") return *c < 0;
                if (e.fn == "<=") return *c <= 0;
                if (e.fn == ">") return *c > 0;
                return *c >= 0;
            }
            default: unsupported("a value is not a condition");
        }
    }

    Query q_;
    const Database& db_;
    std::vector<Source> sources_;
    std::optional<Row> empty_;
};

Cell cell_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw Error(ErrorCode::ParseError, "unsupported cell " + j.dump());
}

}  // namespace

std::string to_string(const Cell& cell) {
    if (std::holds_alternative<std::monostate>(cell)) return "NULL";
    if (auto i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
    if (auto d = std::get_if<double>(&cell)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", *d);
        return buf;
    }
    return std::get<std::string>(cell);
}

Database database_from_json(const nlohmann::json& doc) {
    Database db;
    try {
        for (const auto& [name, jt] : doc.at("tables").items()) {
            Table t;
            t.columns = jt.at("columns").get<std::vector<std::string>>();
            for (const auto& jr : jt.at("rows")) {
                Row r;
                for (const auto& c : jr) r.push_back(cell_from_json(c));
                if (r.size() != t.columns.size()) throw Error(ErrorCode::ParseError, "row width differs in " + name);
                t.rows.push_back(std::move(r));
            }
            db.emplace(name, std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("database: ") + e.what());
    }
    return db;
}

Database load_database(const std::filesystem::path& path) {
    try {
        return database_from_json(nlohmann::json::parse(schema::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

Table execute_sql(std::string_view query, const Database& db) {
    Parser p(lex(query));
    return Executor(p.parse(), db).run();
}

bool parses(std::string_view query) {
    try {
        Parser p(lex(query));
        p.parse();
        return true;
    } catch (const Error&) {
        return false;
    }
}

bool same_result(const Table& a, const Table& b) {
    if (a.rows.size() != b.rows.size()) return false;
    const auto width = a.rows.empty() ? a.columns.size() : a.rows[0].size();
    const auto width_b = b.rows.empty() ? b.columns.size() : b.rows[0].size();
    if (width != width_b) return false;
    auto equal = [](const Cell& x, const Cell& y) {
        const auto u = as_number(x);
        const auto v = as_number(y);
        if (u && v) return std::fabs(*u - *v) <= 1e-9 * std::max({1.0, std::fabs(*u), std::fabs(*v)});
        if (u || v) return false;
        return x == y;
    };
    std::vector<bool> used(b.rows.size(), false);
    for (const auto& ra : a.rows) {
        bool found = false;
        for (std::size_t j = 0; j < b.rows.size() && !found; ++j) {
            if (used[j] || b.rows[j].size() != ra.size()) continue;
            bool same = true;
            for (std::size_t k = 0; k < ra.size() && same; ++k) same = equal(ra[k], b.rows[j][k]);
            if (same) {
                used[j] = true;
                found = true;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace metatool::sql
