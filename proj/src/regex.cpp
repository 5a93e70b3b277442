// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

// Regex -> Thompson NFA -> subset-construction byte DFA.

#include <algorithm>
#include <bitset>
#include <deque>
#include <unordered_map>

#include "metatool/error.hpp"
#include "metatool/fsm.hpp"

namespace metatool::fsm {

namespace {

using ByteSet = std::bitset<256>;

struct AstNode {
    enum class Kind { Empty, Set, Concat, Alt, Repeat };
    Kind kind = Kind::Empty;
    ByteSet set;
    std::vector<int> kids;
    int min = 0;
    int max = 0;  // -1 = unbounded
};

class RegexParser {
public:
    explicit RegexParser(std::string_view text) : text_(text) {}

    std::vector<AstNode> parse(int& root) {
        root = alternation();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return std::move(nodes_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorCode::ParseError, "regex offset " + std::to_string(pos_) + ": " + msg);
    }

    int add(AstNode node) {
        nodes_.push_back(std::move(node));
        return static_cast<int>(nodes_.size()) - 1;
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    int alternation() {
        std::vector<int> branches{concatenation()};
        while (!at_end() && peek() == '|') {
            ++pos_;
            branches.push_back(concatenation());
        }
        if (branches.size() == 1) return branches[0];
        AstNode n;
        n.kind = AstNode::Kind::Alt;
        n.kids = std::move(branches);
        return add(std::move(n));
    }

    int concatenation() {
        std::vector<int> parts;
        while (!at_end() && peek() != '|' && peek() != ')') parts.push_back(repetition());
        if (parts.empty()) return add(AstNode{});
        if (parts.size() == 1) return parts[0];
        AstNode n;
        n.kind = AstNode::Kind::Concat;
        n.kids = std::move(parts);
        return add(std::move(n));
    }

    int number() {
        const auto start = pos_;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (start == pos_) fail("expected a repetition count");
        return std::stoi(std::string(text_.substr(start, pos_ - start)));
    }

    int repetition() {
        int atom_id = atom();
        while (!at_end()) {
            int lo = 0;
            int hi = 0;
            const char c = peek();
            if (c == '*') {
                lo = 0, hi = -1, ++pos_;
            } else if (c == '+') {
                lo = 1, hi = -1, ++pos_;
            } else if (c == '?') {
                lo = 0, hi = 1, ++pos_;
            } else if (c == '{') {
                ++pos_;
                lo = number();
                hi = lo;
                if (!at_end() && peek() == ',') {
                    ++pos_;
                    hi = (!at_end() && peek() == '}') ? -1 : number();
                }
                if (at_end() || peek() != '}') fail("unterminated '{'");
                ++pos_;
                if (hi >= 0 && hi < lo) fail("repetition max below min");
            } else {
                break;
            }
            AstNode n;
            n.kind = AstNode::Kind::Repeat;
            n.kids = {atom_id};
            n.min = lo;
            n.max = hi;
            atom_id = add(std::move(n));
        }
        return atom_id;
    }

    ByteSet escape_set(char c) {
        ByteSet s;
        switch (c) {
            case 'd':
                for (char d = '0'; d <= '9'; ++d) s.set(static_cast<unsigned char>(d));
                return s;
            case 'w':
                for (int b = 0; b < 256; ++b) {
                    if (std::isalnum(b) || b == '_') s.set(static_cast<std::size_t>(b));
                }
                return s;
            case 's':
                for (char w : std::string_view(" \t\n\r\f\v")) s.set(static_cast<unsigned char>(w));
                return s;
            case 'n': s.set('\n'); return s;
            case 't': s.set('\t'); return s;
            case 'r': s.set('\r'); return s;
            default: s.set(static_cast<unsigned char>(c)); return s;
        }
    }

    int atom() {
        const char c = peek();
        if (c == '(') {
            ++pos_;
            int inner = alternation();
            if (at_end() || peek() != ')') fail("unbalanced '('");
            ++pos_;
            return inner;
        }
        AstNode n;
        n.kind = AstNode::Kind::Set;
        if (c == '[') {
            ++pos_;
            n.set = char_class();
        } else if (c == '.') {
            ++pos_;
            n.set.set();
            n.set.reset('\n');
        } else if (c == '\\') {
            ++pos_;
            if (at_end()) fail("dangling escape");
            n.set = escape_set(peek());
            ++pos_;
        } else if (c == '*' || c == '+' || c == '?' || c == '{') {
            fail("repetition without operand");
        } else {
            n.set.set(static_cast<unsigned char>(c));
            ++pos_;
        }
        return add(std::move(n));
    }

    ByteSet char_class() {
        ByteSet s;
        bool negate = false;
        if (!at_end() && peek() == '^') {
            negate = true;
            ++pos_;
        }
        bool first = true;
        while (true) {
            if (at_end()) fail("unterminated character class");
            char c = peek();
            if (c == ']' && !first) {
                ++pos_;
                break;
            }
            first = false;
            ByteSet item;
            unsigned char lo = 0;
            bool single = true;
            if (c == '\\') {
                ++pos_;
                if (at_end()) fail("dangling escape in class");
                item = escape_set(peek());
                single = item.count() == 1;
                lo = static_cast<unsigned char>(peek());
                if (single) {
                    for (int b = 0; b < 256; ++b) {
                        if (item.test(static_cast<std::size_t>(b))) lo = static_cast<unsigned char>(b);
                    }
                }
                ++pos_;
            } else {
                lo = static_cast<unsigned char>(c);
                item.set(lo);
                ++pos_;
            }
            if (single && pos_ + 1 < text_.size() && peek() == '-' && text_[pos_ + 1] != ']') {
                ++pos_;
                unsigned char hi = static_cast<unsigned char>(peek());
                if (hi == '\\') {
                    ++pos_;
                    if (at_end()) fail("dangling escape in class");
                    hi = static_cast<unsigned char>(peek());
                }
                ++pos_;
                if (hi < lo) fail("reversed class range");
                for (int b = lo; b <= hi; ++b) item.set(static_cast<std::size_t>(b));
            }
            s |= item;
        }
        if (negate) s.flip();
        return s;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<AstNode> nodes_;
};

struct Nfa {
    struct State {
        std::vector<int> eps;
        int set = -1;
        int target = -1;
    };
    std::vector<State> states;
    std::vector<ByteSet> sets;
    std::size_t cap = 0;

    int new_state() {
        if (states.size() >= cap) {
            throw Error(ErrorCode::StateBudgetExceeded, "NFA exceeds " + std::to_string(cap) + " states");
        }
        states.emplace_back();
        return static_cast<int>(states.size()) - 1;
    }
};

struct Fragment {
    int start;
    int accept;
};

Fragment build(const std::vector<AstNode>& ast, int id, Nfa& nfa) {
    const auto& node = ast[static_cast<std::size_t>(id)];
    switch (node.kind) {
        case AstNode::Kind::Empty: {
            const int s = nfa.new_state();
            const int a = nfa.new_state();
            nfa.states[static_cast<std::size_t>(s)].eps.push_back(a);
            return {s, a};
        }
        case AstNode::Kind::Set: {
            const int s = nfa.new_state();
            const int a = nfa.new_state();
            nfa.sets.push_back(node.set);
            nfa.states[static_cast<std::size_t>(s)].set = static_cast<int>(nfa.sets.size()) - 1;
            nfa.states[static_cast<std::size_t>(s)].target = a;
            return {s, a};
        }
        case AstNode::Kind::Concat: {
            Fragment whole = build(ast, node.kids[0], nfa);
            for (std::size_t i = 1; i < node.kids.size(); ++i) {
                Fragment next = build(ast, node.kids[i], nfa);
                nfa.states[static_cast<std::size_t>(whole.accept)].eps.push_back(next.start);
                whole.accept = next.accept;
            }
            return whole;
        }
        case AstNode::Kind::Alt: {
            const int s = nfa.new_state();
            const int a = nfa.new_state();
            for (int kid : node.kids) {
                Fragment f = build(ast, kid, nfa);
                nfa.states[static_cast<std::size_t>(s)].eps.push_back(f.start);
                nfa.states[static_cast<std::size_t>(f.accept)].eps.push_back(a);
            }
            return {s, a};
        }
        case AstNode::Kind::Repeat: {
            const int s = nfa.new_state();
            int tail = s;
            for (int i = 0; i < node.min; ++i) {
                Fragment f = build(ast, node.kids[0], nfa);
                nfa.states[static_cast<std::size_t>(tail)].eps.push_back(f.start);
                tail = f.accept;
            }
            const int a = nfa.new_state();
            if (node.max < 0) {
                Fragment f = build(ast, node.kids[0], nfa);
                nfa.states[static_cast<std::size_t>(tail)].eps.push_back(f.start);
                nfa.states[static_cast<std::size_t>(tail)].eps.push_back(a);
                nfa.states[static_cast<std::size_t>(f.accept)].eps.push_back(f.start);
                nfa.states[static_cast<std::size_t>(f.accept)].eps.push_back(a);
            } else {
                for (int i = node.min; i < node.max; ++i) {
                    Fragment f = build(ast, node.kids[0], nfa);
                    nfa.states[static_cast<std::size_t>(tail)].eps.push_back(f.start);
                    nfa.states[static_cast<std::size_t>(tail)].eps.push_back(a);
                    tail = f.accept;
                }
                nfa.states[static_cast<std::size_t>(tail)].eps.push_back(a);
            }
            return {s, a};
        }
    }
    throw Error(ErrorCode::ParseError, "bad regex node");
}

struct VecHash {
    std::size_t operator()(const std::vector<int>& v) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (int x : v) {
            h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

bool ByteDfa::empty_language() const {
    if (accepting[static_cast<std::size_t>(start)]) return false;
    const auto& row = next[static_cast<std::size_t>(start)];
    return std::all_of(row.begin(), row.end(), [](StateId s) { return s == kNoState; });
}

bool ByteDfa::matches(std::string_view text) const {
    StateId s = start;
    for (unsigned char c : text) {
        s = next[static_cast<std::size_t>(s)][c];
        if (s == kNoState) return false;
    }
    return accepting[static_cast<std::size_t>(s)];
}

ByteDfa compile_regex(std::string_view regex, std::size_t state_cap) {
    int root = 0;
    const auto ast = RegexParser(regex).parse(root);
    Nfa nfa;
    nfa.cap = state_cap * 4 + 1024;
    const Fragment top = build(ast, root, nfa);

    // Byte equivalence classes: bytes with identical membership across all sets.
    std::vector<int> byte_class(256, 0);
    std::vector<unsigned char> class_rep;
    {
        std::unordered_map<std::string, int> sig_to_class;
        for (int b = 0; b < 256; ++b) {
            std::string sig(nfa.sets.size(), '0');
            for (std::size_t i = 0; i < nfa.sets.size(); ++i) {
                if (nfa.sets[i].test(static_cast<std::size_t>(b))) sig[i] = '1';
            }
            auto [it, inserted] = sig_to_class.emplace(sig, static_cast<int>(class_rep.size()));
            if (inserted) class_rep.push_back(static_cast<unsigned char>(b));
            byte_class[static_cast<std::size_t>(b)] = it->second;
        }
    }

    std::vector<std::uint32_t> mark(nfa.states.size(), 0);
    std::uint32_t generation = 0;
    auto closure = [&](std::vector<int> seeds) {
        ++generation;
        std::vector<int> stack = std::move(seeds);
        std::vector<int> out;
        while (!stack.empty()) {
            const int q = stack.back();
            stack.pop_back();
            if (mark[static_cast<std::size_t>(q)] == generation) continue;
            mark[static_cast<std::size_t>(q)] = generation;
            out.push_back(q);
            for (int e : nfa.states[static_cast<std::size_t>(q)].eps) stack.push_back(e);
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    std::vector<std::vector<int>> subsets;
    std::unordered_map<std::vector<int>, StateId, VecHash> index;
    std::vector<std::vector<StateId>> class_next;  // [state][class]
    auto intern = [&](std::vector<int> subset) -> StateId {
        auto it = index.find(subset);
        if (it != index.end()) return it->second;
        if (subsets.size() >= state_cap) {
            throw Error(ErrorCode::StateBudgetExceeded, "DFA exceeds " + std::to_string(state_cap) + " states");
        }
        const auto id = static_cast<StateId>(subsets.size());
        index.emplace(subset, id);
        subsets.push_back(std::move(subset));
        return id;
    };
    intern(closure({top.start}));
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        std::vector<StateId> row(class_rep.size(), kNoState);
        for (std::size_t c = 0; c < class_rep.size(); ++c) {
            std::vector<int> moved;
            for (int q : subsets[s]) {
                const auto& st = nfa.states[static_cast<std::size_t>(q)];
                if (st.set >= 0 && nfa.sets[static_cast<std::size_t>(st.set)].test(class_rep[c])) {
                    moved.push_back(st.target);
                }
            }
            if (moved.empty()) continue;
            row[c] = intern(closure(std::move(moved)));
        }
        class_next.push_back(std::move(row));
    }

    const std::size_t n = subsets.size();
    std::vector<bool> accepting(n, false);
    for (std::size_t s = 0; s < n; ++s) {
        accepting[s] = std::binary_search(subsets[s].begin(), subsets[s].end(), top.accept);
    }

    // Trim: keep states that can reach acceptance, renumber in BFS order from start.
    std::vector<std::vector<StateId>> reverse(n);
    for (std::size_t s = 0; s < n; ++s) {
        for (StateId t : class_next[s]) {
            if (t != kNoState) reverse[static_cast<std::size_t>(t)].push_back(static_cast<StateId>(s));
        }
    }
    std::vector<bool> live(n, false);
    std::deque<StateId> queue;
    for (std::size_t s = 0; s < n; ++s) {
        if (accepting[s]) {
            live[s] = true;
            queue.push_back(static_cast<StateId>(s));
        }
    }
    while (!queue.empty()) {
        const auto s = queue.front();
        queue.pop_front();
        for (StateId p : reverse[static_cast<std::size_t>(s)]) {
            if (!live[static_cast<std::size_t>(p)]) {
                live[static_cast<std::size_t>(p)] = true;
                queue.push_back(p);
            }
        }
    }

    ByteDfa dfa;
    if (!live[0]) {
        dfa.next.push_back({});
        dfa.next[0].fill(kNoState);
        dfa.accepting.push_back(false);
        return dfa;
    }
    std::vector<StateId> renumber(n, kNoState);
    std::vector<StateId> order{0};
    renumber[0] = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto s = static_cast<std::size_t>(order[i]);
        for (int b = 0; b < 256; ++b) {
            const StateId t = class_next[s][static_cast<std::size_t>(byte_class[static_cast<std::size_t>(b)])];
            if (t == kNoState || !live[static_cast<std::size_t>(t)]) continue;
            if (renumber[static_cast<std::size_t>(t)] == kNoState) {
                renumber[static_cast<std::size_t>(t)] = static_cast<StateId>(order.size());
                order.push_back(t);
            }
        }
    }
    dfa.next.resize(order.size());
    dfa.accepting.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto s = static_cast<std::size_t>(order[i]);
        dfa.accepting[i] = accepting[s];
        for (int b = 0; b < 256; ++b) {
            const StateId t = class_next[s][static_cast<std::size_t>(byte_class[static_cast<std::size_t>(b)])];
            dfa.next[i][static_cast<std::size_t>(b)] =
                (t == kNoState || !live[static_cast<std::size_t>(t)]) ? kNoState : renumber[static_cast<std::size_t>(t)];
        }
    }
    return dfa;
}

std::vector<std::string> enumerate_language(const ByteDfa& dfa, std::size_t max_len, std::size_t limit) {
    std::vector<std::string> out;
    std::string prefix;
    auto dfs = [&](auto&& self, StateId s) -> void {
        if (dfa.accepting[static_cast<std::size_t>(s)]) {
            if (out.size() >= limit) throw Error(ErrorCode::InvalidArgument, "language larger than enumeration limit");
            out.push_back(prefix);
        }
        if (prefix.size() >= max_len) return;
        for (int b = 0; b < 256; ++b) {
            const StateId t = dfa.next[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
            if (t == kNoState) continue;
            prefix.push_back(static_cast<char>(b));
            self(self, t);
            prefix.pop_back();
        }
    };
    dfs(dfs, dfa.start);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace metatool::fsm
