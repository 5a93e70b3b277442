// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metatool {

using TokenId = std::int32_t;

/// Dense id -> byte-string table with one end-of-sequence id.
class Vocabulary {
public:
    /// 256 single-byte tokens plus EOS at id 256.
    static Vocabulary byte_level();

    /// `tokens[eos]` is ignored (EOS detokenizes to nothing).
    Vocabulary(std::vector<std::string> tokens, TokenId eos);

    std::size_t size() const { return tokens_.size(); }
    TokenId eos_id() const { return eos_; }
    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    bool valid(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }
    bool is_byte_level() const { return byte_level_; }

    /// Greedy longest match. Throws Error(InvalidToken) if some byte is not coverable.
    std::vector<TokenId> tokenize(std::string_view text) const;
    std::string detokenize(std::span<const TokenId> ids) const;

private:
    struct TrieNode {
        std::vector<std::pair<unsigned char, std::int32_t>> children;
        TokenId token = -1;
    };

    std::vector<std::string> tokens_;
    TokenId eos_;
    bool byte_level_ = false;
    std::vector<TrieNode> trie_;
};

}  // namespace metatool
