// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/vocab.hpp"

#include <algorithm>

#include "metatool/error.hpp"

namespace metatool {

Vocabulary Vocabulary::byte_level() {
    std::vector<std::string> tokens;
    tokens.reserve(257);
    for (int b = 0; b < 256; ++b) tokens.emplace_back(1, static_cast<char>(b));
    tokens.emplace_back();
    return Vocabulary(std::move(tokens), 256);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId eos) : tokens_(std::move(tokens)), eos_(eos) {
    if (!valid(eos_)) throw Error(ErrorCode::InvalidArgument, "eos id outside vocabulary");
    byte_level_ = tokens_.size() == 257 && eos_ == 256;
    for (int b = 0; byte_level_ && b < 256; ++b) {
        byte_level_ = tokens_[static_cast<std::size_t>(b)].size() == 1 &&
                      static_cast<unsigned char>(tokens_[static_cast<std::size_t>(b)][0]) == b;
    }
    trie_.emplace_back();
    for (std::size_t id = 0; id < tokens_.size(); ++id) {
        if (static_cast<TokenId>(id) == eos_ || tokens_[id].empty()) continue;
        std::int32_t node = 0;
        for (unsigned char c : tokens_[id]) {
            auto& kids = trie_[static_cast<std::size_t>(node)].children;
            auto it = std::find_if(kids.begin(), kids.end(), [&](const auto& kv) { return kv.first == c; });
            if (it == kids.end()) {
                const auto child = static_cast<std::int32_t>(trie_.size());
                trie_[static_cast<std::size_t>(node)].children.emplace_back(c, child);
                trie_.emplace_back();
                node = child;
            } else {
                node = it->second;
            }
        }
        auto& slot = trie_[static_cast<std::size_t>(node)].token;
        if (slot < 0) slot = static_cast<TokenId>(id);
    }
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
    std::vector<TokenId> out;
    out.reserve(text.size());
    if (byte_level_) {
        for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
        return out;
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::int32_t node = 0;
        TokenId best = -1;
        std::size_t best_len = 0;
        for (std::size_t i = pos; i < text.size(); ++i) {
            const auto c = static_cast<unsigned char>(text[i]);
            const auto& kids = trie_[static_cast<std::size_t>(node)].children;
            auto it = std::find_if(kids.begin(), kids.end(), [&](const auto& kv) { return kv.first == c; });
            if (it == kids.end()) break;
            node = it->second;
            if (trie_[static_cast<std::size_t>(node)].token >= 0) {
                best = trie_[static_cast<std::size_t>(node)].token;
                best_len = i - pos + 1;
            }
        }
        if (best < 0) throw Error(ErrorCode::InvalidToken, "byte at offset " + std::to_string(pos) + " not coverable");
        out.push_back(best);
        pos += best_len;
    }
    return out;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
    std::string out;
    for (auto id : ids) {
        if (!valid(id)) throw Error(ErrorCode::InvalidToken, "token id " + std::to_string(id));
        if (id == eos_) continue;
        out += tokens_[static_cast<std::size_t>(id)];
    }
    return out;
}

}  // namespace metatool
