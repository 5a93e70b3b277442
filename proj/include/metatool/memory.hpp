// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace metatool::memory {

struct Hit {
    std::size_t index = 0;
    double similarity = 0.0;
    const nlohmann::json* payload = nullptr;
};

/// Exact cosine-similarity store. Entries keep insertion order.
class MemoryStore {
public:
    explicit MemoryStore(std::size_t dim = 384) : dim_(dim) {}

    /// Throws Error(DimensionMismatch) on a wrong size and Error(InvalidArgument) on a
    /// zero or non-finite vector.
    void add(std::vector<float> embedding, nlohmann::json payload);

    /// Exact top-k by cosine; ties keep insertion order; k > size returns everything.
    /// Throws Error(EmptyStore) when empty, Error(InvalidArgument) when k == 0.
    std::vector<Hit> knn(const std::vector<float>& query, std::size_t k) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t dim() const { return dim_; }
    const nlohmann::json& payload(std::size_t i) const { return entries_.at(i).payload; }
    const std::vector<float>& embedding(std::size_t i) const { return entries_.at(i).embedding; }

    /// One `{"embedding": [...], "payload": {...}}` object per line.
    std::string to_jsonl() const;
    static MemoryStore from_jsonl(const std::string& text, std::size_t dim = 384);
    void save(const std::filesystem::path& path) const;
    static MemoryStore load(const std::filesystem::path& path, std::size_t dim = 384);

private:
    struct Entry {
        std::vector<float> embedding;
        double norm = 0.0;
        nlohmann::json payload;
    };
    std::size_t dim_;
    std::vector<Entry> entries_;
};

double cosine(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace metatool::memory
