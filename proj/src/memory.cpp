// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/memory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "metatool/error.hpp"
#include "metatool/schema_io.hpp"

namespace metatool::memory {

namespace {

double norm_of(const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

}  // namespace

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with different sizes");
    const double na = norm_of(a);
    const double nb = norm_of(b);
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::InvalidArgument, "cosine of a zero vector");
    return dot(a, b) / (na * nb);
}

void MemoryStore::add(std::vector<float> embedding, nlohmann::json payload) {
    if (embedding.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "embedding has " + std::to_string(embedding.size()) + " entries, store expects " + std::to_string(dim_));
    }
    const double n = norm_of(embedding);
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "zero or non-finite embedding");
    entries_.push_back(Entry{std::move(embedding), n, std::move(payload)});
}

std::vector<Hit> MemoryStore::knn(const std::vector<float>& query, std::size_t k) const {
    if (entries_.empty()) throw Error(ErrorCode::EmptyStore, "knn on an empty store");
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (query.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "query size differs from the store");
    const double qn = norm_of(query);
    if (!(qn > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero query vector");
    std::vector<Hit> hits;
    hits.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        hits.push_back(Hit{i, dot(query, entries_[i].embedding) / (qn * entries_[i].norm), &entries_[i].payload});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.similarity > b.similarity; });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::string MemoryStore::to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) {
        nlohmann::json line = {{"embedding", e.embedding}, {"payload", e.payload}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

MemoryStore MemoryStore::from_jsonl(const std::string& text, std::size_t dim) {
    MemoryStore store(dim);
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto doc = nlohmann::json::parse(line);
            store.add(doc.at("embedding").get<std::vector<float>>(), doc.at("payload"));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, "memory line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return store;
}

void MemoryStore::save(const std::filesystem::path& path) const { schema::write_file(path, to_jsonl()); }

MemoryStore MemoryStore::load(const std::filesystem::path& path, std::size_t dim) {
    return from_jsonl(schema::read_file(path), dim);
}

}  // namespace metatool::memory
