// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "metatool/error.hpp"

namespace metatool::checkpoint {

namespace {

constexpr std::string_view kMagic = "MTCKPT01";

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, const ad::Mat& value) {
    if (!tensors.count(name)) order.push_back(name);
    tensors[name] = value;
}

const ad::Mat& Checkpoint::get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorCode::InvalidArgument, "checkpoint has no tensor '" + name + "'");
    return it->second;
}

std::string serialize(const Checkpoint& ckpt) {
    nlohmann::json manifest;
    manifest["meta"] = ckpt.meta;
    manifest["tensors"] = nlohmann::json::array();
    std::string payload;
    std::size_t offset = 0;
    for (const auto& name : ckpt.order) {
        const auto& m = ckpt.tensors.at(name);
        const auto count = static_cast<std::size_t>(m.size());
        manifest["tensors"].push_back({{"name", name},
                                       {"shape", {m.rows(), m.cols()}},
                                       {"dtype", "f64"},
                                       {"offset", offset},
                                       {"count", count}});
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                char buf[8];
                std::memcpy(buf, &v, 8);
                payload.append(buf, 8);
            }
        }
        offset += count * 8;
    }
    const std::string header = manifest.dump();
    std::string out(kMagic);
    append_u64(out, header.size());
    out += header;
    out += payload;
    return out;
}

Checkpoint deserialize(const std::string& bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.compare(0, kMagic.size(), kMagic) != 0) {
        throw Error(ErrorCode::ParseError, "not a checkpoint archive");
    }
    const auto header_len = read_u64(bytes, kMagic.size());
    const std::size_t base = kMagic.size() + 8;
    if (header_len > bytes.size() - base) throw Error(ErrorCode::ParseError, "truncated manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(base, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad manifest: ") + e.what());
    }
    const std::size_t data = base + header_len;
    Checkpoint ckpt;
    ckpt.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& t : manifest.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto rows = t.at("shape").at(0).get<Eigen::Index>();
        const auto cols = t.at("shape").at(1).get<Eigen::Index>();
        const auto offset = t.at("offset").get<std::size_t>();
        const auto count = t.at("count").get<std::size_t>();
        if (t.value("dtype", "f64") != "f64" || count != static_cast<std::size_t>(rows * cols)) {
            throw Error(ErrorCode::ParseError, "bad tensor entry '" + name + "'");
        }
        if (data + offset + count * 8 > bytes.size()) throw Error(ErrorCode::ParseError, "truncated tensor '" + name + "'");
        ad::Mat m(rows, cols);
        const char* p = bytes.data() + data + offset;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c, p += 8) std::memcpy(&m(r, c), p, 8);
        }
        ckpt.put(name, m);
    }
    return ckpt;
}

void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    const auto bytes = serialize(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

Checkpoint from_params(const std::vector<const ad::Param*>& params, nlohmann::json meta) {
    Checkpoint ckpt;
    ckpt.meta = std::move(meta);
    for (const auto* p : params) ckpt.put(p->name, p->value);
    return ckpt;
}

void restore(const std::vector<ad::Param*>& params, const Checkpoint& ckpt) {
    for (auto* p : params) {
        const auto& m = ckpt.get(p->name);
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "tensor '" + p->name + "' shape differs from checkpoint");
        }
        p->value = m;
        p->zero_grad();
    }
}

}  // namespace metatool::checkpoint
