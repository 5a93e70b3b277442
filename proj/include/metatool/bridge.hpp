// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "metatool/lm.hpp"

namespace metatool::bridge {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7077;

/// Base64 (standard alphabet, padded) of the little-endian IEEE-754 bytes.
std::string encode_f32(std::span<const float> values);
/// Throws Error(Protocol) on bad base64 or a byte count that is not a multiple of 4.
std::vector<float> decode_f32(std::string_view b64);

std::string encode_bytes(std::string_view bytes);
std::string decode_bytes(std::string_view b64);

struct ServerInfo {
    std::size_t vocab_size = 0;
    TokenId eos_id = 0;
    std::size_t embed_dim = 0;
    std::size_t context = 0;
    std::string model;
    std::string encoder;
    std::vector<std::string> tokens;  // byte string of every id
};

/// Parses the result of an `info` call; throws Error(Protocol) on missing fields or a
/// token table whose size differs from vocab_size.
ServerInfo info_from_json(const nlohmann::json& doc);

/// One TCP connection carrying newline-delimited JSON, one request in flight.
class Connection {
public:
    /// Throws Error(BackendUnavailable) when the server cannot be reached.
    Connection(std::string host, std::uint16_t port, std::chrono::milliseconds timeout = std::chrono::seconds(60));
    ~Connection();
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    /// Sends {"v", "id", "op", ...payload} and returns the response object. Throws
    /// Error(Protocol) for error responses, id or version mismatches and unparsable
    /// lines; Error(BackendUnavailable) when the connection drops.
    nlohmann::json call(const std::string& op, nlohmann::json payload = nlohmann::json::object());

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint64_t next_id_ = 1;
};

/// LmBackend whose tokenizer, logits and embeddings live in a bridge server. Decoding
/// states send the whole context with every logits request.
class BridgeBackend final : public lm::LmBackend {
public:
    static std::unique_ptr<BridgeBackend> connect(const std::string& host, std::uint16_t port,
                                                  std::chrono::milliseconds timeout = std::chrono::seconds(60));

    std::string name() const override { return "bridge:" + info_.model; }
    const Vocabulary& vocab() const override { return vocab_; }
    std::vector<TokenId> tokenize(std::string_view text) const override;
    std::string detokenize(std::span<const TokenId> ids) const override;
    std::unique_ptr<lm::DecodeState> start(std::span<const TokenId> context) const override;
    std::vector<float> embed(std::string_view text) const override;
    std::size_t embed_dim() const override { return info_.embed_dim; }
    std::size_t context_limit() const override { return info_.context; }

    const ServerInfo& info() const { return info_; }
    /// Logits for the token after `ids`; throws Error(Protocol) on a wrong length.
    std::vector<float> logits(std::span<const TokenId> ids) const;

private:
    BridgeBackend(std::unique_ptr<Connection> conn, ServerInfo info);

    mutable std::mutex mu_;
    std::unique_ptr<Connection> conn_;
    ServerInfo info_;
    Vocabulary vocab_;
};

}  // namespace metatool::bridge
