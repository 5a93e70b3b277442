// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/bridge.hpp"

#include <sodium.h>

#include <bit>
#include <boost/asio/ip/tcp.hpp>
#include <cstring>

#include "metatool/error.hpp"

namespace metatool::bridge {

namespace {

std::string b64_encode(const unsigned char* data, std::size_t n) {
    std::string out(sodium_base64_encoded_len(n, sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data, n, sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

std::vector<unsigned char> b64_decode(std::string_view b64) {
    std::vector<unsigned char> out(b64.size() / 4 * 3 + 3);
    std::size_t n = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), b64.data(), b64.size(), nullptr, &n, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != b64.data() + b64.size()) {
        throw Error(ErrorCode::Protocol, "invalid base64 payload");
    }
    out.resize(n);
    return out;
}

std::uint32_t swap32(std::uint32_t x) {
    return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

// Session that asks the server for logits of its whole context.
class BridgeState final : public lm::DecodeState {
public:
    BridgeState(const BridgeBackend& backend, std::span<const TokenId> context)
        : backend_(&backend), context_(context.begin(), context.end()) {
        lm::check_tokens(backend.vocab(), context);
    }

    std::span<const float> logits() const override {
        if (!fresh_) {
            cache_ = backend_->logits(context_);
            fresh_ = true;
        }
        return cache_;
    }
    void push(TokenId token) override {
        lm::check_tokens(backend_->vocab(), std::span<const TokenId>(&token, 1));
        context_.push_back(token);
        fresh_ = false;
    }
    std::size_t length() const override { return context_.size(); }
    void truncate(std::size_t n) override {
        if (n < context_.size()) {
            context_.resize(n);
            fresh_ = false;
        }
    }
    std::unique_ptr<lm::DecodeState> clone() const override { return std::make_unique<BridgeState>(*this); }

private:
    const BridgeBackend* backend_;
    std::vector<TokenId> context_;
    mutable std::vector<float> cache_;
    mutable bool fresh_ = false;
};

}  // namespace

std::string encode_f32(std::span<const float> values) {
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto u = std::bit_cast<std::uint32_t>(values[i]);
        if constexpr (std::endian::native == std::endian::big) u = swap32(u);
        std::memcpy(bytes.data() + 4 * i, &u, 4);
    }
    return b64_encode(bytes.data(), bytes.size());
}

std::vector<float> decode_f32(std::string_view b64) {
    const auto bytes = b64_decode(b64);
    if (bytes.size() % 4 != 0) throw Error(ErrorCode::Protocol, "float payload is not a multiple of 4 bytes");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t u = 0;
        std::memcpy(&u, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) u = swap32(u);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

std::string encode_bytes(std::string_view bytes) {
    return b64_encode(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

std::string decode_bytes(std::string_view b64) {
    const auto bytes = b64_decode(b64);
    return std::string(bytes.begin(), bytes.end());
}

ServerInfo info_from_json(const nlohmann::json& doc) {
    try {
        ServerInfo info;
        info.vocab_size = doc.at("vocab_size").get<std::size_t>();
        info.eos_id = doc.at("eos_id").get<TokenId>();
        info.embed_dim = doc.at("embed_dim").get<std::size_t>();
        info.context = doc.at("context").get<std::size_t>();
        info.model = doc.at("model").get<std::string>();
        info.encoder = doc.value("encoder", "");
        for (const auto& t : doc.at("tokens")) info.tokens.push_back(decode_bytes(t.get<std::string>()));
        if (info.tokens.size() != info.vocab_size) {
            throw Error(ErrorCode::Protocol, "token table has " + std::to_string(info.tokens.size()) +
                                                 " entries, vocab_size is " + std::to_string(info.vocab_size));
        }
        if (info.eos_id < 0 || static_cast<std::size_t>(info.eos_id) >= info.vocab_size) {
            throw Error(ErrorCode::Protocol, "eos_id outside the vocabulary");
        }
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Protocol, std::string("bad info result: ") + e.what());
    }
}

struct Connection::Impl {
    boost::asio::ip::tcp::iostream stream;
    std::chrono::milliseconds timeout;
};

Connection::Connection(std::string host, std::uint16_t port, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
    impl_->timeout = timeout;
    impl_->stream.expires_after(timeout);
    impl_->stream.connect(host, std::to_string(port));
    if (!impl_->stream) {
        throw Error(ErrorCode::BackendUnavailable,
                    "cannot reach bridge at " + host + ":" + std::to_string(port) + ": " + impl_->stream.error().message());
    }
}

Connection::~Connection() = default;

nlohmann::json Connection::call(const std::string& op, nlohmann::json payload) {
    const auto id = next_id_++;
    payload["v"] = kProtocolVersion;
    payload["id"] = id;
    payload["op"] = op;
    auto& s = impl_->stream;
    s.expires_after(impl_->timeout);
    s << payload.dump() << '\n' << std::flush;
    std::string line;
    if (!s || !std::getline(s, line)) {
        throw Error(ErrorCode::BackendUnavailable, "bridge connection lost during '" + op + "'");
    }
    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::Protocol, "unparsable response to '" + op + "'");
    }
    if (!resp.is_object() || resp.value("id", std::uint64_t{0}) != id) {
        throw Error(ErrorCode::Protocol, "response id does not match request " + std::to_string(id));
    }
    if (resp.value("v", 0) != kProtocolVersion) throw Error(ErrorCode::Protocol, "protocol version mismatch");
    if (!resp.value("ok", false)) {
        std::string msg = "request failed";
        if (resp.contains("error") && resp["error"].is_object()) msg = resp["error"].value("message", msg);
        throw Error(ErrorCode::Protocol, "bridge rejected '" + op + "': " + msg);
    }
    return resp;
}

BridgeBackend::BridgeBackend(std::unique_ptr<Connection> conn, ServerInfo info)
    : conn_(std::move(conn)), info_(std::move(info)), vocab_(info_.tokens, info_.eos_id) {}

std::unique_ptr<BridgeBackend> BridgeBackend::connect(const std::string& host, std::uint16_t port,
                                                      std::chrono::milliseconds timeout) {
    if (sodium_init() < 0) throw Error(ErrorCode::BackendUnavailable, "libsodium failed to initialise");
    auto conn = std::make_unique<Connection>(host, port, timeout);
    auto info = info_from_json(conn->call("info"));
    return std::unique_ptr<BridgeBackend>(new BridgeBackend(std::move(conn), std::move(info)));
}

std::vector<TokenId> BridgeBackend::tokenize(std::string_view text) const {
    std::lock_guard lock(mu_);
    const auto resp = conn_->call("tokenize", {{"text", std::string(text)}});
    try {
        auto ids = resp.at("ids").get<std::vector<TokenId>>();
        lm::check_tokens(vocab_, ids);
        return ids;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Protocol, std::string("bad tokenize result: ") + e.what());
    }
}

std::string BridgeBackend::detokenize(std::span<const TokenId> ids) const {
    std::lock_guard lock(mu_);
    const auto resp = conn_->call("detokenize", {{"ids", std::vector<TokenId>(ids.begin(), ids.end())}});
    try {
        return resp.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Protocol, std::string("bad detokenize result: ") + e.what());
    }
}

std::vector<float> BridgeBackend::logits(std::span<const TokenId> ids) const {
    std::lock_guard lock(mu_);
    const auto resp = conn_->call("logits", {{"ids", std::vector<TokenId>(ids.begin(), ids.end())}});
    std::vector<float> out;
    try {
        out = decode_f32(resp.at("logits").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Protocol, std::string("bad logits result: ") + e.what());
    }
    if (out.size() != info_.vocab_size) {
        throw Error(ErrorCode::Protocol, "logits length " + std::to_string(out.size()) + " != vocab size " +
                                             std::to_string(info_.vocab_size));
    }
    return out;
}

std::unique_ptr<lm::DecodeState> BridgeBackend::start(std::span<const TokenId> context) const {
    return std::make_unique<BridgeState>(*this, context);
}

std::vector<float> BridgeBackend::embed(std::string_view text) const {
    std::lock_guard lock(mu_);
    const auto resp = conn_->call("embed", {{"text", std::string(text)}});
    std::vector<float> out;
    try {
        out = decode_f32(resp.at("embedding").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Protocol, std::string("bad embed result: ") + e.what());
    }
    if (out.size() != info_.embed_dim) {
        throw Error(ErrorCode::Protocol, "embedding length " + std::to_string(out.size()) + " != advertised " +
                                             std::to_string(info_.embed_dim));
    }
    return out;
}

}  // namespace metatool::bridge
