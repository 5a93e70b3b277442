// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metatool {

enum class ErrorCode {
    InvalidArgument,
    InvalidSchema,
    InvalidCall,
    EmptySupport,
    NoPerturbationPossible,
    UnsupportedSchemaFeature,
    StateBudgetExceeded,
    InvalidState,
    DimensionMismatch,
    EmptyCorpus,
    InvalidToken,
    DecodeDeadEnd,
    InvalidIndex,
    EmptyBatch,
    DeadEnd,
    EmptyStore,
    ContextOverflow,
    ParseError,
    SqlUnsupported,
    SqlSemanticError,
    Io,
    Protocol,
    BackendUnavailable,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace metatool
