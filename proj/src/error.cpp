// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/error.hpp"

namespace metatool {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::InvalidCall: return "InvalidCall";
        case ErrorCode::EmptySupport: return "EmptySupport";
        case ErrorCode::NoPerturbationPossible: return "NoPerturbationPossible";
        case ErrorCode::UnsupportedSchemaFeature: return "UnsupportedSchemaFeature";
        case ErrorCode::StateBudgetExceeded: return "StateBudgetExceeded";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::InvalidToken: return "InvalidToken";
        case ErrorCode::DecodeDeadEnd: return "DecodeDeadEnd";
        case ErrorCode::InvalidIndex: return "InvalidIndex";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::DeadEnd: return "DeadEnd";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::ContextOverflow: return "ContextOverflow";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SqlUnsupported: return "SqlUnsupported";
        case ErrorCode::SqlSemanticError: return "SqlSemanticError";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Protocol: return "Protocol";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    }
    return "Unknown";
}

}  // namespace metatool
