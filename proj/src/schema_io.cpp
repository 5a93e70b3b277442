// Copyright (C) 2026 The metatool authors
// SPDX-License-Identifier: Apache-2.0

#include "metatool/schema_io.hpp"

#include <fstream>
#include <sstream>

#include "metatool/error.hpp"

namespace metatool::schema {

namespace {

Value value_from_json(const nlohmann::json& j) {
    if (j.is_boolean()) return Value{j.get<bool>()};
    if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
    if (j.is_number()) return Value{j.get<double>()};
    if (j.is_string()) return Value{j.get<std::string>()};
    throw Error(ErrorCode::InvalidSchema, "unsupported literal " + j.dump());
}

ToolCall call_from_text(const std::string& text) {
    std::string err;
    auto parsed = parse_call(text, &err);
    if (!parsed) throw Error(ErrorCode::ParseError, "cannot parse call '" + text + "': " + err);
    return parsed->call;
}

}  // namespace

nlohmann::json value_to_json(const Value& value) {
    return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

ToolSchema schema_from_json(const nlohmann::json& doc) {
    ToolSchema schema;
    try {
        schema.tool_name = doc.at("tool_name").get<std::string>();
        schema.doc_text = doc.value("doc", std::string());
        for (const auto& jp : doc.at("params")) {
            ParamSpec p;
            p.name = jp.at("name").get<std::string>();
            const auto kind_text = jp.at("kind").get<std::string>();
            auto kind = parse_kind(kind_text);
            if (!kind) throw Error(ErrorCode::UnsupportedSchemaFeature, "parameter kind '" + kind_text + "'");
            p.kind = *kind;
            p.required = jp.value("required", true);
            p.positional = jp.value("positional", false);
            if (jp.contains("values")) p.enum_values = jp.at("values").get<std::vector<std::string>>();
            if (jp.contains("range")) {
                const auto& r = jp.at("range");
                p.range = Range{r.at(0).get<double>(), r.at(1).get<double>()};
            }
            if (jp.contains("default")) p.default_value = value_from_json(jp.at("default"));
            p.decimals = jp.value("decimals", 2);
            p.max_length = jp.value("max_length", std::size_t{64});
            if (jp.contains("charset")) p.charset = jp.at("charset").get<std::string>();
            schema.params.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSchema, e.what());
    }
    check_schema(schema);
    return schema;
}

nlohmann::json to_json(const ToolSchema& schema) {
    nlohmann::json doc;
    doc["tool_name"] = schema.tool_name;
    if (!schema.doc_text.empty()) doc["doc"] = schema.doc_text;
    doc["params"] = nlohmann::json::array();
    for (const auto& p : schema.params) {
        nlohmann::json jp;
        jp["name"] = p.name;
        jp["kind"] = std::string(to_string(p.kind));
        jp["required"] = p.required;
        if (p.positional) jp["positional"] = true;
        if (p.kind == ParamKind::Enum) jp["values"] = p.enum_values;
        if (p.range) jp["range"] = {p.range->min, p.range->max};
        if (p.default_value) jp["default"] = value_to_json(*p.default_value);
        if (p.kind == ParamKind::Number) jp["decimals"] = p.decimals;
        if (p.kind == ParamKind::String) {
            jp["max_length"] = p.max_length;
            jp["charset"] = p.charset;
        }
        doc["params"].push_back(std::move(jp));
    }
    return doc;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << contents;
}

ToolSchema load_schema(const std::filesystem::path& path) {
    try {
        return schema_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

std::vector<Trajectory> load_support(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<Trajectory> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Trajectory t;
            t.query = j.at("query").get<std::string>();
            t.call = call_from_text(j.at("call").get<std::string>());
            t.success = j.value("success", true);
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

nlohmann::json to_json(const SyntheticEpisode& episode) {
    return {
        {"query", episode.base.query},
        {"base_call", canonical_text(episode.base.call)},
        {"op", std::string(to_string(episode.op))},
        {"param", episode.param},
        {"perturbed_call", canonical_text(episode.perturbed_call)},
        {"reward", episode.reward},
    };
}

SyntheticEpisode episode_from_json(const nlohmann::json& doc) {
    SyntheticEpisode e;
    e.base.query = doc.at("query").get<std::string>();
    e.base.call = call_from_text(doc.at("base_call").get<std::string>());
    const auto op = doc.at("op").get<std::string>();
    auto kind = parse_perturb_kind(op);
    if (!kind) throw Error(ErrorCode::ParseError, "unknown perturbation '" + op + "'");
    e.op = *kind;
    e.param = doc.value("param", std::string());
    e.perturbed_call = call_from_text(doc.at("perturbed_call").get<std::string>());
    e.reward = doc.at("reward").get<int>();
    return e;
}

std::vector<SyntheticEpisode> load_episodes(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<SyntheticEpisode> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(episode_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_episodes(const std::filesystem::path& path, const std::vector<SyntheticEpisode>& episodes) {
    std::string out;
    for (const auto& e : episodes) out += to_json(e).dump() + "\n";
    write_file(path, out);
}

}  // namespace metatool::schema
