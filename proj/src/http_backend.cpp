#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "genread/llm_backend.hpp"

namespace genread {

namespace {

std::string body_excerpt(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

const std::string& require_endpoint(const ModelRef& model) {
    if (model.backend != BackendKind::http || !model.endpoint_url.has_value() ||
        model.endpoint_url->empty()) {
        throw Error(ErrorCode::InvalidConfig, "http backend requires an endpoint_url");
    }
    return *model.endpoint_url;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (!config_.api_key.has_value()) {
        if (const char* key = std::getenv("GENREAD_API_KEY")) config_.api_key = key;
    }
}

std::string HttpBackend::post_json(const std::string& endpoint_url, const std::string& path,
                                   const Json& body) {
    httplib::Client client(endpoint_url);
    client.set_connection_timeout(config_.connect_timeout_s, 0);
    client.set_read_timeout(config_.read_timeout_s, 0);
    httplib::Headers headers;
    if (config_.api_key.has_value() && !config_.api_key->empty()) {
        headers.emplace("Authorization", "Bearer " + *config_.api_key);
    }

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::TransportError,
                    "POST " + endpoint_url + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 429) {
        throw Error(ErrorCode::RateLimited, "POST " + path + " returned 429");
    }
    if (res->status >= 500) {
        throw Error(ErrorCode::TransportError,
                    "POST " + path + " returned " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::MalformedResponse, "POST " + path + " returned " +
                                                      std::to_string(res->status) + ": " +
                                                      body_excerpt(res->body));
    }
    return res->body;
}

CompletionResult HttpBackend::complete(const CompletionRequest& req) {
    const std::string& endpoint = require_endpoint(req.model);
    Json body;
    body["model"] = req.model.model_name;
    body["prompt"] = req.prompt;
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = req.temperature;
    body["top_p"] = req.top_p;

    const std::string raw = post_json(endpoint, config_.completions_path, body);
    Json parsed;
    try {
        parsed = Json::parse(raw);
    } catch (const Json::parse_error&) {
        throw Error(ErrorCode::MalformedResponse,
                    "completion response is not JSON: " + body_excerpt(raw));
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("text")) {
        throw Error(ErrorCode::MalformedResponse,
                    "completion response lacks choices[0].text: " + body_excerpt(raw));
    }
    CompletionResult result;
    result.text = parsed["choices"][0]["text"].get<std::string>();
    if (parsed["choices"][0].contains("finish_reason") &&
        parsed["choices"][0]["finish_reason"].is_string()) {
        result.finish_reason =
            parse_finish_reason(parsed["choices"][0]["finish_reason"].get<std::string>());
    }
    return result;
}

EmbeddingVector HttpBackend::embed(const ModelRef& model, const std::string& text) {
    const std::string& endpoint = require_endpoint(model);
    Json body;
    body["model"] = model.model_name;
    body["input"] = text;

    const std::string raw = post_json(endpoint, config_.embeddings_path, body);
    Json parsed;
    try {
        parsed = Json::parse(raw);
    } catch (const Json::parse_error&) {
        throw Error(ErrorCode::MalformedResponse,
                    "embedding response is not JSON: " + body_excerpt(raw));
    }
    if (!parsed.contains("data") || !parsed["data"].is_array() || parsed["data"].empty() ||
        !parsed["data"][0].contains("embedding")) {
        throw Error(ErrorCode::MalformedResponse,
                    "embedding response lacks data[0].embedding: " + body_excerpt(raw));
    }
    EmbeddingVector vec;
    vec.values = parsed["data"][0]["embedding"].get<std::vector<double>>();
    if (config_.declared_embedding_dims.has_value() &&
        vec.dims() != *config_.declared_embedding_dims) {
        throw Error(ErrorCode::DimensionMismatch,
                    "embedding has " + std::to_string(vec.dims()) + " dims, expected " +
                        std::to_string(*config_.declared_embedding_dims));
    }
    return vec;
}

}  // namespace genread
