#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>

#include "genread/datamodel.hpp"
#include "genread/errors.hpp"

namespace genread {

enum class BackendKind { http, mock };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

/// Opaque reference to a hosted (or mock) model; parameters never live here.
struct ModelRef {
    BackendKind backend = BackendKind::mock;
    std::string model_name = "mock-001";
    std::optional<std::string> endpoint_url;  // present iff backend == http
};

struct CompletionRequest {
    ModelRef model;
    std::string prompt;
    int max_tokens = 300;
    double temperature = 0.0;  // greedy decoding is temperature 0, top_p 1
    double top_p = 1.0;
    std::string seed_tag;  // cache-salting tag for repeated sampling
};

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

struct CompletionResult {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    bool cached = false;
};

/// 64-hex-char digest of the canonical serialization of the semantically
/// relevant request fields; endpoint_url is not part of the key.
std::string cache_key(const CompletionRequest& req);
std::string cache_key_for_embedding(const ModelRef& model, std::string_view text);

/// Content-addressed, append-only file cache. One file per key under a
/// two-level fan-out (aa/bb/<key>); value = one metadata line + raw payload.
class ResponseCache {
public:
    struct Entry {
        std::string kind;  // "complete" | "embed"
        FinishReason finish_reason = FinishReason::stop;
        std::string payload;
    };

    explicit ResponseCache(std::filesystem::path root);

    std::optional<Entry> get(const std::string& key) const;
    /// Write-once: an existing key is left untouched. Writes go through a
    /// temp file + rename so racing writers of identical bytes are safe.
    void put(const std::string& key, const Entry& entry);

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path path_for(const std::string& key) const;
    std::filesystem::path root_;
};

/// Transport-level interface: one text completion / one embedding per call.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
    virtual EmbeddingVector embed(const ModelRef& model, const std::string& text) = 0;
    /// Declared output dimension, when the backend knows it up front.
    virtual std::optional<std::size_t> embedding_dims() const = 0;
};

/// Offline backend: a pure function of (prompt, temperature, top_p, seed_tag).
/// Greedy requests depend on the prompt alone; sampling folds in seed_tag.
class MockBackend : public Backend {
public:
    static constexpr std::size_t kEmbeddingDims = 64;
    static constexpr int kCompletionWords = 32;

    CompletionResult complete(const CompletionRequest& req) override;
    EmbeddingVector embed(const ModelRef& model, const std::string& text) override;
    std::optional<std::size_t> embedding_dims() const override { return kEmbeddingDims; }
};

struct HttpBackendConfig {
    std::string completions_path = "/v1/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::optional<std::string> api_key;  // defaults to $GENREAD_API_KEY
    std::optional<std::size_t> declared_embedding_dims;
    int connect_timeout_s = 10;
    int read_timeout_s = 300;
};

/// Completion-API-compatible HTTP client: POST {model, prompt, max_tokens,
/// temperature, top_p} to the completions path, POST {model, input} to the
/// embeddings path, bearer auth, de-facto response shapes
/// (choices[0].text / data[0].embedding).
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config = {});

    CompletionResult complete(const CompletionRequest& req) override;
    EmbeddingVector embed(const ModelRef& model, const std::string& text) override;
    std::optional<std::size_t> embedding_dims() const override {
        return config_.declared_embedding_dims;
    }

private:
    std::string post_json(const std::string& endpoint_url, const std::string& path,
                          const Json& body);
    HttpBackendConfig config_;
};

struct RetryPolicy {
    int max_attempts = 5;
    int base_delay_ms = 500;  // doubles each retry, full jitter
};

/// Caching, retrying, deduplicating front door for complete/embed. Safe for
/// concurrent use; identical in-flight requests collapse into one call and a
/// counting semaphore bounds simultaneous backend requests.
class Client {
public:
    struct Options {
        std::filesystem::path cache_dir = ".genread-cache";
        int parallelism = 8;
        RetryPolicy retry;
    };

    Client(std::shared_ptr<Backend> backend, Options options);

    CompletionResult complete(const CompletionRequest& req);
    EmbeddingVector embed(const std::string& text, const ModelRef& model);

    std::optional<std::size_t> embedding_dims() const { return backend_->embedding_dims(); }

    /// Physical backend invocations (retries included); cache hits never count.
    std::uint64_t backend_calls() const { return backend_calls_.load(); }
    std::uint64_t cache_hits() const { return cache_hits_.load(); }
    void reset_counters();

private:
    template <typename Fn>
    auto call_with_retry(Fn&& fn) -> decltype(fn());

    std::shared_ptr<Backend> backend_;
    Options options_;
    ResponseCache cache_;
    std::counting_semaphore<1 << 20> slots_;

    std::mutex inflight_mutex_;
    std::unordered_map<std::string, std::shared_future<CompletionResult>> inflight_;
    std::unordered_map<std::string, std::shared_future<EmbeddingVector>> inflight_embeds_;

    std::atomic<std::uint64_t> backend_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
};

}  // namespace genread
