#include "genread/llm_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "genread/hash.hpp"
#include "genread/rng.hpp"

namespace genread {

std::string_view to_string(BackendKind kind) {
    return kind == BackendKind::http ? "http" : "mock";
}

BackendKind parse_backend_kind(std::string_view text) {
    if (text == "http") return BackendKind::http;
    if (text == "mock") return BackendKind::mock;
    throw Error(ErrorCode::InvalidConfig, "unknown backend '" + std::string(text) + "'");
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "stop";
}

FinishReason parse_finish_reason(std::string_view text) {
    if (text == "stop") return FinishReason::stop;
    if (text == "length") return FinishReason::length;
    if (text == "error") return FinishReason::error;
    return FinishReason::stop;
}

namespace {

void validate_request(const CompletionRequest& req) {
    if (req.prompt.empty()) {
        throw Error(ErrorCode::InvalidConfig, "completion prompt must be non-empty");
    }
    if (req.max_tokens <= 0) {
        throw Error(ErrorCode::InvalidConfig, "max_tokens must be positive");
    }
    if (req.temperature < 0.0) {
        throw Error(ErrorCode::InvalidConfig, "temperature must be non-negative");
    }
    if (!(req.top_p > 0.0 && req.top_p <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "top_p must lie in (0, 1]");
    }
}

// Canonical serialization for digests: sorted field order, explicit defaults,
// endpoint_url excluded. nlohmann::json orders object keys lexicographically.
std::string canonical_request(BackendKind backend, const std::string& model_name,
                              std::string_view kind, const std::string& text, int max_tokens,
                              double temperature, double top_p, const std::string& seed_tag) {
    Json j;
    j["backend"] = to_string(backend);
    j["kind"] = kind;
    j["max_tokens"] = max_tokens;
    j["model_name"] = model_name;
    j["prompt"] = text;
    j["seed_tag"] = seed_tag;
    j["temperature"] = temperature;
    j["top_p"] = top_p;
    return j.dump();
}

}  // namespace

std::string cache_key(const CompletionRequest& req) {
    return sha256_hex(canonical_request(req.model.backend, req.model.model_name, "complete",
                                        req.prompt, req.max_tokens, req.temperature, req.top_p,
                                        req.seed_tag));
}

std::string cache_key_for_embedding(const ModelRef& model, std::string_view text) {
    return sha256_hex(canonical_request(model.backend, model.model_name, "embed",
                                        std::string(text), 0, 0.0, 1.0, ""));
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return root_ / key.substr(0, 2) / key.substr(2, 2) / key;
}

std::optional<ResponseCache::Entry> ResponseCache::get(const std::string& key) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::string header;
    if (!std::getline(in, header)) return std::nullopt;
    Entry entry;
    std::istringstream fields(header);
    std::string version, kind_field, finish_field;
    fields >> version >> kind_field >> finish_field;
    if (version != "genread-cache/1") return std::nullopt;
    entry.kind = kind_field;
    entry.finish_reason = parse_finish_reason(finish_field);
    std::ostringstream payload;
    payload << in.rdbuf();
    entry.payload = payload.str();
    return entry;
}

void ResponseCache::put(const std::string& key, const Entry& entry) {
    const auto path = path_for(key);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return;  // append-only
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(static_cast<unsigned long long>(
                         std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write cache file " + tmp.string());
        out << "genread-cache/1 " << entry.kind << ' ' << to_string(entry.finish_reason) << '\n';
        out << entry.payload;
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        // Lost a race with a writer of identical bytes; drop the temp file.
        std::filesystem::remove(tmp, ec);
    }
}

// ---------------------------------------------------------------------------
// MockBackend

namespace {

// Fixed vocabulary for the hash-seeded word stream.
constexpr const char* kMockVocabulary[] = {
    "alpha",   "amber",  "anchor", "arch",    "basin",  "birch",   "bloom",  "brass",
    "bridge",  "canyon", "cedar",  "cliff",   "cloud",  "coast",   "copper", "coral",
    "crane",   "creek",  "crystal", "delta",  "drift",  "dune",    "ember",  "fern",
    "field",   "flint",  "forest", "galaxy",  "garnet", "glacier", "grove",  "harbor",
    "hazel",   "heron",  "hollow", "island",  "ivory",  "jade",    "juniper", "lagoon",
    "lantern", "ledge",  "linden", "lunar",   "maple",  "marble",  "meadow", "mesa",
    "mist",    "moss",   "north",  "oak",     "ocean",  "onyx",    "opal",   "orchid",
    "osprey",  "pebble", "pine",   "plateau", "prairie", "quartz", "quill",  "rain",
    "raven",   "reef",   "ridge",  "river",   "rowan",  "saffron", "sage",   "shale",
    "shore",   "sierra", "silver", "slate",   "sparrow", "spring", "spruce", "stone",
    "summit",  "sunda",  "swift",  "tarn",    "thistle", "tide",   "timber", "topaz",
    "trail",   "tundra", "valley", "vapor",   "violet", "willow",  "winter", "zephyr",
};
constexpr std::size_t kMockVocabularySize = std::size(kMockVocabulary);

}  // namespace

CompletionResult MockBackend::complete(const CompletionRequest& req) {
    validate_request(req);
    std::string seed_material = "mock-complete\x1f" + req.prompt;
    if (req.temperature > 0.0) {
        seed_material += '\x1f';
        seed_material += req.seed_tag;
    }
    std::uint64_t state = sha256_seed(seed_material);

    const int words = std::min(kCompletionWords, req.max_tokens);
    std::string text;
    for (int i = 0; i < words; ++i) {
        if (i > 0) text += ' ';
        text += kMockVocabulary[splitmix64(state) % kMockVocabularySize];
    }
    CompletionResult result;
    result.text = std::move(text);
    result.finish_reason = req.max_tokens < kCompletionWords ? FinishReason::length
                                                             : FinishReason::stop;
    return result;
}

EmbeddingVector MockBackend::embed(const ModelRef&, const std::string& text) {
    std::uint64_t state = sha256_seed("mock-embed\x1f" + text);
    EmbeddingVector vec;
    vec.values.resize(kEmbeddingDims);
    double norm_sq = 0.0;
    for (double& value : vec.values) {
        // 2u - 1 with u on a 2^-53 grid: exactly representable everywhere.
        const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        value = 2.0 * u - 1.0;
        norm_sq += value * value;
    }
    if (norm_sq == 0.0) {
        vec.values[0] = 1.0;
        return vec;
    }
    const double norm = std::sqrt(norm_sq);
    for (double& value : vec.values) value /= norm;
    return vec;
}

// ---------------------------------------------------------------------------
// Client

Client::Client(std::shared_ptr<Backend> backend, Options options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      cache_(options_.cache_dir),
      slots_(options_.parallelism > 0 ? options_.parallelism : 1) {}

void Client::reset_counters() {
    backend_calls_ = 0;
    cache_hits_ = 0;
}

namespace {

int full_jitter_ms(int cap_ms) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    if (cap_ms <= 0) return 0;
    return static_cast<int>(uniform_u64(rng, static_cast<std::uint64_t>(cap_ms) + 1));
}

}  // namespace

template <typename Fn>
auto Client::call_with_retry(Fn&& fn) -> decltype(fn()) {
    int delay_ms = options_.retry.base_delay_ms;
    for (int attempt = 1;; ++attempt) {
        try {
            ++backend_calls_;
            return fn();
        } catch (const Error& e) {
            if (!e.retryable() || attempt >= options_.retry.max_attempts) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(full_jitter_ms(delay_ms)));
            delay_ms *= 2;
        }
    }
}

CompletionResult Client::complete(const CompletionRequest& req) {
    validate_request(req);
    const std::string key = cache_key(req);
    if (auto hit = cache_.get(key)) {
        ++cache_hits_;
        return CompletionResult{hit->payload, hit->finish_reason, true};
    }

    std::shared_future<CompletionResult> fut;
    std::promise<CompletionResult> promise;
    bool owner = false;
    {
        std::lock_guard lock(inflight_mutex_);
        auto it = inflight_.find(key);
        if (it != inflight_.end()) {
            fut = it->second;
        } else {
            fut = promise.get_future().share();
            inflight_.emplace(key, fut);
            owner = true;
        }
    }
    if (!owner) return fut.get();

    try {
        CompletionResult result = call_with_retry([&] {
            slots_.acquire();
            struct Release {
                std::counting_semaphore<1 << 20>* s;
                ~Release() { s->release(); }
            } release{&slots_};
            return backend_->complete(req);
        });
        result.cached = false;
        cache_.put(key, {"complete", result.finish_reason, result.text});
        promise.set_value(result);
        std::lock_guard lock(inflight_mutex_);
        inflight_.erase(key);
        return result;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(inflight_mutex_);
        inflight_.erase(key);
        throw;
    }
}

EmbeddingVector Client::embed(const std::string& text, const ModelRef& model) {
    if (text.empty()) {
        throw Error(ErrorCode::InvalidConfig, "embed: text must be non-empty");
    }
    const std::string key = cache_key_for_embedding(model, text);
    if (auto hit = cache_.get(key)) {
        ++cache_hits_;
        EmbeddingVector vec;
        vec.values = Json::parse(hit->payload).get<std::vector<double>>();
        return vec;
    }

    std::shared_future<EmbeddingVector> fut;
    std::promise<EmbeddingVector> promise;
    bool owner = false;
    {
        std::lock_guard lock(inflight_mutex_);
        auto it = inflight_embeds_.find(key);
        if (it != inflight_embeds_.end()) {
            fut = it->second;
        } else {
            fut = promise.get_future().share();
            inflight_embeds_.emplace(key, fut);
            owner = true;
        }
    }
    if (!owner) return fut.get();

    try {
        EmbeddingVector vec = call_with_retry([&] {
            slots_.acquire();
            struct Release {
                std::counting_semaphore<1 << 20>* s;
                ~Release() { s->release(); }
            } release{&slots_};
            return backend_->embed(model, text);
        });
        if (auto dims = backend_->embedding_dims(); dims.has_value() && vec.dims() != *dims) {
            throw Error(ErrorCode::DimensionMismatch,
                        "backend returned " + std::to_string(vec.dims()) + " dims, declared " +
                            std::to_string(*dims));
        }
        for (double value : vec.values) {
            if (!std::isfinite(value)) {
                throw Error(ErrorCode::MalformedResponse, "embedding contains a non-finite entry");
            }
        }
        cache_.put(key, {"embed", FinishReason::stop, Json(vec.values).dump()});
        promise.set_value(vec);
        std::lock_guard lock(inflight_mutex_);
        inflight_embeds_.erase(key);
        return vec;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(inflight_mutex_);
        inflight_embeds_.erase(key);
        throw;
    }
}

}  // namespace genread
