#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "genread/hash.hpp"
#include "genread/llm_backend.hpp"
#include "test_util.hpp"

using namespace genread;

namespace {

CompletionRequest mock_request(const std::string& prompt) {
    CompletionRequest req;
    req.model.backend = BackendKind::mock;
    req.model.model_name = "mock-001";
    req.prompt = prompt;
    req.max_tokens = 300;
    req.temperature = 0.0;
    req.top_p = 1.0;
    return req;
}

std::size_t word_count(const std::string& text) {
    std::istringstream stream(text);
    std::string word;
    std::size_t count = 0;
    while (stream >> word) ++count;
    return count;
}

}  // namespace

TEST_CASE("sha256 matches the published test vector") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("cache_key matches an independently serialized digest") {
    CompletionRequest req = mock_request("abc");
    // Canonical form: sorted keys, explicit defaults, endpoint_url excluded.
    const std::string canonical =
        R"({"backend":"mock","kind":"complete","max_tokens":300,"model_name":"mock-001",)"
        R"("prompt":"abc","seed_tag":"","temperature":0.0,"top_p":1.0})";
    CHECK(cache_key(req) == sha256_hex(canonical));
}

TEST_CASE("cache_key ignores endpoint_url and separates top_p values") {
    CompletionRequest a = mock_request("abc");
    CompletionRequest b = a;
    CHECK(cache_key(a) == cache_key(b));

    b.model.endpoint_url = "http://localhost:9999";
    CHECK(cache_key(a) == cache_key(b));  // field excluded by definition

    CompletionRequest c = a;
    c.top_p = 0.95;
    const std::string canonical_a =
        R"({"backend":"mock","kind":"complete","max_tokens":300,"model_name":"mock-001",)"
        R"("prompt":"abc","seed_tag":"","temperature":0.0,"top_p":1.0})";
    const std::string canonical_c =
        R"({"backend":"mock","kind":"complete","max_tokens":300,"model_name":"mock-001",)"
        R"("prompt":"abc","seed_tag":"","temperature":0.0,"top_p":0.95})";
    CHECK(cache_key(a) == sha256_hex(canonical_a));
    CHECK(cache_key(c) == sha256_hex(canonical_c));
    CHECK(cache_key(a) != cache_key(c));
}

TEST_CASE("cache_key separates seed tags") {
    CompletionRequest a = mock_request("abc");
    a.temperature = 1.0;
    a.top_p = 0.95;
    a.seed_tag = "s0";
    CompletionRequest b = a;
    b.seed_tag = "s1";
    const auto canonical = [](const std::string& tag) {
        return std::string(
                   R"({"backend":"mock","kind":"complete","max_tokens":300,"model_name":"mock-001",)") +
               R"("prompt":"abc","seed_tag":")" + tag + R"(","temperature":1.0,"top_p":0.95})";
    };
    CHECK(cache_key(a) == sha256_hex(canonical("s0")));
    CHECK(cache_key(b) == sha256_hex(canonical("s1")));
    CHECK(cache_key(a) != cache_key(b));
}

TEST_CASE("mock greedy completion is deterministic and 32 words long") {
    MockBackend backend;
    const CompletionRequest req = mock_request("abc");
    const CompletionResult first = backend.complete(req);
    const CompletionResult second = backend.complete(req);
    CHECK(first.text == second.text);
    CHECK(word_count(first.text) == 32);
    CHECK(first.finish_reason == FinishReason::stop);

    CompletionRequest short_req = req;
    short_req.max_tokens = 5;
    const CompletionResult truncated = backend.complete(short_req);
    CHECK(word_count(truncated.text) == 5);
    CHECK(truncated.finish_reason == FinishReason::length);
}

TEST_CASE("mock sampling folds seed_tag into the text") {
    MockBackend backend;
    CompletionRequest req = mock_request("same prompt");
    req.temperature = 1.0;
    req.top_p = 0.95;
    req.seed_tag = "s0";
    const std::string t0 = backend.complete(req).text;
    req.seed_tag = "s1";
    const std::string t1 = backend.complete(req).text;
    req.seed_tag = "s2";
    const std::string t2 = backend.complete(req).text;
    CHECK(t0 != t1);
    CHECK(t1 != t2);
    CHECK(t0 != t2);
}

TEST_CASE("mock embedding is deterministic, 64-dim, unit norm") {
    MockBackend backend;
    const ModelRef model;
    const EmbeddingVector a = backend.embed(model, "x");
    const EmbeddingVector b = backend.embed(model, "x");
    CHECK(a == b);
    CHECK(a.dims() == 64);
    double norm_sq = 0.0;
    for (double v : a.values) norm_sq += v * v;
    CHECK(std::abs(std::sqrt(norm_sq) - 1.0) < 1e-9);
    CHECK(backend.embed(model, "y") != a);
}

TEST_CASE("client returns cached bytes on the second call") {
    test_util::TempDir cache_dir("cache");
    Client::Options options;
    options.cache_dir = cache_dir.path();
    Client client(std::make_shared<MockBackend>(), options);

    const CompletionRequest req = mock_request("cache me");
    const CompletionResult first = client.complete(req);
    CHECK_FALSE(first.cached);
    const CompletionResult second = client.complete(req);
    CHECK(second.cached);
    CHECK(second.text == first.text);
    CHECK(second.finish_reason == first.finish_reason);
    CHECK(client.backend_calls() == 1);
    CHECK(client.cache_hits() == 1);

    // Two-level fan-out layout: aa/bb/<key>.
    const std::string key = cache_key(req);
    CHECK(std::filesystem::exists(cache_dir.path() / key.substr(0, 2) / key.substr(2, 2) / key));
}

TEST_CASE("client embed caches and rehydrates identical vectors") {
    test_util::TempDir cache_dir("embed");
    Client::Options options;
    options.cache_dir = cache_dir.path();
    Client client(std::make_shared<MockBackend>(), options);

    const ModelRef model;
    const EmbeddingVector fresh = client.embed("pair text", model);
    const EmbeddingVector cached = client.embed("pair text", model);
    CHECK(fresh == cached);
    CHECK(client.backend_calls() == 1);
    CHECK(client.cache_hits() == 1);
    CHECK_THROWS_AS(client.embed("", model), Error);
}

namespace {

/// Counts calls and optionally fails the first N with a chosen error.
class FlakyBackend : public Backend {
public:
    FlakyBackend(int failures_before_success, ErrorCode code)
        : failures_(failures_before_success), code_(code) {}

    CompletionResult complete(const CompletionRequest& req) override {
        ++calls_;
        if (calls_ <= failures_) throw Error(code_, "induced failure");
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return CompletionResult{"ok:" + req.prompt, FinishReason::stop, false};
    }
    EmbeddingVector embed(const ModelRef&, const std::string&) override {
        ++calls_;
        return EmbeddingVector{std::vector<double>(4, 0.5)};
    }
    std::optional<std::size_t> embedding_dims() const override { return 4; }

    int calls() const { return calls_.load(); }

private:
    std::atomic<int> calls_{0};
    int failures_;
    ErrorCode code_;
};

}  // namespace

TEST_CASE("retry loop retries transport errors and stops at max attempts") {
    test_util::TempDir cache_dir("retry");
    Client::Options options;
    options.cache_dir = cache_dir.path();
    options.retry.base_delay_ms = 1;

    auto flaky = std::make_shared<FlakyBackend>(2, ErrorCode::TransportError);
    Client client(flaky, options);
    const CompletionResult result = client.complete(mock_request("retry me"));
    CHECK(result.text == "ok:retry me");
    CHECK(flaky->calls() == 3);

    auto hopeless = std::make_shared<FlakyBackend>(100, ErrorCode::RateLimited);
    Client doomed(hopeless, options);
    CHECK_THROWS_AS(doomed.complete(mock_request("never works")), Error);
    CHECK(hopeless->calls() == 5);  // max_attempts
}

TEST_CASE("malformed responses are not retried") {
    test_util::TempDir cache_dir("noretry");
    Client::Options options;
    options.cache_dir = cache_dir.path();
    options.retry.base_delay_ms = 1;
    auto flaky = std::make_shared<FlakyBackend>(100, ErrorCode::MalformedResponse);
    Client client(flaky, options);
    CHECK_THROWS_AS(client.complete(mock_request("bad")), Error);
    CHECK(flaky->calls() == 1);
}

TEST_CASE("concurrent identical requests collapse into one backend call") {
    test_util::TempDir cache_dir("dedup");
    Client::Options options;
    options.cache_dir = cache_dir.path();
    auto backend = std::make_shared<FlakyBackend>(0, ErrorCode::TransportError);
    Client client(backend, options);

    const CompletionRequest req = mock_request("collapse");
    std::vector<std::thread> threads;
    std::vector<std::string> texts(8);
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&, i] { texts[static_cast<std::size_t>(i)] = client.complete(req).text; });
    }
    for (auto& t : threads) t.join();
    for (const std::string& text : texts) CHECK(text == "ok:collapse");
    CHECK(backend->calls() == 1);
}

namespace {

class SlowEmbedBackend : public MockBackend {
public:
    EmbeddingVector embed(const ModelRef& model, const std::string& text) override {
        ++embed_calls_;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return MockBackend::embed(model, text);
    }
    std::atomic<int> embed_calls_{0};
};

}  // namespace

TEST_CASE("concurrent identical embeddings collapse into one backend call") {
    test_util::TempDir cache_dir("embed-dedup");
    Client::Options options;
    options.cache_dir = cache_dir.path();
    auto backend = std::make_shared<SlowEmbedBackend>();
    Client client(backend, options);

    std::vector<std::thread> threads;
    std::vector<EmbeddingVector> vectors(6);
    for (int i = 0; i < 6; ++i) {
        threads.emplace_back(
            [&, i] { vectors[static_cast<std::size_t>(i)] = client.embed("same text", ModelRef{}); });
    }
    for (auto& t : threads) t.join();
    for (const EmbeddingVector& vec : vectors) CHECK(vec == vectors[0]);
    CHECK(backend->embed_calls_.load() == 1);
}
