#include "genread/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "genread/clustering.hpp"
#include "genread/evaluation.hpp"
#include "genread/hash.hpp"
#include "genread/reader.hpp"

namespace genread {

std::string_view to_string(MergeMode mode) {
    switch (mode) {
        case MergeMode::generated_only: return "generated_only";
        case MergeMode::retrieved_only: return "retrieved_only";
        case MergeMode::merged: return "merged";
    }
    return "generated_only";
}

MergeMode parse_merge_mode(std::string_view text) {
    if (text == "generated_only") return MergeMode::generated_only;
    if (text == "retrieved_only") return MergeMode::retrieved_only;
    if (text == "merged") return MergeMode::merged;
    throw Error(ErrorCode::InvalidConfig, "unknown merge mode '" + std::string(text) + "'");
}

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::success: return "success";
        case RunStatus::partial: return "partial";
        case RunStatus::failure: return "failure";
    }
    return "success";
}

// ---------------------------------------------------------------------------
// Config

RunConfig run_config_from_json(const Json& flat) {
    if (!flat.is_object()) {
        throw Error(ErrorCode::InvalidConfig, "config root must be a JSON object");
    }
    RunConfig config;
    static const std::set<std::string> known = {
        "dataset_path",       "train_dataset_path", "task",
        "backend",            "model_name",         "endpoint_url",
        "completions_path",   "embeddings_path",    "strategy",
        "num_documents",      "top_p",              "demos_per_cluster",
        "human_prompts_file", "generate_template_file", "read_template_file",
        "max_tokens",         "pair_separator",     "max_prompt_chars",
        "max_docs",           "max_answer_tokens",  "recall_ks",
        "coverage_percentage", "merge",             "merge_budget",
        "seed",               "limit",              "output_dir",
        "parallelism",        "cache_dir",          "normalize_embeddings",
        "kmeans_max_iterations", "kmeans_tolerance", "embedding_dims",
        "generate_template",  "read_template"};
    for (const auto& item : flat.items()) {
        if (!known.contains(item.key())) {
            throw Error(ErrorCode::InvalidConfig, "unknown config key '" + item.key() + "'");
        }
    }

    config.dataset_path = flat.value("dataset_path", config.dataset_path);
    config.train_dataset_path = flat.value("train_dataset_path", config.train_dataset_path);
    if (flat.contains("task")) config.task = parse_task(flat.at("task").get<std::string>());
    if (flat.contains("backend")) {
        config.model.backend = parse_backend_kind(flat.at("backend").get<std::string>());
    }
    if (flat.contains("model_name")) config.model.model_name = flat.at("model_name").get<std::string>();
    if (flat.contains("endpoint_url")) {
        config.model.endpoint_url = flat.at("endpoint_url").get<std::string>();
    }
    config.completions_path = flat.value("completions_path", config.completions_path);
    config.embeddings_path = flat.value("embeddings_path", config.embeddings_path);
    if (flat.contains("strategy")) {
        config.generation.strategy =
            parse_generation_strategy(flat.at("strategy").get<std::string>());
    }
    config.generation.num_documents = flat.value("num_documents", config.generation.num_documents);
    config.generation.top_p = flat.value("top_p", config.generation.top_p);
    config.generation.demos_per_cluster =
        flat.value("demos_per_cluster", config.generation.demos_per_cluster);
    config.human_prompts_file = flat.value("human_prompts_file", config.human_prompts_file);
    config.generate_template_file =
        flat.value("generate_template_file", config.generate_template_file);
    config.read_template_file = flat.value("read_template_file", config.read_template_file);
    if (flat.contains("generate_template")) {
        config.generate_template =
            PromptTemplate{"config", flat.at("generate_template").get<std::string>(),
                           TemplateRole::generate};
    }
    if (flat.contains("read_template")) {
        config.read_template = PromptTemplate{
            "config", flat.at("read_template").get<std::string>(), TemplateRole::read};
    }
    if (flat.contains("embedding_dims") && !flat.at("embedding_dims").is_null()) {
        config.embedding_dims = flat.at("embedding_dims").get<std::size_t>();
    }
    config.generation.max_tokens = flat.value("max_tokens", config.generation.max_tokens);
    config.generation.pair_separator =
        flat.value("pair_separator", config.generation.pair_separator);
    config.generation.max_prompt_chars =
        flat.value("max_prompt_chars", config.generation.max_prompt_chars);
    config.max_docs = flat.value("max_docs", config.max_docs);
    config.max_answer_tokens = flat.value("max_answer_tokens", config.max_answer_tokens);
    if (flat.contains("recall_ks")) {
        config.recall_ks = flat.at("recall_ks").get<std::vector<int>>();
    }
    config.coverage_percentage = flat.value("coverage_percentage", config.coverage_percentage);
    if (flat.contains("merge")) {
        config.merge = parse_merge_mode(flat.at("merge").get<std::string>());
    }
    config.merge_budget = flat.value("merge_budget", config.merge_budget);
    config.seed = flat.value("seed", config.seed);
    if (flat.contains("limit") && !flat.at("limit").is_null()) {
        config.limit = flat.at("limit").get<std::size_t>();
    }
    config.output_dir = flat.value("output_dir", config.output_dir);
    config.parallelism = flat.value("parallelism", config.parallelism);
    config.cache_dir = flat.value("cache_dir", config.cache_dir);
    config.normalize_embeddings = flat.value("normalize_embeddings", config.normalize_embeddings);
    config.kmeans_max_iterations =
        flat.value("kmeans_max_iterations", config.kmeans_max_iterations);
    config.kmeans_tolerance = flat.value("kmeans_tolerance", config.kmeans_tolerance);
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path.string());
    Json flat;
    try {
        in >> flat;
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ParseError, "config file " + path.string() + ": " + e.what());
    }
    return run_config_from_json(flat);
}

Json run_config_to_json(const RunConfig& config) {
    Json j;
    j["dataset_path"] = config.dataset_path;
    j["train_dataset_path"] = config.train_dataset_path;
    j["task"] = to_string(config.task);
    j["backend"] = to_string(config.model.backend);
    j["model_name"] = config.model.model_name;
    if (config.model.endpoint_url.has_value()) j["endpoint_url"] = *config.model.endpoint_url;
    j["completions_path"] = config.completions_path;
    j["embeddings_path"] = config.embeddings_path;
    j["strategy"] = to_string(config.generation.strategy);
    j["num_documents"] = config.generation.num_documents;
    j["top_p"] = config.generation.top_p;
    j["demos_per_cluster"] = config.generation.demos_per_cluster;
    j["human_prompts_file"] = config.human_prompts_file;
    j["generate_template"] = config.generate_template.body;
    j["read_template"] = config.read_template.body;
    j["max_tokens"] = config.generation.max_tokens;
    j["pair_separator"] = config.generation.pair_separator;
    j["max_prompt_chars"] = config.generation.max_prompt_chars;
    j["max_docs"] = config.max_docs;
    j["max_answer_tokens"] = config.max_answer_tokens;
    j["recall_ks"] = config.recall_ks;
    j["coverage_percentage"] = config.coverage_percentage;
    j["merge"] = to_string(config.merge);
    j["merge_budget"] = config.merge_budget;
    j["seed"] = config.seed;
    if (config.limit.has_value()) j["limit"] = *config.limit;
    j["output_dir"] = config.output_dir;
    j["parallelism"] = config.parallelism;
    j["cache_dir"] = config.cache_dir;
    j["normalize_embeddings"] = config.normalize_embeddings;
    j["kmeans_max_iterations"] = config.kmeans_max_iterations;
    j["kmeans_tolerance"] = config.kmeans_tolerance;
    if (config.embedding_dims.has_value()) j["embedding_dims"] = *config.embedding_dims;
    return j;
}

// ---------------------------------------------------------------------------
// Dataset loading

std::vector<QAExample> load_dataset(const std::filesystem::path& path, Task task,
                                    std::optional<std::size_t> limit, DatasetLoadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open dataset file " + path.string());

    DatasetLoadStats local;
    DatasetLoadStats& s = stats != nullptr ? *stats : local;
    std::vector<QAExample> examples;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_index = 0;  // 0-based, used as the fallback id

    while (std::getline(in, line)) {
        const std::size_t current = line_index++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++s.total_lines;
        if (limit.has_value() && examples.size() >= *limit) continue;
        try {
            Json raw = Json::parse(line);
            QAExample example =
                validate_example(raw, std::to_string(current), &s.unknown_fields);
            if (!seen_ids.insert(example.id).second) {
                throw Error(ErrorCode::ParseError, "duplicate id '" + example.id + "'");
            }
            if (example.task != task) {
                throw Error(ErrorCode::InconsistentTaskFields,
                            "record '" + example.id + "' has task " +
                                std::string(to_string(example.task)) + ", run expects " +
                                std::string(to_string(task)));
            }
            examples.push_back(std::move(example));
        } catch (const Error& e) {
            ++s.invalid_lines;
            if (s.errors.size() < 5) {
                s.errors.push_back("line " + std::to_string(current) + ": " + e.what());
            }
        } catch (const Json::exception& e) {
            // parse_error for malformed lines, type_error for wrong-typed fields
            ++s.invalid_lines;
            if (s.errors.size() < 5) {
                s.errors.push_back("line " + std::to_string(current) + ": " + e.what());
            }
        }
    }

    if (s.total_lines > 0 &&
        static_cast<double>(s.invalid_lines) > 0.01 * static_cast<double>(s.total_lines)) {
        std::string detail;
        for (const std::string& err : s.errors) detail += "\n  " + err;
        throw Error(ErrorCode::ParseError,
                    path.string() + ": " + std::to_string(s.invalid_lines) + " of " +
                        std::to_string(s.total_lines) + " lines invalid (threshold 1%)" + detail);
    }
    return examples;
}

// ---------------------------------------------------------------------------
// Merge

std::vector<Document> merge_documents(std::span<const Document> retrieved,
                                      std::span<const Document> generated, int budget) {
    if (budget < 2) throw Error(ErrorCode::InvalidConfig, "merge budget must be at least 2");
    if (retrieved.empty() && generated.empty()) {
        throw Error(ErrorCode::BothEmpty, "nothing to merge");
    }
    std::vector<Document> merged;
    merged.reserve(static_cast<std::size_t>(budget));
    std::size_t gi = 0, ri = 0;
    while (merged.size() < static_cast<std::size_t>(budget) &&
           (gi < generated.size() || ri < retrieved.size())) {
        if (gi < generated.size()) {
            merged.push_back(generated[gi++]);
            if (merged.size() == static_cast<std::size_t>(budget)) break;
        }
        if (ri < retrieved.size()) {
            merged.push_back(retrieved[ri++]);
        }
    }
    for (std::size_t i = 0; i < merged.size(); ++i) merged[i].rank = static_cast<int>(i);
    return merged;
}

// ---------------------------------------------------------------------------
// Run internals

namespace {

std::filesystem::path resolve_cache_dir(const RunConfig& config) {
    if (!config.cache_dir.empty()) return config.cache_dir;
    if (const char* env = std::getenv("GENREAD_CACHE_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return ".genread-cache";
}

struct RunContext {
    std::shared_ptr<Backend> backend;
    std::unique_ptr<Client> client;
    RunConfig config;
    std::vector<DemonstrationSet> demo_sets;  // clustered strategy only
    std::string cluster_digest;
    RunWarnings warnings;
};

void resolve_templates(RunConfig& config) {
    if (!config.generate_template_file.empty()) {
        config.generate_template =
            load_prompt_file(config.generate_template_file, TemplateRole::generate).front();
    }
    if (!config.read_template_file.empty()) {
        config.read_template =
            load_prompt_file(config.read_template_file, TemplateRole::read).front();
    }
    if (config.generation.strategy == GenerationStrategy::human_prompt &&
        config.generation.human_prompts.empty()) {
        if (config.human_prompts_file.empty()) {
            throw Error(ErrorCode::InvalidConfig,
                        "human_prompt strategy requires human_prompts_file");
        }
        config.generation.human_prompts =
            load_prompt_file(config.human_prompts_file, TemplateRole::generate);
    }
    validate_template(config.generate_template);
    validate_template(config.read_template);
}

RunContext make_context(const RunConfig& input) {
    RunContext ctx;
    ctx.config = input;
    resolve_templates(ctx.config);
    validate_generation_config(ctx.config.generation);
    if (ctx.config.parallelism < 1) {
        throw Error(ErrorCode::InvalidConfig, "parallelism must be at least 1");
    }
    for (int k : ctx.config.recall_ks) {
        if (k < 1) throw Error(ErrorCode::InvalidConfig, "recall K values must be at least 1");
    }

    if (ctx.config.model.backend == BackendKind::mock) {
        if (ctx.config.model.endpoint_url.has_value()) {
            throw Error(ErrorCode::InvalidConfig, "mock backend must not set endpoint_url");
        }
        ctx.backend = std::make_shared<MockBackend>();
    } else {
        if (!ctx.config.model.endpoint_url.has_value()) {
            throw Error(ErrorCode::InvalidConfig, "http backend requires endpoint_url");
        }
        HttpBackendConfig http;
        http.completions_path = ctx.config.completions_path;
        http.embeddings_path = ctx.config.embeddings_path;
        http.declared_embedding_dims = ctx.config.embedding_dims;
        ctx.backend = std::make_shared<HttpBackend>(http);
    }
    Client::Options options;
    options.cache_dir = resolve_cache_dir(ctx.config);
    options.parallelism = ctx.config.parallelism;
    ctx.client = std::make_unique<Client>(ctx.backend, options);
    return ctx;
}

/// Builds the training-split pool, clusters it with K = num_documents and
/// fixes one demonstration set per cluster for the whole run.
void prepare_clustered_strategy(RunContext& ctx) {
    const RunConfig& config = ctx.config;
    if (config.train_dataset_path.empty()) {
        throw Error(ErrorCode::InvalidConfig,
                    "clustered strategy requires train_dataset_path for the pair pool");
    }
    DatasetLoadStats stats;
    const std::vector<QAExample> train =
        load_dataset(config.train_dataset_path, config.task, std::nullopt, &stats);
    ctx.warnings.invalid_dataset_lines += stats.invalid_lines;
    ctx.warnings.unknown_fields += stats.unknown_fields;
    if (train.empty()) {
        throw Error(ErrorCode::InvalidConfig, "training split is empty");
    }

    std::size_t dropped = 0;
    const std::vector<PoolEntry> pool =
        build_pair_pool(*ctx.client, config.model, train, config.generate_template,
                        config.generation, &dropped);
    ctx.warnings.pool_dropped = dropped;
    if (pool.empty()) {
        throw Error(ErrorCode::InvalidConfig, "pair pool is empty after failures");
    }

    std::vector<EmbeddingVector> vectors;
    vectors.reserve(pool.size());
    for (const PoolEntry& entry : pool) vectors.push_back(entry.embedding);

    KMeansConfig kmeans_cfg;
    kmeans_cfg.k = config.generation.num_documents;
    kmeans_cfg.max_iterations = config.kmeans_max_iterations;
    kmeans_cfg.tolerance = config.kmeans_tolerance;
    kmeans_cfg.seed = config.seed;
    kmeans_cfg.normalize = config.normalize_embeddings;
    const ClusterAssignment assignment = kmeans(vectors, kmeans_cfg);
    ctx.cluster_digest = sha256_hex(to_json(assignment).dump());

    std::size_t deficits = 0;
    ctx.demo_sets = build_demonstration_sets(pool, assignment, config.generation.demos_per_cluster,
                                             config.seed, &deficits);
    ctx.warnings.demo_set_deficits = deficits;
}

std::vector<Document> generate_for_question(RunContext& ctx, const std::string& question) {
    const RunConfig& config = ctx.config;
    const GenerationConfig& gen = config.generation;
    switch (gen.strategy) {
        case GenerationStrategy::greedy: {
            std::vector<Document> docs;
            for (int i = 0; i < gen.num_documents; ++i) {
                Document doc = generate_greedy(*ctx.client, config.model, question,
                                               config.generate_template, gen.max_tokens);
                doc.rank = i;
                docs.push_back(std::move(doc));
            }
            return docs;
        }
        case GenerationStrategy::nucleus:
            return generate_nucleus(*ctx.client, config.model, question, config.generate_template,
                                    gen.num_documents, gen.top_p, gen.max_tokens);
        case GenerationStrategy::human_prompt:
            return generate_human_prompts(*ctx.client, config.model, question, gen.human_prompts,
                                          gen.num_documents, gen.max_tokens);
        case GenerationStrategy::clustered:
            return generate_clustered(*ctx.client, config.model, question, ctx.demo_sets,
                                      gen.max_tokens, gen.max_prompt_chars);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown generation strategy");
}

struct ExampleOutcome {
    std::vector<Document> documents;
    std::string prediction;
    PerExampleScore score;
    bool errored = false;
};

PerExampleScore score_example(const RunConfig& config, const QAExample& example,
                              std::span<const Document> documents, const std::string& prediction,
                              RunWarnings& warnings, std::mutex& warnings_mutex) {
    PerExampleScore score;
    score.id = example.id;
    switch (config.task) {
        case Task::qa: {
            score.em = exact_match(prediction, example.answers);
            for (int k : config.recall_ks) {
                score.recall_at_k[k] = recall_at_k(documents, example.answers, k);
            }
            score.answer_coverage =
                answer_coverage(documents, example.answers, {}, config.coverage_percentage);
            break;
        }
        case Task::fact_check: {
            std::size_t unmappable = 0;
            score.accuracy = fact_check_accuracy(prediction, *example.label, &unmappable);
            if (unmappable > 0) {
                std::lock_guard lock(warnings_mutex);
                warnings.unmappable_predictions += unmappable;
            }
            break;
        }
        case Task::dialogue: {
            double best_f1 = 0.0;
            double best_rouge = 0.0;
            for (const std::string& reference : example.answers) {
                best_f1 = std::max(best_f1, unigram_f1(prediction, reference));
                best_rouge = std::max(best_rouge, rouge_l(prediction, reference));
            }
            score.f1 = best_f1;
            score.rouge_l = best_rouge;
            break;
        }
    }
    return score;
}

PerExampleScore zero_score(const RunConfig& config, const QAExample& example,
                           const std::string& error) {
    PerExampleScore score;
    score.id = example.id;
    score.error = error;
    switch (config.task) {
        case Task::qa:
            score.em = 0.0;
            for (int k : config.recall_ks) score.recall_at_k[k] = 0.0;
            score.answer_coverage = 0.0;
            break;
        case Task::fact_check:
            score.accuracy = 0.0;
            break;
        case Task::dialogue:
            score.f1 = 0.0;
            score.rouge_l = 0.0;
            break;
    }
    return score;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const int worker_count = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (worker_count == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) {
        workers.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (std::thread& worker : workers) worker.join();
    if (failure) std::rethrow_exception(failure);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
}

Json documents_line(const QAExample& example, std::span<const Document> documents) {
    Json docs = Json::array();
    for (const Document& doc : documents) docs.push_back(to_json(doc));
    Json line;
    line["id"] = example.id;
    line["question"] = example.question;
    line["documents"] = std::move(docs);
    return line;
}

/// Shared generate(+merge) stage; fills outcome.documents per example.
void run_generation_stage(RunContext& ctx, std::span<const QAExample> examples,
                          std::vector<ExampleOutcome>& outcomes) {
    const RunConfig& config = ctx.config;
    if (config.merge != MergeMode::generated_only) {
        for (const QAExample& example : examples) {
            if (!example.retrieved_docs.has_value() || example.retrieved_docs->empty()) {
                throw Error(ErrorCode::InvalidConfig,
                            "merge mode '" + std::string(to_string(config.merge)) +
                                "' requires retrieved_docs on every example (missing on '" +
                                example.id + "')");
            }
        }
    }
    if (config.generation.strategy == GenerationStrategy::clustered && ctx.demo_sets.empty() &&
        config.merge != MergeMode::retrieved_only) {
        prepare_clustered_strategy(ctx);
    }

    parallel_for(examples.size(), config.parallelism, [&](std::size_t i) {
        const QAExample& example = examples[i];
        ExampleOutcome& outcome = outcomes[i];
        try {
            std::vector<Document> generated;
            if (config.merge != MergeMode::retrieved_only) {
                generated = generate_for_question(ctx, example.question);
            }
            switch (config.merge) {
                case MergeMode::generated_only:
                    outcome.documents = std::move(generated);
                    break;
                case MergeMode::retrieved_only:
                    outcome.documents = *example.retrieved_docs;
                    break;
                case MergeMode::merged:
                    outcome.documents =
                        merge_documents(*example.retrieved_docs, generated, config.merge_budget);
                    break;
            }
        } catch (const Error& e) {
            outcome.errored = true;
            outcome.score = PerExampleScore{};
            outcome.score.id = example.id;
            outcome.score.error = e.what();
        }
    });
}

}  // namespace

Json to_json(const RunManifest& manifest) {
    Json j;
    j["toolkit_version"] = manifest.toolkit_version;
    j["status"] = to_string(manifest.status);
    j["config"] = manifest.config_snapshot;
    if (!manifest.cluster_assignment_digest.empty()) {
        j["cluster_assignment_digest"] = manifest.cluster_assignment_digest;
    }
    Json digests = Json::array();
    for (const auto& [id, digest] : manifest.per_example_digests) {
        digests.push_back(Json{{"id", id}, {"documents_digest", digest}});
    }
    j["per_example_digests"] = std::move(digests);
    j["metrics"] = to_json(manifest.report);
    j["wall_clock_ms"] = manifest.wall_clock_ms;
    j["requests"] =
        Json{{"backend_calls", manifest.backend_calls}, {"cache_hits", manifest.cache_hits}};
    j["warnings"] = Json{{"invalid_dataset_lines", manifest.warnings.invalid_dataset_lines},
                         {"unknown_fields", manifest.warnings.unknown_fields},
                         {"pool_dropped", manifest.warnings.pool_dropped},
                         {"demo_set_deficits", manifest.warnings.demo_set_deficits},
                         {"unmappable_predictions", manifest.warnings.unmappable_predictions},
                         {"empty_completions", manifest.warnings.empty_completions},
                         {"errored_examples", manifest.warnings.errored_examples}};
    return j;
}

RunManifest run(const RunConfig& input) {
    const auto started = std::chrono::steady_clock::now();
    RunContext ctx = make_context(input);
    const RunConfig& config = ctx.config;
    if (config.dataset_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "dataset_path is required");
    }

    DatasetLoadStats stats;
    const std::vector<QAExample> examples =
        load_dataset(config.dataset_path, config.task, config.limit, &stats);
    ctx.warnings.invalid_dataset_lines += stats.invalid_lines;
    ctx.warnings.unknown_fields += stats.unknown_fields;
    if (examples.empty()) {
        throw Error(ErrorCode::EmptyRun, "dataset " + config.dataset_path + " yields no examples");
    }

    std::vector<ExampleOutcome> outcomes(examples.size());
    run_generation_stage(ctx, examples, outcomes);

    // Read + score; per-example errors are recorded, the run continues.
    std::mutex warnings_mutex;
    parallel_for(examples.size(), config.parallelism, [&](std::size_t i) {
        const QAExample& example = examples[i];
        ExampleOutcome& outcome = outcomes[i];
        if (outcome.errored) return;
        try {
            ReadRequest req;
            req.question = example.question;
            req.documents = outcome.documents;
            req.tmpl = config.read_template;
            req.max_docs = config.max_docs;
            req.max_answer_tokens = config.max_answer_tokens;
            try {
                outcome.prediction = read_answer(*ctx.client, config.model, req);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyCompletion) throw;
                // Unanswerable: scored as wrong, not skipped.
                outcome.prediction.clear();
                std::lock_guard lock(warnings_mutex);
                ++ctx.warnings.empty_completions;
            }
            outcome.score = score_example(config, example, outcome.documents, outcome.prediction,
                                          ctx.warnings, warnings_mutex);
        } catch (const Error& e) {
            outcome.errored = true;
            outcome.score = PerExampleScore{};
            outcome.score.id = example.id;
            outcome.score.error = e.what();
        }
    });

    RunManifest manifest;
    manifest.config_snapshot = run_config_to_json(config);
    manifest.cluster_assignment_digest = ctx.cluster_digest;

    std::vector<PerExampleScore> scores;
    scores.reserve(examples.size());
    std::string documents_jsonl;
    std::string predictions_jsonl;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const QAExample& example = examples[i];
        ExampleOutcome& outcome = outcomes[i];
        if (outcome.errored) {
            ++ctx.warnings.errored_examples;
            const std::string reason =
                outcome.score.error.value_or("unknown per-example failure");
            outcome.score = zero_score(config, example, reason);
        }
        scores.push_back(outcome.score);

        const Json doc_line = documents_line(example, outcome.documents);
        documents_jsonl += doc_line.dump();
        documents_jsonl += '\n';
        manifest.per_example_digests.emplace_back(example.id, sha256_hex(doc_line.dump()));

        Json pred_line;
        pred_line["id"] = example.id;
        pred_line["prediction"] = outcome.prediction;
        if (outcome.score.error.has_value()) pred_line["error"] = *outcome.score.error;
        predictions_jsonl += pred_line.dump();
        predictions_jsonl += '\n';
    }

    manifest.report = aggregate(std::move(scores), config.dataset_path);
    manifest.warnings = ctx.warnings;
    manifest.backend_calls = ctx.client->backend_calls();
    manifest.cache_hits = ctx.client->cache_hits();

    const double errored = static_cast<double>(ctx.warnings.errored_examples);
    if (errored > 0.10 * static_cast<double>(examples.size())) {
        manifest.status = RunStatus::failure;
    } else if (errored > 0.0) {
        manifest.status = RunStatus::partial;
    } else {
        manifest.status = RunStatus::success;
    }
    manifest.wall_clock_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();

    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "documents.jsonl", documents_jsonl);
    write_text_file(out_dir / "predictions.jsonl", predictions_jsonl);
    write_text_file(out_dir / "report.json", to_json(manifest.report).dump(2) + "\n");
    write_text_file(out_dir / "report.txt",
                    render_report_table(manifest.report, config.coverage_percentage));
    write_text_file(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
    return manifest;
}

// ---------------------------------------------------------------------------
// Stage subsets

void generate_documents(const RunConfig& input) {
    RunContext ctx = make_context(input);
    const RunConfig& config = ctx.config;
    DatasetLoadStats stats;
    const std::vector<QAExample> examples =
        load_dataset(config.dataset_path, config.task, config.limit, &stats);
    if (examples.empty()) throw Error(ErrorCode::EmptyRun, "dataset yields no examples");

    std::vector<ExampleOutcome> outcomes(examples.size());
    run_generation_stage(ctx, examples, outcomes);

    std::string jsonl;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (outcomes[i].errored) continue;
        jsonl += documents_line(examples[i], outcomes[i].documents).dump();
        jsonl += '\n';
    }
    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "documents.jsonl", jsonl);
}

void cluster_pool(const RunConfig& input) {
    RunContext ctx = make_context(input);
    const RunConfig& config = ctx.config;
    if (config.train_dataset_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "cluster stage requires train_dataset_path");
    }
    DatasetLoadStats stats;
    const std::vector<QAExample> train =
        load_dataset(config.train_dataset_path, config.task, std::nullopt, &stats);
    if (train.empty()) throw Error(ErrorCode::EmptyRun, "training split is empty");

    std::size_t dropped = 0;
    const std::vector<PoolEntry> pool = build_pair_pool(
        *ctx.client, config.model, train, config.generate_template, config.generation, &dropped);
    if (pool.empty()) throw Error(ErrorCode::InvalidConfig, "pair pool is empty after failures");

    std::vector<EmbeddingVector> vectors;
    vectors.reserve(pool.size());
    for (const PoolEntry& entry : pool) vectors.push_back(entry.embedding);
    KMeansConfig kmeans_cfg;
    kmeans_cfg.k = config.generation.num_documents;
    kmeans_cfg.max_iterations = config.kmeans_max_iterations;
    kmeans_cfg.tolerance = config.kmeans_tolerance;
    kmeans_cfg.seed = config.seed;
    kmeans_cfg.normalize = config.normalize_embeddings;
    const ClusterAssignment assignment = kmeans(vectors, kmeans_cfg);

    Json j = to_json(assignment);
    Json pairs = Json::array();
    for (const PoolEntry& entry : pool) {
        pairs.push_back(Json{{"example_id", entry.example_id},
                             {"question", entry.question},
                             {"document", entry.document}});
    }
    j["pairs"] = std::move(pairs);
    j["digest"] = sha256_hex(to_json(assignment).dump());
    j["pool_dropped"] = dropped;

    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "assignment.json", j.dump(2) + "\n");
}

namespace {

std::map<std::string, std::vector<Document>> load_documents_file(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open documents file " + path.string());
    std::map<std::string, std::vector<Document>> by_id;
    std::string line;
    std::size_t line_index = 0;
    while (std::getline(in, line)) {
        ++line_index;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw Error(ErrorCode::ParseError,
                        path.string() + " line " + std::to_string(line_index) + ": " + e.what());
        }
        std::vector<Document> docs;
        for (const Json& d : j.at("documents")) docs.push_back(document_from_json(d));
        by_id[j.at("id").get<std::string>()] = std::move(docs);
    }
    return by_id;
}

std::map<std::string, std::string> load_predictions_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open predictions file " + path.string());
    std::map<std::string, std::string> by_id;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const Json j = Json::parse(line);
        by_id[j.at("id").get<std::string>()] = j.at("prediction").get<std::string>();
    }
    return by_id;
}

}  // namespace

void read_documents(const RunConfig& input, const std::filesystem::path& documents_path) {
    RunContext ctx = make_context(input);
    const RunConfig& config = ctx.config;
    const std::vector<QAExample> examples =
        load_dataset(config.dataset_path, config.task, config.limit);
    if (examples.empty()) throw Error(ErrorCode::EmptyRun, "dataset yields no examples");

    std::map<std::string, std::vector<Document>> docs_by_id;
    if (!documents_path.empty()) docs_by_id = load_documents_file(documents_path);

    std::vector<std::string> predictions(examples.size());
    std::vector<std::optional<std::string>> errors(examples.size());
    parallel_for(examples.size(), config.parallelism, [&](std::size_t i) {
        const QAExample& example = examples[i];
        ReadRequest req;
        req.question = example.question;
        if (auto it = docs_by_id.find(example.id); it != docs_by_id.end()) {
            req.documents = it->second;  // absent id: closed-book read
        }
        req.tmpl = config.read_template;
        req.max_docs = config.max_docs;
        req.max_answer_tokens = config.max_answer_tokens;
        try {
            predictions[i] = read_answer(*ctx.client, config.model, req);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::EmptyCompletion) {
                predictions[i].clear();
            } else {
                errors[i] = e.what();
            }
        }
    });

    std::string jsonl;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        Json line;
        line["id"] = examples[i].id;
        line["prediction"] = predictions[i];
        if (errors[i].has_value()) line["error"] = *errors[i];
        jsonl += line.dump();
        jsonl += '\n';
    }
    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "predictions.jsonl", jsonl);
}

MetricReport evaluate_files(const RunConfig& input, const std::filesystem::path& documents_path,
                            const std::filesystem::path& predictions_path) {
    RunConfig config = input;
    resolve_templates(config);
    const std::vector<QAExample> examples =
        load_dataset(config.dataset_path, config.task, config.limit);
    if (examples.empty()) throw Error(ErrorCode::EmptyRun, "dataset yields no examples");

    std::map<std::string, std::vector<Document>> docs_by_id;
    if (!documents_path.empty()) docs_by_id = load_documents_file(documents_path);
    const std::map<std::string, std::string> predictions = load_predictions_file(predictions_path);

    RunWarnings warnings;
    std::mutex warnings_mutex;
    std::vector<PerExampleScore> scores;
    scores.reserve(examples.size());
    static const std::vector<Document> no_docs;
    for (const QAExample& example : examples) {
        auto docs_it = docs_by_id.find(example.id);
        const std::vector<Document>& docs =
            docs_it != docs_by_id.end() ? docs_it->second : no_docs;
        auto pred_it = predictions.find(example.id);
        if (pred_it == predictions.end()) {
            scores.push_back(zero_score(config, example, "missing prediction"));
            ++warnings.errored_examples;
            continue;
        }
        scores.push_back(
            score_example(config, example, docs, pred_it->second, warnings, warnings_mutex));
    }

    MetricReport report = aggregate(std::move(scores), config.dataset_path);
    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "report.json", to_json(report).dump(2) + "\n");
    write_text_file(out_dir / "report.txt",
                    render_report_table(report, config.coverage_percentage));
    return report;
}

void merge_files(const RunConfig& input, const std::filesystem::path& generated_documents_path) {
    RunConfig config = input;
    const std::vector<QAExample> examples =
        load_dataset(config.dataset_path, config.task, config.limit);
    if (examples.empty()) throw Error(ErrorCode::EmptyRun, "dataset yields no examples");
    const auto generated_by_id = load_documents_file(generated_documents_path);

    static const std::vector<Document> none;
    std::string jsonl;
    for (const QAExample& example : examples) {
        const std::vector<Document>& retrieved =
            example.retrieved_docs.has_value() ? *example.retrieved_docs : none;
        auto it = generated_by_id.find(example.id);
        const std::vector<Document>& generated = it != generated_by_id.end() ? it->second : none;
        const std::vector<Document> merged =
            merge_documents(retrieved, generated, config.merge_budget);
        jsonl += documents_line(example, merged).dump();
        jsonl += '\n';
    }
    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "documents.jsonl", jsonl);
}

// ---------------------------------------------------------------------------
// Report rendering

namespace {

std::string format_value(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.1f", value);
    return buffer;
}

}  // namespace

std::string render_report_table(const MetricReport& report, bool coverage_percentage) {
    std::vector<std::pair<std::string, std::string>> rows;
    rows.emplace_back("Examples", std::to_string(report.n_examples));
    if (report.em.has_value()) rows.emplace_back("EM", format_value(*report.em * 100.0));
    for (const auto& [k, value] : report.recall_at_k) {
        rows.emplace_back("R@" + std::to_string(k), format_value(value * 100.0));
    }
    if (report.answer_coverage.has_value()) {
        const double scale = coverage_percentage ? 100.0 : 1.0;
        rows.emplace_back("Coverage", format_value(*report.answer_coverage * scale));
    }
    if (report.accuracy.has_value()) rows.emplace_back("ACC", format_value(*report.accuracy * 100.0));
    if (report.f1.has_value()) rows.emplace_back("F1", format_value(*report.f1 * 100.0));
    if (report.rouge_l.has_value()) rows.emplace_back("R-L", format_value(*report.rouge_l * 100.0));

    std::size_t name_width = 6;
    std::size_t value_width = 5;
    for (const auto& [name, value] : rows) {
        name_width = std::max(name_width, name.size());
        value_width = std::max(value_width, value.size());
    }
    std::string table = "Metric";
    table.append(name_width - 6 + 2, ' ');
    table += "Value\n";
    table.append(name_width, '-');
    table += "  ";
    table.append(value_width, '-');
    table += '\n';
    for (const auto& [name, value] : rows) {
        table += name;
        table.append(name_width - name.size() + 2 + value_width - value.size(), ' ');
        table += value;
        table += '\n';
    }
    return table;
}

}  // namespace genread
