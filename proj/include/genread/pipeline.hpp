#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "genread/datamodel.hpp"
#include "genread/generation.hpp"
#include "genread/llm_backend.hpp"

namespace genread {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

enum class MergeMode { generated_only, retrieved_only, merged };

std::string_view to_string(MergeMode mode);
MergeMode parse_merge_mode(std::string_view text);

struct RunConfig {
    std::string dataset_path;
    std::string train_dataset_path;  // pool source for the clustered strategy
    Task task = Task::qa;
    ModelRef model;
    GenerationConfig generation;

    PromptTemplate generate_template = default_generate_template();
    PromptTemplate read_template = default_read_template();
    std::string generate_template_file;  // overrides generate_template when set
    std::string read_template_file;
    std::string human_prompts_file;

    int max_docs = 10;
    int max_answer_tokens = 32;

    std::vector<int> recall_ks = {1, 10, 20};
    bool coverage_percentage = false;

    MergeMode merge = MergeMode::generated_only;
    int merge_budget = 10;

    std::uint64_t seed = 0;
    std::optional<std::size_t> limit;
    std::string output_dir = "genread-out";
    int parallelism = 8;
    std::string cache_dir;  // empty: $GENREAD_CACHE_DIR, then ./.genread-cache

    bool normalize_embeddings = true;
    int kmeans_max_iterations = 100;
    double kmeans_tolerance = 1e-6;

    std::string completions_path = "/v1/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::optional<std::size_t> embedding_dims;  // enforced on http responses when set
};

/// Flat key-value JSON, keys mirroring the field names above.
RunConfig run_config_from_json(const Json& flat);
RunConfig load_run_config(const std::filesystem::path& path);
Json run_config_to_json(const RunConfig& config);

struct DatasetLoadStats {
    std::size_t total_lines = 0;    // non-blank lines seen
    std::size_t invalid_lines = 0;  // parse or validation failures
    std::size_t unknown_fields = 0;
    std::vector<std::string> errors;  // first few, with line numbers
};

/// JSONL loader; invalid lines are skipped with a warning and the load aborts
/// when more than 1% of lines are invalid.
std::vector<QAExample> load_dataset(const std::filesystem::path& path, Task task,
                                    std::optional<std::size_t> limit,
                                    DatasetLoadStats* stats = nullptr);

/// Interleaves generated-first (g0, r0, g1, r1, ...) up to budget; an
/// exhausted side yields to the other; ranks are reassigned 0..len-1.
std::vector<Document> merge_documents(std::span<const Document> retrieved,
                                      std::span<const Document> generated, int budget);

enum class RunStatus { success, partial, failure };

std::string_view to_string(RunStatus status);

struct RunWarnings {
    std::size_t invalid_dataset_lines = 0;
    std::size_t unknown_fields = 0;
    std::size_t pool_dropped = 0;
    std::size_t demo_set_deficits = 0;
    std::size_t unmappable_predictions = 0;
    std::size_t empty_completions = 0;
    std::size_t errored_examples = 0;
};

struct RunManifest {
    std::string toolkit_version = std::string(kToolkitVersion);
    RunStatus status = RunStatus::success;
    Json config_snapshot;
    std::string cluster_assignment_digest;  // empty unless strategy = clustered
    std::vector<std::pair<std::string, std::string>> per_example_digests;  // id -> digest
    MetricReport report;
    double wall_clock_ms = 0.0;
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
    RunWarnings warnings;
};

Json to_json(const RunManifest& manifest);

/// End-to-end staged run: ingest -> (pool build + cluster) -> generate ->
/// merge -> read -> evaluate -> report. Writes manifest.json,
/// documents.jsonl, predictions.jsonl, report.json and report.txt under
/// output_dir. The run fails only when more than 10% of examples error.
RunManifest run(const RunConfig& config);

/// Stage subsets backing the CLI subcommands.
void generate_documents(const RunConfig& config);
void cluster_pool(const RunConfig& config);
void read_documents(const RunConfig& config, const std::filesystem::path& documents_path);
MetricReport evaluate_files(const RunConfig& config, const std::filesystem::path& documents_path,
                            const std::filesystem::path& predictions_path);
void merge_files(const RunConfig& config, const std::filesystem::path& generated_documents_path);

/// Plain-text aligned metric table; proportion metrics shown as percentages
/// with one decimal.
std::string render_report_table(const MetricReport& report, bool coverage_percentage = false);

}  // namespace genread
