#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genread/errors.hpp"

namespace genread {

using Json = nlohmann::json;

enum class Task { qa, fact_check, dialogue };
enum class FactLabel { supports, refutes };
enum class DocumentSource { generated, retrieved };
enum class GenerationStrategy { greedy, nucleus, human_prompt, clustered };
enum class TemplateRole { generate, read };

std::string_view to_string(Task task);
std::string_view to_string(FactLabel label);
std::string_view to_string(DocumentSource source);
std::string_view to_string(GenerationStrategy strategy);
Task parse_task(std::string_view text);
FactLabel parse_fact_label(std::string_view text);
DocumentSource parse_document_source(std::string_view text);
GenerationStrategy parse_generation_strategy(std::string_view text);

/// One contextual passage with provenance.
struct Document {
    std::string text;
    DocumentSource source = DocumentSource::generated;
    std::optional<GenerationStrategy> strategy;  // present iff source == generated
    std::optional<std::string> prompt_id;        // human-prompt index or cluster id
    int rank = 0;

    bool operator==(const Document&) const = default;
};

/// One benchmark record. For fact_check `question` holds the claim; for
/// dialogue it holds the full history joined by single newlines.
struct QAExample {
    std::string id;
    Task task = Task::qa;
    std::string question;
    std::vector<std::string> answers;
    std::optional<FactLabel> label;
    std::optional<std::vector<Document>> retrieved_docs;

    bool operator==(const QAExample&) const = default;
};

/// Fixed-dimension dense vector; dims is implied by values.size() and all
/// entries must be finite.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dims() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

struct ClusterAssignment {
    int k = 0;
    std::vector<int> assignments;               // one cluster id per input vector
    std::vector<std::vector<double>> centroids;  // k vectors, input dimension
    double inertia = 0.0;
    int iterations_run = 0;
    bool converged = false;
};

struct PromptTemplate {
    std::string id;
    std::string body;
    TemplateRole role = TemplateRole::generate;
};

struct PerExampleScore {
    std::string id;
    std::optional<double> em;
    std::map<int, double> recall_at_k;
    std::optional<double> answer_coverage;
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> rouge_l;
    std::optional<std::string> error;
};

/// Aggregated metrics for one run; every aggregate is the arithmetic mean of
/// the per-example values.
struct MetricReport {
    std::string dataset_id;
    std::size_t n_examples = 0;
    std::optional<double> em;
    std::map<int, double> recall_at_k;
    std::optional<double> answer_coverage;
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> rouge_l;
    std::vector<PerExampleScore> per_example;
};

/// Validates one raw dataset record and applies field defaults (task -> qa).
/// `fallback_id` is used when the record carries no id (the loader passes the
/// 0-based line number as decimal text). `unknown_field_count`, when given,
/// accumulates ignored unknown top-level fields.
QAExample validate_example(const Json& raw, std::string_view fallback_id = "",
                           std::size_t* unknown_field_count = nullptr);

/// Checks the rank invariant: ranks are a permutation of 0..len-1.
bool ranks_are_valid(std::span<const Document> documents);

/// Throws InvalidTemplate unless the body carries the placeholders its role
/// requires ({question} for generate; {question} and {background} for read).
void validate_template(const PromptTemplate& tmpl);

Json to_json(const Document& doc);
Json to_json(const QAExample& example);
Json to_json(const ClusterAssignment& assignment);
Json to_json(const PerExampleScore& score);
Json to_json(const MetricReport& report);
Document document_from_json(const Json& j);
QAExample example_from_json(const Json& j);
MetricReport metric_report_from_json(const Json& j);

}  // namespace genread
