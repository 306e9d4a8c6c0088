#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "genread/clustering.hpp"
#include "genread/datamodel.hpp"
#include "genread/llm_backend.hpp"

namespace genread {

struct GenerationConfig {
    GenerationStrategy strategy = GenerationStrategy::greedy;
    int num_documents = 10;      // K documents per question
    double top_p = 0.95;         // nucleus only
    int demos_per_cluster = 5;   // n, clustered only
    std::vector<PromptTemplate> human_prompts;  // human_prompt only
    int max_tokens = 300;
    std::string pair_separator = "\n";  // joins question and document for embedding
    std::size_t max_prompt_chars = 12000;
};

/// Strategy-specific field presence and range checks.
void validate_generation_config(const GenerationConfig& cfg);

struct DemonstrationPair {
    std::string question;
    std::string document;
};

/// n question-document pairs drawn from one cluster.
struct DemonstrationSet {
    int cluster_id = 0;
    std::vector<DemonstrationPair> pairs;
};

/// One training question with its seed document and pair embedding.
struct PoolEntry {
    std::string example_id;
    std::string question;
    std::string document;
    EmbeddingVector embedding;
};

/// Splices `question` into every {question} placeholder, verbatim.
std::string instantiate_generate_prompt(const PromptTemplate& tmpl, const std::string& question);

Document generate_greedy(Client& client, const ModelRef& model, const std::string& question,
                         const PromptTemplate& tmpl, int max_tokens = 300);

std::vector<Document> generate_nucleus(Client& client, const ModelRef& model,
                                       const std::string& question, const PromptTemplate& tmpl,
                                       int k, double top_p, int max_tokens = 300);

std::vector<Document> generate_human_prompts(Client& client, const ModelRef& model,
                                             const std::string& question,
                                             std::span<const PromptTemplate> prompts, int k,
                                             int max_tokens = 300);

/// For each training example: one greedy seed document, then one embedding of
/// question + pair_separator + document. Examples that still fail after
/// retries are dropped; `dropped` (when given) receives the count.
std::vector<PoolEntry> build_pair_pool(Client& client, const ModelRef& model,
                                       std::span<const QAExample> examples,
                                       const PromptTemplate& tmpl, const GenerationConfig& cfg,
                                       std::size_t* dropped = nullptr);

/// Per cluster, n members sampled without replacement by a generator seeded
/// from (seed, cluster_id); clusters smaller than n contribute all members
/// and bump `deficit_warnings`. Output is ordered by ascending cluster id.
std::vector<DemonstrationSet> build_demonstration_sets(std::span<const PoolEntry> pool,
                                                       const ClusterAssignment& assignment, int n,
                                                       std::uint64_t seed,
                                                       std::size_t* deficit_warnings = nullptr);

/// Exact prompt grammar: "Question: {q}\nDocument: {d}\n\n" per pair, then
/// "Question: {question}\nDocument:".
std::string assemble_incontext_prompt(const DemonstrationSet& demos, const std::string& question);

/// Shrinks demonstration documents (longest first, cut from the end) until
/// the assembled prompt fits in max_prompt_chars.
DemonstrationSet fit_demonstrations(DemonstrationSet demos, const std::string& question,
                                    std::size_t max_prompt_chars);

std::vector<Document> generate_clustered(Client& client, const ModelRef& model,
                                         const std::string& question,
                                         std::span<const DemonstrationSet> demo_sets,
                                         int max_tokens = 300,
                                         std::size_t max_prompt_chars = 12000);

/// Prompt file: UTF-8, one prompt per line, id "#<line number>". A generate
/// line without the {question} placeholder gets "\n{question}" appended; read
/// lines must already carry {question} and {background}.
std::vector<PromptTemplate> load_prompt_file(const std::filesystem::path& path, TemplateRole role);

const PromptTemplate& default_generate_template();
const PromptTemplate& default_read_template();

}  // namespace genread
