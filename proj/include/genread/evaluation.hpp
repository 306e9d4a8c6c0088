#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genread/datamodel.hpp"

namespace genread {

/// SQuAD-style answer normalization pipeline; each rule applies in the order
/// declared and the whole pipeline is idempotent.
struct NormalizationRules {
    bool lowercase = true;
    bool strip_punctuation = true;  // each punctuation codepoint becomes a space
    bool remove_articles = true;    // standalone a / an / the
    bool collapse_whitespace = true;
};

std::string normalize_answer(std::string_view text, const NormalizationRules& rules = {});

/// normalize_answer followed by a whitespace split.
std::vector<std::string> normalize_tokens(std::string_view text,
                                          const NormalizationRules& rules = {});

/// 1 iff the normalized prediction equals some normalized acceptable answer.
int exact_match(const std::string& prediction, std::span<const std::string> answers,
                const NormalizationRules& rules = {});

/// 1 iff any of the first min(k, len) documents contains any normalized
/// answer as a substring of the normalized document text.
int recall_at_k(std::span<const Document> documents, std::span<const std::string> answers, int k,
                const NormalizationRules& rules = {});

/// Per acceptable answer (distinct by normalized form, original order): the
/// number of documents containing it.
std::vector<std::pair<std::string, int>> answer_hit_counts(
    std::span<const Document> documents, std::span<const std::string> answers,
    const NormalizationRules& rules = {});

/// Count of distinct acceptable answers appearing in at least one document.
/// With as_percentage, the count is scaled to a share of the answer list.
double answer_coverage(std::span<const Document> documents, std::span<const std::string> answers,
                       const NormalizationRules& rules = {}, bool as_percentage = false);

/// Case-insensitive prefix mapping of a free-text verdict; nullopt when the
/// prediction maps to neither label.
std::optional<FactLabel> map_fact_prediction(std::string_view prediction);

/// 1 iff the mapped prediction equals gold; unmappable predictions score 0
/// and bump `unmappable_count`.
int fact_check_accuracy(const std::string& prediction, FactLabel gold,
                        std::size_t* unmappable_count = nullptr);

double unigram_f1(const std::string& prediction, const std::string& reference,
                  const NormalizationRules& rules = {});

/// Token-level LCS F-measure with beta = 1.2 weighting recall.
double rouge_l(const std::string& prediction, const std::string& reference,
               const NormalizationRules& rules = {}, double beta = 1.2);

/// Arithmetic means per metric; per-example scores retained.
MetricReport aggregate(std::vector<PerExampleScore> scores, const std::string& dataset_id);

}  // namespace genread
