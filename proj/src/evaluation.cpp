#include "genread/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace genread {

namespace {

bool is_ascii_space(char c) {
    const unsigned char uc = static_cast<unsigned char>(c);
    return uc < 128 && std::isspace(uc) != 0;
}

bool is_ascii_punct(char c) {
    const unsigned char uc = static_cast<unsigned char>(c);
    return uc < 128 && std::ispunct(uc) != 0;
}

bool is_article(std::string_view token) {
    return token == "a" || token == "an" || token == "the";
}

}  // namespace

std::string normalize_answer(std::string_view text, const NormalizationRules& rules) {
    std::string s(text);
    if (rules.lowercase) {
        for (char& c : s) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
    }
    if (rules.strip_punctuation) {
        for (char& c : s) {
            if (is_ascii_punct(c)) c = ' ';
        }
    }
    if (rules.remove_articles) {
        std::string kept;
        kept.reserve(s.size());
        std::size_t i = 0;
        while (i < s.size()) {
            if (is_ascii_space(s[i])) {
                kept += s[i++];
                continue;
            }
            std::size_t j = i;
            while (j < s.size() && !is_ascii_space(s[j])) ++j;
            const std::string_view token(&s[i], j - i);
            if (!is_article(token)) kept.append(token);
            i = j;
        }
        s = std::move(kept);
    }
    if (rules.collapse_whitespace) {
        std::string collapsed;
        collapsed.reserve(s.size());
        bool in_space = true;  // also trims the front
        for (char c : s) {
            if (is_ascii_space(c)) {
                in_space = true;
                continue;
            }
            if (in_space && !collapsed.empty()) collapsed += ' ';
            in_space = false;
            collapsed += c;
        }
        s = std::move(collapsed);
    }
    return s;
}

std::vector<std::string> normalize_tokens(std::string_view text, const NormalizationRules& rules) {
    const std::string normalized = normalize_answer(text, rules);
    std::vector<std::string> tokens;
    std::istringstream stream(normalized);
    std::string token;
    while (stream >> token) tokens.push_back(std::move(token));
    return tokens;
}

int exact_match(const std::string& prediction, std::span<const std::string> answers,
                const NormalizationRules& rules) {
    if (answers.empty()) {
        throw Error(ErrorCode::EmptyAnswerList, "exact_match needs at least one answer");
    }
    const std::string normalized = normalize_answer(prediction, rules);
    for (const std::string& answer : answers) {
        if (normalized == normalize_answer(answer, rules)) return 1;
    }
    return 0;
}

namespace {

bool contains_answer(const std::string& normalized_doc, const std::string& normalized_answer) {
    // An answer that normalizes to nothing can never be "contained".
    return !normalized_answer.empty() &&
           normalized_doc.find(normalized_answer) != std::string::npos;
}

}  // namespace

int recall_at_k(std::span<const Document> documents, std::span<const std::string> answers, int k,
                const NormalizationRules& rules) {
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "K must be at least 1");
    if (answers.empty()) {
        throw Error(ErrorCode::EmptyAnswerList, "recall_at_k needs at least one answer");
    }
    std::vector<std::string> normalized_answers;
    normalized_answers.reserve(answers.size());
    for (const std::string& answer : answers) {
        normalized_answers.push_back(normalize_answer(answer, rules));
    }
    const std::size_t cutoff = std::min(documents.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < cutoff; ++i) {
        const std::string doc = normalize_answer(documents[i].text, rules);
        for (const std::string& answer : normalized_answers) {
            if (contains_answer(doc, answer)) return 1;
        }
    }
    return 0;
}

std::vector<std::pair<std::string, int>> answer_hit_counts(std::span<const Document> documents,
                                                           std::span<const std::string> answers,
                                                           const NormalizationRules& rules) {
    if (answers.empty()) {
        throw Error(ErrorCode::EmptyAnswerList, "answer_hit_counts needs at least one answer");
    }
    std::vector<std::string> normalized_docs;
    normalized_docs.reserve(documents.size());
    for (const Document& doc : documents) {
        normalized_docs.push_back(normalize_answer(doc.text, rules));
    }
    std::vector<std::pair<std::string, int>> counts;
    std::set<std::string> seen;
    for (const std::string& answer : answers) {
        const std::string normalized = normalize_answer(answer, rules);
        if (!seen.insert(normalized).second) continue;  // distinct by normalized form
        int hits = 0;
        for (const std::string& doc : normalized_docs) {
            if (contains_answer(doc, normalized)) ++hits;
        }
        counts.emplace_back(answer, hits);
    }
    return counts;
}

double answer_coverage(std::span<const Document> documents, std::span<const std::string> answers,
                       const NormalizationRules& rules, bool as_percentage) {
    const auto counts = answer_hit_counts(documents, answers, rules);
    double covered = 0.0;
    for (const auto& [answer, hits] : counts) {
        if (hits > 0) covered += 1.0;
    }
    if (as_percentage) return covered / static_cast<double>(counts.size());
    return covered;
}

std::optional<FactLabel> map_fact_prediction(std::string_view prediction) {
    const std::size_t begin = prediction.find_first_not_of(" \t\r\n\f\v");
    if (begin == std::string_view::npos) return std::nullopt;
    std::string lowered(prediction.substr(begin));
    for (char& c : lowered) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    for (const char* prefix : {"support", "true", "yes"}) {
        if (lowered.starts_with(prefix)) return FactLabel::supports;
    }
    for (const char* prefix : {"refut", "false", "no"}) {
        if (lowered.starts_with(prefix)) return FactLabel::refutes;
    }
    return std::nullopt;
}

int fact_check_accuracy(const std::string& prediction, FactLabel gold,
                        std::size_t* unmappable_count) {
    const auto mapped = map_fact_prediction(prediction);
    if (!mapped.has_value()) {
        if (unmappable_count != nullptr) ++*unmappable_count;
        return 0;
    }
    return *mapped == gold ? 1 : 0;
}

double unigram_f1(const std::string& prediction, const std::string& reference,
                  const NormalizationRules& rules) {
    const auto pred_tokens = normalize_tokens(prediction, rules);
    const auto ref_tokens = normalize_tokens(reference, rules);
    if (pred_tokens.empty() && ref_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || ref_tokens.empty()) return 0.0;

    std::map<std::string, int> ref_counts;
    for (const std::string& token : ref_tokens) ++ref_counts[token];
    int overlap = 0;
    for (const std::string& token : pred_tokens) {
        auto it = ref_counts.find(token);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref_tokens.size());
    return 2.0 * precision * recall / (precision + recall);
}

double rouge_l(const std::string& prediction, const std::string& reference,
               const NormalizationRules& rules, double beta) {
    const auto pred_tokens = normalize_tokens(prediction, rules);
    const auto ref_tokens = normalize_tokens(reference, rules);
    if (pred_tokens.empty() && ref_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || ref_tokens.empty()) return 0.0;

    const std::size_t m = pred_tokens.size();
    const std::size_t n = ref_tokens.size();
    std::vector<std::size_t> previous(n + 1, 0), current(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            if (pred_tokens[i - 1] == ref_tokens[j - 1]) {
                current[j] = previous[j - 1] + 1;
            } else {
                current[j] = std::max(previous[j], current[j - 1]);
            }
        }
        std::swap(previous, current);
    }
    const std::size_t lcs = previous[n];
    if (lcs == 0) return 0.0;
    const double precision = static_cast<double>(lcs) / static_cast<double>(m);
    const double recall = static_cast<double>(lcs) / static_cast<double>(n);
    const double beta_sq = beta * beta;
    return (1.0 + beta_sq) * precision * recall / (recall + beta_sq * precision);
}

MetricReport aggregate(std::vector<PerExampleScore> scores, const std::string& dataset_id) {
    if (scores.empty()) {
        throw Error(ErrorCode::EmptyRun, "no per-example scores to aggregate");
    }
    MetricReport report;
    report.dataset_id = dataset_id;
    report.n_examples = scores.size();

    auto mean_of = [&scores](std::optional<double> PerExampleScore::* field)
        -> std::optional<double> {
        double sum = 0.0;
        std::size_t count = 0;
        for (const PerExampleScore& score : scores) {
            if ((score.*field).has_value()) {
                sum += *(score.*field);
                ++count;
            }
        }
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    };

    report.em = mean_of(&PerExampleScore::em);
    report.answer_coverage = mean_of(&PerExampleScore::answer_coverage);
    report.accuracy = mean_of(&PerExampleScore::accuracy);
    report.f1 = mean_of(&PerExampleScore::f1);
    report.rouge_l = mean_of(&PerExampleScore::rouge_l);

    std::set<int> ks;
    for (const PerExampleScore& score : scores) {
        for (const auto& [k, value] : score.recall_at_k) ks.insert(k);
    }
    for (int k : ks) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const PerExampleScore& score : scores) {
            auto it = score.recall_at_k.find(k);
            if (it != score.recall_at_k.end()) {
                sum += it->second;
                ++count;
            }
        }
        if (count > 0) report.recall_at_k[k] = sum / static_cast<double>(count);
    }

    report.per_example = std::move(scores);
    return report;
}

}  // namespace genread
