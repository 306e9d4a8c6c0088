#include "genread/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace genread {

std::string_view to_string(Task task) {
    switch (task) {
        case Task::qa: return "qa";
        case Task::fact_check: return "fact_check";
        case Task::dialogue: return "dialogue";
    }
    return "qa";
}

std::string_view to_string(FactLabel label) {
    return label == FactLabel::supports ? "supports" : "refutes";
}

std::string_view to_string(DocumentSource source) {
    return source == DocumentSource::generated ? "generated" : "retrieved";
}

std::string_view to_string(GenerationStrategy strategy) {
    switch (strategy) {
        case GenerationStrategy::greedy: return "greedy";
        case GenerationStrategy::nucleus: return "nucleus";
        case GenerationStrategy::human_prompt: return "human_prompt";
        case GenerationStrategy::clustered: return "clustered";
    }
    return "greedy";
}

Task parse_task(std::string_view text) {
    if (text == "qa") return Task::qa;
    if (text == "fact_check") return Task::fact_check;
    if (text == "dialogue") return Task::dialogue;
    throw Error(ErrorCode::InconsistentTaskFields, "unknown task '" + std::string(text) + "'");
}

FactLabel parse_fact_label(std::string_view text) {
    if (text == "supports") return FactLabel::supports;
    if (text == "refutes") return FactLabel::refutes;
    throw Error(ErrorCode::InconsistentTaskFields, "unknown label '" + std::string(text) + "'");
}

DocumentSource parse_document_source(std::string_view text) {
    if (text == "generated") return DocumentSource::generated;
    if (text == "retrieved") return DocumentSource::retrieved;
    throw Error(ErrorCode::ParseError, "unknown document source '" + std::string(text) + "'");
}

GenerationStrategy parse_generation_strategy(std::string_view text) {
    if (text == "greedy") return GenerationStrategy::greedy;
    if (text == "nucleus") return GenerationStrategy::nucleus;
    if (text == "human_prompt") return GenerationStrategy::human_prompt;
    if (text == "clustered") return GenerationStrategy::clustered;
    throw Error(ErrorCode::ParseError, "unknown strategy '" + std::string(text) + "'");
}

namespace {

std::string id_from_json(const Json& raw, std::string_view fallback_id) {
    if (!raw.contains("id")) return std::string(fallback_id);
    const Json& id = raw.at("id");
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
    throw Error(ErrorCode::MissingField, "record id is neither string nor integer");
}

Document retrieved_doc_from_json(const Json& j, std::size_t position, const std::string& record_id) {
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
        throw Error(ErrorCode::MissingField,
                    "record '" + record_id + "': retrieved_docs[" + std::to_string(position) +
                        "] lacks a text field");
    }
    Document doc;
    doc.text = j.at("text").get<std::string>();
    if (doc.text.empty()) {
        throw Error(ErrorCode::MissingField,
                    "record '" + record_id + "': retrieved_docs[" + std::to_string(position) +
                        "] has empty text");
    }
    doc.source = j.contains("source") ? parse_document_source(j.at("source").get<std::string>())
                                      : DocumentSource::retrieved;
    if (j.contains("strategy")) {
        doc.strategy = parse_generation_strategy(j.at("strategy").get<std::string>());
    }
    if (doc.source == DocumentSource::generated && !doc.strategy.has_value()) {
        throw Error(ErrorCode::InconsistentTaskFields,
                    "record '" + record_id + "': generated document without a strategy");
    }
    if (doc.source == DocumentSource::retrieved && doc.strategy.has_value()) {
        throw Error(ErrorCode::InconsistentTaskFields,
                    "record '" + record_id + "': retrieved document carries a strategy");
    }
    if (j.contains("prompt_id")) doc.prompt_id = j.at("prompt_id").get<std::string>();
    doc.rank = j.contains("rank") ? j.at("rank").get<int>() : static_cast<int>(position);
    if (doc.rank < 0) {
        throw Error(ErrorCode::ParseError, "record '" + record_id + "': negative document rank");
    }
    return doc;
}

}  // namespace

QAExample validate_example(const Json& raw, std::string_view fallback_id,
                           std::size_t* unknown_field_count) {
    if (!raw.is_object()) {
        throw Error(ErrorCode::ParseError, "record is not a JSON object");
    }
    static const std::set<std::string> known_fields = {"id",      "task",  "question",
                                                       "answers", "label", "retrieved_docs"};
    if (unknown_field_count != nullptr) {
        for (const auto& item : raw.items()) {
            if (!known_fields.contains(item.key())) ++*unknown_field_count;
        }
    }

    QAExample example;
    example.id = id_from_json(raw, fallback_id);
    example.task = raw.contains("task") ? parse_task(raw.at("task").get<std::string>()) : Task::qa;

    if (!raw.contains("question") || !raw.at("question").is_string() ||
        raw.at("question").get<std::string>().empty()) {
        throw Error(ErrorCode::MissingField,
                    "record '" + example.id + "': question is missing or empty");
    }
    example.question = raw.at("question").get<std::string>();

    if (raw.contains("answers")) {
        if (!raw.at("answers").is_array()) {
            throw Error(ErrorCode::ParseError, "record '" + example.id + "': answers is not a list");
        }
        for (const Json& answer : raw.at("answers")) {
            if (!answer.is_string() || answer.get<std::string>().empty()) {
                throw Error(ErrorCode::EmptyAnswerList,
                            "record '" + example.id + "': answers contain an empty entry");
            }
            example.answers.push_back(answer.get<std::string>());
        }
    }
    if ((example.task == Task::qa || example.task == Task::dialogue) && example.answers.empty()) {
        throw Error(ErrorCode::EmptyAnswerList,
                    "record '" + example.id + "': task requires a non-empty answer list");
    }

    if (raw.contains("label")) {
        example.label = parse_fact_label(raw.at("label").get<std::string>());
    }
    if (example.task == Task::fact_check && !example.label.has_value()) {
        throw Error(ErrorCode::InconsistentTaskFields,
                    "record '" + example.id + "': fact_check record without a label");
    }
    if (example.task != Task::fact_check && example.label.has_value()) {
        throw Error(ErrorCode::InconsistentTaskFields,
                    "record '" + example.id + "': label present on a non-fact_check record");
    }

    if (raw.contains("retrieved_docs")) {
        if (!raw.at("retrieved_docs").is_array()) {
            throw Error(ErrorCode::ParseError,
                        "record '" + example.id + "': retrieved_docs is not a list");
        }
        std::vector<Document> docs;
        std::size_t position = 0;
        for (const Json& j : raw.at("retrieved_docs")) {
            docs.push_back(retrieved_doc_from_json(j, position++, example.id));
        }
        std::stable_sort(docs.begin(), docs.end(),
                         [](const Document& a, const Document& b) { return a.rank < b.rank; });
        if (!ranks_are_valid(docs)) {
            throw Error(ErrorCode::ParseError,
                        "record '" + example.id + "': retrieved_docs ranks are not 0..len-1");
        }
        example.retrieved_docs = std::move(docs);
    }
    return example;
}

bool ranks_are_valid(std::span<const Document> documents) {
    std::vector<bool> seen(documents.size(), false);
    for (const Document& doc : documents) {
        if (doc.rank < 0 || static_cast<std::size_t>(doc.rank) >= documents.size()) return false;
        if (seen[static_cast<std::size_t>(doc.rank)]) return false;
        seen[static_cast<std::size_t>(doc.rank)] = true;
    }
    return true;
}

void validate_template(const PromptTemplate& tmpl) {
    const bool has_question = tmpl.body.find("{question}") != std::string::npos;
    const bool has_background = tmpl.body.find("{background}") != std::string::npos;
    if (tmpl.role == TemplateRole::generate && !has_question) {
        throw Error(ErrorCode::InvalidTemplate,
                    "generate template '" + tmpl.id + "' lacks the {question} placeholder");
    }
    if (tmpl.role == TemplateRole::read && (!has_question || !has_background)) {
        throw Error(ErrorCode::InvalidTemplate,
                    "read template '" + tmpl.id +
                        "' must contain both {question} and {background} placeholders");
    }
}

Json to_json(const Document& doc) {
    Json j;
    j["text"] = doc.text;
    j["source"] = to_string(doc.source);
    if (doc.strategy.has_value()) j["strategy"] = to_string(*doc.strategy);
    if (doc.prompt_id.has_value()) j["prompt_id"] = *doc.prompt_id;
    j["rank"] = doc.rank;
    return j;
}

Json to_json(const QAExample& example) {
    Json j;
    j["id"] = example.id;
    j["task"] = to_string(example.task);
    j["question"] = example.question;
    if (!example.answers.empty() || example.task != Task::fact_check) {
        j["answers"] = example.answers;
    }
    if (example.label.has_value()) j["label"] = to_string(*example.label);
    if (example.retrieved_docs.has_value()) {
        Json docs = Json::array();
        for (const Document& doc : *example.retrieved_docs) docs.push_back(to_json(doc));
        j["retrieved_docs"] = std::move(docs);
    }
    return j;
}

Json to_json(const ClusterAssignment& assignment) {
    Json j;
    j["k"] = assignment.k;
    j["assignments"] = assignment.assignments;
    j["centroids"] = assignment.centroids;
    j["inertia"] = assignment.inertia;
    j["iterations_run"] = assignment.iterations_run;
    j["converged"] = assignment.converged;
    return j;
}

Json to_json(const PerExampleScore& score) {
    Json j;
    j["id"] = score.id;
    if (score.em.has_value()) j["em"] = *score.em;
    if (!score.recall_at_k.empty()) {
        Json recall = Json::object();
        for (const auto& [k, value] : score.recall_at_k) recall[std::to_string(k)] = value;
        j["recall_at_k"] = std::move(recall);
    }
    if (score.answer_coverage.has_value()) j["answer_coverage"] = *score.answer_coverage;
    if (score.accuracy.has_value()) j["accuracy"] = *score.accuracy;
    if (score.f1.has_value()) j["f1"] = *score.f1;
    if (score.rouge_l.has_value()) j["rouge_l"] = *score.rouge_l;
    if (score.error.has_value()) j["error"] = *score.error;
    return j;
}

Json to_json(const MetricReport& report) {
    Json j;
    j["dataset_id"] = report.dataset_id;
    j["n_examples"] = report.n_examples;
    if (report.em.has_value()) j["em"] = *report.em;
    if (!report.recall_at_k.empty()) {
        Json recall = Json::object();
        for (const auto& [k, value] : report.recall_at_k) recall[std::to_string(k)] = value;
        j["recall_at_k"] = std::move(recall);
    }
    if (report.answer_coverage.has_value()) j["answer_coverage"] = *report.answer_coverage;
    if (report.accuracy.has_value()) j["accuracy"] = *report.accuracy;
    if (report.f1.has_value()) j["f1"] = *report.f1;
    if (report.rouge_l.has_value()) j["rouge_l"] = *report.rouge_l;
    Json per_example = Json::array();
    for (const PerExampleScore& score : report.per_example) per_example.push_back(to_json(score));
    j["per_example"] = std::move(per_example);
    return j;
}

Document document_from_json(const Json& j) {
    Document doc;
    doc.text = j.at("text").get<std::string>();
    doc.source = parse_document_source(j.at("source").get<std::string>());
    if (j.contains("strategy")) {
        doc.strategy = parse_generation_strategy(j.at("strategy").get<std::string>());
    }
    if (j.contains("prompt_id")) doc.prompt_id = j.at("prompt_id").get<std::string>();
    doc.rank = j.value("rank", 0);
    return doc;
}

QAExample example_from_json(const Json& j) { return validate_example(j); }

namespace {

std::optional<double> opt_double(const Json& j, const char* key) {
    if (j.contains(key)) return j.at(key).get<double>();
    return std::nullopt;
}

std::map<int, double> recall_map_from_json(const Json& j) {
    std::map<int, double> recall;
    if (j.contains("recall_at_k")) {
        for (const auto& item : j.at("recall_at_k").items()) {
            recall[std::stoi(item.key())] = item.value().get<double>();
        }
    }
    return recall;
}

}  // namespace

MetricReport metric_report_from_json(const Json& j) {
    MetricReport report;
    report.dataset_id = j.at("dataset_id").get<std::string>();
    report.n_examples = j.at("n_examples").get<std::size_t>();
    report.em = opt_double(j, "em");
    report.recall_at_k = recall_map_from_json(j);
    report.answer_coverage = opt_double(j, "answer_coverage");
    report.accuracy = opt_double(j, "accuracy");
    report.f1 = opt_double(j, "f1");
    report.rouge_l = opt_double(j, "rouge_l");
    for (const Json& s : j.value("per_example", Json::array())) {
        PerExampleScore score;
        score.id = s.at("id").get<std::string>();
        score.em = opt_double(s, "em");
        score.recall_at_k = recall_map_from_json(s);
        score.answer_coverage = opt_double(s, "answer_coverage");
        score.accuracy = opt_double(s, "accuracy");
        score.f1 = opt_double(s, "f1");
        score.rouge_l = opt_double(s, "rouge_l");
        if (s.contains("error")) score.error = s.at("error").get<std::string>();
        report.per_example.push_back(std::move(score));
    }
    return report;
}

}  // namespace genread
