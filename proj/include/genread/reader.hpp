#pragma once

#include <string>
#include <vector>

#include "genread/datamodel.hpp"
#include "genread/llm_backend.hpp"

namespace genread {

struct ReadRequest {
    std::string question;
    std::vector<Document> documents;  // may be empty: closed-book baseline
    PromptTemplate tmpl;              // role must be read
    int max_docs = 10;                // only the first max_docs are consumed
    int max_answer_tokens = 32;
};

/// Pure prompt assembly: {background} becomes the first max_docs document
/// texts, each prefixed "Passage {i}: " (1-based) and joined by blank lines;
/// {question} becomes the question. Placeholders are substituted in a single
/// pass over the template, never over substituted text.
std::string assemble_read_prompt(const ReadRequest& req);

/// Leading whitespace dropped, cut at the first newline, then trimmed.
/// Idempotent.
std::string postprocess_answer(std::string_view completion);

/// Greedy answer for the request; throws EmptyCompletion when the completion
/// post-processes to nothing (callers score it as wrong, not skipped).
std::string read_answer(Client& client, const ModelRef& model, const ReadRequest& req);

}  // namespace genread
