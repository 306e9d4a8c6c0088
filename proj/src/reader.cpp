#include "genread/reader.hpp"

namespace genread {

namespace {

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

std::string render_background(const ReadRequest& req) {
    std::string background;
    const std::size_t count =
        std::min(req.documents.size(), static_cast<std::size_t>(std::max(req.max_docs, 0)));
    for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) background += "\n\n";
        background += "Passage " + std::to_string(i + 1) + ": " + req.documents[i].text;
    }
    return background;
}

}  // namespace

std::string assemble_read_prompt(const ReadRequest& req) {
    validate_template(req.tmpl);
    if (req.tmpl.role != TemplateRole::read) {
        throw Error(ErrorCode::InvalidTemplate, "read_answer requires a read template");
    }
    const std::string background = render_background(req);

    std::string prompt;
    const std::string& body = req.tmpl.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        if (body.compare(pos, 10, "{question}") == 0) {
            prompt += req.question;
            pos += 10;
        } else if (body.compare(pos, 12, "{background}") == 0) {
            prompt += background;
            pos += 12;
        } else {
            prompt += body[pos];
            ++pos;
        }
    }
    return prompt;
}

std::string postprocess_answer(std::string_view completion) {
    const std::size_t begin = completion.find_first_not_of(kWhitespace);
    if (begin == std::string_view::npos) return "";
    completion.remove_prefix(begin);
    if (const std::size_t newline = completion.find('\n'); newline != std::string_view::npos) {
        completion = completion.substr(0, newline);
    }
    const std::size_t end = completion.find_last_not_of(kWhitespace);
    return std::string(completion.substr(0, end + 1));
}

std::string read_answer(Client& client, const ModelRef& model, const ReadRequest& req) {
    CompletionRequest completion_req;
    completion_req.model = model;
    completion_req.prompt = assemble_read_prompt(req);
    completion_req.max_tokens = req.max_answer_tokens;
    completion_req.temperature = 0.0;
    completion_req.top_p = 1.0;

    const std::string answer = postprocess_answer(client.complete(completion_req).text);
    if (answer.empty()) {
        throw Error(ErrorCode::EmptyCompletion, "model produced an empty answer");
    }
    return answer;
}

}  // namespace genread
