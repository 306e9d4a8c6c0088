#include "genread/generation.hpp"

#include <algorithm>
#include <fstream>

#include "genread/rng.hpp"

namespace genread {

void validate_generation_config(const GenerationConfig& cfg) {
    if (cfg.num_documents <= 0) {
        throw Error(ErrorCode::InvalidConfig, "num_documents must be positive");
    }
    if (cfg.max_tokens <= 0) {
        throw Error(ErrorCode::InvalidConfig, "max_tokens must be positive");
    }
    switch (cfg.strategy) {
        case GenerationStrategy::nucleus:
            if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) {
                throw Error(ErrorCode::InvalidConfig, "nucleus strategy requires top_p in (0, 1]");
            }
            break;
        case GenerationStrategy::human_prompt:
            if (cfg.human_prompts.size() < static_cast<std::size_t>(cfg.num_documents)) {
                throw Error(ErrorCode::InvalidConfig,
                            "human_prompt strategy requires at least num_documents prompts (" +
                                std::to_string(cfg.human_prompts.size()) + " < " +
                                std::to_string(cfg.num_documents) + ")");
            }
            break;
        case GenerationStrategy::clustered:
            if (cfg.demos_per_cluster <= 0) {
                throw Error(ErrorCode::InvalidConfig, "demos_per_cluster must be positive");
            }
            break;
        case GenerationStrategy::greedy:
            break;
    }
}

std::string instantiate_generate_prompt(const PromptTemplate& tmpl, const std::string& question) {
    validate_template(tmpl);
    std::string prompt = tmpl.body;
    static const std::string placeholder = "{question}";
    std::size_t pos = 0;
    while ((pos = prompt.find(placeholder, pos)) != std::string::npos) {
        prompt.replace(pos, placeholder.size(), question);
        pos += question.size();
    }
    return prompt;
}

namespace {

CompletionRequest greedy_request(const ModelRef& model, std::string prompt, int max_tokens) {
    CompletionRequest req;
    req.model = model;
    req.prompt = std::move(prompt);
    req.max_tokens = max_tokens;
    req.temperature = 0.0;
    req.top_p = 1.0;
    return req;
}

}  // namespace

Document generate_greedy(Client& client, const ModelRef& model, const std::string& question,
                         const PromptTemplate& tmpl, int max_tokens) {
    if (tmpl.role != TemplateRole::generate) {
        throw Error(ErrorCode::InvalidTemplate, "generate_greedy requires a generate template");
    }
    const CompletionRequest req =
        greedy_request(model, instantiate_generate_prompt(tmpl, question), max_tokens);
    Document doc;
    doc.text = client.complete(req).text;
    doc.source = DocumentSource::generated;
    doc.strategy = GenerationStrategy::greedy;
    doc.rank = 0;
    return doc;
}

std::vector<Document> generate_nucleus(Client& client, const ModelRef& model,
                                       const std::string& question, const PromptTemplate& tmpl,
                                       int k, double top_p, int max_tokens) {
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "top_p must lie in (0, 1]");
    }
    const std::string prompt = instantiate_generate_prompt(tmpl, question);
    std::vector<Document> docs;
    docs.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        CompletionRequest req;
        req.model = model;
        req.prompt = prompt;
        req.max_tokens = max_tokens;
        req.temperature = 1.0;
        req.top_p = top_p;
        req.seed_tag = "s" + std::to_string(i);
        Document doc;
        doc.text = client.complete(req).text;
        doc.source = DocumentSource::generated;
        doc.strategy = GenerationStrategy::nucleus;
        doc.rank = i;
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> generate_human_prompts(Client& client, const ModelRef& model,
                                             const std::string& question,
                                             std::span<const PromptTemplate> prompts, int k,
                                             int max_tokens) {
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
    if (prompts.size() < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::InvalidConfig, "need at least k prompts");
    }
    std::vector<Document> docs;
    docs.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const PromptTemplate& tmpl = prompts[static_cast<std::size_t>(i)];
        Document doc = generate_greedy(client, model, question, tmpl, max_tokens);
        doc.strategy = GenerationStrategy::human_prompt;
        doc.prompt_id = tmpl.id;
        doc.rank = i;
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<PoolEntry> build_pair_pool(Client& client, const ModelRef& model,
                                       std::span<const QAExample> examples,
                                       const PromptTemplate& tmpl, const GenerationConfig& cfg,
                                       std::size_t* dropped) {
    if (examples.empty()) {
        throw Error(ErrorCode::InvalidConfig, "pair pool needs at least one example");
    }
    std::vector<PoolEntry> pool;
    pool.reserve(examples.size());
    std::size_t failures = 0;
    for (const QAExample& example : examples) {
        try {
            Document doc = generate_greedy(client, model, example.question, tmpl, cfg.max_tokens);
            PoolEntry entry;
            entry.example_id = example.id;
            entry.question = example.question;
            entry.document = std::move(doc.text);
            entry.embedding =
                client.embed(entry.question + cfg.pair_separator + entry.document, model);
            pool.push_back(std::move(entry));
        } catch (const Error&) {
            ++failures;
        }
    }
    if (dropped != nullptr) *dropped = failures;
    return pool;
}

std::vector<DemonstrationSet> build_demonstration_sets(std::span<const PoolEntry> pool,
                                                       const ClusterAssignment& assignment, int n,
                                                       std::uint64_t seed,
                                                       std::size_t* deficit_warnings) {
    if (n < 1) throw Error(ErrorCode::InvalidConfig, "n must be at least 1");
    if (assignment.assignments.size() != pool.size()) {
        throw Error(ErrorCode::InconsistentAssignment, "assignment does not cover the pool");
    }
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(assignment.k));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const int id = assignment.assignments[i];
        if (id < 0 || id >= assignment.k) {
            throw Error(ErrorCode::InconsistentAssignment, "cluster id out of range");
        }
        members[static_cast<std::size_t>(id)].push_back(i);
    }

    std::size_t deficits = 0;
    std::vector<DemonstrationSet> sets;
    sets.reserve(static_cast<std::size_t>(assignment.k));
    for (int c = 0; c < assignment.k; ++c) {
        const auto& cluster_members = members[static_cast<std::size_t>(c)];
        if (cluster_members.empty()) {
            throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(c) + " has no members");
        }
        if (cluster_members.size() < static_cast<std::size_t>(n)) ++deficits;
        const auto picks =
            sample_without_replacement(cluster_members.size(), static_cast<std::size_t>(n),
                                       mix_seed(seed, static_cast<std::uint64_t>(c)));
        DemonstrationSet set;
        set.cluster_id = c;
        for (std::size_t pick : picks) {
            const PoolEntry& entry = pool[cluster_members[pick]];
            set.pairs.push_back({entry.question, entry.document});
        }
        sets.push_back(std::move(set));
    }
    if (deficit_warnings != nullptr) *deficit_warnings = deficits;
    return sets;
}

std::string assemble_incontext_prompt(const DemonstrationSet& demos, const std::string& question) {
    if (demos.pairs.empty()) {
        throw Error(ErrorCode::InvalidConfig, "demonstration set is empty");
    }
    std::string prompt;
    for (const DemonstrationPair& pair : demos.pairs) {
        prompt += "Question: " + pair.question + "\nDocument: " + pair.document + "\n\n";
    }
    prompt += "Question: " + question + "\nDocument:";
    return prompt;
}

namespace {

// Avoid leaving a dangling UTF-8 continuation byte after a cut.
void truncate_utf8(std::string& text, std::size_t new_size) {
    if (new_size >= text.size()) return;
    while (new_size > 0 && (static_cast<unsigned char>(text[new_size]) & 0xc0) == 0x80) {
        --new_size;
    }
    text.resize(new_size);
}

}  // namespace

DemonstrationSet fit_demonstrations(DemonstrationSet demos, const std::string& question,
                                    std::size_t max_prompt_chars) {
    while (assemble_incontext_prompt(demos, question).size() > max_prompt_chars) {
        std::size_t longest = demos.pairs.size();
        std::size_t longest_size = 0;
        for (std::size_t i = 0; i < demos.pairs.size(); ++i) {
            if (demos.pairs[i].document.size() > longest_size) {
                longest_size = demos.pairs[i].document.size();
                longest = i;
            }
        }
        if (longest == demos.pairs.size()) break;  // nothing left to shrink
        const std::size_t excess =
            assemble_incontext_prompt(demos, question).size() - max_prompt_chars;
        std::string& doc = demos.pairs[longest].document;
        truncate_utf8(doc, doc.size() - std::min(excess, doc.size()));
    }
    return demos;
}

std::vector<Document> generate_clustered(Client& client, const ModelRef& model,
                                         const std::string& question,
                                         std::span<const DemonstrationSet> demo_sets,
                                         int max_tokens, std::size_t max_prompt_chars) {
    if (demo_sets.empty()) {
        throw Error(ErrorCode::InvalidConfig, "clustered generation needs at least one set");
    }
    std::vector<Document> docs;
    docs.reserve(demo_sets.size());
    for (std::size_t i = 0; i < demo_sets.size(); ++i) {
        const DemonstrationSet fitted =
            fit_demonstrations(demo_sets[i], question, max_prompt_chars);
        const CompletionRequest req =
            greedy_request(model, assemble_incontext_prompt(fitted, question), max_tokens);
        Document doc;
        doc.text = client.complete(req).text;
        doc.source = DocumentSource::generated;
        doc.strategy = GenerationStrategy::clustered;
        doc.prompt_id = std::to_string(demo_sets[i].cluster_id);
        doc.rank = static_cast<int>(i);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<PromptTemplate> load_prompt_file(const std::filesystem::path& path, TemplateRole role) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open prompt file " + path.string());
    }
    std::vector<PromptTemplate> templates;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        PromptTemplate tmpl;
        tmpl.id = "#" + std::to_string(line_number);
        tmpl.role = role;
        tmpl.body = line;
        if (role == TemplateRole::generate &&
            tmpl.body.find("{question}") == std::string::npos) {
            tmpl.body += "\n{question}";
        }
        validate_template(tmpl);
        templates.push_back(std::move(tmpl));
    }
    if (templates.empty()) {
        throw Error(ErrorCode::IoError, "prompt file " + path.string() + " contains no prompts");
    }
    return templates;
}

const PromptTemplate& default_generate_template() {
    static const PromptTemplate tmpl{
        "default-generate",
        "Generate a background document to answer the given question.\n{question}",
        TemplateRole::generate};
    return tmpl;
}

const PromptTemplate& default_read_template() {
    static const PromptTemplate tmpl{
        "default-read",
        "Refer to the passage below and answer the following question.\n\n"
        "Passage: {background}\n\nQuestion: {question}",
        TemplateRole::read};
    return tmpl;
}

}  // namespace genread
