#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "genread/pipeline.hpp"

namespace {

struct CliOverrides {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> limit;
    std::optional<std::string> backend;
    std::optional<int> parallelism;
    std::optional<std::string> dataset;
    std::optional<std::string> output_dir;
    std::optional<std::string> cache_dir;
};

genread::RunConfig build_config(const CliOverrides& cli) {
    genread::RunConfig config;
    if (!cli.config_file.empty()) {
        config = genread::load_run_config(cli.config_file);
    }
    if (cli.seed.has_value()) config.seed = *cli.seed;
    if (cli.limit.has_value()) config.limit = *cli.limit;
    if (cli.backend.has_value()) {
        config.model.backend = genread::parse_backend_kind(*cli.backend);
        if (config.model.backend == genread::BackendKind::mock) {
            config.model.endpoint_url.reset();
        }
    }
    if (cli.parallelism.has_value()) config.parallelism = *cli.parallelism;
    if (cli.dataset.has_value()) config.dataset_path = *cli.dataset;
    if (cli.output_dir.has_value()) config.output_dir = *cli.output_dir;
    if (cli.cache_dir.has_value()) config.cache_dir = *cli.cache_dir;
    return config;
}

int status_code(genread::RunStatus status) {
    switch (status) {
        case genread::RunStatus::success: return 0;
        case genread::RunStatus::partial: return 2;
        case genread::RunStatus::failure: return 1;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"genread: generate-then-read batch experiment toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    CliOverrides cli;
    app.add_option("--config", cli.config_file, "Run config file (flat key-value JSON)");
    app.add_option("--seed", cli.seed, "Run seed (64-bit unsigned)");
    app.add_option("--limit", cli.limit, "Cap on the number of examples");
    app.add_option("--backend", cli.backend, "Backend: http or mock")
        ->check(CLI::IsMember({"http", "mock"}));
    app.add_option("--parallelism", cli.parallelism, "Concurrent backend request limit");
    app.add_option("--dataset", cli.dataset, "Dataset file (JSONL), overrides config");
    app.add_option("--output-dir", cli.output_dir, "Output directory, overrides config");
    app.add_option("--cache-dir", cli.cache_dir, "Response cache directory");

    auto* cmd_run = app.add_subcommand("run", "End-to-end: generate, read, evaluate, report");
    auto* cmd_generate = app.add_subcommand("generate", "Generate documents only");
    auto* cmd_cluster =
        app.add_subcommand("cluster", "Build the pair pool, run K-means, emit assignment.json");
    auto* cmd_read = app.add_subcommand("read", "Read documents and produce predictions");
    std::string read_documents_file;
    cmd_read->add_option("--documents", read_documents_file,
                         "documents.jsonl to read from (omit for a closed-book run)");
    auto* cmd_evaluate = app.add_subcommand("evaluate", "Score predictions against the dataset");
    std::string eval_documents_file;
    std::string eval_predictions_file;
    cmd_evaluate->add_option("--documents", eval_documents_file,
                             "documents.jsonl used for recall/coverage");
    cmd_evaluate->add_option("--predictions", eval_predictions_file, "predictions.jsonl to score")
        ->required();
    auto* cmd_merge =
        app.add_subcommand("merge", "Interleave generated documents with retrieved ones");
    std::string merge_documents_file;
    cmd_merge->add_option("--documents", merge_documents_file, "generated documents.jsonl")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        genread::RunConfig config = build_config(cli);
        if (cmd_run->parsed()) {
            genread::RunManifest manifest = genread::run(config);
            std::cout << genread::render_report_table(manifest.report,
                                                      config.coverage_percentage);
            std::cerr << "status: " << genread::to_string(manifest.status) << " ("
                      << manifest.warnings.errored_examples << " errored examples, "
                      << manifest.backend_calls << " backend calls, " << manifest.cache_hits
                      << " cache hits)\n";
            std::cerr << "outputs: " << config.output_dir << "\n";
            return status_code(manifest.status);
        }
        if (cmd_generate->parsed()) {
            genread::generate_documents(config);
            std::cerr << "wrote " << config.output_dir << "/documents.jsonl\n";
            return 0;
        }
        if (cmd_cluster->parsed()) {
            genread::cluster_pool(config);
            std::cerr << "wrote " << config.output_dir << "/assignment.json\n";
            return 0;
        }
        if (cmd_read->parsed()) {
            genread::read_documents(config, read_documents_file);
            std::cerr << "wrote " << config.output_dir << "/predictions.jsonl\n";
            return 0;
        }
        if (cmd_evaluate->parsed()) {
            genread::MetricReport report =
                genread::evaluate_files(config, eval_documents_file, eval_predictions_file);
            std::cout << genread::render_report_table(report, config.coverage_percentage);
            return 0;
        }
        if (cmd_merge->parsed()) {
            genread::merge_files(config, merge_documents_file);
            std::cerr << "wrote " << config.output_dir << "/documents.jsonl\n";
            return 0;
        }
    } catch (const genread::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
