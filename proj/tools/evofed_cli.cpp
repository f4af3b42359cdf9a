// Command-line front end: `run` executes a configured federated run and
// writes rounds.csv + summary.json; `compare` joins completed runs into one
// CSV; `verify-accounting` recomputes a config's communication arithmetic.
//
// Exit codes: 0 success, 1 config/validation error, 2 IO or runtime error.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evofed/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& output_root,
                long long threads) {
    evofed::experiment::ExperimentConfig cfg =
        evofed::experiment::parse_config_file(config_path);
    if (threads >= 0) cfg.threads = static_cast<std::size_t>(threads);
    const evofed::experiment::RunOutput out = evofed::experiment::run(cfg, output_root);
    std::printf("method:          %s\n",
                evofed::federation::method_name(cfg.method));
    std::printf("rounds:          %llu\n", (unsigned long long)cfg.rounds);
    std::printf("final accuracy:  %.4f\n", out.final_accuracy);
    std::printf("max accuracy:    %.4f\n", out.max_accuracy);
    std::printf("uplink bytes:    %llu\n", (unsigned long long)out.total_uplink_bytes);
    std::printf("downlink bytes:  %llu\n", (unsigned long long)out.total_downlink_bytes);
    std::printf("wrote %s\n", out.paths.rounds_csv.string().c_str());
    std::printf("wrote %s\n", out.paths.summary_json.string().c_str());
    return 0;
}

int compare_command(const std::vector<std::string>& dirs, const std::string& out_path) {
    const std::filesystem::path written = evofed::experiment::compare(dirs, out_path);
    std::printf("wrote %s\n", written.string().c_str());
    return 0;
}

int verify_command(const std::string& config_path) {
    const evofed::experiment::ExperimentConfig cfg =
        evofed::experiment::parse_config_file(config_path);
    const evofed::experiment::AccountingReport rep =
        evofed::experiment::verify_accounting(cfg);
    std::fputs(rep.text.c_str(), stdout);
    if (!rep.reference_rates_ok) {
        std::fputs("error: reference compression rates not met\n", stderr);
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated learning via population-encoded gradient updates"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_root;
    std::string compare_out = "comparison.csv";
    long long threads = -1;
    std::vector<std::string> dirs;

    CLI::App* run_cmd = app.add_subcommand("run", "Execute a run described by a config file");
    run_cmd->add_option("config", config_path, "Path to the run config")->required();
    run_cmd->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    run_cmd->add_option("--output-root", output_root,
                        "Directory that holds run outputs (overrides $EVOFED_OUTPUT_ROOT)");

    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Join completed run directories into one CSV");
    compare_cmd->add_option("dirs", dirs, "Run output directories (>= 2)")->required();
    compare_cmd->add_option("--out", compare_out, "Output CSV path");

    CLI::App* verify_cmd = app.add_subcommand(
        "verify-accounting", "Recompute a config's communication arithmetic");
    verify_cmd->add_option("config", config_path, "Path to the run config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run_cmd->parsed()) return run_command(config_path, output_root, threads);
        if (compare_cmd->parsed()) return compare_command(dirs, compare_out);
        return verify_command(config_path);
    } catch (const evofed::experiment::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
