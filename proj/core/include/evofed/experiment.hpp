#pragma once

// Config-file front end: parse INI-style run descriptions, execute them,
// persist per-round metrics plus a run summary, compare completed runs, and
// verify the communication-accounting arithmetic.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "evofed/federation.hpp"

namespace evofed::experiment {

// Malformed or invalid configuration. Messages carry "<origin>:<line>: "
// when the problem maps to a config line.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct DataCfg {
    std::string source = "synth";  // "synth" | "idx"
    // synth
    std::size_t samples = 2000;
    std::size_t dim = 2;
    std::size_t classes = 4;
    double spread = 0.08;
    double test_fraction = 0.25;
    // idx
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    std::size_t limit = 0;  // 0 = all training rows
    bool center = false;    // subtract the per-feature training mean
    // sharding
    std::size_t classes_per_client = 2;
};

struct ExperimentConfig {
    federation::Method method = federation::Method::evofed;
    std::uint64_t rounds = 300;
    std::size_t clients = 5;
    double participation = 1.0;
    std::uint64_t eval_interval = 10;
    std::uint64_t seed = 42;
    std::size_t history_depth = 10;
    std::size_t threads = 1;  // 0 = hardware concurrency
    std::string output_dir;   // empty -> "runs/<method>"

    DataCfg data;

    std::vector<std::size_t> hidden{32};
    nn::Activation activation = nn::Activation::relu;
    nn::OptimizerCfg optimizer{0.0873, 0.9074, 0.0152, 1, 256};

    std::size_t population = 128;
    double sigma = 0.27;
    double alpha = 0.0427;
    double update_momentum = 0.0;
    std::size_t partitions = 1;
    codec::CodecSpec codec = codec::CodecSpec::raw32();

    double sparse_rho = 0.988;
    unsigned quant_bits = 8;

    void validate() const;                    // throws ConfigError naming the field
    federation::RunSpec build() const;        // loads data, shards, builds the arch
    std::string resolved_output_dir() const;  // output_dir or "runs/<method>"
};

// Parse config text / file. `origin` names the source in error messages.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

// Output root: explicit override, else $EVOFED_OUTPUT_ROOT, else the cwd.
std::filesystem::path output_root(const std::string& override_root = "");

// Per-round CSV: t, accuracy, loss, uplink_bytes_total, downlink_bytes_total,
// wall_ms. accuracy/loss are empty on rounds without evaluation; byte columns
// are per-round totals over all participants. Doubles print with %.17g.
std::string rounds_csv_text(const std::vector<federation::RoundRecord>& records,
                            bool include_wall = true);

struct RunPaths {
    std::filesystem::path dir;
    std::filesystem::path rounds_csv;
    std::filesystem::path summary_json;
};

struct RunOutput {
    federation::RunResult result;
    RunPaths paths;
    double final_accuracy = 0.0;
    double max_accuracy = 0.0;
    std::uint64_t total_uplink_bytes = 0;
    std::uint64_t total_downlink_bytes = 0;
};

// Execute the configured run and persist rounds.csv + summary.json under
// output_root(root_override)/resolved_output_dir().
RunOutput run(const ExperimentConfig& cfg, const std::string& root_override = "");

// Join >= 2 completed run directories into one long-format CSV
// (method, round, accuracy, cumulative bytes) at evaluated rounds.
// Returns the written path.
std::filesystem::path compare(const std::vector<std::string>& run_dirs,
                              const std::string& out_path = "comparison.csv");

struct AccountingReport {
    std::size_t model_params = 0;
    std::uint64_t uplink_bytes = 0;  // per client per round for this config
    std::uint64_t model_bytes = 0;   // 4 * |theta|
    double compression = 0.0;        // 1 - uplink/model
    bool degenerate = false;         // compression <= 0
    bool reference_rates_ok = false; // pinned reference configs hit their rates
    std::string text;                // printable report
};

// Recompute the config's per-round communication arithmetic and check the
// two pinned reference compression rates (>= 98.8% and >= 99.7%).
AccountingReport verify_accounting(const ExperimentConfig& cfg);

}  // namespace evofed::experiment
