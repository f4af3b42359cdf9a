#include "evofed/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace evofed::experiment {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One key=value assignment being parsed, for error context.
struct Parser {
    ExperimentConfig cfg;
    std::string origin;
    std::string section;
    int line_no = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
    }

    double to_double(const std::string& key, const std::string& value) const {
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            fail(key + " expects a number, got '" + value + "'");
        }
    }

    std::uint64_t to_u64(const std::string& key, const std::string& value) const {
        try {
            if (!value.empty() && value[0] == '-') throw std::invalid_argument("");
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(value, &used);
            if (used != value.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            fail(key + " expects a non-negative integer, got '" + value + "'");
        }
    }

    std::size_t to_size(const std::string& key, const std::string& value) const {
        return static_cast<std::size_t>(to_u64(key, value));
    }

    bool to_bool(const std::string& key, const std::string& value) const {
        if (value == "true" || value == "yes" || value == "1") return true;
        if (value == "false" || value == "no" || value == "0") return false;
        fail(key + " expects true/false, got '" + value + "'");
    }

    std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value) const {
        std::vector<std::size_t> out;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) fail(key + " has an empty list entry");
            out.push_back(to_size(key, item));
        }
        return out;
    }

    void handle(const std::string& key, const std::string& value) {
        if (section == "run") {
            if (key == "method") {
                try {
                    cfg.method = federation::method_from_name(value);
                } catch (const std::invalid_argument& e) {
                    fail(e.what());
                }
            } else if (key == "rounds") cfg.rounds = to_u64(key, value);
            else if (key == "clients") cfg.clients = to_size(key, value);
            else if (key == "participation") cfg.participation = to_double(key, value);
            else if (key == "eval_interval") cfg.eval_interval = to_u64(key, value);
            else if (key == "seed") cfg.seed = to_u64(key, value);
            else if (key == "history_depth") cfg.history_depth = to_size(key, value);
            else if (key == "threads") cfg.threads = to_size(key, value);
            else if (key == "output_dir") cfg.output_dir = value;
            else fail("unknown key '" + key + "' in section [run]");
        } else if (section == "data") {
            if (key == "source") cfg.data.source = value;
            else if (key == "samples") cfg.data.samples = to_size(key, value);
            else if (key == "dim") cfg.data.dim = to_size(key, value);
            else if (key == "classes") cfg.data.classes = to_size(key, value);
            else if (key == "spread") cfg.data.spread = to_double(key, value);
            else if (key == "test_fraction") cfg.data.test_fraction = to_double(key, value);
            else if (key == "train_images") cfg.data.train_images = value;
            else if (key == "train_labels") cfg.data.train_labels = value;
            else if (key == "test_images") cfg.data.test_images = value;
            else if (key == "test_labels") cfg.data.test_labels = value;
            else if (key == "limit") cfg.data.limit = to_size(key, value);
            else if (key == "center") cfg.data.center = to_bool(key, value);
            else if (key == "classes_per_client") cfg.data.classes_per_client = to_size(key, value);
            else fail("unknown key '" + key + "' in section [data]");
        } else if (section == "model") {
            if (key == "hidden") cfg.hidden = to_size_list(key, value);
            else if (key == "activation") {
                try {
                    cfg.activation = nn::activation_from_name(value);
                } catch (const std::invalid_argument& e) {
                    fail(e.what());
                }
            } else fail("unknown key '" + key + "' in section [model]");
        } else if (section == "optimizer") {
            if (key == "learning_rate") cfg.optimizer.learning_rate = to_double(key, value);
            else if (key == "momentum") cfg.optimizer.momentum = to_double(key, value);
            else if (key == "weight_decay") cfg.optimizer.weight_decay = to_double(key, value);
            else if (key == "local_steps") cfg.optimizer.local_steps = to_size(key, value);
            else if (key == "batch_size") cfg.optimizer.batch_size = to_size(key, value);
            else fail("unknown key '" + key + "' in section [optimizer]");
        } else if (section == "evo") {
            if (key == "population") cfg.population = to_size(key, value);
            else if (key == "sigma") cfg.sigma = to_double(key, value);
            else if (key == "alpha") cfg.alpha = to_double(key, value);
            else if (key == "update_momentum") cfg.update_momentum = to_double(key, value);
            else if (key == "partitions") cfg.partitions = to_size(key, value);
            else if (key == "scheme") {
                try {
                    cfg.codec = codec::codec_from_name(value);
                } catch (const std::invalid_argument& e) {
                    fail(e.what());
                }
            } else fail("unknown key '" + key + "' in section [evo]");
        } else if (section == "baseline") {
            if (key == "rho") cfg.sparse_rho = to_double(key, value);
            else if (key == "quant_bits") cfg.quant_bits = static_cast<unsigned>(to_u64(key, value));
            else fail("unknown key '" + key + "' in section [baseline]");
        } else {
            fail("unknown section [" + section + "]");
        }
    }
};

bool population_method(federation::Method m) {
    return m == federation::Method::evofed || m == federation::Method::plain_es;
}

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError("config: " + msg); }

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    Parser parser;
    parser.origin = origin;
    bool saw_method = false;
    std::stringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
        ++parser.line_no;
        const auto comment = raw.find_first_of("#;");
        const std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') parser.fail("unterminated section header '" + line + "'");
            parser.section = trim(line.substr(1, line.size() - 2));
            if (parser.section.empty()) parser.fail("empty section header");
            static const char* known[] = {"run", "data", "model", "optimizer", "evo",
                                          "baseline"};
            if (std::find(std::begin(known), std::end(known), parser.section) ==
                std::end(known)) {
                parser.fail("unknown section [" + parser.section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) parser.fail("expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) parser.fail("empty key");
        if (parser.section.empty()) parser.fail("key '" + key + "' appears before any [section]");
        if (parser.section == "run" && key == "method") saw_method = true;
        parser.handle(key, value);
    }
    if (!saw_method) {
        throw ConfigError(origin + ": missing required key 'method' in section [run]");
    }
    parser.cfg.validate();
    return parser.cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

void ExperimentConfig::validate() const {
    if (rounds == 0) config_fail("rounds must be >= 1");
    if (rounds > 0xFFFFFFFFull) config_fail("rounds exceed the supported range");
    if (clients == 0) config_fail("clients must be >= 1");
    if (!(participation > 0.0) || participation > 1.0) {
        config_fail("participation must be in (0, 1], got " + fmt_double(participation));
    }
    if (eval_interval == 0) config_fail("eval_interval must be >= 1");

    if (data.source == "synth") {
        if (data.dim == 0) config_fail("data dim must be >= 1");
        if (data.classes < 2) config_fail("data classes must be >= 2");
        if (data.samples < data.classes) config_fail("data samples must cover every class");
        if (!(data.spread >= 0.0) || !std::isfinite(data.spread)) {
            config_fail("data spread must be >= 0, got " + fmt_double(data.spread));
        }
        if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
            config_fail("test_fraction must be in (0, 1), got " + fmt_double(data.test_fraction));
        }
    } else if (data.source == "idx") {
        if (data.train_images.empty()) config_fail("train_images path is required for idx data");
        if (data.train_labels.empty()) config_fail("train_labels path is required for idx data");
        if (data.test_images.empty()) config_fail("test_images path is required for idx data");
        if (data.test_labels.empty()) config_fail("test_labels path is required for idx data");
    } else {
        config_fail("data source must be 'synth' or 'idx', got '" + data.source + "'");
    }
    if (data.classes_per_client == 0) config_fail("classes_per_client must be >= 1");

    for (const std::size_t h : hidden) {
        if (h == 0) config_fail("hidden layer widths must be >= 1");
    }
    try {
        optimizer.validate();
    } catch (const std::invalid_argument& e) {
        config_fail(e.what());
    }

    if (population_method(method)) {
        if (population < 2 || population % 2 != 0) {
            config_fail("population must be even and >= 2, got " + std::to_string(population));
        }
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            config_fail("sigma must be > 0, got " + fmt_double(sigma));
        }
        if (!std::isfinite(alpha)) config_fail("alpha must be finite");
        if (update_momentum < 0.0 || update_momentum >= 1.0) {
            config_fail("update_momentum must be in [0, 1), got " + fmt_double(update_momentum));
        }
        if (partitions == 0) config_fail("partitions must be >= 1");
        if (method == federation::Method::plain_es && partitions != 1) {
            config_fail("plain-es requires partitions = 1");
        }
        if (population > 0xFFFF) config_fail("population exceeds the wire range (65535)");
        if (partitions > 0xFFFF) config_fail("partitions exceed the wire range (65535)");
        if (codec.scheme == codec::Scheme::topk && codec.param > population) {
            config_fail("topk keep count exceeds the population");
        }
        if (codec.scheme == codec::Scheme::rank && codec.param > population) {
            config_fail("rank group count exceeds the population");
        }
        if (codec.scheme == codec::Scheme::quant && codec.param > 16) {
            config_fail("quantizer bit width must be in [1, 16]");
        }
    }
    if (method == federation::Method::fed_sparse && !(sparse_rho >= 0.0 && sparse_rho < 1.0)) {
        config_fail("rho must be in [0, 1), got " + fmt_double(sparse_rho));
    }
    if (method == federation::Method::fed_quant && (quant_bits < 1 || quant_bits > 16)) {
        config_fail("quant_bits must be in [1, 16], got " + std::to_string(quant_bits));
    }
}

std::string ExperimentConfig::resolved_output_dir() const {
    if (!output_dir.empty()) return output_dir;
    return std::string("runs/") + federation::method_name(method);
}

federation::RunSpec ExperimentConfig::build() const {
    validate();
    federation::RunSpec spec;
    spec.method = method;
    spec.seed = seed;
    spec.clients = clients;
    spec.rounds = rounds;
    spec.participation = participation;
    spec.eval_interval = eval_interval;
    spec.history_depth = history_depth;
    spec.threads = threads;
    spec.optimizer = optimizer;
    spec.population = population;
    spec.sigma = sigma;
    spec.alpha = alpha;
    spec.partitions = partitions;
    spec.codec = codec;
    spec.update_momentum = update_momentum;
    spec.sparse_rho = sparse_rho;
    spec.quant_bits = quant_bits;

    if (data.source == "synth") {
        const datasets::Dataset all =
            datasets::synth_blobs(detrng::tagged_seed(seed, detrng::StreamTag::data), data.samples,
                                  data.dim, data.classes, data.spread);
        datasets::SplitResult split = datasets::split_holdout(
            all, data.test_fraction,
            detrng::mix_seed(detrng::tagged_seed(seed, detrng::StreamTag::data), 1));
        spec.train = std::move(split.train);
        spec.test = std::move(split.test);
    } else {
        spec.train = datasets::load_idx(data.train_images, data.train_labels);
        spec.test = datasets::load_idx(data.test_images, data.test_labels);
        if (spec.test.feature_dim != spec.train.feature_dim) {
            config_fail("train and test image dimensions differ");
        }
        const std::size_t classes = std::max(spec.train.classes, spec.test.classes);
        spec.train.classes = classes;
        spec.test.classes = classes;
        if (data.limit > 0 && data.limit < spec.train.size()) {
            spec.train.labels.resize(data.limit);
            spec.train.inputs.resize(data.limit * spec.train.feature_dim);
        }
        if (data.center) {
            std::vector<double> mean(spec.train.feature_dim, 0.0);
            for (std::size_t i = 0; i < spec.train.size(); ++i) {
                for (std::size_t j = 0; j < spec.train.feature_dim; ++j) {
                    mean[j] += spec.train.inputs[i * spec.train.feature_dim + j];
                }
            }
            for (double& m : mean) m /= double(spec.train.size());
            for (std::size_t i = 0; i < spec.train.size(); ++i) {
                for (std::size_t j = 0; j < spec.train.feature_dim; ++j) {
                    spec.train.inputs[i * spec.train.feature_dim + j] -= mean[j];
                }
            }
            for (std::size_t i = 0; i < spec.test.size(); ++i) {
                for (std::size_t j = 0; j < spec.test.feature_dim; ++j) {
                    spec.test.inputs[i * spec.test.feature_dim + j] -= mean[j];
                }
            }
        }
    }
    spec.plan = datasets::noniid_split(spec.train, clients, data.classes_per_client,
                                       detrng::mix_seed(seed, 0x5ca1ab1e));
    spec.arch = nn::make_mlp(spec.train.feature_dim, hidden, spec.train.classes, activation);
    return spec;
}

std::filesystem::path output_root(const std::string& override_root) {
    if (!override_root.empty()) return override_root;
    if (const char* env = std::getenv("EVOFED_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
        return env;
    }
    return std::filesystem::current_path();
}

std::string rounds_csv_text(const std::vector<federation::RoundRecord>& records,
                            bool include_wall) {
    std::string out = "t,accuracy,loss,uplink_bytes_total,downlink_bytes_total";
    if (include_wall) out += ",wall_ms";
    out += "\n";
    for (const auto& r : records) {
        out += std::to_string(r.round);
        out += ',';
        if (r.evaluated) out += fmt_double(r.accuracy);
        out += ',';
        if (r.evaluated) out += fmt_double(r.train_loss);
        out += ',';
        out += std::to_string(r.uplink_bytes);
        out += ',';
        out += std::to_string(r.downlink_bytes);
        if (include_wall) {
            out += ',';
            out += fmt_double(r.wall_ms);
        }
        out += '\n';
    }
    return out;
}

namespace {

json config_json(const ExperimentConfig& cfg) {
    json j;
    j["method"] = federation::method_name(cfg.method);
    j["rounds"] = cfg.rounds;
    j["clients"] = cfg.clients;
    j["participation"] = cfg.participation;
    j["eval_interval"] = cfg.eval_interval;
    j["seed"] = cfg.seed;
    j["history_depth"] = cfg.history_depth;
    j["data"] = {{"source", cfg.data.source},
                 {"classes_per_client", cfg.data.classes_per_client},
                 {"center", cfg.data.center}};
    if (cfg.data.source == "synth") {
        j["data"]["samples"] = cfg.data.samples;
        j["data"]["dim"] = cfg.data.dim;
        j["data"]["classes"] = cfg.data.classes;
        j["data"]["spread"] = cfg.data.spread;
        j["data"]["test_fraction"] = cfg.data.test_fraction;
    } else {
        j["data"]["train_images"] = cfg.data.train_images;
        j["data"]["train_labels"] = cfg.data.train_labels;
        j["data"]["test_images"] = cfg.data.test_images;
        j["data"]["test_labels"] = cfg.data.test_labels;
        j["data"]["limit"] = cfg.data.limit;
    }
    j["model"] = {{"hidden", cfg.hidden}, {"activation", nn::activation_name(cfg.activation)}};
    j["optimizer"] = {{"learning_rate", cfg.optimizer.learning_rate},
                      {"momentum", cfg.optimizer.momentum},
                      {"weight_decay", cfg.optimizer.weight_decay},
                      {"local_steps", cfg.optimizer.local_steps},
                      {"batch_size", cfg.optimizer.batch_size}};
    if (population_method(cfg.method)) {
        j["evo"] = {{"population", cfg.population},
                    {"sigma", cfg.sigma},
                    {"alpha", cfg.alpha},
                    {"update_momentum", cfg.update_momentum},
                    {"partitions", cfg.partitions},
                    {"scheme", codec::codec_name(cfg.codec)}};
    }
    if (cfg.method == federation::Method::fed_sparse) j["baseline"]["rho"] = cfg.sparse_rho;
    if (cfg.method == federation::Method::fed_quant) j["baseline"]["quant_bits"] = cfg.quant_bits;
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed while writing " + path.string());
}

}  // namespace

RunOutput run(const ExperimentConfig& cfg, const std::string& root_override) {
    const federation::RunSpec spec = cfg.build();
    RunOutput out;
    out.result = federation::run_rounds(spec);

    bool any_eval = false;
    for (const auto& r : out.result.records) {
        out.total_uplink_bytes += r.uplink_bytes;
        out.total_downlink_bytes += r.downlink_bytes;
        if (r.evaluated) {
            any_eval = true;
            out.final_accuracy = r.accuracy;
            out.max_accuracy = std::max(out.max_accuracy, r.accuracy);
        }
    }

    out.paths.dir = output_root(root_override) / cfg.resolved_output_dir();
    std::filesystem::create_directories(out.paths.dir);
    out.paths.rounds_csv = out.paths.dir / "rounds.csv";
    out.paths.summary_json = out.paths.dir / "summary.json";

    write_text_file(out.paths.rounds_csv, rounds_csv_text(out.result.records));

    json summary;
    summary["method"] = federation::method_name(cfg.method);
    summary["rounds"] = cfg.rounds;
    summary["clients"] = cfg.clients;
    summary["model_params"] = spec.arch.param_count();
    summary["final_accuracy"] = any_eval ? json(out.final_accuracy) : json(nullptr);
    summary["max_accuracy"] = any_eval ? json(out.max_accuracy) : json(nullptr);
    summary["total_uplink_bytes"] = out.total_uplink_bytes;
    summary["total_downlink_bytes"] = out.total_downlink_bytes;
    // Cumulative uplink bytes when accuracy first reaches each threshold.
    json thresholds = json::object();
    for (const double threshold : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95}) {
        std::uint64_t cumulative = 0;
        json reached = nullptr;
        for (const auto& r : out.result.records) {
            cumulative += r.uplink_bytes;
            if (r.evaluated && r.accuracy >= threshold) {
                reached = cumulative;
                break;
            }
        }
        char key[8];
        std::snprintf(key, sizeof key, "%.2f", threshold);
        thresholds[key] = reached;
    }
    summary["uplink_bytes_to_accuracy"] = thresholds;
    summary["config"] = config_json(cfg);
#ifdef EVOFED_VERSION
    summary["code_version"] = EVOFED_VERSION;
#else
    summary["code_version"] = "unknown";
#endif
    write_text_file(out.paths.summary_json, summary.dump(2) + "\n");
    return out;
}

std::filesystem::path compare(const std::vector<std::string>& run_dirs,
                              const std::string& out_path) {
    if (run_dirs.size() < 2) {
        throw ConfigError("compare needs at least 2 run directories, got " +
                          std::to_string(run_dirs.size()));
    }
    std::string out = "method,round,accuracy,cum_uplink_bytes,cum_downlink_bytes\n";
    for (const std::string& dir : run_dirs) {
        const std::filesystem::path summary_path = std::filesystem::path(dir) / "summary.json";
        std::ifstream summary_in(summary_path);
        if (!summary_in) {
            throw std::runtime_error("missing summary.json in run directory: " + dir);
        }
        json summary;
        try {
            summary_in >> summary;
        } catch (const json::exception& e) {
            throw std::runtime_error("unreadable summary.json in " + dir + ": " + e.what());
        }
        if (!summary.contains("method") || !summary["method"].is_string()) {
            throw std::runtime_error("summary.json in " + dir + " is missing 'method'");
        }
        const std::string method = summary["method"].get<std::string>();

        const std::filesystem::path csv_path = std::filesystem::path(dir) / "rounds.csv";
        std::ifstream csv(csv_path);
        if (!csv) throw std::runtime_error("missing rounds.csv in run directory: " + dir);
        std::string line;
        if (!std::getline(csv, line)) {
            throw std::runtime_error("empty rounds.csv in run directory: " + dir);
        }
        std::uint64_t cum_up = 0;
        std::uint64_t cum_down = 0;
        std::size_t line_no = 1;
        while (std::getline(csv, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            std::vector<std::string> cells;
            std::stringstream row(line);
            std::string cell;
            while (std::getline(row, cell, ',')) cells.push_back(cell);
            if (cells.size() < 5) {
                throw std::runtime_error(csv_path.string() + ":" + std::to_string(line_no) +
                                         ": expected at least 5 columns");
            }
            try {
                cum_up += std::stoull(cells[3]);
                cum_down += std::stoull(cells[4]);
                if (!cells[1].empty()) {
                    out += method + "," + cells[0] + "," + cells[1] + "," +
                           std::to_string(cum_up) + "," + std::to_string(cum_down) + "\n";
                }
            } catch (const std::exception&) {
                throw std::runtime_error(csv_path.string() + ":" + std::to_string(line_no) +
                                         ": unparseable row");
            }
        }
    }
    std::filesystem::path target(out_path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    write_text_file(target, out);
    return std::filesystem::absolute(target);
}

AccountingReport verify_accounting(const ExperimentConfig& cfg) {
    cfg.validate();
    std::size_t input_dim = 0;
    std::size_t classes = 0;
    if (cfg.data.source == "synth") {
        input_dim = cfg.data.dim;
        classes = cfg.data.classes;
    } else {
        input_dim = datasets::idx_image_info(cfg.data.train_images).feature_dim;
        classes = datasets::idx_label_classes(cfg.data.train_labels);
    }
    const nn::ArchSpec arch = nn::make_mlp(input_dim, cfg.hidden, classes, cfg.activation);

    AccountingReport rep;
    rep.model_params = arch.param_count();
    rep.model_bytes = 4ull * rep.model_params;
    switch (cfg.method) {
        case federation::Method::evofed:
        case federation::Method::plain_es:
            rep.uplink_bytes = codec::byte_size(cfg.codec, cfg.population,
                                                cfg.method == federation::Method::plain_es
                                                    ? 1
                                                    : cfg.partitions);
            break;
        case federation::Method::fedavg: rep.uplink_bytes = rep.model_bytes; break;
        case federation::Method::fed_sparse: {
            const auto keep = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::ceil((1.0 - cfg.sparse_rho) * double(rep.model_params))),
                1, rep.model_params);
            rep.uplink_bytes = std::uint64_t(keep) * 8ull;
            break;
        }
        case federation::Method::fed_quant:
            rep.uplink_bytes = (std::uint64_t(rep.model_params) * cfg.quant_bits + 7) / 8 +
                               8ull * arch.layers.size();
            break;
    }
    rep.compression = 1.0 - double(rep.uplink_bytes) / double(rep.model_bytes);
    rep.degenerate = !(rep.compression > 0.0);

    // Pinned reference configurations and their published compression rates.
    struct Reference {
        const char* label;
        std::uint64_t params;
        std::size_t population;
        std::size_t partitions;
        double required;
    };
    const Reference refs[] = {
        {"small model, N=128, K=1, raw32", 11000, 128, 1, 0.988},
        {"large model, N=32, K=50, raw32", 2300000, 32, 50, 0.997},
    };
    rep.reference_rates_ok = true;
    std::string ref_text;
    for (const Reference& ref : refs) {
        const std::uint64_t bytes =
            codec::byte_size(codec::CodecSpec::raw32(), ref.population, ref.partitions);
        const double rate = 1.0 - double(bytes) / double(4 * ref.params);
        const bool ok = rate >= ref.required;
        rep.reference_rates_ok = rep.reference_rates_ok && ok;
        char line[160];
        std::snprintf(line, sizeof line,
                      "  %-32s %8llu B/round vs %10llu B model  -> %.4f%% saved (need %.2f%%) %s\n",
                      ref.label, (unsigned long long)bytes, (unsigned long long)(4 * ref.params),
                      100.0 * rate, 100.0 * ref.required, ok ? "ok" : "FAIL");
        ref_text += line;
    }

    std::string text;
    text += "communication accounting for method '" +
            std::string(federation::method_name(cfg.method)) + "'\n";
    text += "  model parameters:          " + std::to_string(rep.model_params) + "\n";
    text += "  full model upload:         " + std::to_string(rep.model_bytes) + " bytes\n";
    text += "  per-client uplink/round:   " + std::to_string(rep.uplink_bytes) + " bytes\n";
    char comp_line[96];
    std::snprintf(comp_line, sizeof comp_line, "  compression:               %.4f%%%s\n",
                  100.0 * rep.compression,
                  rep.degenerate ? "  (degenerate: no saving at this size)" : "");
    text += comp_line;
    text += "reference rates:\n" + ref_text;
    rep.text = text;
    return rep;
}

}  // namespace evofed::experiment
