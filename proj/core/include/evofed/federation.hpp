#pragma once

// The round engine: M simulated clients and a server walk through T rounds of
// local training, fitness encoding, weighted aggregation, broadcast, and
// synchronized decode — with partial participation, fitness-history catch-up,
// model-averaging equivalence checks, and exact byte accounting.

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "evofed/datasets.hpp"
#include "evofed/detrng.hpp"
#include "evofed/fitness_codec.hpp"
#include "evofed/nn.hpp"
#include "evofed/pbge.hpp"

namespace evofed::federation {

struct ClientState {
    std::uint32_t id = 0;
    nn::ModelParams model;
    datasets::Dataset shard;
    nn::OptimizerCfg optimizer;
    detrng::SeedSchedule schedule;  // shared with the server
    std::uint64_t next_round = 0;   // first round this model is ready to run
    pbge::Vec velocity;             // momentum buffer for the decoded update
};

// Server-aggregated fitness for one round.
struct GlobalFitness {
    std::uint32_t round = 0;
    std::size_t population = 0;  // N
    std::size_t partitions = 0;  // K
    std::uint64_t total_weight = 0;
    pbge::Vec values;  // N*K, member-major like FitnessMatrix
};

// Ring of the last `depth` rounds of global fitness, for absent clients to
// replay on rejoining. Rounds must stay contiguous.
class FitnessHistory {
  public:
    explicit FitnessHistory(std::size_t depth) : depth_(depth) {}

    void push(GlobalFitness f);
    const GlobalFitness* find(std::uint64_t round) const;

    bool empty() const { return ring_.empty(); }
    std::size_t size() const { return ring_.size(); }
    std::size_t depth() const { return depth_; }
    std::uint64_t oldest_round() const { return ring_.front().round; }
    std::uint64_t newest_round() const { return ring_.back().round; }

  private:
    std::size_t depth_;
    std::deque<GlobalFitness> ring_;
};

// Everything all nodes must agree on for encode/decode to stay synchronized.
struct ProtocolParams {
    detrng::SeedSchedule schedule;
    std::size_t population = 128;  // N, even
    double sigma = 0.27;
    double alpha = 0.0427;
    pbge::PartitionLayout layout;
    codec::CodecSpec codec;
    double update_momentum = 0.0;  // optional momentum on the decoded update
};

// The round-t perturbation population every node regenerates.
detrng::PerturbationSet round_set(const ProtocolParams& proto, std::uint64_t round,
                                  std::size_t dim);

// Seed for client j's local minibatch schedule in round t.
std::uint64_t client_train_seed(const detrng::SeedSchedule& schedule,
                                std::uint64_t round, std::uint32_t client_id);

// The local BP target theta'. Shared by every method so comparisons start
// from bit-identical local training.
nn::ModelParams client_local_model(const ClientState& client, std::uint64_t round);

// Samples consumed by one local round: min(E * batch, shard size).
std::uint32_t round_sample_count(const ClientState& client);

// Local train -> encode -> compress. The client's model is not advanced;
// that happens in apply_broadcast. Throws if the client is desynchronized
// (wrong round or model hash != expected_model_hash).
codec::EncodedFitness client_round(const ClientState& client, std::uint64_t round,
                                   const ProtocolParams& proto,
                                   std::uint64_t expected_model_hash);

// Weighted mean of the decoded messages: F = sum_j (b_j/W) f_j in the given
// message order. Requires consistent round and dims.
GlobalFitness aggregate(std::span<const codec::EncodedFitness> messages);

// Decode the aggregated fitness against the regenerated round-t population
// and apply the update (through `velocity` when update_momentum is on).
// Every node calling this on the same inputs produces bit-identical models.
nn::ModelParams apply_broadcast(const nn::ModelParams& model, const GlobalFitness& fitness,
                                std::uint64_t round, const ProtocolParams& proto,
                                pbge::Vec* velocity = nullptr);

// Max abs deviation between (aggregate -> decode) and the sample-weighted
// average of per-client decodes. Requires raw32 messages.
double fedavg_equivalence_check(const nn::ModelParams& theta,
                                std::span<const codec::EncodedFitness> messages,
                                std::uint64_t round, const ProtocolParams& proto);

// Replay the broadcasts of rounds [from_round, to_round) from history onto a
// stale model — bit-identical to having applied them live. Errors name the
// first missing round.
nn::ModelParams catch_up(const nn::ModelParams& stale, std::uint64_t from_round,
                         std::uint64_t to_round, const FitnessHistory& history,
                         const ProtocolParams& proto, pbge::Vec* velocity = nullptr);

// Wire format: header {round u32, client-id u32, scheme u8, N u16, K u16,
// weight u32}, little-endian, then the codec payload. Scheme parameters
// (k/Q/R) travel out of band in the run configuration.
inline constexpr std::size_t kWireHeaderBytes = 17;

std::vector<std::uint8_t> serialize_message(std::uint32_t client_id,
                                            const codec::EncodedFitness& fitness);

struct WireMessage {
    std::uint32_t client_id = 0;
    codec::EncodedFitness fitness;
};

WireMessage parse_message(std::span<const std::uint8_t> bytes,
                          const codec::CodecSpec& expected);

enum class Method { evofed, fedavg, fed_sparse, fed_quant, plain_es };

Method method_from_name(const std::string& name);
const char* method_name(Method method);

// A fully materialized run description (no file or CLI concerns).
struct RunSpec {
    Method method = Method::evofed;
    datasets::Dataset train;
    datasets::Dataset test;
    datasets::ShardPlan plan;
    nn::ArchSpec arch;
    nn::OptimizerCfg optimizer;
    std::uint64_t seed = 42;
    std::size_t clients = 5;       // M
    std::uint64_t rounds = 100;    // T
    double participation = 1.0;    // p
    std::uint64_t eval_interval = 10;
    std::size_t history_depth = 10;  // H
    std::size_t threads = 1;         // 0 = hardware concurrency
    // Population update parameters (evofed / plain-es).
    std::size_t population = 128;  // N
    double sigma = 0.27;
    double alpha = 0.0427;
    std::size_t partitions = 1;  // K
    codec::CodecSpec codec;
    double update_momentum = 0.0;
    // Baseline knobs.
    double sparse_rho = 0.988;  // fed-sparse compression rate
    unsigned quant_bits = 8;    // fed-quant bit width

    void validate() const;
};

struct RoundRecord {
    std::uint64_t round = 0;
    std::size_t participants = 0;
    std::uint64_t uplink_bytes = 0;    // summed over participants, payload only
    std::uint64_t downlink_bytes = 0;  // broadcast + catch-up traffic
    bool evaluated = false;
    double accuracy = 0.0;    // valid when evaluated
    double train_loss = 0.0;  // valid when evaluated
    double wall_ms = 0.0;
};

struct RunResult {
    std::vector<RoundRecord> records;
    nn::ModelParams final_model;
    std::vector<std::uint64_t> client_model_hashes;  // all equal final model's hash
};

// Executes T rounds of the configured method. Deterministic: records (minus
// wall_ms) depend only on the RunSpec, never on thread count.
RunResult run_rounds(const RunSpec& spec);

}  // namespace evofed::federation
