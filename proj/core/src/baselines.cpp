#include "evofed/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "parallel_util.hpp"

namespace evofed::baselines {
namespace {

using federation::ClientState;

// Locally trained models of all participants, in participant order.
std::vector<nn::ModelParams> local_models(
    std::span<const ClientState* const> participants, std::uint64_t round,
    std::size_t threads) {
    std::vector<nn::ModelParams> locals(participants.size());
    internal::parallel_for(participants.size(), threads, [&](std::size_t i) {
        locals[i] = federation::client_local_model(*participants[i], round);
    });
    return locals;
}

// Sample-count coefficients b_j / W, in participant order.
std::vector<double> weight_coefs(std::span<const ClientState* const> participants) {
    std::uint64_t total = 0;
    std::vector<double> coefs(participants.size());
    for (const ClientState* c : participants) total += federation::round_sample_count(*c);
    for (std::size_t j = 0; j < participants.size(); ++j) {
        coefs[j] = double(federation::round_sample_count(*participants[j])) / double(total);
    }
    return coefs;
}

void check_participants(std::span<const ClientState* const> participants,
                        const nn::ModelParams& server) {
    if (participants.empty()) throw std::invalid_argument("round requires >= 1 participant");
    for (const ClientState* c : participants) {
        if (c->model.values.size() != server.values.size()) {
            throw std::invalid_argument("participant model size does not match the server");
        }
    }
}

}  // namespace

BaselineRound fedavg_round(std::span<const ClientState* const> participants,
                           const nn::ModelParams& server, std::uint64_t round,
                           std::size_t threads) {
    check_participants(participants, server);
    const std::vector<nn::ModelParams> locals = local_models(participants, round, threads);
    const std::vector<double> coefs = weight_coefs(participants);

    nn::ModelParams next = server;
    std::fill(next.values.begin(), next.values.end(), 0.0);
    for (std::size_t j = 0; j < locals.size(); ++j) {
        for (std::size_t d = 0; d < next.values.size(); ++d) {
            next.values[d] += coefs[j] * locals[j].values[d];
        }
    }
    return {std::move(next), 4ull * server.values.size()};
}

BaselineRound sparse_fedavg_round(std::span<const ClientState* const> participants,
                                  const nn::ModelParams& server, std::uint64_t round, double rho,
                                  std::size_t threads) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw std::invalid_argument("sparse compression rate must be in [0, 1)");
    }
    check_participants(participants, server);
    const std::size_t dim = server.values.size();
    const auto keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil((1.0 - rho) * double(dim))), 1, dim);
    const std::vector<nn::ModelParams> locals = local_models(participants, round, threads);
    const std::vector<double> coefs = weight_coefs(participants);

    nn::ModelParams next = server;
    std::vector<double> update(dim);
    std::vector<std::size_t> order(dim);
    for (std::size_t j = 0; j < locals.size(); ++j) {
        for (std::size_t d = 0; d < dim; ++d) update[d] = locals[j].values[d] - server.values[d];
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (keep < dim) {
            // Largest |update| first; ties go to the lower index.
            std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                              [&](std::size_t a, std::size_t b) {
                                  const double ma = std::abs(update[a]);
                                  const double mb = std::abs(update[b]);
                                  if (ma != mb) return ma > mb;
                                  return a < b;
                              });
        }
        // Accumulate the kept entries in ascending index order so the sum has
        // one fixed association regardless of selection internals.
        std::sort(order.begin(), order.begin() + keep);
        for (std::size_t p = 0; p < keep; ++p) {
            const std::size_t d = order[p];
            next.values[d] += coefs[j] * update[d];
        }
    }
    return {std::move(next), std::uint64_t(keep) * 8ull};
}

BaselineRound quant_fedavg_round(std::span<const ClientState* const> participants,
                                 const nn::ModelParams& server, std::uint64_t round, unsigned bits,
                                 std::size_t threads) {
    if (bits < 1 || bits > 16) {
        throw std::invalid_argument("quantizer bit width must be in [1, 16]");
    }
    check_participants(participants, server);
    const std::size_t dim = server.values.size();
    const std::vector<nn::ModelParams> locals = local_models(participants, round, threads);
    const std::vector<double> coefs = weight_coefs(participants);

    // Per-layer quantization blocks: each dense layer's weights+biases form
    // one block with its own float32 min/max endpoints.
    std::vector<std::size_t> bounds{0};
    for (const nn::DenseLayer& layer : server.arch.layers) {
        bounds.push_back(bounds.back() + layer.in * layer.out + layer.out);
    }
    const std::uint64_t levels = 1ull << bits;

    nn::ModelParams next = server;
    std::vector<double> update(dim);
    for (std::size_t j = 0; j < locals.size(); ++j) {
        for (std::size_t d = 0; d < dim; ++d) update[d] = locals[j].values[d] - server.values[d];
        for (std::size_t l = 0; l + 1 < bounds.size(); ++l) {
            const std::size_t begin = bounds[l];
            const std::size_t end = bounds[l + 1];
            double lo = update[begin];
            double hi = update[begin];
            for (std::size_t d = begin; d < end; ++d) {
                lo = std::min(lo, update[d]);
                hi = std::max(hi, update[d]);
            }
            // Endpoints travel as float32, so codes are computed against the
            // cast values — matching what a receiver can reconstruct.
            const double lo32 = double(float(lo));
            const double hi32 = double(float(hi));
            const double span = hi32 - lo32;
            const double step = span > 0.0 ? span / double(levels - 1) : 0.0;
            for (std::size_t d = begin; d < end; ++d) {
                std::uint64_t code = 0;
                if (span > 0.0) {
                    const double scaled = (update[d] - lo32) / span * double(levels - 1);
                    code = std::uint64_t(std::clamp<long long>(std::llround(scaled), 0,
                                                               (long long)(levels - 1)));
                }
                const double dequantized = lo32 + double(code) * step;
                next.values[d] += coefs[j] * dequantized;
            }
        }
    }
    const std::uint64_t payload = (std::uint64_t(dim) * bits + 7) / 8 +
                                  8ull * server.arch.layers.size();
    return {std::move(next), payload};
}

codec::EncodedFitness plain_es_client_round(const ClientState& client, std::uint64_t round,
                                            const federation::ProtocolParams& proto,
                                            std::uint64_t expected_model_hash) {
    if (client.next_round != round) {
        throw std::runtime_error("client " + std::to_string(client.id) + " is at round " +
                                 std::to_string(client.next_round) + ", cannot run round " +
                                 std::to_string(round));
    }
    if (nn::model_hash(client.model) != expected_model_hash) {
        throw std::runtime_error("client " + std::to_string(client.id) +
                                 " is desynchronized: model hash differs from the round " +
                                 std::to_string(round) + " consensus model");
    }
    if (proto.layout.partition_count() != 1) {
        throw std::invalid_argument("plain ES requires a single partition");
    }
    const std::size_t dim = client.model.values.size();
    if (proto.layout.dim() != dim) {
        throw std::invalid_argument("partition layout does not cover the model");
    }

    // Every candidate is scored on the same seeded round batch.
    const nn::MinibatchSchedule schedule(
        client.shard.size(), client.optimizer.batch_size,
        federation::client_train_seed(client.schedule, round, client.id));
    const std::vector<std::size_t> rows = schedule.batch_indices(0);
    const nn::Batch batch = nn::make_batch(client.shard, rows);

    const auto set = federation::round_set(proto, round, dim);
    const std::size_t population = proto.population;
    pbge::FitnessMatrix fm;
    fm.round = static_cast<std::uint32_t>(round);
    fm.population = population;
    fm.partitions = 1;
    fm.weight = static_cast<std::uint32_t>(rows.size());
    fm.values.assign(population, 0.0);

    nn::ModelParams candidate = client.model;
    pbge::Vec eps(dim);
    for (std::size_t pair = 0; pair < population / 2; ++pair) {
        detrng::perturbation_pair(set, pair, eps);
        for (std::size_t d = 0; d < dim; ++d) {
            candidate.values[d] = client.model.values[d] + set.sigma * eps[d];
        }
        fm.values[2 * pair] = -nn::loss_only(candidate, batch);
        for (std::size_t d = 0; d < dim; ++d) {
            candidate.values[d] = client.model.values[d] - set.sigma * eps[d];
        }
        fm.values[2 * pair + 1] = -nn::loss_only(candidate, batch);
    }
    double mean = 0.0;
    for (const double v : fm.values) mean += v;
    mean /= double(population);
    for (double& v : fm.values) v -= mean;

    return codec::encode_fitness(fm, proto.codec);
}

BaselineRound plain_es_round(std::span<const ClientState* const> participants,
                             const nn::ModelParams& server, std::uint64_t round,
                             const federation::ProtocolParams& proto, std::size_t threads) {
    check_participants(participants, server);
    const std::uint64_t expected_hash = nn::model_hash(server);
    std::vector<codec::EncodedFitness> messages(participants.size());
    internal::parallel_for(participants.size(), threads, [&](std::size_t i) {
        messages[i] = plain_es_client_round(*participants[i], round, proto, expected_hash);
    });
    const federation::GlobalFitness global = federation::aggregate(messages);
    BaselineRound out;
    out.model = federation::apply_broadcast(server, global, round, proto);
    out.uplink_bytes_per_client = codec::byte_size(proto.codec, proto.population, 1);
    return out;
}

std::vector<double> es_step(const std::vector<double>& point,
                            const std::function<double(const std::vector<double>&)>& objective,
                            std::size_t population, double sigma, double alpha,
                            std::uint64_t round_seed) {
    if (point.empty()) throw std::invalid_argument("point must be non-empty");
    if (!objective) throw std::invalid_argument("objective must be callable");
    const auto set = detrng::make_set(round_seed, population, point.size(), sigma);

    std::vector<double> fitness(population, 0.0);
    std::vector<double> candidate(point.size());
    pbge::Vec eps(point.size());
    for (std::size_t pair = 0; pair < population / 2; ++pair) {
        detrng::perturbation_pair(set, pair, eps);
        for (std::size_t d = 0; d < point.size(); ++d) candidate[d] = point[d] + sigma * eps[d];
        fitness[2 * pair] = -objective(candidate);
        for (std::size_t d = 0; d < point.size(); ++d) candidate[d] = point[d] - sigma * eps[d];
        fitness[2 * pair + 1] = -objective(candidate);
    }
    double mean = 0.0;
    for (const double v : fitness) mean += v;
    mean /= double(population);
    for (double& v : fitness) v -= mean;

    const pbge::PartitionLayout layout = pbge::make_layout(point.size(), 1);
    const pbge::Vec update = pbge::decode_update(fitness, population, set, layout, alpha);
    std::vector<double> next = point;
    for (std::size_t d = 0; d < next.size(); ++d) next[d] += update[d];
    return next;
}

}  // namespace evofed::baselines
