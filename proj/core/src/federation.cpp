#include "evofed/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <utility>

#include "evofed/baselines.hpp"
#include "parallel_util.hpp"

namespace evofed::federation {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
}

bool population_method(Method m) { return m == Method::evofed || m == Method::plain_es; }

// Model bytes for a full state download: 4 bytes per parameter, doubled when
// a momentum buffer must travel along.
std::uint64_t full_download_bytes(std::size_t dim, const ProtocolParams& proto) {
    return 4ull * dim * (proto.update_momentum != 0.0 ? 2 : 1);
}

}  // namespace

void FitnessHistory::push(GlobalFitness f) {
    if (!ring_.empty() && f.round != ring_.back().round + 1) {
        throw std::invalid_argument("fitness history must stay contiguous: got round " +
                                    std::to_string(f.round) + " after round " +
                                    std::to_string(ring_.back().round));
    }
    ring_.push_back(std::move(f));
    while (ring_.size() > depth_) ring_.pop_front();
}

const GlobalFitness* FitnessHistory::find(std::uint64_t round) const {
    if (ring_.empty() || round < ring_.front().round || round > ring_.back().round) return nullptr;
    return &ring_[round - ring_.front().round];
}

detrng::PerturbationSet round_set(const ProtocolParams& proto, std::uint64_t round,
                                  std::size_t dim) {
    return detrng::make_set(detrng::derive_round_seed(proto.schedule, round), proto.population,
                            dim, proto.sigma);
}

std::uint64_t client_train_seed(const detrng::SeedSchedule& schedule, std::uint64_t round,
                                std::uint32_t client_id) {
    return detrng::mix_seed(detrng::derive_round_seed(schedule, round), client_id);
}

nn::ModelParams client_local_model(const ClientState& client, std::uint64_t round) {
    return nn::local_train(client.model, client.shard, client.optimizer,
                           client_train_seed(client.schedule, round, client.id));
}

std::uint32_t round_sample_count(const ClientState& client) {
    const std::uint64_t want = std::uint64_t(client.optimizer.local_steps) *
                               std::uint64_t(client.optimizer.batch_size);
    const std::uint64_t used = std::min<std::uint64_t>(want, client.shard.size());
    return static_cast<std::uint32_t>(std::clamp<std::uint64_t>(used, 1, 0xFFFFFFFFull));
}

codec::EncodedFitness client_round(const ClientState& client, std::uint64_t round,
                                   const ProtocolParams& proto,
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
    const nn::ModelParams trained = client_local_model(client, round);
    const auto set = round_set(proto, round, client.model.values.size());
    const pbge::FitnessMatrix fm =
        pbge::encode(client.model, trained, set, proto.layout, round_sample_count(client),
                     static_cast<std::uint32_t>(round));
    return codec::encode_fitness(fm, proto.codec);
}

GlobalFitness aggregate(std::span<const codec::EncodedFitness> messages) {
    if (messages.empty()) throw std::invalid_argument("aggregate requires at least one message");
    const auto& head = messages.front();
    std::uint64_t total_weight = 0;
    for (const auto& m : messages) {
        if (m.round != head.round) {
            throw std::runtime_error("aggregate saw rounds " + std::to_string(head.round) +
                                     " and " + std::to_string(m.round) + " in one batch");
        }
        if (m.population != head.population || m.partitions != head.partitions) {
            throw std::runtime_error("aggregate saw mismatched fitness dimensions");
        }
        if (!(m.spec == head.spec)) {
            throw std::runtime_error("aggregate saw mismatched fitness codecs");
        }
        if (m.weight == 0) throw std::invalid_argument("message weight must be >= 1");
        total_weight += m.weight;
    }
    GlobalFitness out;
    out.round = head.round;
    out.population = head.population;
    out.partitions = head.partitions;
    out.total_weight = total_weight;
    out.values.assign(std::size_t(head.population) * head.partitions, 0.0);
    // Normalized coefficients keep the single-message case a bitwise identity.
    for (const auto& m : messages) {
        const pbge::FitnessMatrix fm = codec::decode_fitness(m);
        const double coef = double(m.weight) / double(total_weight);
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += coef * fm.values[i];
    }
    return out;
}

nn::ModelParams apply_broadcast(const nn::ModelParams& model, const GlobalFitness& fitness,
                                std::uint64_t round, const ProtocolParams& proto,
                                pbge::Vec* velocity) {
    if (std::uint64_t(fitness.round) != round) {
        throw std::runtime_error("broadcast carries round " + std::to_string(fitness.round) +
                                 " but the node expects round " + std::to_string(round));
    }
    if (fitness.population != proto.population) {
        throw std::invalid_argument("broadcast population " + std::to_string(fitness.population) +
                                    " does not match the protocol population " +
                                    std::to_string(proto.population));
    }
    const std::size_t dim = model.values.size();
    const auto set = round_set(proto, round, dim);
    const pbge::Vec update =
        pbge::decode_update(fitness.values, fitness.population, set, proto.layout, proto.alpha);
    nn::ModelParams next = model;
    if (velocity != nullptr && proto.update_momentum != 0.0) {
        if (velocity->empty()) velocity->assign(dim, 0.0);
        if (velocity->size() != dim) {
            throw std::invalid_argument("velocity buffer size does not match the model");
        }
        for (std::size_t j = 0; j < dim; ++j) {
            (*velocity)[j] = proto.update_momentum * (*velocity)[j] + update[j];
            next.values[j] += (*velocity)[j];
        }
    } else {
        for (std::size_t j = 0; j < dim; ++j) next.values[j] += update[j];
    }
    return next;
}

double fedavg_equivalence_check(const nn::ModelParams& theta,
                                std::span<const codec::EncodedFitness> messages,
                                std::uint64_t round, const ProtocolParams& proto) {
    if (messages.empty()) {
        throw std::invalid_argument("equivalence check requires at least one message");
    }
    for (const auto& m : messages) {
        if (m.spec.scheme != codec::Scheme::raw32) {
            throw std::invalid_argument("equivalence check requires uncompressed (raw32) fitness");
        }
    }
    const GlobalFitness global = aggregate(messages);
    const nn::ModelParams route_a = apply_broadcast(theta, global, round, proto);

    const auto set = round_set(proto, round, theta.values.size());
    pbge::Vec route_b(theta.values.size(), 0.0);
    for (const auto& m : messages) {
        const pbge::FitnessMatrix fm = codec::decode_fitness(m);
        const nn::ModelParams local = pbge::decode(theta, fm, set, proto.layout, proto.alpha);
        const double coef = double(m.weight) / double(global.total_weight);
        for (std::size_t j = 0; j < route_b.size(); ++j) route_b[j] += coef * local.values[j];
    }
    double deviation = 0.0;
    for (std::size_t j = 0; j < route_b.size(); ++j) {
        deviation = std::max(deviation, std::abs(route_a.values[j] - route_b[j]));
    }
    return deviation;
}

nn::ModelParams catch_up(const nn::ModelParams& stale, std::uint64_t from_round,
                         std::uint64_t to_round, const FitnessHistory& history,
                         const ProtocolParams& proto, pbge::Vec* velocity) {
    if (to_round < from_round) {
        throw std::invalid_argument("catch-up target round " + std::to_string(to_round) +
                                    " precedes start round " + std::to_string(from_round));
    }
    nn::ModelParams model = stale;
    for (std::uint64_t r = from_round; r < to_round; ++r) {
        const GlobalFitness* f = history.find(r);
        if (f == nullptr) {
            throw std::runtime_error("fitness history is missing round " + std::to_string(r));
        }
        model = apply_broadcast(model, *f, r, proto, velocity);
    }
    return model;
}

std::vector<std::uint8_t> serialize_message(std::uint32_t client_id,
                                            const codec::EncodedFitness& fitness) {
    std::vector<std::uint8_t> out;
    out.reserve(kWireHeaderBytes + fitness.payload.size());
    put_u32(out, fitness.round);
    put_u32(out, client_id);
    out.push_back(static_cast<std::uint8_t>(fitness.spec.scheme));
    put_u16(out, static_cast<std::uint16_t>(fitness.population));
    put_u16(out, static_cast<std::uint16_t>(fitness.partitions));
    put_u32(out, fitness.weight);
    out.insert(out.end(), fitness.payload.begin(), fitness.payload.end());
    return out;
}

WireMessage parse_message(std::span<const std::uint8_t> bytes, const codec::CodecSpec& expected) {
    if (bytes.size() < kWireHeaderBytes) {
        throw std::runtime_error("wire message is " + std::to_string(bytes.size()) +
                                 " bytes, shorter than the " + std::to_string(kWireHeaderBytes) +
                                 "-byte header");
    }
    WireMessage msg;
    msg.fitness.round = get_u32(bytes.data());
    msg.client_id = get_u32(bytes.data() + 4);
    const std::uint8_t scheme = bytes[8];
    if (scheme != static_cast<std::uint8_t>(expected.scheme)) {
        throw std::runtime_error("wire scheme byte " + std::to_string(scheme) +
                                 " does not match the configured codec " +
                                 codec::codec_name(expected));
    }
    msg.fitness.spec = expected;
    msg.fitness.population = get_u16(bytes.data() + 9);
    msg.fitness.partitions = get_u16(bytes.data() + 11);
    msg.fitness.weight = get_u32(bytes.data() + 13);
    if (msg.fitness.population == 0 || msg.fitness.partitions == 0) {
        throw std::runtime_error("wire message declares an empty fitness matrix");
    }
    if (msg.fitness.weight == 0) {
        throw std::runtime_error("wire message declares zero sample weight");
    }
    const std::size_t want =
        codec::byte_size(expected, msg.fitness.population, msg.fitness.partitions);
    const std::size_t got = bytes.size() - kWireHeaderBytes;
    if (got != want) {
        throw std::runtime_error("wire payload is " + std::to_string(got) + " bytes, expected " +
                                 std::to_string(want) + " for " + codec::codec_name(expected));
    }
    msg.fitness.payload.assign(bytes.begin() + kWireHeaderBytes, bytes.end());
    return msg;
}

Method method_from_name(const std::string& name) {
    if (name == "evofed") return Method::evofed;
    if (name == "fedavg") return Method::fedavg;
    if (name == "fed-sparse") return Method::fed_sparse;
    if (name == "fed-quant") return Method::fed_quant;
    if (name == "plain-es") return Method::plain_es;
    throw std::invalid_argument("unknown method '" + name +
                                "' (expected evofed, fedavg, fed-sparse, fed-quant, or plain-es)");
}

const char* method_name(Method method) {
    switch (method) {
        case Method::evofed: return "evofed";
        case Method::fedavg: return "fedavg";
        case Method::fed_sparse: return "fed-sparse";
        case Method::fed_quant: return "fed-quant";
        case Method::plain_es: return "plain-es";
    }
    throw std::invalid_argument("unknown method value");
}

void RunSpec::validate() const {
    arch.validate();
    optimizer.validate();
    if (clients == 0) throw std::invalid_argument("clients must be >= 1");
    if (plan.shards != clients) {
        throw std::invalid_argument("shard plan covers " + std::to_string(plan.shards) +
                                    " clients but the run wants " + std::to_string(clients));
    }
    if (rounds == 0) throw std::invalid_argument("rounds must be >= 1");
    if (rounds > 0xFFFFFFFFull) throw std::invalid_argument("rounds exceed the wire range");
    if (!(participation > 0.0) || participation > 1.0) {
        throw std::invalid_argument("participation must be in (0, 1]");
    }
    if (eval_interval == 0) throw std::invalid_argument("eval_interval must be >= 1");
    if (train.size() == 0) throw std::invalid_argument("training set is empty");
    if (test.size() == 0) throw std::invalid_argument("test set is empty");
    if (train.feature_dim != arch.input_dim() || test.feature_dim != arch.input_dim()) {
        throw std::invalid_argument("dataset feature dimension does not match the model input");
    }
    if (population_method(method)) {
        if (population < 2 || population % 2 != 0) {
            throw std::invalid_argument("population must be even and >= 2");
        }
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw std::invalid_argument("sigma must be positive and finite");
        }
        if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
        const std::size_t dim = arch.param_count();
        if (partitions == 0 || partitions > dim) {
            throw std::invalid_argument("partitions must be in [1, parameter count]");
        }
        if (method == Method::plain_es && partitions != 1) {
            throw std::invalid_argument("plain-es uses a single partition");
        }
        if (population > 0xFFFF || partitions > 0xFFFF) {
            throw std::invalid_argument("population/partitions exceed the wire range");
        }
        if (update_momentum < 0.0 || update_momentum >= 1.0) {
            throw std::invalid_argument("update momentum must be in [0, 1)");
        }
    }
    if (method == Method::fed_sparse && !(sparse_rho >= 0.0 && sparse_rho < 1.0)) {
        throw std::invalid_argument("sparse compression rate must be in [0, 1)");
    }
    if (method == Method::fed_quant && (quant_bits < 1 || quant_bits > 16)) {
        throw std::invalid_argument("quantizer bit width must be in [1, 16]");
    }
}

namespace {

// Seeded choice of this round's participants, returned in ascending id order
// so every reduction downstream has a fixed association order.
std::vector<std::size_t> pick_participants(const RunSpec& spec, const ProtocolParams& proto,
                                           std::uint64_t round) {
    const auto want = static_cast<std::size_t>(std::clamp<long long>(
        std::llround(spec.participation * double(spec.clients)), 1,
        static_cast<long long>(spec.clients)));
    std::vector<std::size_t> picked;
    if (want == spec.clients) {
        picked.resize(spec.clients);
        std::iota(picked.begin(), picked.end(), std::size_t{0});
        return picked;
    }
    const std::uint64_t seed = detrng::tagged_seed(detrng::derive_round_seed(proto.schedule, round),
                                                   detrng::StreamTag::participation);
    const auto perm = detrng::seeded_permutation(spec.clients, seed);
    picked.assign(perm.begin(), perm.begin() + want);
    std::sort(picked.begin(), picked.end());
    return picked;
}

// Bring one stale client to `round`, charging the traffic to `downlink`.
// Replays history when it still covers the gap; otherwise ships the model.
void sync_client(ClientState& client, std::uint64_t round, const nn::ModelParams& server,
                 const pbge::Vec& server_velocity, const FitnessHistory& history,
                 const ProtocolParams& proto, std::uint64_t* downlink) {
    if (client.next_round == round) return;
    const std::uint64_t gap = round - client.next_round;
    const std::size_t dim = client.model.values.size();
    if (!history.empty() && history.oldest_round() <= client.next_round) {
        client.model = catch_up(client.model, client.next_round, round, history, proto,
                                &client.velocity);
        *downlink += gap * codec::byte_size(proto.codec, proto.population,
                                            proto.layout.partition_count());
    } else {
        client.model = server;
        client.velocity = server_velocity;
        *downlink += full_download_bytes(dim, proto);
    }
    client.next_round = round;
}

}  // namespace

RunResult run_rounds(const RunSpec& spec) {
    spec.validate();
    const std::size_t threads =
        spec.threads == 0 ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                          : spec.threads;

    const nn::ModelParams theta0 = nn::init_model(spec.arch, spec.seed);
    const std::size_t dim = theta0.values.size();

    ProtocolParams proto;
    proto.schedule = detrng::SeedSchedule{spec.seed};
    proto.population = spec.population;
    proto.sigma = spec.sigma;
    proto.alpha = spec.alpha;
    proto.codec = spec.codec;
    proto.update_momentum = spec.update_momentum;
    const bool pop_method = population_method(spec.method);
    if (pop_method) proto.layout = pbge::make_layout(dim, spec.partitions);

    std::vector<ClientState> clients(spec.clients);
    for (std::size_t j = 0; j < spec.clients; ++j) {
        ClientState& c = clients[j];
        c.id = static_cast<std::uint32_t>(j);
        c.model = theta0;
        c.shard = datasets::extract_shard(spec.train, spec.plan, j);
        c.optimizer = spec.optimizer;
        c.schedule = proto.schedule;
    }
    nn::ModelParams server = theta0;
    pbge::Vec server_velocity;
    FitnessHistory history(spec.history_depth);

    const std::uint64_t payload_bytes =
        pop_method ? codec::byte_size(spec.codec, spec.population, spec.partitions) : 0;

    std::vector<RoundRecord> records;
    records.reserve(spec.rounds);

    for (std::uint64_t t = 0; t < spec.rounds; ++t) {
        const auto started = std::chrono::steady_clock::now();
        RoundRecord rec;
        rec.round = t;

        const std::vector<std::size_t> participants = pick_participants(spec, proto, t);
        rec.participants = participants.size();

        if (pop_method) {
            for (const std::size_t idx : participants) {
                sync_client(clients[idx], t, server, server_velocity, history, proto,
                            &rec.downlink_bytes);
            }

            const std::uint64_t expected_hash = nn::model_hash(server);
            std::vector<codec::EncodedFitness> messages(participants.size());
            internal::parallel_for(participants.size(), threads, [&](std::size_t i) {
                const ClientState& c = clients[participants[i]];
                messages[i] = spec.method == Method::evofed
                                  ? client_round(c, t, proto, expected_hash)
                                  : baselines::plain_es_client_round(c, t, proto, expected_hash);
            });
            for (std::size_t i = 0; i < messages.size(); ++i) {
                const auto wire = serialize_message(clients[participants[i]].id, messages[i]);
                if (wire.size() != kWireHeaderBytes + payload_bytes) {
                    throw std::runtime_error("uplink accounting does not match the wire message");
                }
                rec.uplink_bytes += payload_bytes;
            }

            const GlobalFitness aggregated = aggregate(messages);

            // The broadcast rides the same codec as the uplink, so every node
            // decodes the identical post-channel fitness.
            pbge::FitnessMatrix raw;
            raw.round = static_cast<std::uint32_t>(t);
            raw.population = aggregated.population;
            raw.partitions = aggregated.partitions;
            raw.weight = static_cast<std::uint32_t>(
                std::min<std::uint64_t>(aggregated.total_weight, 0xFFFFFFFFull));
            raw.values = aggregated.values;
            const pbge::FitnessMatrix shipped =
                codec::decode_fitness(codec::encode_fitness(raw, proto.codec));

            GlobalFitness broadcast;
            broadcast.round = static_cast<std::uint32_t>(t);
            broadcast.population = aggregated.population;
            broadcast.partitions = aggregated.partitions;
            broadcast.total_weight = aggregated.total_weight;
            broadcast.values = shipped.values;
            rec.downlink_bytes += std::uint64_t(participants.size()) * payload_bytes;

            server = apply_broadcast(server, broadcast, t, proto, &server_velocity);
            const std::uint64_t server_hash = nn::model_hash(server);
            for (const std::size_t idx : participants) {
                ClientState& c = clients[idx];
                c.model = apply_broadcast(c.model, broadcast, t, proto, &c.velocity);
                c.next_round = t + 1;
                if (nn::model_hash(c.model) != server_hash) {
                    throw std::runtime_error("synchrony violated by client " +
                                             std::to_string(c.id) + " at round " +
                                             std::to_string(t));
                }
            }
            history.push(std::move(broadcast));
        } else {
            // Model-averaging family: participants first download the current
            // global model, train locally, and upload (compressed) updates.
            for (const std::size_t idx : participants) {
                ClientState& c = clients[idx];
                c.model = server;
                c.next_round = t;
            }
            rec.downlink_bytes += std::uint64_t(participants.size()) * 4ull * dim;
            std::vector<const ClientState*> snapshot;
            snapshot.reserve(participants.size());
            for (const std::size_t idx : participants) snapshot.push_back(&clients[idx]);

            baselines::BaselineRound result;
            switch (spec.method) {
                case Method::fedavg:
                    result = baselines::fedavg_round(snapshot, server, t, threads);
                    break;
                case Method::fed_sparse:
                    result = baselines::sparse_fedavg_round(snapshot, server, t, spec.sparse_rho,
                                                            threads);
                    break;
                case Method::fed_quant:
                    result = baselines::quant_fedavg_round(snapshot, server, t, spec.quant_bits,
                                                           threads);
                    break;
                default: throw std::logic_error("unexpected method in the averaging branch");
            }
            server = std::move(result.model);
            rec.uplink_bytes +=
                std::uint64_t(participants.size()) * result.uplink_bytes_per_client;
            for (const std::size_t idx : participants) {
                clients[idx].model = server;
                clients[idx].next_round = t + 1;
            }
        }

        if (t % spec.eval_interval == 0 || t + 1 == spec.rounds) {
            const nn::EvalResult test_eval = nn::evaluate(server, spec.test);
            const nn::EvalResult train_eval = nn::evaluate(server, spec.train);
            rec.evaluated = true;
            rec.accuracy = test_eval.accuracy;
            rec.train_loss = train_eval.mean_loss;
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                started)
                          .count();
        records.push_back(std::move(rec));
    }

    // End-of-run reconciliation: every client leaves bit-identical to the
    // server, with the traffic charged to the final round's downlink.
    RoundRecord& last = records.back();
    for (ClientState& c : clients) {
        if (c.next_round == spec.rounds) continue;
        if (pop_method) {
            sync_client(c, spec.rounds, server, server_velocity, history, proto,
                        &last.downlink_bytes);
        } else {
            c.model = server;
            c.next_round = spec.rounds;
            last.downlink_bytes += 4ull * dim;
        }
    }

    RunResult out;
    out.records = std::move(records);
    const std::uint64_t server_hash = nn::model_hash(server);
    out.client_model_hashes.reserve(clients.size());
    for (const ClientState& c : clients) {
        out.client_model_hashes.push_back(nn::model_hash(c.model));
        if (out.client_model_hashes.back() != server_hash) {
            throw std::runtime_error("end-of-run synchrony violated by client " +
                                     std::to_string(c.id));
        }
    }
    out.final_model = std::move(server);
    return out;
}

}  // namespace evofed::federation
