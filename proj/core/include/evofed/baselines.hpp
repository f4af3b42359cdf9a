#pragma once

// Comparison methods sharing the same local trainer and accounting
// conventions: FedAvg, FedAvg with top-k update sparsification, FedAvg with
// Q-bit update quantization, and plain ES driven by task-loss fitness.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evofed/federation.hpp"

namespace evofed::baselines {

struct BaselineRound {
    nn::ModelParams model;                      // new global model
    std::uint64_t uplink_bytes_per_client = 0;  // exact per-client payload
};

// Sample-weighted mean of the participants' locally trained models.
// Per-client uplink: 4 bytes per parameter.
BaselineRound fedavg_round(std::span<const federation::ClientState* const> participants,
                           const nn::ModelParams& server, std::uint64_t round,
                           std::size_t threads = 1);

// Each participant transmits the top ceil((1-rho)*|theta|) components of its
// update (theta' - theta) by magnitude, with indices; the server averages the
// sparse updates onto theta. Per-client uplink: kept * 8 bytes.
BaselineRound sparse_fedavg_round(
    std::span<const federation::ClientState* const> participants,
    const nn::ModelParams& server, std::uint64_t round, double rho,
    std::size_t threads = 1);

// Each participant transmits its update quantized per layer (affine min-max,
// float32 endpoints, `bits`-bit codes); the server dequantizes, averages, and
// applies. Per-client uplink: ceil(|theta|*bits/8) + 8*layers bytes.
BaselineRound quant_fedavg_round(
    std::span<const federation::ClientState* const> participants,
    const nn::ModelParams& server, std::uint64_t round, unsigned bits,
    std::size_t threads = 1);

// Plain ES message: fitness_i = -loss(theta + sigma*eps_i) on the client's
// seeded round batch, mean-centered, through the configured codec. Requires
// a single-partition layout.
codec::EncodedFitness plain_es_client_round(const federation::ClientState& client,
                                            std::uint64_t round,
                                            const federation::ProtocolParams& proto,
                                            std::uint64_t expected_model_hash);

// Full plain-ES round through the shared aggregate/broadcast pipeline.
BaselineRound plain_es_round(
    std::span<const federation::ClientState* const> participants,
    const nn::ModelParams& server, std::uint64_t round,
    const federation::ProtocolParams& proto, std::size_t threads = 1);

// One ES update of an arbitrary objective: fitness -objective(x + sigma*eps_i),
// mean-centered, then the standard population decode. Exposed for convex
// smoke tests and diagnostics.
std::vector<double> es_step(const std::vector<double>& point,
                            const std::function<double(const std::vector<double>&)>& objective,
                            std::size_t population, double sigma, double alpha,
                            std::uint64_t round_seed);

}  // namespace evofed::baselines
