#pragma once

// Population-based gradient encoding: score a seed-synchronized population of
// perturbed models against the locally trained target (encode), and rebuild
// the model update from fitness values plus regenerated perturbations
// (decode), with K-way partitioning of the flat parameter vector.

#include <cstdint>
#include <span>
#include <vector>

#include "evofed/detrng.hpp"
#include "evofed/nn.hpp"

namespace evofed::pbge {

using Vec = std::vector<double>;

// Balanced contiguous split of [0, dim) into K ranges whose sizes differ by
// at most one.
struct PartitionLayout {
    std::vector<std::size_t> bounds;  // K+1 strictly increasing offsets; front 0, back dim

    std::size_t partition_count() const { return bounds.size() - 1; }
    std::size_t dim() const { return bounds.back(); }
    std::size_t begin(std::size_t k) const { return bounds[k]; }
    std::size_t end(std::size_t k) const { return bounds[k + 1]; }
    std::size_t size(std::size_t k) const { return bounds[k + 1] - bounds[k]; }
};

PartitionLayout make_layout(std::size_t total, std::size_t partitions);

// One client's fitness values for one round: population x partitions plus
// the local sample-count weight that aggregation uses.
struct FitnessMatrix {
    std::uint32_t round = 0;
    std::size_t population = 0;  // N
    std::size_t partitions = 0;  // K
    std::uint32_t weight = 1;    // local sample count b
    Vec values;                  // N*K, member-major: values[i*K + k]

    double& at(std::size_t member, std::size_t partition) {
        return values[member * partitions + partition];
    }
    double at(std::size_t member, std::size_t partition) const {
        return values[member * partitions + partition];
    }
};

// Fitness of every population member against the trained target:
// values[i][k] = -|| theta_prime[k] - (theta[k] + sigma*eps_i[k]) ||^2.
// Inputs are untouched.
FitnessMatrix encode(const nn::ModelParams& theta, const nn::ModelParams& theta_prime,
                     const detrng::PerturbationSet& set, const PartitionLayout& layout,
                     std::uint32_t weight = 1, std::uint32_t round = 0);

// The additive update (alpha/(N*sigma)) * sum_i fitness[i][k] * eps_i[k] per
// partition. Each mirrored pair is folded as (f_even - f_odd) * eps_even, in
// fixed pair order, so a constant added per partition-column cancels exactly
// and independent replays are bit-identical.
Vec decode_update(std::span<const double> fitness, std::size_t population,
                  const detrng::PerturbationSet& set, const PartitionLayout& layout,
                  double alpha);

// theta_next = theta + decode_update(...).
nn::ModelParams decode(const nn::ModelParams& theta, std::span<const double> fitness,
                       std::size_t population, const detrng::PerturbationSet& set,
                       const PartitionLayout& layout, double alpha);
nn::ModelParams decode(const nn::ModelParams& theta, const FitnessMatrix& fitness,
                       const detrng::PerturbationSet& set, const PartitionLayout& layout,
                       double alpha);

struct ReconstructionQuality {
    double cosine = 0.0;  // cos(decode direction, theta_prime - theta)
    double gain = 0.0;    // ||decode direction|| / ||2*alpha*(theta - theta_prime)||
};

// How well the encode->decode round trip points at the true update. Errors
// when theta == theta_prime (the direction is undefined).
ReconstructionQuality reconstruction_quality(const nn::ModelParams& theta,
                                             const nn::ModelParams& theta_prime,
                                             const detrng::PerturbationSet& set,
                                             const PartitionLayout& layout, double alpha);

}  // namespace evofed::pbge
