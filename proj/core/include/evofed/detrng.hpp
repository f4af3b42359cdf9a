#pragma once

// Deterministic, counter-addressable random generation. Server and clients
// regenerate identical perturbation populations from a shared seed; mirrored
// pairs make all odd empirical moments vanish exactly.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace evofed::detrng {

using Vec = std::vector<double>;

// SplitMix64 finalizer. Bijective on 64-bit words; the workhorse mixer for
// every derived stream in this library.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// Random access into the SplitMix64 stream keyed by `seed`: value at counter
// c equals the (c+1)-th output of a sequentially stepped generator.
constexpr std::uint64_t uniform_bits(std::uint64_t seed, std::uint64_t counter) {
    return mix64(seed + (counter + 1) * kGolden);
}

// Uniform double in (0, 1]. The +1 keeps log() finite in Box-Muller.
inline double uniform_unit(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>((uniform_bits(seed, counter) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two addressed uniforms.
double standard_normal(std::uint64_t seed, std::uint64_t counter);

// Uniform integer in [0, bound) by 128-bit multiply-shift.
std::uint64_t bounded_uniform(std::uint64_t seed, std::uint64_t counter,
                              std::uint64_t bound);

// Fisher-Yates permutation of [0, n) driven by the addressed stream.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// Combine a seed with a sub-stream tag (round index, client id, purpose).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ (tag + 1) * kGolden);
}

// Purpose tags for derived streams, so independent uses of the same round
// seed never overlap.
enum class StreamTag : std::uint64_t {
    perturbation = 1,
    minibatch = 2,
    participation = 3,
    model_init = 4,
    data = 5,
};

constexpr std::uint64_t tagged_seed(std::uint64_t seed, StreamTag tag) {
    return mix_seed(seed, static_cast<std::uint64_t>(tag));
}

struct SeedSchedule {
    std::uint64_t base_seed = 0;
};

// Pure function of (base seed, round); stable across runs and platforms.
std::uint64_t derive_round_seed(const SeedSchedule& schedule, std::uint64_t round);

enum class SamplingScheme : std::uint8_t { mirrored = 0 };

// Generative description of a population of N perturbation vectors in R^d.
// Members are never stored; any epsilon_i is recomputed on demand.
// Coordinates are unit-variance; sigma is applied by the consumer.
struct PerturbationSet {
    std::uint64_t round_seed = 0;
    std::size_t population = 0;  // N, even
    std::size_t dim = 0;         // d
    double sigma = 0.0;
    SamplingScheme scheme = SamplingScheme::mirrored;
};

PerturbationSet make_set(std::uint64_t round_seed, std::size_t population,
                         std::size_t dim, double sigma);

// Base vector +epsilon of pair m (members 2m and 2m+1). Resizes `out` to d.
// O(d) work, independent of m: random access into the population.
void perturbation_pair(const PerturbationSet& set, std::size_t pair, Vec& out);

// Member i. Odd i is the exact negation of member i-1.
Vec perturbation(const PerturbationSet& set, std::size_t index);

// All N members in index order; equals repeated random access bit-for-bit.
std::vector<Vec> materialize(const PerturbationSet& set);

struct Moments {
    Vec m1;         // (1/N) sum eps      -- exactly zero per coordinate
    double m2_max;  // max_j (1/N) sum eps^2, the empirical G^2
    Vec m3;         // (1/N) sum eps^3    -- exactly zero per coordinate
};

// First three empirical moments accumulated pair-by-pair so the +/- terms
// cancel exactly in floating point.
Moments moment_check(const PerturbationSet& set);

}  // namespace evofed::detrng
