#include "evofed/detrng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace evofed::detrng {

double standard_normal(std::uint64_t seed, std::uint64_t counter) {
    const double u1 = uniform_unit(seed, 2 * counter);
    const double u2 = uniform_unit(seed, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t bounded_uniform(std::uint64_t seed, std::uint64_t counter,
                              std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("bound must be positive");
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(uniform_bits(seed, counter)) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = bounded_uniform(seed, i, i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::uint64_t derive_round_seed(const SeedSchedule& schedule, std::uint64_t round) {
    return mix64(mix64(schedule.base_seed ^ kGolden) + (round + 1) * kGolden);
}

PerturbationSet make_set(std::uint64_t round_seed, std::size_t population,
                         std::size_t dim, double sigma) {
    if (population == 0 || population % 2 != 0)
        throw std::invalid_argument("population size must be even and positive");
    if (dim == 0) throw std::invalid_argument("perturbation dimension must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    return PerturbationSet{round_seed, population, dim, sigma, SamplingScheme::mirrored};
}

void perturbation_pair(const PerturbationSet& set, std::size_t pair, Vec& out) {
    if (2 * pair >= set.population)
        throw std::out_of_range("pair index out of range");
    out.resize(set.dim);
    const std::uint64_t stream = tagged_seed(set.round_seed, StreamTag::perturbation);
    const std::uint64_t base = static_cast<std::uint64_t>(pair) * set.dim;
    for (std::size_t j = 0; j < set.dim; ++j)
        out[j] = standard_normal(stream, base + j);
}

Vec perturbation(const PerturbationSet& set, std::size_t index) {
    if (index >= set.population)
        throw std::out_of_range("perturbation index out of range");
    Vec eps;
    perturbation_pair(set, index / 2, eps);
    if (index % 2 == 1)
        for (double& v : eps) v = -v;
    return eps;
}

std::vector<Vec> materialize(const PerturbationSet& set) {
    std::vector<Vec> all;
    all.reserve(set.population);
    for (std::size_t i = 0; i < set.population; ++i)
        all.push_back(perturbation(set, i));
    return all;
}

Moments moment_check(const PerturbationSet& set) {
    Moments m;
    m.m1.assign(set.dim, 0.0);
    m.m3.assign(set.dim, 0.0);
    Vec m2(set.dim, 0.0);
    Vec eps;
    const std::size_t pairs = set.population / 2;
    for (std::size_t p = 0; p < pairs; ++p) {
        perturbation_pair(set, p, eps);
        for (std::size_t j = 0; j < set.dim; ++j) {
            const double x = eps[j];
            // x + (-x) and x^3 + (-x)^3 are exact zeros; adding them leaves
            // the accumulators untouched bit-for-bit.
            m.m1[j] += x + (-x);
            m2[j] += 2.0 * (x * x);
            m.m3[j] += (x * x * x) + ((-x) * (-x) * (-x));
        }
    }
    const double inv_n = 1.0 / static_cast<double>(set.population);
    m.m2_max = 0.0;
    for (std::size_t j = 0; j < set.dim; ++j) {
        m.m1[j] *= inv_n;
        m.m3[j] *= inv_n;
        const double second = m2[j] * inv_n;
        if (second > m.m2_max) m.m2_max = second;
    }
    return m;
}

}  // namespace evofed::detrng
