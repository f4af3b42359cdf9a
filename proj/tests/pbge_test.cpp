#include <cmath>
#include <vector>

#include "doctest.h"
#include "evofed/pbge.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace evofed;

namespace {

// theta/theta' pair over a throwaway arch of the requested parameter count.
struct Pair {
    nn::ModelParams theta;
    nn::ModelParams theta_prime;
};

Pair random_pair(std::uint64_t seed, std::size_t dim, double step_scale = 0.5) {
    Pair p;
    p.theta = helpers::random_model(seed, dim);
    p.theta_prime = p.theta;
    for (std::size_t j = 0; j < dim; ++j) {
        p.theta_prime.values[j] += step_scale * detrng::standard_normal(seed ^ 0xABCD, j);
    }
    return p;
}

}  // namespace

TEST_SUITE("pbge") {

TEST_CASE("make_layout splits 10 into {3,3,4} and validates") {
    const pbge::PartitionLayout layout = pbge::make_layout(10, 3);
    REQUIRE(layout.partition_count() == 3);
    CHECK(layout.size(0) == 3);
    CHECK(layout.size(1) == 3);
    CHECK(layout.size(2) == 4);  // the remainder widens the trailing partitions
    CHECK(layout.begin(0) == 0);
    CHECK(layout.end(2) == 10);
    CHECK(layout.dim() == 10);

    const pbge::PartitionLayout one = pbge::make_layout(7, 1);
    CHECK(one.partition_count() == 1);
    CHECK(one.size(0) == 7);

    const pbge::PartitionLayout full = pbge::make_layout(5, 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(full.size(k) == 1);

    CHECK_THROWS_AS(pbge::make_layout(10, 0), std::invalid_argument);
    CHECK_THROWS_AS(pbge::make_layout(10, 11), std::invalid_argument);
    CHECK_THROWS_AS(pbge::make_layout(0, 1), std::invalid_argument);
}

TEST_CASE("partition sizes differ by at most one for any split") {
    for (std::size_t total : {10ul, 97ul, 128ul}) {
        for (std::size_t k = 1; k <= std::min<std::size_t>(total, 9); ++k) {
            const pbge::PartitionLayout layout = pbge::make_layout(total, k);
            std::size_t lo = total;
            std::size_t hi = 0;
            std::size_t sum = 0;
            for (std::size_t p = 0; p < k; ++p) {
                lo = std::min(lo, layout.size(p));
                hi = std::max(hi, layout.size(p));
                sum += layout.size(p);
            }
            CHECK(sum == total);
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("encode scores every member against the trained target") {
    const std::size_t dim = 12;
    const Pair p = random_pair(5, dim);
    const auto set = detrng::make_set(900, 6, dim, 0.3);
    const pbge::PartitionLayout layout = pbge::make_layout(dim, 3);
    const pbge::FitnessMatrix fm = pbge::encode(p.theta, p.theta_prime, set, layout, 17, 4);

    CHECK(fm.population == 6);
    CHECK(fm.partitions == 3);
    CHECK(fm.weight == 17);
    CHECK(fm.round == 4);
    REQUIRE(fm.values.size() == 18);

    // Direct recomputation from materialized perturbations.
    for (std::size_t i = 0; i < 6; ++i) {
        const detrng::Vec eps = detrng::perturbation(set, i);
        for (std::size_t k = 0; k < 3; ++k) {
            double dist2 = 0.0;
            for (std::size_t j = layout.begin(k); j < layout.end(k); ++j) {
                const double gap =
                    p.theta_prime.values[j] - (p.theta.values[j] + set.sigma * eps[j]);
                dist2 += gap * gap;
            }
            CHECK(fm.at(i, k) == doctest::Approx(-dist2).epsilon(1e-12));
            CHECK(fm.at(i, k) <= 0.0);
        }
    }
}

TEST_CASE("encode rejects mismatched inputs") {
    const Pair p = random_pair(1, 8);
    const auto set = detrng::make_set(2, 4, 8, 0.5);
    const pbge::PartitionLayout layout = pbge::make_layout(8, 2);

    nn::ModelParams other_arch = helpers::random_model(3, 9);
    CHECK_THROWS_AS(pbge::encode(p.theta, other_arch, set, layout, 1, 0),
                    std::invalid_argument);

    const auto wrong_dim_set = detrng::make_set(2, 4, 9, 0.5);
    CHECK_THROWS_AS(pbge::encode(p.theta, p.theta_prime, wrong_dim_set, layout, 1, 0),
                    std::invalid_argument);

    const pbge::PartitionLayout wrong_layout = pbge::make_layout(9, 2);
    CHECK_THROWS_AS(pbge::encode(p.theta, p.theta_prime, set, wrong_layout, 1, 0),
                    std::invalid_argument);

    CHECK_THROWS_AS(pbge::encode(p.theta, p.theta_prime, set, layout, 0, 0),
                    std::invalid_argument);
}

TEST_CASE("decode_update matches the naive member-by-member oracle") {
    for (const std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        const std::size_t dim = 8 + 7 * seed;
        const std::size_t population = 8;
        const std::size_t partitions = 1 + seed % 3;
        const Pair p = random_pair(seed, dim);
        const auto set = detrng::make_set(seed * 31, population, dim, 0.27);
        const pbge::PartitionLayout layout = pbge::make_layout(dim, partitions);
        const pbge::FitnessMatrix fm = pbge::encode(p.theta, p.theta_prime, set, layout);

        const pbge::Vec update =
            pbge::decode_update(fm.values, population, set, layout, 0.04);
        const std::vector<double> naive =
            oracles::naive_decode_update(fm.values, set, layout, 0.04);
        CHECK(helpers::rel_l2_err(update, naive, 1e-12) < 1e-9);
    }
}

TEST_CASE("decode applied to encode equals the dense second-moment oracle") {
    const std::size_t dim = 24;
    const Pair p = random_pair(77, dim);
    const auto set = detrng::make_set(1234, 16, dim, 0.2);
    const pbge::PartitionLayout layout = pbge::make_layout(dim, 4);
    const double alpha = 0.03;

    const pbge::FitnessMatrix fm = pbge::encode(p.theta, p.theta_prime, set, layout);
    const nn::ModelParams decoded = pbge::decode(p.theta, fm, set, layout, alpha);

    std::vector<double> direction(dim);
    for (std::size_t j = 0; j < dim; ++j) direction[j] = decoded.values[j] - p.theta.values[j];
    const std::vector<double> oracle =
        oracles::covariance_update(p.theta.values, p.theta_prime.values, set, layout, alpha);
    CHECK(helpers::rel_l2_err(direction, oracle, 1e-12) < 1e-9);
}

TEST_CASE("a fitness column only moves its own partition") {
    const std::size_t dim = 15;
    const auto set = detrng::make_set(5, 8, dim, 0.5);
    const pbge::PartitionLayout layout = pbge::make_layout(dim, 3);
    pbge::Vec fitness = helpers::random_vec(6, 8 * 3);

    const pbge::Vec base = pbge::decode_update(fitness, 8, set, layout, 0.1);
    for (std::size_t i = 0; i < 8; ++i) fitness[i * 3 + 1] += 10.0 * double(i) - 3.0;
    const pbge::Vec moved = pbge::decode_update(fitness, 8, set, layout, 0.1);

    for (std::size_t j = 0; j < dim; ++j) {
        if (j >= layout.begin(1) && j < layout.end(1)) continue;
        CHECK(moved[j] == base[j]);  // untouched partitions are bitwise identical
    }
    bool changed = false;
    for (std::size_t j = layout.begin(1); j < layout.end(1); ++j) {
        changed = changed || moved[j] != base[j];
    }
    CHECK(changed);
}

TEST_CASE("encode partitions add up to the single-partition distance") {
    const std::size_t dim = 13;
    const Pair p = random_pair(9, dim);
    const auto set = detrng::make_set(10, 6, dim, 0.4);
    const pbge::FitnessMatrix whole =
        pbge::encode(p.theta, p.theta_prime, set, pbge::make_layout(dim, 1));
    const pbge::FitnessMatrix split =
        pbge::encode(p.theta, p.theta_prime, set, pbge::make_layout(dim, 4));
    for (std::size_t i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 4; ++k) sum += split.at(i, k);
        CHECK(sum == doctest::Approx(whole.at(i, 0)).epsilon(1e-12));
    }
}

TEST_CASE("mirrored pair fitness differences measure the update projection") {
    // f_even - f_odd = 4*sigma*<theta'-theta, eps> for mirrored pairs.
    const std::size_t dim = 10;
    const Pair p = random_pair(13, dim);
    const auto set = detrng::make_set(14, 8, dim, 0.35);
    const pbge::FitnessMatrix fm =
        pbge::encode(p.theta, p.theta_prime, set, pbge::make_layout(dim, 1));
    for (std::size_t pair = 0; pair < 4; ++pair) {
        const detrng::Vec eps = detrng::perturbation(set, 2 * pair);
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            dot += (p.theta_prime.values[j] - p.theta.values[j]) * eps[j];
        }
        const double diff = fm.at(2 * pair, 0) - fm.at(2 * pair + 1, 0);
        CHECK(diff == doctest::Approx(4.0 * set.sigma * dot).epsilon(1e-9));
    }
}

TEST_CASE("constant column shifts cannot move the decode") {
    // Values and shifts on a dyadic grid so the additions are exact; the
    // decode then must be bitwise unchanged because it only consumes
    // within-pair differences.
    const std::size_t dim = 9;
    const std::size_t population = 8;
    const auto set = detrng::make_set(21, population, dim, 0.5);
    const pbge::PartitionLayout layout = pbge::make_layout(dim, 2);
    const double grid = 0x1.0p-26;
    pbge::Vec fitness(population * 2);
    for (std::size_t i = 0; i < fitness.size(); ++i) {
        const auto bits = detrng::uniform_bits(33, i);
        fitness[i] = double(std::int64_t(bits % (1ull << 27)) - (1ll << 26)) * grid;
    }
    const pbge::Vec base = pbge::decode_update(fitness, population, set, layout, 0.07);

    pbge::Vec shifted = fitness;
    const double c0 = double((1 << 20) + 12345) * grid;
    const double c1 = -double((1 << 19) + 999) * grid;
    for (std::size_t i = 0; i < population; ++i) {
        shifted[i * 2 + 0] += c0;
        shifted[i * 2 + 1] += c1;
    }
    const pbge::Vec moved = pbge::decode_update(shifted, population, set, layout, 0.07);
    CHECK(moved == base);  // bitwise

    // Arbitrary (non-grid) values and shifts still agree to near roundoff.
    const pbge::Vec rough = helpers::random_vec(99, population * 2, 3.0);
    const pbge::Vec rough_base = pbge::decode_update(rough, population, set, layout, 0.07);
    pbge::Vec rough_shift = rough;
    for (std::size_t i = 0; i < population; ++i) rough_shift[i * 2] += 0.123456789;
    const pbge::Vec rough_moved = pbge::decode_update(rough_shift, population, set, layout, 0.07);
    CHECK(helpers::rel_l2_err(rough_moved, rough_base, 1e-12) < 1e-12);
}

TEST_CASE("decode_update validates dimensions") {
    const auto set = detrng::make_set(1, 4, 6, 0.5);
    const pbge::PartitionLayout layout = pbge::make_layout(6, 2);
    const pbge::Vec fitness(4 * 2, 0.0);
    CHECK_THROWS_AS(pbge::decode_update(fitness, 6, set, layout, 0.1),
                    std::invalid_argument);
    const pbge::Vec short_fitness(7, 0.0);
    CHECK_THROWS_AS(pbge::decode_update(short_fitness, 4, set, layout, 0.1),
                    std::invalid_argument);
    const pbge::PartitionLayout wrong = pbge::make_layout(7, 2);
    CHECK_THROWS_AS(pbge::decode_update(fitness, 4, set, wrong, 0.1),
                    std::invalid_argument);
}

TEST_CASE("zero fitness decodes to the unchanged model") {
    const Pair p = random_pair(3, 8);
    const auto set = detrng::make_set(4, 4, 8, 0.5);
    const pbge::PartitionLayout layout = pbge::make_layout(8, 1);
    const pbge::Vec zero(4, 0.0);
    const nn::ModelParams out = pbge::decode(p.theta, zero, 4, set, layout, 0.1);
    CHECK(out.values == p.theta.values);
}

TEST_CASE("reconstruction quality tracks the true update direction") {
    const std::size_t dim = 16;
    const Pair p = random_pair(41, dim, 0.1);
    const pbge::PartitionLayout layout = pbge::make_layout(dim, 4);
    const double alpha = 0.05;

    // A large mirrored population in a small dimension reconstructs well.
    const auto rich = detrng::make_set(42, 512, dim, 0.05);
    const pbge::ReconstructionQuality q =
        pbge::reconstruction_quality(p.theta, p.theta_prime, rich, layout, alpha);
    CHECK(q.cosine > 0.9);
    CHECK(q.cosine <= 1.0 + 1e-12);
    CHECK(q.gain > 0.5);
    CHECK(q.gain < 2.0);

    // Definition check against a direct decode.
    const pbge::FitnessMatrix fm = pbge::encode(p.theta, p.theta_prime, rich, layout);
    const nn::ModelParams decoded = pbge::decode(p.theta, fm, rich, layout, alpha);
    std::vector<double> dir(dim);
    std::vector<double> delta(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        dir[j] = decoded.values[j] - p.theta.values[j];
        delta[j] = p.theta_prime.values[j] - p.theta.values[j];
    }
    const double want_cos =
        helpers::dot(dir, delta) / (helpers::l2(dir) * helpers::l2(delta));
    const double want_gain = helpers::l2(dir) / (2.0 * alpha * helpers::l2(delta));
    CHECK(q.cosine == doctest::Approx(want_cos).epsilon(1e-12));
    CHECK(q.gain == doctest::Approx(want_gain).epsilon(1e-12));

    // Degenerate direction is rejected.
    CHECK_THROWS_AS(pbge::reconstruction_quality(p.theta, p.theta, rich, layout, alpha),
                    std::invalid_argument);
}

}  // TEST_SUITE
