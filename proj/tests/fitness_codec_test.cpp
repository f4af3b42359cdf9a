#include <bit>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "evofed/fitness_codec.hpp"
#include "helpers.hpp"

using namespace evofed;
using codec::CodecSpec;
using codec::Scheme;

namespace {

pbge::FitnessMatrix make_matrix(std::size_t population, std::size_t partitions,
                                const std::vector<double>& values, std::uint32_t weight = 1,
                                std::uint32_t round = 0) {
    pbge::FitnessMatrix fm;
    fm.population = population;
    fm.partitions = partitions;
    fm.values = values;
    fm.weight = weight;
    fm.round = round;
    return fm;
}

pbge::FitnessMatrix random_matrix(std::uint64_t seed, std::size_t population,
                                  std::size_t partitions, double scale = 2.0) {
    return make_matrix(population, partitions,
                       helpers::random_vec(seed, population * partitions, scale), 3, 7);
}

double f32(double v) { return double(float(v)); }

}  // namespace

TEST_SUITE("fitness_codec") {

TEST_CASE("codec names round-trip and reject junk") {
    CHECK(codec::codec_from_name("raw32") == CodecSpec::raw32());
    CHECK(codec::codec_from_name("topk:5") == CodecSpec::topk(5));
    CHECK(codec::codec_from_name("quant:8") == CodecSpec::quant(8));
    CHECK(codec::codec_from_name("rank:16") == CodecSpec::rank(16));
    for (const CodecSpec spec : {CodecSpec::raw32(), CodecSpec::topk(3), CodecSpec::quant(2),
                                 CodecSpec::rank(64)}) {
        CHECK(codec::codec_from_name(codec::codec_name(spec)) == spec);
    }
    CHECK_THROWS_AS(codec::codec_from_name("gzip"), std::invalid_argument);
    CHECK_THROWS_AS(codec::codec_from_name("topk"), std::invalid_argument);
    CHECK_THROWS_AS(codec::codec_from_name("topk:"), std::invalid_argument);
    CHECK_THROWS_AS(codec::codec_from_name("topk:abc"), std::invalid_argument);
    CHECK_THROWS_AS(codec::codec_from_name("quant:0"), std::invalid_argument);
    CHECK_THROWS_AS(codec::codec_from_name("rank:5x"), std::invalid_argument);
}

TEST_CASE("payload sizes follow the closed forms") {
    CHECK(codec::byte_size(CodecSpec::raw32(), 128, 1) == 512);
    CHECK(codec::byte_size(CodecSpec::raw32(), 32, 50) == 4 * 32 * 50);
    // 128 members need 1 index byte; 512 need 2.
    CHECK(codec::byte_size(CodecSpec::topk(4), 128, 2) == 2 * 4 * (4 + 1));
    CHECK(codec::byte_size(CodecSpec::topk(4), 512, 2) == 2 * 4 * (4 + 2));
    // Pinned example: quant(2) at N=128, K=1 is 8 + ceil(256/8) = 40 bytes.
    CHECK(codec::byte_size(CodecSpec::quant(2), 128, 1) == 40);
    CHECK(codec::byte_size(CodecSpec::quant(8), 100, 3) == 3 * (8 + 100));
    // rank(16) needs 4 bits per member.
    CHECK(codec::byte_size(CodecSpec::rank(16), 128, 1) == 64);
    CHECK(codec::byte_size(CodecSpec::rank(2), 10, 1) == 2);  // 10 bits -> 2 bytes

    // Sizes match what encode actually produces.
    for (const CodecSpec spec : {CodecSpec::raw32(), CodecSpec::topk(3), CodecSpec::quant(3),
                                 CodecSpec::rank(8)}) {
        const pbge::FitnessMatrix fm = random_matrix(5, 16, 3);
        const codec::EncodedFitness ef = codec::encode_fitness(fm, spec);
        CHECK(ef.payload.size() == codec::byte_size(spec, 16, 3));
        CHECK(ef.population == 16);
        CHECK(ef.partitions == 3);
        CHECK(ef.weight == fm.weight);
        CHECK(ef.round == fm.round);
    }
}

TEST_CASE("raw32 is an exact float32 round-trip") {
    const pbge::FitnessMatrix fm = random_matrix(1, 8, 2);
    const codec::EncodedFitness ef = codec::encode_fitness(fm, CodecSpec::raw32());
    const pbge::FitnessMatrix back = codec::decode_fitness(ef);
    REQUIRE(back.values.size() == fm.values.size());
    for (std::size_t i = 0; i < fm.values.size(); ++i) {
        CHECK(back.values[i] == f32(fm.values[i]));  // bitwise float32 cast
    }
    CHECK(back.population == fm.population);
    CHECK(back.partitions == fm.partitions);
    CHECK(back.weight == fm.weight);
    CHECK(back.round == fm.round);
    // Idempotent: encoding the decoded matrix reproduces the same payload.
    CHECK(codec::encode_fitness(back, CodecSpec::raw32()).payload == ef.payload);
}

TEST_CASE("topk keeps the largest magnitudes after centering, ties low") {
    // Column (-1,-5,-2,-4): mean -3, centered (2,-2,1,-1); k=2 keeps {0,1}.
    const pbge::FitnessMatrix fm = make_matrix(4, 1, {-1.0, -5.0, -2.0, -4.0});
    const codec::EncodedFitness ef = codec::topk_sparsify(fm, 2);
    const pbge::FitnessMatrix back = codec::decode_fitness(ef);
    CHECK(back.values[0] == 2.0);
    CHECK(back.values[1] == -2.0);
    CHECK(back.values[2] == 0.0);
    CHECK(back.values[3] == 0.0);
}

TEST_CASE("topk with k = N restores the mean-centered column exactly in float32") {
    // Dyadic values: the column mean and all centered values are exact.
    const pbge::FitnessMatrix fm =
        make_matrix(4, 2, {1.0, -2.0, 0.5, 3.0, -1.5, 8.0, 0.25, -4.0});
    const codec::EncodedFitness ef = codec::topk_sparsify(fm, 4);
    const pbge::FitnessMatrix back = codec::decode_fitness(ef);
    for (std::size_t k = 0; k < 2; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 4; ++i) mean += fm.at(i, k);
        mean /= 4.0;
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(back.at(i, k) == f32(fm.at(i, k) - mean));
        }
    }

    // Arbitrary doubles survive within float32 resolution.
    const pbge::FitnessMatrix noisy = random_matrix(31, 16, 1);
    const pbge::FitnessMatrix round =
        codec::decode_fitness(codec::topk_sparsify(noisy, 16));
    double mean = 0.0;
    for (const double v : noisy.values) mean += v;
    mean /= 16.0;
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(round.values[i] ==
              doctest::Approx(noisy.values[i] - mean).epsilon(1e-6));
    }
}

TEST_CASE("topk validates k") {
    const pbge::FitnessMatrix fm = random_matrix(2, 8, 1);
    CHECK_THROWS_AS(codec::topk_sparsify(fm, 0), std::invalid_argument);
    CHECK_THROWS_AS(codec::topk_sparsify(fm, 9), std::invalid_argument);
}

TEST_CASE("quant hits the documented 1-bit example exactly") {
    // Column (0,-1), Q=1: endpoints (-1, 0), codes (1, 0); recovery is exact.
    const pbge::FitnessMatrix fm = make_matrix(2, 1, {0.0, -1.0});
    const codec::EncodedFitness ef = codec::quantize(fm, 1);
    const pbge::FitnessMatrix back = codec::dequantize(ef);
    CHECK(back.values[0] == 0.0);
    CHECK(back.values[1] == -1.0);
    // Payload: float32 endpoints then one packed bit per member (LSB first).
    REQUIRE(ef.payload.size() == 9);
    CHECK(std::bit_cast<float>(std::uint32_t(ef.payload[0] | (ef.payload[1] << 8) |
                                             (ef.payload[2] << 16) | (ef.payload[3] << 24))) ==
          -1.0f);
    CHECK((ef.payload[8] & 0x3) == 0x1);  // member 0 -> code 1, member 1 -> code 0
}

TEST_CASE("quant recovers constant columns exactly at any width") {
    for (const unsigned bits : {1u, 2u, 8u, 16u}) {
        const pbge::FitnessMatrix fm = make_matrix(6, 1, std::vector<double>(6, 0.5));
        const pbge::FitnessMatrix back = codec::dequantize(codec::quantize(fm, bits));
        for (const double v : back.values) CHECK(v == 0.5);
    }
}

TEST_CASE("quant error is bounded by half a step") {
    const pbge::FitnessMatrix fm = random_matrix(77, 64, 2, 5.0);
    for (const unsigned bits : {4u, 8u, 12u}) {
        const pbge::FitnessMatrix back = codec::dequantize(codec::quantize(fm, bits));
        for (std::size_t k = 0; k < 2; ++k) {
            double lo = fm.at(0, k);
            double hi = fm.at(0, k);
            for (std::size_t i = 0; i < 64; ++i) {
                lo = std::min(lo, fm.at(i, k));
                hi = std::max(hi, fm.at(i, k));
            }
            const double step = (f32(hi) - f32(lo)) / double((1u << bits) - 1);
            for (std::size_t i = 0; i < 64; ++i) {
                CHECK(std::abs(back.at(i, k) - fm.at(i, k)) <= 0.5 * step + 1e-6 * std::abs(hi));
            }
        }
    }
}

TEST_CASE("quant round-trip is idempotent") {
    const pbge::FitnessMatrix fm = random_matrix(13, 32, 2);
    const codec::EncodedFitness once = codec::quantize(fm, 6);
    const pbge::FitnessMatrix back = codec::dequantize(once);
    const codec::EncodedFitness twice = codec::quantize(back, 6);
    CHECK(once.payload == twice.payload);
    CHECK(codec::dequantize(twice).values == back.values);
}

TEST_CASE("quant validates the bit width") {
    const pbge::FitnessMatrix fm = random_matrix(2, 8, 1);
    CHECK_THROWS_AS(codec::quantize(fm, 0), std::invalid_argument);
    CHECK_THROWS_AS(codec::quantize(fm, 17), std::invalid_argument);
}

TEST_CASE("rank buckets members by sorted position") {
    // Column (-5,-1,-3), R=N=3: ascending order is members (0,2,1), so the
    // bucket ladder gives scores (-1, 1, 0).
    const pbge::FitnessMatrix fm = make_matrix(3, 1, {-5.0, -1.0, -3.0});
    const pbge::FitnessMatrix back = codec::decode_fitness(codec::rank_transform(fm, 3));
    CHECK(back.values[0] == -1.0);
    CHECK(back.values[1] == 1.0);
    CHECK(back.values[2] == 0.0);
}

TEST_CASE("rank groups collapse fine order but keep the coarse one") {
    const pbge::FitnessMatrix fm = make_matrix(4, 1, {10.0, -7.0, 3.0, -1.0});
    // R=2: lower half {-7,-1} -> score -0.5, upper half {3,10} -> +0.5.
    const pbge::FitnessMatrix back = codec::decode_fitness(codec::rank_transform(fm, 2));
    CHECK(back.values[0] == 0.5);
    CHECK(back.values[1] == -0.5);
    CHECK(back.values[2] == 0.5);
    CHECK(back.values[3] == -0.5);
}

TEST_CASE("rank breaks ties by member index") {
    const pbge::FitnessMatrix fm = make_matrix(4, 1, {1.0, 1.0, 1.0, 1.0});
    const pbge::FitnessMatrix back = codec::decode_fitness(codec::rank_transform(fm, 4));
    CHECK(back.values[0] == -1.5);
    CHECK(back.values[1] == -0.5);
    CHECK(back.values[2] == 0.5);
    CHECK(back.values[3] == 1.5);
}

TEST_CASE("rank scores are zero-mean per column") {
    const pbge::FitnessMatrix fm = random_matrix(3, 32, 2);
    for (const std::size_t groups : {2ul, 4ul, 32ul}) {
        const pbge::FitnessMatrix back =
            codec::decode_fitness(codec::rank_transform(fm, groups));
        for (std::size_t k = 0; k < 2; ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < 32; ++i) sum += back.at(i, k);
            // Scores are half-integers in equal-size buckets: the sum is
            // exactly zero, not merely close.
            CHECK(sum == 0.0);
        }
    }
    CHECK_THROWS_AS(codec::rank_transform(fm, 0), std::invalid_argument);
    CHECK_THROWS_AS(codec::rank_transform(fm, 33), std::invalid_argument);
}

TEST_CASE("rank preserves order through encode_fitness dispatch") {
    const pbge::FitnessMatrix fm = random_matrix(21, 16, 1);
    const pbge::FitnessMatrix direct = codec::decode_fitness(codec::rank_transform(fm, 8));
    const pbge::FitnessMatrix via =
        codec::decode_fitness(codec::encode_fitness(fm, CodecSpec::rank(8)));
    CHECK(direct.values == via.values);
    // Higher fitness never gets a lower score.
    for (std::size_t a = 0; a < 16; ++a) {
        for (std::size_t b = 0; b < 16; ++b) {
            if (fm.values[a] < fm.values[b]) CHECK(direct.values[a] <= direct.values[b]);
        }
    }
}

TEST_CASE("decode rejects corrupted payloads") {
    const pbge::FitnessMatrix fm = random_matrix(2, 8, 2);
    for (const CodecSpec spec : {CodecSpec::raw32(), CodecSpec::topk(2), CodecSpec::quant(4),
                                 CodecSpec::rank(4)}) {
        codec::EncodedFitness ef = codec::encode_fitness(fm, spec);
        ef.payload.pop_back();
        CHECK_THROWS_AS(codec::decode_fitness(ef), std::runtime_error);
        ef.payload.push_back(0);
        ef.payload.push_back(0);
        CHECK_THROWS_AS(codec::decode_fitness(ef), std::runtime_error);
    }
    // Out-of-range member index in a topk entry.
    codec::EncodedFitness ef = codec::encode_fitness(fm, CodecSpec::topk(2));
    ef.payload[4] = 0xFF;  // index byte of the first entry
    CHECK_THROWS_AS(codec::decode_fitness(ef), std::runtime_error);
}

TEST_CASE("encode_fitness validates dimensions") {
    pbge::FitnessMatrix fm = random_matrix(2, 8, 2);
    fm.values.pop_back();
    CHECK_THROWS_AS(codec::encode_fitness(fm, CodecSpec::raw32()), std::invalid_argument);
    pbge::FitnessMatrix empty;
    CHECK_THROWS_AS(codec::encode_fitness(empty, CodecSpec::raw32()), std::invalid_argument);
    pbge::FitnessMatrix huge = random_matrix(3, 2, 1);
    huge.population = 1 << 17;
    huge.values.assign(huge.population * 1, 0.0);
    CHECK_THROWS_AS(codec::encode_fitness(huge, CodecSpec::raw32()), std::invalid_argument);
}

}  // TEST_SUITE
