#pragma once

// Lossy and lossless compressors for fitness matrices before transmission:
// float32 passthrough, top-k sparsification of mean-centered values, Q-bit
// affine min-max quantization, and rank bucketing — each with exact,
// closed-form byte accounting.

#include <cstdint>
#include <string>
#include <vector>

#include "evofed/pbge.hpp"

namespace evofed::codec {

enum class Scheme : std::uint8_t { raw32 = 0, topk = 1, quant = 2, rank = 3 };

struct CodecSpec {
    Scheme scheme = Scheme::raw32;
    std::uint16_t param = 0;  // k for topk, bit width for quant, group count for rank

    bool operator==(const CodecSpec&) const = default;

    static CodecSpec raw32() { return {Scheme::raw32, 0}; }
    static CodecSpec topk(std::uint16_t k) { return {Scheme::topk, k}; }
    static CodecSpec quant(std::uint16_t bits) { return {Scheme::quant, bits}; }
    static CodecSpec rank(std::uint16_t groups) { return {Scheme::rank, groups}; }
};

// "raw32" | "topk:K" | "quant:Q" | "rank:R"
CodecSpec codec_from_name(const std::string& text);
std::string codec_name(const CodecSpec& spec);

// A fitness matrix ready for the wire. The payload is the exact byte string
// a real transport would carry (little-endian, partition-columns in order,
// members in index order within each column).
struct EncodedFitness {
    CodecSpec spec;
    std::uint32_t round = 0;
    std::uint16_t population = 0;  // N
    std::uint16_t partitions = 0;  // K
    std::uint32_t weight = 1;      // local sample count b
    std::vector<std::uint8_t> payload;
};

// Exact payload size for a scheme:
//   raw32    -> 4*N*K
//   topk(k)  -> K*k*(4 + bytes needed for a member index)
//   quant(Q) -> K*(8 + ceil(N*Q/8))
//   rank(R)  -> K*ceil(N*ceil(log2 R)/8)
std::size_t byte_size(const CodecSpec& spec, std::size_t population,
                      std::size_t partitions);

EncodedFitness encode_fitness(const pbge::FitnessMatrix& fm, const CodecSpec& spec);
pbge::FitnessMatrix decode_fitness(const EncodedFitness& ef);

// Per column: values are mean-centered, the k largest by absolute centered
// value survive with their member indices (ties to the lower index); decode
// restores the kept centered values and zeros elsewhere.
EncodedFitness topk_sparsify(const pbge::FitnessMatrix& fm, std::size_t k);

// Per column: affine min-max quantization to 2^bits levels; the payload
// carries (min, max) as float32 plus N packed codes. A constant column maps
// every member to code 0 and dequantizes to min.
EncodedFitness quantize(const pbge::FitnessMatrix& fm, unsigned bits);
pbge::FitnessMatrix dequantize(const EncodedFitness& ef);

// Per column: members sorted ascending by (fitness, index) fall into R
// equal-size buckets; decode maps bucket g to the zero-mean ladder score
// g - (R-1)/2.
EncodedFitness rank_transform(const pbge::FitnessMatrix& fm, std::size_t groups);

}  // namespace evofed::codec
