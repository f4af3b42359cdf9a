#include "evofed/fitness_codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace evofed::codec {

namespace {

// Bits needed to address values in [0, n); 0 when there is nothing to choose.
unsigned bits_for(std::size_t n) {
    return n <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n - 1));
}

std::size_t index_bytes(std::size_t population) {
    return (bits_for(population) + 7) / 8;
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<std::uint8_t>(bits));
    out.push_back(static_cast<std::uint8_t>(bits >> 8));
    out.push_back(static_cast<std::uint8_t>(bits >> 16));
    out.push_back(static_cast<std::uint8_t>(bits >> 24));
}

float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

void put_index(std::vector<std::uint8_t>& out, std::size_t value, std::size_t bytes) {
    for (std::size_t b = 0; b < bytes; ++b)
        out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

std::size_t get_index(const std::uint8_t* p, std::size_t bytes) {
    std::size_t value = 0;
    for (std::size_t b = 0; b < bytes; ++b)
        value |= static_cast<std::size_t>(p[b]) << (8 * b);
    return value;
}

// LSB-first bit packing of fixed-width codes.
class BitWriter {
  public:
    explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void write(std::uint32_t code, unsigned bits) {
        for (unsigned b = 0; b < bits; ++b) {
            if (fill_ == 0) {
                out_.push_back(0);
                fill_ = 8;
            }
            const unsigned bit = (code >> b) & 1u;
            out_.back() |= static_cast<std::uint8_t>(bit << (8 - fill_));
            --fill_;
        }
    }

    void flush() { fill_ = 0; }  // next write starts a fresh byte

  private:
    std::vector<std::uint8_t>& out_;
    unsigned fill_ = 0;  // bits still free in the last byte
};

class BitReader {
  public:
    BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t read(unsigned bits) {
        std::uint32_t code = 0;
        for (unsigned b = 0; b < bits; ++b) {
            const std::size_t byte = pos_ / 8;
            if (byte >= size_) throw std::runtime_error("fitness payload truncated");
            const unsigned bit = (data_[byte] >> (pos_ % 8)) & 1u;
            code |= bit << b;
            ++pos_;
        }
        return code;
    }

    void align() { pos_ = (pos_ + 7) / 8 * 8; }

  private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

void check_param(const CodecSpec& spec, std::size_t population) {
    switch (spec.scheme) {
        case Scheme::raw32:
            break;
        case Scheme::topk:
            if (spec.param < 1 || spec.param > population)
                throw std::invalid_argument("topk keep count must be in [1, N], got " +
                                            std::to_string(spec.param));
            break;
        case Scheme::quant:
            if (spec.param < 1 || spec.param > 16)
                throw std::invalid_argument("quantizer bit width must be in [1, 16], got " +
                                            std::to_string(spec.param));
            break;
        case Scheme::rank:
            if (spec.param < 1 || spec.param > population)
                throw std::invalid_argument("rank group count must be in [1, N], got " +
                                            std::to_string(spec.param));
            break;
    }
}

EncodedFitness make_shell(const pbge::FitnessMatrix& fm, const CodecSpec& spec) {
    if (fm.population == 0 || fm.partitions == 0)
        throw std::invalid_argument("cannot encode an empty fitness matrix");
    if (fm.values.size() != fm.population * fm.partitions)
        throw std::invalid_argument("fitness matrix dims disagree with its values");
    if (fm.population > 0xFFFF || fm.partitions > 0xFFFF)
        throw std::invalid_argument("fitness dims exceed wire-format range (u16)");
    check_param(spec, fm.population);
    EncodedFitness ef;
    ef.spec = spec;
    ef.round = fm.round;
    ef.population = static_cast<std::uint16_t>(fm.population);
    ef.partitions = static_cast<std::uint16_t>(fm.partitions);
    ef.weight = fm.weight;
    ef.payload.reserve(byte_size(spec, fm.population, fm.partitions));
    return ef;
}

pbge::FitnessMatrix blank_matrix(const EncodedFitness& ef) {
    pbge::FitnessMatrix fm;
    fm.round = ef.round;
    fm.population = ef.population;
    fm.partitions = ef.partitions;
    fm.weight = ef.weight;
    fm.values.assign(fm.population * fm.partitions, 0.0);
    return fm;
}

void check_payload(const EncodedFitness& ef) {
    if (ef.population == 0 || ef.partitions == 0)
        throw std::invalid_argument("encoded fitness has empty dims");
    const std::size_t want = byte_size(ef.spec, ef.population, ef.partitions);
    if (ef.payload.size() != want)
        throw std::runtime_error("encoded fitness payload is " +
                                 std::to_string(ef.payload.size()) + " bytes, expected " +
                                 std::to_string(want));
}

}  // namespace

CodecSpec codec_from_name(const std::string& text) {
    if (text == "raw32") return CodecSpec::raw32();
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const std::string head = text.substr(0, colon);
        const std::string tail = text.substr(colon + 1);
        unsigned long value = 0;
        try {
            std::size_t used = 0;
            value = std::stoul(tail, &used);
            if (used != tail.size()) throw std::invalid_argument(tail);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad codec parameter in '" + text + "'");
        }
        if (value == 0 || value > 0xFFFF)
            throw std::invalid_argument("codec parameter out of range in '" + text + "'");
        const auto param = static_cast<std::uint16_t>(value);
        if (head == "topk") return CodecSpec::topk(param);
        if (head == "quant") return CodecSpec::quant(param);
        if (head == "rank") return CodecSpec::rank(param);
    }
    throw std::invalid_argument("unknown codec '" + text +
                                "' (expected raw32, topk:K, quant:Q, or rank:R)");
}

std::string codec_name(const CodecSpec& spec) {
    switch (spec.scheme) {
        case Scheme::raw32: return "raw32";
        case Scheme::topk: return "topk:" + std::to_string(spec.param);
        case Scheme::quant: return "quant:" + std::to_string(spec.param);
        case Scheme::rank: return "rank:" + std::to_string(spec.param);
    }
    return "?";
}

std::size_t byte_size(const CodecSpec& spec, std::size_t population,
                      std::size_t partitions) {
    switch (spec.scheme) {
        case Scheme::raw32:
            return 4 * population * partitions;
        case Scheme::topk:
            return partitions * spec.param * (4 + index_bytes(population));
        case Scheme::quant:
            return partitions * (8 + (population * spec.param + 7) / 8);
        case Scheme::rank:
            return partitions * ((population * bits_for(spec.param) + 7) / 8);
    }
    throw std::invalid_argument("unknown codec scheme");
}

EncodedFitness encode_fitness(const pbge::FitnessMatrix& fm, const CodecSpec& spec) {
    switch (spec.scheme) {
        case Scheme::raw32: {
            EncodedFitness ef = make_shell(fm, spec);
            for (std::size_t k = 0; k < fm.partitions; ++k)
                for (std::size_t i = 0; i < fm.population; ++i)
                    put_f32(ef.payload, static_cast<float>(fm.at(i, k)));
            check_payload(ef);
            return ef;
        }
        case Scheme::topk: return topk_sparsify(fm, spec.param);
        case Scheme::quant: return quantize(fm, spec.param);
        case Scheme::rank: return rank_transform(fm, spec.param);
    }
    throw std::invalid_argument("unknown codec scheme");
}

pbge::FitnessMatrix decode_fitness(const EncodedFitness& ef) {
    check_payload(ef);
    const std::size_t pop = ef.population;
    const std::size_t parts = ef.partitions;
    pbge::FitnessMatrix fm = blank_matrix(ef);

    switch (ef.spec.scheme) {
        case Scheme::raw32: {
            const std::uint8_t* p = ef.payload.data();
            for (std::size_t k = 0; k < parts; ++k)
                for (std::size_t i = 0; i < pop; ++i, p += 4)
                    fm.at(i, k) = static_cast<double>(get_f32(p));
            return fm;
        }
        case Scheme::topk: {
            const std::size_t idx_bytes = index_bytes(pop);
            const std::size_t entry = 4 + idx_bytes;
            const std::uint8_t* p = ef.payload.data();
            for (std::size_t k = 0; k < parts; ++k) {
                for (std::size_t e = 0; e < ef.spec.param; ++e, p += entry) {
                    const float value = get_f32(p);
                    const std::size_t member = get_index(p + 4, idx_bytes);
                    if (member >= pop)
                        throw std::runtime_error("topk payload member index out of range");
                    fm.at(member, k) = static_cast<double>(value);
                }
            }
            return fm;
        }
        case Scheme::quant: return dequantize(ef);
        case Scheme::rank: {
            const unsigned bits = bits_for(ef.spec.param);
            const double center = (static_cast<double>(ef.spec.param) - 1.0) / 2.0;
            BitReader reader(ef.payload.data(), ef.payload.size());
            for (std::size_t k = 0; k < parts; ++k) {
                for (std::size_t i = 0; i < pop; ++i) {
                    const std::uint32_t g = bits > 0 ? reader.read(bits) : 0;
                    if (g >= ef.spec.param)
                        throw std::runtime_error("rank payload group out of range");
                    fm.at(i, k) = static_cast<double>(g) - center;
                }
                reader.align();
            }
            return fm;
        }
    }
    throw std::invalid_argument("unknown codec scheme");
}

EncodedFitness topk_sparsify(const pbge::FitnessMatrix& fm, std::size_t k) {
    if (k < 1 || k > fm.population)
        throw std::invalid_argument("topk keep count must be in [1, N], got " +
                                    std::to_string(k));
    EncodedFitness ef = make_shell(fm, CodecSpec::topk(static_cast<std::uint16_t>(k)));
    const std::size_t pop = fm.population;
    const std::size_t idx_bytes = index_bytes(pop);

    std::vector<double> centered(pop);
    std::vector<std::size_t> order(pop);
    std::vector<std::size_t> kept;
    for (std::size_t col = 0; col < fm.partitions; ++col) {
        double mean = 0.0;
        for (std::size_t i = 0; i < pop; ++i) mean += fm.at(i, col);
        mean /= static_cast<double>(pop);
        for (std::size_t i = 0; i < pop; ++i) centered[i] = fm.at(i, col) - mean;

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ma = std::abs(centered[a]);
            const double mb = std::abs(centered[b]);
            if (ma != mb) return ma > mb;
            return a < b;
        });
        kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(kept.begin(), kept.end());
        for (const std::size_t member : kept) {
            put_f32(ef.payload, static_cast<float>(centered[member]));
            put_index(ef.payload, member, idx_bytes);
        }
    }
    check_payload(ef);
    return ef;
}

EncodedFitness quantize(const pbge::FitnessMatrix& fm, unsigned bits) {
    if (bits < 1 || bits > 16)
        throw std::invalid_argument("quantizer bit width must be in [1, 16], got " +
                                    std::to_string(bits));
    EncodedFitness ef = make_shell(fm, CodecSpec::quant(static_cast<std::uint16_t>(bits)));
    const std::size_t pop = fm.population;
    const std::uint32_t levels = 1u << bits;
    BitWriter writer(ef.payload);

    for (std::size_t col = 0; col < fm.partitions; ++col) {
        double lo = fm.at(0, col);
        double hi = lo;
        for (std::size_t i = 1; i < pop; ++i) {
            lo = std::min(lo, fm.at(i, col));
            hi = std::max(hi, fm.at(i, col));
        }
        // The wire carries float32 endpoints; codes are chosen against those
        // exact endpoints so encode and decode agree.
        const float lo32 = static_cast<float>(lo);
        const float hi32 = static_cast<float>(hi);
        put_f32(ef.payload, lo32);
        put_f32(ef.payload, hi32);
        const double span = static_cast<double>(hi32) - static_cast<double>(lo32);
        for (std::size_t i = 0; i < pop; ++i) {
            std::uint32_t code = 0;
            if (span > 0.0) {
                const double t =
                    (fm.at(i, col) - static_cast<double>(lo32)) / span *
                    static_cast<double>(levels - 1);
                const long long rounded = std::llround(t);
                code = static_cast<std::uint32_t>(
                    std::clamp<long long>(rounded, 0, levels - 1));
            }
            writer.write(code, bits);
        }
        writer.flush();
    }
    check_payload(ef);
    return ef;
}

pbge::FitnessMatrix dequantize(const EncodedFitness& ef) {
    if (ef.spec.scheme != Scheme::quant)
        throw std::invalid_argument("dequantize: encoded fitness is not quantized");
    check_payload(ef);
    const unsigned bits = ef.spec.param;
    const std::uint32_t levels = 1u << bits;
    const std::size_t pop = ef.population;
    const std::size_t col_bytes = 8 + (pop * bits + 7) / 8;
    pbge::FitnessMatrix fm = blank_matrix(ef);

    for (std::size_t col = 0; col < ef.partitions; ++col) {
        const std::uint8_t* base = ef.payload.data() + col * col_bytes;
        const double lo = static_cast<double>(get_f32(base));
        const double hi = static_cast<double>(get_f32(base + 4));
        const double step = hi > lo ? (hi - lo) / static_cast<double>(levels - 1) : 0.0;
        BitReader reader(base + 8, col_bytes - 8);
        for (std::size_t i = 0; i < pop; ++i) {
            const std::uint32_t code = reader.read(bits);
            fm.at(i, col) = lo + static_cast<double>(code) * step;
        }
    }
    return fm;
}

EncodedFitness rank_transform(const pbge::FitnessMatrix& fm, std::size_t groups) {
    if (groups < 1 || groups > fm.population)
        throw std::invalid_argument("rank group count must be in [1, N], got " +
                                    std::to_string(groups));
    EncodedFitness ef =
        make_shell(fm, CodecSpec::rank(static_cast<std::uint16_t>(groups)));
    const std::size_t pop = fm.population;
    const unsigned bits = bits_for(groups);
    BitWriter writer(ef.payload);

    std::vector<std::size_t> order(pop);
    std::vector<std::uint32_t> group_of(pop);
    for (std::size_t col = 0; col < fm.partitions; ++col) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double fa = fm.at(a, col);
            const double fb = fm.at(b, col);
            if (fa != fb) return fa < fb;
            return a < b;
        });
        for (std::size_t pos = 0; pos < pop; ++pos)
            group_of[order[pos]] = static_cast<std::uint32_t>(pos * groups / pop);
        for (std::size_t i = 0; i < pop; ++i)
            if (bits > 0) writer.write(group_of[i], bits);
        writer.flush();
    }
    check_payload(ef);
    return ef;
}

}  // namespace evofed::codec
