#pragma once

// Shared test scaffolding: seeded random vectors/models, tiny datasets, and
// relative-error helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "evofed/datasets.hpp"
#include "evofed/detrng.hpp"
#include "evofed/federation.hpp"
#include "evofed/nn.hpp"

namespace helpers {

inline std::vector<double> random_vec(std::uint64_t seed, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = scale * evofed::detrng::standard_normal(seed, j);
    return v;
}

// A tiny MLP with seeded weights; layer widths chosen from the dimension.
inline evofed::nn::ModelParams random_model(std::uint64_t seed, std::size_t dim) {
    // Park the values in a 1-layer arch of matching size: in*out + out = dim.
    // Use a bias-only match: in = dim-1 features to 1 output.
    evofed::nn::ArchSpec arch;
    arch.layers.push_back({dim - 1, 1, evofed::nn::Activation::identity});
    evofed::nn::ModelParams model{arch, random_vec(seed, dim)};
    return model;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

inline double l2(const std::vector<double>& a) {
    double s = 0.0;
    for (const double v : a) s += v * v;
    return std::sqrt(s);
}

inline double l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

// ||a - b|| / max(||b||, floor)
inline double rel_l2_err(const std::vector<double>& a, const std::vector<double>& b,
                         double floor = 1e-300) {
    return l2_diff(a, b) / std::max(l2(b), floor);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

// Small seeded blob dataset for trainer/engine tests.
inline evofed::datasets::Dataset tiny_blobs(std::uint64_t seed, std::size_t n = 120,
                                            std::size_t classes = 3, std::size_t dim = 2) {
    return evofed::datasets::synth_blobs(seed, n, dim, classes, 0.05);
}

// A ready-to-run client over a shard of `data`.
inline evofed::federation::ClientState make_client(
    std::uint32_t id, const evofed::datasets::Dataset& data,
    const evofed::datasets::ShardPlan& plan, const evofed::nn::ModelParams& model,
    const evofed::nn::OptimizerCfg& optimizer, std::uint64_t base_seed,
    std::uint64_t next_round = 0) {
    evofed::federation::ClientState c;
    c.id = id;
    c.model = model;
    c.shard = evofed::datasets::extract_shard(data, plan, id);
    c.optimizer = optimizer;
    c.schedule = evofed::detrng::SeedSchedule{base_seed};
    c.next_round = next_round;
    return c;
}

}  // namespace helpers
