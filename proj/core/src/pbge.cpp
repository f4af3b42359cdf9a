#include "evofed/pbge.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace evofed::pbge {

namespace {

void check_dims(const detrng::PerturbationSet& set, const PartitionLayout& layout,
                std::size_t dim) {
    if (layout.dim() != dim)
        throw std::invalid_argument("partition layout covers " +
                                    std::to_string(layout.dim()) +
                                    " parameters, model has " + std::to_string(dim));
    if (set.dim != dim)
        throw std::invalid_argument("perturbation dim " + std::to_string(set.dim) +
                                    " does not match model dim " + std::to_string(dim));
}

}  // namespace

PartitionLayout make_layout(std::size_t total, std::size_t partitions) {
    if (total == 0) throw std::invalid_argument("cannot partition an empty vector");
    if (partitions == 0 || partitions > total)
        throw std::invalid_argument("partition count must be in [1, " +
                                    std::to_string(total) + "], got " +
                                    std::to_string(partitions));
    PartitionLayout layout;
    layout.bounds.resize(partitions + 1);
    for (std::size_t k = 0; k <= partitions; ++k)
        layout.bounds[k] = total * k / partitions;
    return layout;
}

FitnessMatrix encode(const nn::ModelParams& theta, const nn::ModelParams& theta_prime,
                     const detrng::PerturbationSet& set, const PartitionLayout& layout,
                     std::uint32_t weight, std::uint32_t round) {
    if (theta.arch != theta_prime.arch)
        throw std::invalid_argument("encode: models have different architectures");
    if (theta.values.size() != theta_prime.values.size())
        throw std::invalid_argument("encode: model sizes differ");
    check_dims(set, layout, theta.values.size());
    if (weight == 0) throw std::invalid_argument("encode: weight must be >= 1");

    const std::size_t dim = theta.values.size();
    const std::size_t pop = set.population;
    const std::size_t parts = layout.partition_count();

    FitnessMatrix fm;
    fm.round = round;
    fm.population = pop;
    fm.partitions = parts;
    fm.weight = weight;
    fm.values.assign(pop * parts, 0.0);

    Vec diff(dim);  // theta_prime - theta
    for (std::size_t j = 0; j < dim; ++j)
        diff[j] = theta_prime.values[j] - theta.values[j];

    const double sigma = set.sigma;
    Vec eps(dim);
    for (std::size_t pair = 0; pair < pop / 2; ++pair) {
        detrng::perturbation_pair(set, pair, eps);
        const std::size_t even = 2 * pair;
        for (std::size_t k = 0; k < parts; ++k) {
            double dist_even = 0.0;  // member uses +eps: target - perturbed = diff - sigma*eps
            double dist_odd = 0.0;   // mirrored member uses -eps
            for (std::size_t j = layout.begin(k); j < layout.end(k); ++j) {
                const double a = diff[j] - sigma * eps[j];
                const double b = diff[j] + sigma * eps[j];
                dist_even += a * a;
                dist_odd += b * b;
            }
            fm.at(even, k) = -dist_even;
            fm.at(even + 1, k) = -dist_odd;
        }
    }
    return fm;
}

Vec decode_update(std::span<const double> fitness, std::size_t population,
                  const detrng::PerturbationSet& set, const PartitionLayout& layout,
                  double alpha) {
    if (population != set.population)
        throw std::invalid_argument("decode: fitness population " +
                                    std::to_string(population) +
                                    " does not match perturbation set population " +
                                    std::to_string(set.population));
    const std::size_t parts = layout.partition_count();
    if (fitness.size() != population * parts)
        throw std::invalid_argument("decode: fitness has " +
                                    std::to_string(fitness.size()) +
                                    " values, expected " +
                                    std::to_string(population * parts));
    if (layout.dim() != set.dim)
        throw std::invalid_argument("decode: layout dim does not match perturbation dim");

    const std::size_t dim = set.dim;
    Vec update(dim, 0.0);
    Vec eps(dim);
    for (std::size_t pair = 0; pair < population / 2; ++pair) {
        detrng::perturbation_pair(set, pair, eps);
        const std::size_t even = 2 * pair;
        for (std::size_t k = 0; k < parts; ++k) {
            // Mirrored fold: f_even*eps + f_odd*(-eps) = (f_even - f_odd)*eps.
            const double w = fitness[even * parts + k] - fitness[(even + 1) * parts + k];
            for (std::size_t j = layout.begin(k); j < layout.end(k); ++j)
                update[j] += w * eps[j];
        }
    }
    const double scale = alpha / (static_cast<double>(population) * set.sigma);
    for (double& v : update) v *= scale;
    return update;
}

nn::ModelParams decode(const nn::ModelParams& theta, std::span<const double> fitness,
                       std::size_t population, const detrng::PerturbationSet& set,
                       const PartitionLayout& layout, double alpha) {
    check_dims(set, layout, theta.values.size());
    const Vec update = decode_update(fitness, population, set, layout, alpha);
    nn::ModelParams next = theta;
    for (std::size_t j = 0; j < update.size(); ++j) next.values[j] += update[j];
    return next;
}

nn::ModelParams decode(const nn::ModelParams& theta, const FitnessMatrix& fitness,
                       const detrng::PerturbationSet& set, const PartitionLayout& layout,
                       double alpha) {
    return decode(theta, fitness.values, fitness.population, set, layout, alpha);
}

ReconstructionQuality reconstruction_quality(const nn::ModelParams& theta,
                                             const nn::ModelParams& theta_prime,
                                             const detrng::PerturbationSet& set,
                                             const PartitionLayout& layout, double alpha) {
    const std::size_t dim = theta.values.size();
    check_dims(set, layout, dim);

    double delta_sq = 0.0;
    Vec target(dim);  // theta_prime - theta
    for (std::size_t j = 0; j < dim; ++j) {
        target[j] = theta_prime.values[j] - theta.values[j];
        delta_sq += target[j] * target[j];
    }
    if (delta_sq == 0.0)
        throw std::invalid_argument(
            "reconstruction_quality: models are identical, direction undefined");

    const FitnessMatrix fm = encode(theta, theta_prime, set, layout);
    const Vec dir = decode_update(fm.values, fm.population, set, layout, alpha);

    double dir_sq = 0.0;
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        dir_sq += dir[j] * dir[j];
        dot += dir[j] * target[j];
    }

    ReconstructionQuality q;
    const double norms = std::sqrt(dir_sq) * std::sqrt(delta_sq);
    q.cosine = norms > 0.0 ? dot / norms : 0.0;
    const double ref = 2.0 * std::abs(alpha) * std::sqrt(delta_sq);
    q.gain = ref > 0.0 ? std::sqrt(dir_sq) / ref : 0.0;
    return q;
}

}  // namespace evofed::pbge
