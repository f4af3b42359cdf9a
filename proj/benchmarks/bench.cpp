// Microbenchmarks for the hot paths: perturbation regeneration, fitness
// encoding/decoding, codec serialization, and a full federated round.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "evofed/baselines.hpp"
#include "evofed/federation.hpp"

using namespace evofed;

namespace {

nn::ModelParams seeded_model(std::size_t dim, std::uint64_t seed) {
    nn::ArchSpec arch;
    arch.layers.push_back({dim - 1, 1, nn::Activation::identity});
    nn::ModelParams model;
    model.arch = arch;
    model.values.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        model.values[j] = detrng::standard_normal(seed, j);
    }
    return model;
}

void BM_perturbation_pair(benchmark::State& state) {
    const std::size_t dim = std::size_t(state.range(0));
    const auto set = detrng::make_set(42, 64, dim, 0.2);
    detrng::Vec eps;
    std::size_t pair = 0;
    for (auto _ : state) {
        detrng::perturbation_pair(set, pair % (set.population / 2), eps);
        benchmark::DoNotOptimize(eps.data());
        ++pair;
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(dim));
}

void BM_encode(benchmark::State& state) {
    const std::size_t dim = std::size_t(state.range(0));
    const std::size_t population = std::size_t(state.range(1));
    const nn::ModelParams theta = seeded_model(dim, 1);
    nn::ModelParams target = theta;
    for (std::size_t j = 0; j < dim; ++j) {
        target.values[j] += 0.01 * detrng::standard_normal(2, j);
    }
    const auto set = detrng::make_set(3, population, dim, 0.2);
    const auto layout = pbge::make_layout(dim, 4);
    for (auto _ : state) {
        const pbge::FitnessMatrix fm = pbge::encode(theta, target, set, layout, 1, 0);
        benchmark::DoNotOptimize(fm.values.data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) *
                            std::int64_t(dim * population));
}

void BM_decode(benchmark::State& state) {
    const std::size_t dim = std::size_t(state.range(0));
    const std::size_t population = std::size_t(state.range(1));
    const auto set = detrng::make_set(4, population, dim, 0.2);
    const auto layout = pbge::make_layout(dim, 4);
    std::vector<double> fitness(population * layout.partition_count());
    for (std::size_t i = 0; i < fitness.size(); ++i) {
        fitness[i] = detrng::standard_normal(5, i);
    }
    for (auto _ : state) {
        const pbge::Vec update =
            pbge::decode_update(fitness, population, set, layout, 0.05);
        benchmark::DoNotOptimize(update.data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) *
                            std::int64_t(dim * population));
}

void BM_codec_roundtrip(benchmark::State& state) {
    const codec::CodecSpec specs[] = {
        codec::CodecSpec::raw32(), codec::CodecSpec::topk(8),
        codec::CodecSpec::quant(8), codec::CodecSpec::rank(16)};
    const codec::CodecSpec spec = specs[state.range(0)];
    pbge::FitnessMatrix fm;
    fm.population = 128;
    fm.partitions = 4;
    fm.weight = 32;
    fm.values.resize(fm.population * fm.partitions);
    for (std::size_t i = 0; i < fm.values.size(); ++i) {
        fm.values[i] = detrng::standard_normal(6, i);
    }
    for (auto _ : state) {
        const pbge::FitnessMatrix back =
            codec::decode_fitness(codec::encode_fitness(fm, spec));
        benchmark::DoNotOptimize(back.values.data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) *
                            std::int64_t(fm.values.size()));
}

federation::RunSpec bench_spec(std::size_t threads) {
    federation::RunSpec spec;
    spec.method = federation::Method::evofed;
    const datasets::Dataset all = datasets::synth_blobs(7, 1000, 2, 4, 0.08);
    const datasets::SplitResult split = datasets::split_holdout(all, 0.25, 8);
    spec.train = split.train;
    spec.test = split.test;
    spec.clients = 5;
    spec.plan = datasets::noniid_split(spec.train, spec.clients, 2, 9);
    spec.arch = nn::make_mlp(2, {24}, 4, nn::Activation::relu);
    spec.optimizer = nn::OptimizerCfg{0.2, 0.9, 0.0, 2, 32};
    spec.seed = 10;
    spec.rounds = 20;
    spec.eval_interval = 1000;  // no evaluation inside the timed loop
    spec.population = 64;
    spec.sigma = 0.2;
    spec.alpha = 0.5;
    spec.partitions = 4;
    spec.codec = codec::CodecSpec::raw32();
    spec.threads = threads;
    return spec;
}

void BM_federated_rounds(benchmark::State& state) {
    const federation::RunSpec spec = bench_spec(std::size_t(state.range(0)));
    for (auto _ : state) {
        const federation::RunResult result = federation::run_rounds(spec);
        benchmark::DoNotOptimize(result.final_model.values.data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) *
                            std::int64_t(spec.rounds));
}

}  // namespace

BENCHMARK(BM_perturbation_pair)->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK(BM_encode)->Args({1000, 64})->Args({10000, 64})->Args({10000, 256});
BENCHMARK(BM_decode)->Args({1000, 64})->Args({10000, 64})->Args({10000, 256});
BENCHMARK(BM_codec_roundtrip)->DenseRange(0, 3)->ArgNames({"scheme"});
BENCHMARK(BM_federated_rounds)->Arg(1)->Arg(4)->ArgNames({"threads"})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
