#pragma once

// Synthetic classification data, IDX-format image loading, and non-IID
// client sharding.

#include <cstdint>
#include <string>
#include <vector>

namespace evofed::datasets {

struct Dataset {
    std::size_t feature_dim = 0;
    std::size_t classes = 0;
    std::vector<double> inputs;        // n x feature_dim, row-major, in [0,1]
    std::vector<std::int32_t> labels;  // n, each in [0, classes)

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

// C Gaussian clusters with seeded, well-separated centers. Labels are dealt
// round-robin, so class counts differ by at most one.
Dataset synth_blobs(std::uint64_t seed, std::size_t n, std::size_t dim,
                    std::size_t classes, double spread);

// MNIST-style IDX pair (big-endian headers, magic 0x803 / 0x801). Pixels are
// scaled to [0,1]. Bad magic, truncation, and image/label count mismatch are
// distinct errors.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

struct IdxImageInfo {
    std::size_t count = 0;
    std::size_t feature_dim = 0;  // rows * cols
};

// Header-only peek at an IDX images file; no pixel data is read.
IdxImageInfo idx_image_info(const std::string& images_path);

// Classes (max label + 1) in an IDX labels file.
std::size_t idx_label_classes(const std::string& labels_path);

struct SplitResult {
    Dataset train;
    Dataset test;
};

// Seeded holdout split; test gets round(n * test_fraction) samples.
SplitResult split_holdout(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct ShardPlan {
    std::size_t shards = 0;                  // M
    std::size_t classes_per_client = 0;      // c
    std::vector<std::uint32_t> assignment;   // sample index -> shard
};

// Deals classes round-robin to M*c client slots in a seeded order and splits
// each class's samples evenly among its owners. Shards always tile the
// dataset; each client sees at most c distinct labels whenever M*c >= C.
ShardPlan noniid_split(const Dataset& ds, std::size_t clients,
                       std::size_t classes_per_client, std::uint64_t seed);

Dataset extract_shard(const Dataset& ds, const ShardPlan& plan, std::size_t shard);

}  // namespace evofed::datasets
