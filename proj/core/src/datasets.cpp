#include "evofed/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "evofed/detrng.hpp"

namespace evofed::datasets {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char raw[4];
    if (!in.read(reinterpret_cast<char*>(raw), 4))
        throw std::runtime_error("truncated IDX file: " + path);
    return (std::uint32_t(raw[0]) << 24) | (std::uint32_t(raw[1]) << 16) |
           (std::uint32_t(raw[2]) << 8) | std::uint32_t(raw[3]);
}

}  // namespace

void Dataset::validate() const {
    if (labels.empty()) throw std::invalid_argument("dataset is empty");
    if (inputs.size() != labels.size() * feature_dim)
        throw std::invalid_argument("dataset input/label row counts differ");
    if (classes == 0) throw std::invalid_argument("dataset has no classes");
    for (const auto label : labels)
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw std::invalid_argument("dataset label out of range");
    for (const double v : inputs)
        if (!std::isfinite(v)) throw std::invalid_argument("dataset has non-finite feature");
}

Dataset synth_blobs(std::uint64_t seed, std::size_t n, std::size_t dim,
                    std::size_t classes, double spread) {
    if (classes == 0 || dim == 0) throw std::invalid_argument("synth_blobs: classes and dim must be positive");
    if (n < classes) throw std::invalid_argument("synth_blobs: need at least one sample per class");
    if (spread < 0.0) throw std::invalid_argument("synth_blobs: spread must be non-negative");

    const std::uint64_t center_stream =
        detrng::tagged_seed(seed, detrng::StreamTag::data);
    const double min_separation = 0.15;

    // Seeded rejection sampling keeps centers apart; the threshold halves if
    // the box gets crowded.
    std::vector<std::vector<double>> centers;
    std::uint64_t counter = 0;
    double threshold = min_separation;
    std::size_t attempts = 0;
    while (centers.size() < classes) {
        std::vector<double> cand(dim);
        for (std::size_t j = 0; j < dim; ++j)
            cand[j] = 0.15 + 0.7 * detrng::uniform_unit(center_stream, counter++);
        bool ok = true;
        for (const auto& c : centers) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) d2 += (cand[j] - c[j]) * (cand[j] - c[j]);
            if (d2 < threshold * threshold) { ok = false; break; }
        }
        if (ok) centers.push_back(std::move(cand));
        if (++attempts > 64 * classes) { threshold *= 0.5; attempts = 0; }
    }

    Dataset ds;
    ds.feature_dim = dim;
    ds.classes = classes;
    ds.inputs.resize(n * dim);
    ds.labels.resize(n);
    const std::uint64_t noise_stream = detrng::mix_seed(center_stream, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % classes;
        ds.labels[i] = static_cast<std::int32_t>(label);
        for (std::size_t j = 0; j < dim; ++j) {
            double v = centers[label][j];
            if (spread > 0.0)
                v += spread * detrng::standard_normal(noise_stream, i * dim + j);
            ds.inputs[i * dim + j] = std::clamp(v, 0.0, 1.0);
        }
    }
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open IDX file: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open IDX file: " + labels_path);

    if (read_be32(img, images_path) != kImagesMagic)
        throw std::runtime_error("bad magic in IDX images file: " + images_path);
    if (read_be32(lab, labels_path) != kLabelsMagic)
        throw std::runtime_error("bad magic in IDX labels file: " + labels_path);

    const std::uint32_t n_images = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::uint32_t n_labels = read_be32(lab, labels_path);
    if (n_images != n_labels)
        throw std::runtime_error("IDX image/label count mismatch: " +
                                 std::to_string(n_images) + " images vs " +
                                 std::to_string(n_labels) + " labels");

    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<unsigned char> pixel_row(dim);
    Dataset ds;
    ds.feature_dim = dim;
    ds.inputs.resize(std::size_t(n_images) * dim);
    ds.labels.resize(n_images);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixel_row.data()), std::streamsize(dim)))
            throw std::runtime_error("truncated IDX file: " + images_path);
        for (std::size_t j = 0; j < dim; ++j)
            ds.inputs[std::size_t(i) * dim + j] = pixel_row[j] / 255.0;
        unsigned char label;
        if (!lab.read(reinterpret_cast<char*>(&label), 1))
            throw std::runtime_error("truncated IDX file: " + labels_path);
        ds.labels[i] = label;
    }
    std::int32_t max_label = 0;
    for (const auto l : ds.labels) max_label = std::max(max_label, l);
    ds.classes = std::size_t(max_label) + 1;
    return ds;
}

IdxImageInfo idx_image_info(const std::string& images_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open IDX file: " + images_path);
    if (read_be32(img, images_path) != kImagesMagic)
        throw std::runtime_error("bad magic in IDX images file: " + images_path);
    IdxImageInfo info;
    info.count = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    info.feature_dim = std::size_t(rows) * cols;
    return info;
}

std::size_t idx_label_classes(const std::string& labels_path) {
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open IDX file: " + labels_path);
    if (read_be32(lab, labels_path) != kLabelsMagic)
        throw std::runtime_error("bad magic in IDX labels file: " + labels_path);
    const std::uint32_t n = read_be32(lab, labels_path);
    unsigned char label = 0;
    unsigned char max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!lab.read(reinterpret_cast<char*>(&label), 1))
            throw std::runtime_error("truncated IDX file: " + labels_path);
        max_label = std::max(max_label, label);
    }
    return std::size_t(max_label) + 1;
}

namespace {

Dataset gather_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_dim = ds.feature_dim;
    out.classes = ds.classes;
    out.inputs.resize(rows.size() * ds.feature_dim);
    out.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t src = rows[r];
        std::copy_n(ds.inputs.begin() + src * ds.feature_dim, ds.feature_dim,
                    out.inputs.begin() + r * ds.feature_dim);
        out.labels[r] = ds.labels[src];
    }
    return out;
}

}  // namespace

SplitResult split_holdout(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    ds.validate();
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("test_fraction must be in [0,1)");
    const std::size_t n = ds.size();
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * double(n)));
    const auto perm = detrng::seeded_permutation(
        n, detrng::tagged_seed(seed, detrng::StreamTag::data));
    std::vector<std::size_t> test_rows(perm.begin(), perm.begin() + n_test);
    std::vector<std::size_t> train_rows(perm.begin() + n_test, perm.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    return SplitResult{gather_rows(ds, train_rows), gather_rows(ds, test_rows)};
}

ShardPlan noniid_split(const Dataset& ds, std::size_t clients,
                       std::size_t classes_per_client, std::uint64_t seed) {
    ds.validate();
    if (clients == 0) throw std::invalid_argument("noniid_split: need at least one client");
    if (classes_per_client == 0 || classes_per_client > ds.classes)
        throw std::invalid_argument("noniid_split: classes_per_client must be in [1, classes]");

    const std::size_t slots = clients * classes_per_client;
    const auto class_order = detrng::seeded_permutation(
        ds.classes, detrng::tagged_seed(seed, detrng::StreamTag::data));

    // Deal step q assigns class class_order[q % C] to slot q % S; slot s
    // belongs to client s % M. Every class lands somewhere, and with
    // S >= C each client holds at most c distinct classes.
    const std::size_t deals = std::max(slots, ds.classes);
    std::vector<std::vector<std::size_t>> owners(ds.classes);  // class -> slots
    for (std::size_t q = 0; q < deals; ++q)
        owners[class_order[q % ds.classes]].push_back(q % slots);

    std::vector<std::vector<std::size_t>> class_rows(ds.classes);
    for (std::size_t i = 0; i < ds.size(); ++i)
        class_rows[std::size_t(ds.labels[i])].push_back(i);

    ShardPlan plan;
    plan.shards = clients;
    plan.classes_per_client = classes_per_client;
    plan.assignment.resize(ds.size());
    for (std::size_t cls = 0; cls < ds.classes; ++cls) {
        const auto& rows = class_rows[cls];
        const auto& own = owners[cls];
        const std::size_t groups = own.size();
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t begin = rows.size() * g / groups;
            const std::size_t end = rows.size() * (g + 1) / groups;
            const auto shard = static_cast<std::uint32_t>(own[g] % clients);
            for (std::size_t r = begin; r < end; ++r)
                plan.assignment[rows[r]] = shard;
        }
    }
    return plan;
}

Dataset extract_shard(const Dataset& ds, const ShardPlan& plan, std::size_t shard) {
    if (plan.assignment.size() != ds.size())
        throw std::invalid_argument("shard plan does not match dataset");
    if (shard >= plan.shards) throw std::invalid_argument("shard index out of range");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < plan.assignment.size(); ++i)
        if (plan.assignment[i] == shard) rows.push_back(i);
    return gather_rows(ds, rows);
}

}  // namespace evofed::datasets
