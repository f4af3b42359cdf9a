#include "evofed/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "evofed/detrng.hpp"

namespace evofed::nn {

namespace {

double apply_act(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::identity: return z;
    }
    return z;
}

// Derivative expressed through the already computed activation value.
double act_grad(Activation a, double value) {
    switch (a) {
        case Activation::relu: return value > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - value * value;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + name);
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "?";
}

void ArchSpec::validate() const {
    if (layers.empty()) throw std::invalid_argument("architecture has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].in == 0 || layers[l].out == 0)
            throw std::invalid_argument("layer dimensions must be positive");
        if (l > 0 && layers[l].in != layers[l - 1].out)
            throw std::invalid_argument("layer dimensions do not chain");
    }
}

std::size_t ArchSpec::param_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) total += layer.in * layer.out + layer.out;
    return total;
}

std::size_t ArchSpec::input_dim() const { return layers.front().in; }
std::size_t ArchSpec::output_dim() const { return layers.back().out; }

ArchSpec make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                  std::size_t classes, Activation act) {
    ArchSpec arch;
    std::size_t prev = input_dim;
    for (const std::size_t width : hidden) {
        arch.layers.push_back({prev, width, act});
        prev = width;
    }
    arch.layers.push_back({prev, classes, Activation::identity});
    arch.validate();
    return arch;
}

std::uint64_t model_hash(const ModelParams& model) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    auto feed = [&h](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ull;
        }
    };
    for (const auto& layer : model.arch.layers) {
        const std::uint64_t dims[2] = {layer.in, layer.out};
        feed(dims, sizeof dims);
        const auto act = static_cast<std::uint8_t>(layer.act);
        feed(&act, 1);
    }
    feed(model.values.data(), model.values.size() * sizeof(double));
    return h;
}

void OptimizerCfg::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning_rate must be finite and >= 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (local_steps == 0) throw std::invalid_argument("local_steps must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
}

Batch make_batch(const datasets::Dataset& ds, std::span<const std::size_t> rows) {
    Batch b;
    b.rows = rows.size();
    b.dim = ds.feature_dim;
    b.inputs.resize(b.rows * b.dim);
    b.labels.resize(b.rows);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(ds.inputs.begin() + rows[r] * ds.feature_dim, ds.feature_dim,
                    b.inputs.begin() + r * b.dim);
        b.labels[r] = ds.labels[rows[r]];
    }
    return b;
}

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();
    ModelParams model;
    model.arch = arch;
    model.values.assign(arch.param_count(), 0.0);
    const std::uint64_t stream = detrng::tagged_seed(seed, detrng::StreamTag::model_init);
    std::size_t offset = 0;
    for (const auto& layer : arch.layers) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
        const std::size_t n_weights = layer.in * layer.out;
        for (std::size_t w = 0; w < n_weights; ++w)
            model.values[offset + w] = scale * detrng::standard_normal(stream, offset + w);
        offset += n_weights + layer.out;  // biases stay zero
    }
    return model;
}

namespace {

struct ForwardPass {
    // activations[0] is the input batch; activations[l+1] is layer l output.
    std::vector<Vec> activations;
};

ForwardPass forward(const ModelParams& model, const Batch& batch) {
    const auto& arch = model.arch;
    if (batch.dim != arch.input_dim())
        throw std::invalid_argument("batch feature dim " + std::to_string(batch.dim) +
                                    " does not match model input dim " +
                                    std::to_string(arch.input_dim()));
    if (batch.rows == 0) throw std::invalid_argument("batch is empty");

    ForwardPass fp;
    fp.activations.reserve(arch.layers.size() + 1);
    fp.activations.push_back(batch.inputs);
    std::size_t offset = 0;
    for (const auto& layer : arch.layers) {
        const Vec& prev = fp.activations.back();
        Vec next(batch.rows * layer.out);
        const double* weights = model.values.data() + offset;
        const double* bias = weights + layer.in * layer.out;
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* row = prev.data() + r * layer.in;
            double* out_row = next.data() + r * layer.out;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double* w_row = weights + o * layer.in;
                double z = bias[o];
                for (std::size_t i = 0; i < layer.in; ++i) z += w_row[i] * row[i];
                out_row[o] = apply_act(layer.act, z);
            }
        }
        fp.activations.push_back(std::move(next));
        offset += layer.in * layer.out + layer.out;
    }
    return fp;
}

// Loss of one logits row plus, optionally, d(loss)/d(logits) into grad_row.
double softmax_ce_row(const double* logits, std::size_t classes, std::int32_t label,
                      double* grad_row) {
    double max_z = logits[0];
    for (std::size_t c = 1; c < classes; ++c) max_z = std::max(max_z, logits[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(logits[c] - max_z);
    const double lse = max_z + std::log(sum);
    if (grad_row) {
        for (std::size_t c = 0; c < classes; ++c) {
            double p = std::exp(logits[c] - max_z) / sum;
            if (static_cast<std::size_t>(label) == c) p -= 1.0;
            grad_row[c] = p;
        }
    }
    return lse - logits[label];
}

void check_labels(const Batch& batch, std::size_t classes) {
    for (const auto label : batch.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw std::invalid_argument("batch label out of range for model output dim " +
                                        std::to_string(classes));
}

}  // namespace

LossGrad loss_and_grad(const ModelParams& model, const Batch& batch) {
    const auto& arch = model.arch;
    check_labels(batch, arch.output_dim());
    ForwardPass fp = forward(model, batch);

    const std::size_t classes = arch.output_dim();
    const double inv_rows = 1.0 / static_cast<double>(batch.rows);
    const Vec& logits = fp.activations.back();

    LossGrad result;
    result.grad.assign(model.values.size(), 0.0);
    Vec delta(batch.rows * classes);
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < batch.rows; ++r) {
        loss_sum += softmax_ce_row(logits.data() + r * classes, classes,
                                   batch.labels[r], delta.data() + r * classes);
    }
    result.loss = loss_sum * inv_rows;
    for (double& v : delta) v *= inv_rows;

    // The last layer's activation still sits between the loss and z.
    std::size_t offset = model.values.size();
    for (std::size_t l = arch.layers.size(); l-- > 0;) {
        const auto& layer = arch.layers[l];
        offset -= layer.in * layer.out + layer.out;
        const Vec& out_act = fp.activations[l + 1];
        const Vec& in_act = fp.activations[l];
        for (std::size_t idx = 0; idx < delta.size(); ++idx)
            delta[idx] *= act_grad(layer.act, out_act[idx]);

        double* w_grad = result.grad.data() + offset;
        double* b_grad = w_grad + layer.in * layer.out;
        const double* weights = model.values.data() + offset;
        Vec prev_delta(l > 0 ? batch.rows * layer.in : 0, 0.0);
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* d_row = delta.data() + r * layer.out;
            const double* a_row = in_act.data() + r * layer.in;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = d_row[o];
                double* w_row = w_grad + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) w_row[i] += d * a_row[i];
                b_grad[o] += d;
            }
            if (l > 0) {
                double* p_row = prev_delta.data() + r * layer.in;
                for (std::size_t o = 0; o < layer.out; ++o) {
                    const double d = d_row[o];
                    const double* w_row = weights + o * layer.in;
                    for (std::size_t i = 0; i < layer.in; ++i) p_row[i] += w_row[i] * d;
                }
            }
        }
        delta = std::move(prev_delta);
    }
    return result;
}

double loss_only(const ModelParams& model, const Batch& batch) {
    const auto& arch = model.arch;
    check_labels(batch, arch.output_dim());
    ForwardPass fp = forward(model, batch);
    const std::size_t classes = arch.output_dim();
    const Vec& logits = fp.activations.back();
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < batch.rows; ++r)
        loss_sum += softmax_ce_row(logits.data() + r * classes, classes,
                                   batch.labels[r], nullptr);
    return loss_sum / static_cast<double>(batch.rows);
}

void sgd_step(ModelParams& model, Vec& velocity, const Batch& batch,
              const OptimizerCfg& cfg) {
    if (velocity.size() != model.values.size())
        throw std::invalid_argument("velocity size does not match model");
    LossGrad lg = loss_and_grad(model, batch);
    for (std::size_t i = 0; i < model.values.size(); ++i) {
        const double g = lg.grad[i] + cfg.weight_decay * model.values[i];
        velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * g;
        model.values[i] += velocity[i];
    }
}

MinibatchSchedule::MinibatchSchedule(std::size_t shard_size, std::size_t batch_size,
                                     std::uint64_t seed)
    : shard_size_(shard_size), batch_size_(std::min(batch_size, shard_size)), seed_(seed) {
    if (shard_size == 0) throw std::invalid_argument("shard is empty");
}

std::vector<std::size_t> MinibatchSchedule::batch_indices(std::size_t step) const {
    const std::size_t per_epoch = (shard_size_ + batch_size_ - 1) / batch_size_;
    const std::size_t epoch = step / per_epoch;
    const std::size_t slot = step % per_epoch;
    const auto perm = detrng::seeded_permutation(
        shard_size_, detrng::mix_seed(
                         detrng::tagged_seed(seed_, detrng::StreamTag::minibatch), epoch));
    const std::size_t begin = slot * batch_size_;
    const std::size_t end = std::min(begin + batch_size_, shard_size_);
    return std::vector<std::size_t>(perm.begin() + begin, perm.begin() + end);
}

ModelParams local_train(const ModelParams& model, const datasets::Dataset& shard,
                        const OptimizerCfg& cfg, std::uint64_t seed) {
    cfg.validate();
    if (shard.size() == 0) throw std::invalid_argument("local_train: shard is empty");
    ModelParams trained = model;
    Vec velocity(model.values.size(), 0.0);
    MinibatchSchedule schedule(shard.size(), cfg.batch_size, seed);
    for (std::size_t step = 0; step < cfg.local_steps; ++step) {
        const auto rows = schedule.batch_indices(step);
        const Batch batch = make_batch(shard, rows);
        sgd_step(trained, velocity, batch, cfg);
    }
    return trained;
}

EvalResult evaluate(const ModelParams& model, const datasets::Dataset& testset) {
    if (testset.size() == 0) throw std::invalid_argument("evaluate: testset is empty");
    const std::size_t classes = model.arch.output_dim();
    const std::size_t chunk = 512;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t begin = 0; begin < testset.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, testset.size());
        rows.resize(end - begin);
        for (std::size_t i = begin; i < end; ++i) rows[i - begin] = i;
        const Batch batch = make_batch(testset, rows);
        check_labels(batch, classes);
        ForwardPass fp = forward(model, batch);
        const Vec& logits = fp.activations.back();
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* row = logits.data() + r * classes;
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c)
                if (row[c] > row[best]) best = c;
            if (static_cast<std::int32_t>(best) == batch.labels[r]) ++correct;
            loss_sum += softmax_ce_row(row, classes, batch.labels[r], nullptr);
        }
    }
    EvalResult res;
    res.accuracy = static_cast<double>(correct) / static_cast<double>(testset.size());
    res.mean_loss = loss_sum / static_cast<double>(testset.size());
    return res;
}

}  // namespace evofed::nn
