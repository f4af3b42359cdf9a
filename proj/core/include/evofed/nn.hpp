#pragma once

// Minimal dense networks over one flat parameter vector: deterministic
// initialization, analytic softmax cross-entropy gradients, and a seeded
// SGD-with-momentum local trainer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evofed/datasets.hpp"

namespace evofed::nn {

using Vec = std::vector<double>;

enum class Activation : std::uint8_t { relu, tanh, identity };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::identity;

    bool operator==(const DenseLayer&) const = default;
};

// Layer dims must chain; the loss is softmax cross-entropy on the last
// layer's output.
struct ArchSpec {
    std::vector<DenseLayer> layers;

    bool operator==(const ArchSpec&) const = default;

    void validate() const;
    std::size_t param_count() const;  // sum of in*out + out
    std::size_t input_dim() const;
    std::size_t output_dim() const;
};

// Builds input -> hidden... -> classes with `act` on hidden layers and an
// identity final layer.
ArchSpec make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                  std::size_t classes, Activation act);

// The flat theta of every update rule. Layout is layer-major: layer 0
// weights (row-major out x in), layer 0 biases, layer 1 weights, ...
struct ModelParams {
    ArchSpec arch;
    Vec values;
};

std::uint64_t model_hash(const ModelParams& model);

struct OptimizerCfg {
    double learning_rate = 0.01;
    double momentum = 0.0;      // [0,1)
    double weight_decay = 0.0;  // >= 0
    std::size_t local_steps = 1;  // E gradient steps per round
    std::size_t batch_size = 32;

    void validate() const;
};

struct Batch {
    std::size_t rows = 0;
    std::size_t dim = 0;
    Vec inputs;                       // rows x dim, row-major
    std::vector<std::int32_t> labels; // each in [0, classes)
};

Batch make_batch(const datasets::Dataset& ds, std::span<const std::size_t> rows);

// Deterministic: same (arch, seed) gives bit-identical values. Weights are
// zero-mean normal scaled by 1/sqrt(in); biases zero.
ModelParams init_model(const ArchSpec& arch, std::uint64_t seed);

struct LossGrad {
    double loss = 0.0;
    Vec grad;  // length |theta|
};

// Exact analytic gradient of mean softmax cross-entropy over the batch.
LossGrad loss_and_grad(const ModelParams& model, const Batch& batch);

double loss_only(const ModelParams& model, const Batch& batch);

// One heavy-ball step: g += wd*theta; v = m*v - lr*g; theta += v.
void sgd_step(ModelParams& model, Vec& velocity, const Batch& batch,
              const OptimizerCfg& cfg);

// Seeded minibatch order: the shard is re-shuffled once per epoch and dealt
// in consecutive slices. Pure function of (shard size, batch size, seed).
class MinibatchSchedule {
  public:
    MinibatchSchedule(std::size_t shard_size, std::size_t batch_size, std::uint64_t seed);
    std::vector<std::size_t> batch_indices(std::size_t step) const;

  private:
    std::size_t shard_size_;
    std::size_t batch_size_;
    std::uint64_t seed_;
};

// E steps of seeded SGD with momentum; the input model is untouched.
// Velocity starts at zero, so this equals E sequential sgd_step calls with
// the same schedule and a threaded velocity buffer.
ModelParams local_train(const ModelParams& model, const datasets::Dataset& shard,
                        const OptimizerCfg& cfg, std::uint64_t seed);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

// Accuracy is the argmax-correct fraction (ties resolved to the lowest
// class index).
EvalResult evaluate(const ModelParams& model, const datasets::Dataset& testset);

}  // namespace evofed::nn
