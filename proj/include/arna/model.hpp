// 1D-CNN obstacle classifier operating on raw echo frames.
//
// Reference stack for 660-sample frames (shapes as channels x length):
//   Conv1D(16, k=3) + LeakyReLU  -> (16, 658)
//   MaxPool(2)                   -> (16, 329)
//   Conv1D(32, k=3) + LeakyReLU  -> (32, 327)
//   MaxPool(2)                   -> (32, 163)
//   Conv1D(64, k=3) + LeakyReLU  -> (64, 161)
//   MaxPool(2)                   -> (64, 80)
//   Flatten                      -> 5120
//   FC(16) + LeakyReLU           -> 16
//   FC(num_outputs)              -> 5
//   LogSoftmax
// 89,861 parameters with five outputs. Convolutions are valid (no padding),
// stride 1; pooling uses floor division and keeps the first index on ties;
// LeakyReLU slope is 0.01. Everything runs in 64-bit floats.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arna/dataset.hpp"
#include "arna/signal.hpp"

namespace arna {

enum class LayerKind : std::uint8_t {
    conv1d = 0,
    leaky_relu = 1,
    max_pool2 = 2,
    flatten = 3,
    dense = 4,
    log_softmax = 5,
};

struct LayerSpec {
    LayerKind kind = LayerKind::conv1d;
    int out_channels = 0;  // conv1d
    int kernel = 0;        // conv1d
    int units = 0;         // dense
};

struct TensorShape {
    int channels = 1;
    int length = 0;
    int count() const { return channels * length; }
    bool operator==(const TensorShape&) const = default;
};

struct ArchSpec {
    int input_length = kFrameLength;
    int num_outputs = 5;
    std::vector<LayerSpec> layers;

    // The reference classifier above.
    static ArchSpec radar_cnn(int input_length = kFrameLength, int num_outputs = 5);

    // Shape of the input followed by every layer's output; throws
    // std::invalid_argument when a layer cannot consume its input.
    std::vector<TensorShape> shape_trace() const;
    std::size_t parameter_count() const;
};

// Flat parameter vector. Layout per conv layer: weights [out][in][k] then
// biases [out]; per dense layer: weights [out][in] then biases [out]; layers
// in network order.
struct ModelParams {
    ArchSpec arch;
    double leaky_slope = 0.01;
    std::vector<double> values;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for each layer's weights and
// biases, drawn in layout order from one seeded stream.
ModelParams init_params(const ArchSpec& arch, std::uint64_t seed);

// Log-probabilities for one frame (length num_outputs, sums to 1 in
// probability space). Input length must match the architecture.
std::vector<double> forward(const ModelParams& params, const Signal& x);

// argmax of forward(); first index wins ties.
int predict(const ModelParams& params, const Signal& x);

// Forward pass plus a fingerprint of the discrete decisions taken along the
// way (LeakyReLU pre-activation signs, pooling argmax choices). Two inputs
// with equal fingerprints lie in the same locally-linear region of the
// network, which is where finite-difference gradient probes are meaningful.
struct ProbeResult {
    std::vector<double> log_probs;
    std::uint64_t pattern_hash = 0;
};
ProbeResult forward_probe(const ModelParams& params, const Signal& x);

// Negative log-likelihood of `label` plus d(loss)/d(input sample).
struct LossGrad {
    double loss = 0.0;
    std::vector<double> input_gradient;
};
LossGrad loss_and_input_gradient(const ModelParams& params, const Signal& x, int label);

// Training-path backward pass. Adds d(loss)/d(theta) into param_grad (same
// layout as ModelParams::values; caller zeroes) and, when non-null, writes
// d(loss)/d(input) into input_grad. Returns the sample loss.
double loss_and_gradients(const ModelParams& params, const Signal& x, int label,
                          std::vector<double>* param_grad, std::vector<double>* input_grad);

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 4;
    int epochs = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int eval_every = 10;  // epochs between held-out accuracy probes; 0 = never
    std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double eval_accuracy = -1.0;  // -1 when not measured that epoch
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

// Optional per-visit expansion: called with the current parameters every
// time a sample is about to contribute, returning the signals (at least one)
// actually trained on for that visit, all under the sample's label. Their
// gradients are summed per visit before entering the batch accumulator and
// the batch average is taken over expanded inputs, so an expansion returning
// {x, x} steps exactly like one returning {x}. Adversarial training expands
// each sample into itself plus its inner attack; null trains on the samples
// as they are.
using SampleExpand =
    std::function<std::vector<Signal>(const ModelParams&, const Signal&, int label)>;

// Adam + NLL minibatch training; batch gradients are averaged in index order
// so results are reproducible. Epochs are shuffled from the config seed.
// Throws config_error for inconsistent setup and std::runtime_error if the
// loss stops being finite.
TrainResult train(const Dataset& train_set, const Dataset* eval_set, const TrainConfig& cfg,
                  const ArchSpec& arch = ArchSpec::radar_cnn(),
                  const SampleExpand& expand = nullptr);

// Fraction of samples whose prediction matches the label.
double accuracy(const ModelParams& params, const Dataset& ds);

// Fraction misclassified; on an adversarially perturbed set this is the
// attack success rate (1 - accuracy by construction).
double success_rate(const ModelParams& params, const Dataset& perturbed);

// Versioned binary checkpoint; load(save(m)) is bit-exact. When `config` is
// given it is written as a `<path>.json` sidecar.
void save_model(const ModelParams& params, const std::filesystem::path& path,
                const TrainConfig* config = nullptr);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace arna
