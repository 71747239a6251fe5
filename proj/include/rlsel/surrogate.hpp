#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlsel/binio.hpp"
#include "rlsel/datahub.hpp"
#include "rlsel/numkit.hpp"

namespace rlsel::surrogate {

using numkit::Matrix;

/// Fully connected ReLU network. weights[l] is out x in, biases[l] has
/// length out. ReLU after every layer except the last (logits).
struct MlpModel {
    std::vector<std::size_t> dims;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    /// Weights and biases ~ U(-1/sqrt(in), 1/sqrt(in)).
    static MlpModel init(std::vector<std::size_t> dims, std::uint64_t seed);
    static MlpModel zeros(std::vector<std::size_t> dims);

    std::size_t n_layers() const { return weights.size(); }
    std::size_t d_in() const { return dims.front(); }
    std::size_t d_feat() const { return dims[dims.size() - 2]; }
    std::size_t d_out() const { return dims.back(); }
    std::size_t n_params() const;
    bool all_finite() const;

    /// Parameters flattened layer by layer, W row-major then b.
    std::vector<double> flat() const;
    void set_flat(std::span<const double> p);

    bool operator==(const MlpModel&) const = default;
};

/// Same shapes as the model's parameters.
struct Grads {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;

    static Grads zeros_like(const MlpModel& m);
    std::vector<double> flat() const;
    void add_scaled(const Grads& other, double s);
};

/// Activations kept for backprop. acts[0] is the input batch, acts[l+1] the
/// output of layer l (post-ReLU for hidden layers, raw logits for the last).
struct ForwardCache {
    std::vector<Matrix> acts;
    const Matrix& logits() const { return acts.back(); }
    const Matrix& features() const { return acts[acts.size() - 2]; }
};

ForwardCache forward_cache(const MlpModel& m, const Matrix& x);

/// Returns (features, logits). Features are the penultimate activations, or
/// the inputs themselves for a single-layer model.
std::pair<Matrix, Matrix> forward(const MlpModel& m, const Matrix& x);

/// Backprop of an upstream gradient on the logits. When d_input is non-null
/// it receives the gradient with respect to the input batch.
Grads backward(const MlpModel& m, const ForwardCache& cache, const Matrix& dlogits, Matrix* d_input = nullptr);

struct LossGrads {
    double loss = 0.0;
    Grads grads;
};

/// Mean cross-entropy over the batch and its exact gradient.
LossGrads loss_and_grads(const MlpModel& m, const Matrix& x, std::span<const std::uint32_t> labels);

/// Gradient of each sample's own loss, replayed on singleton batches.
std::vector<Grads> per_sample_grads(const MlpModel& m, const Matrix& x, std::span<const std::uint32_t> labels);

enum class LrSchedule { constant, cosine };

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrSchedule lr_schedule = LrSchedule::constant;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Learning rate in effect at a given epoch.
double lr_at(const TrainConfig& cfg, std::size_t epoch);

/// Momentum buffers; empty until the first step.
struct SgdState {
    Grads velocity;
};

/// v = momentum * v + (g + wd * w); w -= lr_t * v.
void sgd_step(MlpModel& m, const Grads& g, SgdState& state, const TrainConfig& cfg, std::size_t epoch);

struct FeatureBank {
    Matrix features;
    std::size_t epoch = 0;
};

FeatureBank extract_feature_bank(const MlpModel& m, const datahub::LabeledDataset& ds, std::size_t epoch = 0);

std::vector<std::uint32_t> predict(const MlpModel& m, const Matrix& x);
double accuracy(const MlpModel& m, const datahub::LabeledDataset& ds);

/// Minibatch training over shuffled passes; returns the mean loss per epoch.
std::vector<double> train(MlpModel& m, const datahub::LabeledDataset& ds, const TrainConfig& cfg);

/// Checkpoint: magic "RLSM", version u32, layer count u64, dims u64 each,
/// then W (row-major) and b for every layer as f64, FNV-1a u64 trailer.
void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(const std::string& path);
void write_model(binio::Writer& w, const MlpModel& m);
MlpModel read_model(binio::Reader& r);

}  // namespace rlsel::surrogate
