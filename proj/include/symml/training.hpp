#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "symml/lstm.hpp"
#include "symml/models.hpp"

namespace symml {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
    AdamHyper hyper;

    static AdamState fresh(std::size_t n, AdamHyper hyper = {});
};

// Bias-corrected Adam. `lr` overrides hyper.lr when positive (used by schedules).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr = -1.0);
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

enum class ModelKind { baseline, hnn, ahnn, asrnn, encoder };
std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& name);

enum class LrSchedule { constant, exponential, cosine };
std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& name);

struct TrainConfig {
    ModelKind model_kind = ModelKind::asrnn;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::size_t window_len = 11;  // rollout windows (asrnn) or encoder windows
    double lr = 1e-3;
    LrSchedule schedule = LrSchedule::constant;
    double lr_decay = 0.98;       // per-epoch factor for the exponential schedule
    double lr_min = 0.0;          // floor of the cosine schedule
    std::uint64_t seed = 0;
    double validation_fraction = 0.2;
    double clip_norm = 10.0;      // <= 0 disables clipping
    std::vector<int> hidden{256}; // hidden widths of the dense nets
    int param_channels = 1;       // 0 for the non-adaptable kinds
    bool fixed_kinetic = false;
    double dt = 0.1;              // rollout step of the recurrent model
    int encoder_hidden = 9;

    void validate() const;
    double lr_at(std::size_t epoch) const; // epoch is zero-based
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t diverged_windows = 0; // rollout windows hitting the divergence penalty, summed over epochs
    double wall_seconds = 0.0;
    std::string checkpoint;

    // Columns epoch,train_loss,val_loss with round-trip precision.
    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

// Index split: a seeded shuffle, then the first round(n * fraction) indices (clamped to
// [1, n - 1]) become the validation set. Both halves are returned sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                              std::uint64_t seed);

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& data, double fraction, std::uint64_t seed)
{
    auto [train_idx, val_idx] = split_indices(data.size(), fraction, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (auto i : train_idx)
        out.first.push_back(data[i]);
    for (auto i : val_idx)
        out.second.push_back(data[i]);
    return out;
}

// A trainable model plus its samples. Evaluation is const and may run concurrently;
// set_params is only called between minibatches.
class Problem {
public:
    virtual ~Problem() = default;
    virtual std::size_t sample_count() const = 0;
    virtual std::vector<double> params() const = 0;
    virtual void set_params(std::span<const double> params) = 0;
    virtual double sample_loss(std::size_t index) const = 0;
    // Adds the sample gradient into grad and returns the sample loss.
    virtual double sample_loss_grad(std::size_t index, std::span<double> grad) const = 0;
    // True when the loss at `index` hit the divergence penalty.
    virtual bool diverged(double loss) const { (void)loss; return false; }
};

// Upper bound on worker threads for the data-parallel loops (<= 0 restores the default).
void set_worker_count(int n);
int worker_count();

// Shuffled minibatch Adam over the training split; validation loss after every epoch.
// Gradients are reduced in a fixed chunk order, so results do not depend on the thread count.
TrainReport train(const TrainConfig& config, Problem& problem);

// Mean sample loss over the given indices with the same fixed-order reduction.
double mean_loss(const Problem& problem, std::span<const std::size_t> indices);

template <class Model>
struct Trained {
    Model model;
    TrainReport report;
};

Trained<SeparableModel> train_asrnn(const TrainConfig& config, std::vector<RolloutWindow> windows);
Trained<HnnModel> train_hnn(const TrainConfig& config, std::vector<DerivativeSample> samples);
Trained<BaselineModel> train_baseline(const TrainConfig& config, std::vector<DerivativeSample> samples);
Trained<EncoderModel> train_encoder(const TrainConfig& config, std::vector<EncoderSample> samples);

} // namespace symml
