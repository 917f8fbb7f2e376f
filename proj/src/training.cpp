#include "symml/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <numeric>

#include <omp.h>

#include "symml/errors.hpp"

namespace symml {

AdamState AdamState::fresh(std::size_t n, AdamHyper hyper)
{
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, hyper};
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads, double lr)
{
    if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
        throw ShapeMismatch("adam_step needs aligned parameter, gradient and moment vectors");
    const double rate = lr > 0.0 ? lr : s.hyper.lr;
    ++s.t;
    const double t = static_cast<double>(s.t);
    const double c1 = 1.0 - std::pow(s.hyper.beta1, t);
    const double c2 = 1.0 - std::pow(s.hyper.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        s.m[k] = s.hyper.beta1 * s.m[k] + (1.0 - s.hyper.beta1) * grads[k];
        s.v[k] = s.hyper.beta2 * s.v[k] + (1.0 - s.hyper.beta2) * grads[k] * grads[k];
        const double m_hat = s.m[k] / c1;
        const double v_hat = s.v[k] / c2;
        params[k] -= rate * m_hat / (std::sqrt(v_hat) + s.hyper.eps);
    }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr)
{
    if (params.size() != grads.size())
        throw ShapeMismatch("sgd_step needs aligned parameter and gradient vectors");
    for (std::size_t k = 0; k < params.size(); ++k)
        params[k] -= lr * grads[k];
}

std::string to_string(ModelKind k)
{
    switch (k) {
    case ModelKind::baseline: return "baseline";
    case ModelKind::hnn: return "hnn";
    case ModelKind::ahnn: return "ahnn";
    case ModelKind::asrnn: return "asrnn";
    case ModelKind::encoder: return "encoder";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name)
{
    for (auto k : {ModelKind::baseline, ModelKind::hnn, ModelKind::ahnn, ModelKind::asrnn, ModelKind::encoder})
        if (to_string(k) == name)
            return k;
    throw InvalidArgument("unknown model kind '" + name + "'");
}

std::string to_string(LrSchedule s)
{
    switch (s) {
    case LrSchedule::constant: return "constant";
    case LrSchedule::exponential: return "exponential";
    case LrSchedule::cosine: return "cosine";
    }
    return "?";
}

LrSchedule lr_schedule_from_string(const std::string& name)
{
    for (auto s : {LrSchedule::constant, LrSchedule::exponential, LrSchedule::cosine})
        if (to_string(s) == name)
            return s;
    throw InvalidArgument("unknown learning-rate schedule '" + name + "'");
}

void TrainConfig::validate() const
{
    if (epochs < 1)
        throw InvalidArgument("epochs must be >= 1");
    if (batch_size < 1)
        throw InvalidArgument("batch_size must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw InvalidArgument("validation fraction must lie in (0, 1)");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw InvalidArgument("learning rate must be positive");
    if (!(lr_decay > 0.0) || lr_min < 0.0)
        throw InvalidArgument("learning-rate schedule settings out of range");
    if (hidden.empty() || std::any_of(hidden.begin(), hidden.end(), [](int h) { return h < 1; }))
        throw InvalidArgument("hidden widths must be a non-empty list of positive sizes");
    if (param_channels < 0 || param_channels > 2)
        throw InvalidArgument("param_channels must be 0, 1 or 2");
    if (!(dt > 0.0))
        throw InvalidArgument("dt must be positive");
    switch (model_kind) {
    case ModelKind::hnn:
        if (param_channels != 0)
            throw InvalidArgument("hnn is the non-adaptable kind; use ahnn for parameter channels");
        break;
    case ModelKind::ahnn:
        if (param_channels == 0)
            throw InvalidArgument("ahnn needs at least one parameter channel");
        break;
    case ModelKind::asrnn:
        if (window_len < 2)
            throw InvalidArgument("recurrent windows need at least two states");
        break;
    case ModelKind::encoder:
        if (param_channels == 0)
            throw InvalidArgument("the encoder predicts one or two parameters");
        if (window_len < 1 || encoder_hidden < 1)
            throw InvalidArgument("encoder window and hidden size must be >= 1");
        break;
    case ModelKind::baseline: break;
    }
}

double TrainConfig::lr_at(std::size_t epoch) const
{
    switch (schedule) {
    case LrSchedule::constant: return lr;
    case LrSchedule::exponential: return lr * std::pow(lr_decay, static_cast<double>(epoch));
    case LrSchedule::cosine:
        return lr_min + 0.5 * (lr - lr_min) *
                            (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
    }
    return lr;
}

std::string TrainReport::to_csv() const
{
    std::string out = "epoch,train_loss,val_loss\n";
    char line[96];
    for (std::size_t e = 0; e < train_loss.size(); ++e) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", e + 1, train_loss[e], val_loss[e]);
        out += line;
    }
    return out;
}

void TrainReport::write_csv(const std::string& path) const
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw InvalidArgument("cannot write " + path);
    f << to_csv();
}

void set_worker_count(int n)
{
    omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
}

int worker_count() { return omp_get_max_threads(); }

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                              std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw InvalidArgument("split fraction must lie in (0, 1)");
    if (n < 2)
        throw EmptyDataset("need at least two samples to split, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{seed, std::uint64_t{1}};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(val)};
}

namespace {

// Samples per work unit. Fixed so the summation tree does not depend on the thread count.
constexpr std::size_t kChunk = 4;

struct BatchResult {
    std::vector<double> grad; // summed, not averaged
    std::vector<double> losses;
};

template <class Body>
void parallel_chunks(std::size_t n_chunks, Body&& body)
{
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
        try {
            body(static_cast<std::size_t>(c));
        } catch (...) {
#pragma omp critical
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
}

BatchResult batch_gradient(const Problem& problem, std::span<const std::size_t> batch, std::size_t n_params)
{
    const std::size_t n_chunks = (batch.size() + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> partial(n_chunks, std::vector<double>(n_params, 0.0));
    BatchResult r;
    r.losses.resize(batch.size());
    parallel_chunks(n_chunks, [&](std::size_t c) {
        const std::size_t end = std::min(batch.size(), (c + 1) * kChunk);
        for (std::size_t k = c * kChunk; k < end; ++k)
            r.losses[k] = problem.sample_loss_grad(batch[k], partial[c]);
    });
    r.grad.assign(n_params, 0.0);
    for (const auto& p : partial)
        for (std::size_t k = 0; k < n_params; ++k)
            r.grad[k] += p[k];
    return r;
}

double ordered_sum(std::span<const double> values)
{
    double s = 0.0;
    for (double v : values)
        s += v;
    return s;
}

} // namespace

double mean_loss(const Problem& problem, std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw EmptyBatch("mean_loss needs at least one sample");
    std::vector<double> losses(indices.size());
    const std::size_t n_chunks = (indices.size() + kChunk - 1) / kChunk;
    parallel_chunks(n_chunks, [&](std::size_t c) {
        const std::size_t end = std::min(indices.size(), (c + 1) * kChunk);
        for (std::size_t k = c * kChunk; k < end; ++k)
            losses[k] = problem.sample_loss(indices[k]);
    });
    return ordered_sum(losses) / static_cast<double>(indices.size());
}

TrainReport train(const TrainConfig& config, Problem& problem)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    auto [train_idx, val_idx] = split_indices(problem.sample_count(), config.validation_fraction, config.seed);

    std::vector<double> params = problem.params();
    AdamState adam = AdamState::fresh(params.size(), {config.lr, 0.9, 0.999, 1e-8});
    std::seed_seq seq{config.seed, std::uint64_t{2}};
    std::mt19937_64 rng(seq);

    TrainReport report;
    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.lr_at(epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const auto batch = std::span(order).subspan(b, std::min(config.batch_size, order.size() - b));
            BatchResult r = batch_gradient(problem, batch, params.size());
            const double scale = 1.0 / static_cast<double>(batch.size());
            double norm2 = 0.0;
            for (double& g : r.grad) {
                g *= scale;
                norm2 += g * g;
            }
            const double norm = std::sqrt(norm2);
            if (!std::isfinite(norm))
                throw DivergedTraining("non-finite gradient in epoch " + std::to_string(epoch + 1));
            if (config.clip_norm > 0.0 && norm > config.clip_norm)
                for (double& g : r.grad)
                    g *= config.clip_norm / norm;
            adam_step(adam, params, r.grad, lr);
            problem.set_params(params);
            epoch_loss += ordered_sum(r.losses);
            for (double l : r.losses)
                report.diverged_windows += problem.diverged(l) ? 1 : 0;
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        const double val = mean_loss(problem, val_idx);
        if (!std::isfinite(val))
            throw DivergedTraining("validation loss is not finite after epoch " + std::to_string(epoch + 1));
        report.val_loss.push_back(val);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

class AsrnnProblem final : public Problem {
public:
    AsrnnProblem(SeparableModel m, std::vector<RolloutWindow> w, double dt)
        : model(std::move(m)), windows(std::move(w)), dt_(dt) {}
    std::size_t sample_count() const override { return windows.size(); }
    std::vector<double> params() const override { return model.flat_params(); }
    void set_params(std::span<const double> p) override { model.set_flat_params(p); }
    double sample_loss(std::size_t i) const override
    {
        return srnn_loss(model, windows[i].states, windows[i].params, dt_).loss;
    }
    double sample_loss_grad(std::size_t i, std::span<double> grad) const override
    {
        return srnn_loss_grad(model, windows[i].states, windows[i].params, dt_, grad).loss;
    }
    bool diverged(double loss) const override { return loss >= kDivergencePenalty; }

    SeparableModel model;
    std::vector<RolloutWindow> windows;

private:
    double dt_;
};

class HnnProblem final : public Problem {
public:
    HnnProblem(HnnModel m, std::vector<DerivativeSample> s) : model(std::move(m)), samples(std::move(s)) {}
    std::size_t sample_count() const override { return samples.size(); }
    std::vector<double> params() const override { return model.net.params; }
    void set_params(std::span<const double> p) override { model.net.params.assign(p.begin(), p.end()); }
    double sample_loss(std::size_t i) const override { return hnn_loss(model, std::span(&samples[i], 1)); }
    double sample_loss_grad(std::size_t i, std::span<double> grad) const override
    {
        return hnn_sample_loss_grad(model, samples[i], grad);
    }

    HnnModel model;
    std::vector<DerivativeSample> samples;
};

class BaselineProblem final : public Problem {
public:
    BaselineProblem(BaselineModel m, std::vector<DerivativeSample> s) : model(std::move(m)), samples(std::move(s)) {}
    std::size_t sample_count() const override { return samples.size(); }
    std::vector<double> params() const override { return model.net.params; }
    void set_params(std::span<const double> p) override { model.net.params.assign(p.begin(), p.end()); }
    double sample_loss(std::size_t i) const override { return baseline_loss(model, std::span(&samples[i], 1)); }
    double sample_loss_grad(std::size_t i, std::span<double> grad) const override
    {
        return baseline_sample_loss_grad(model, samples[i], grad);
    }

    BaselineModel model;
    std::vector<DerivativeSample> samples;
};

class EncoderProblem final : public Problem {
public:
    EncoderProblem(EncoderModel m, std::vector<EncoderSample> s) : model(std::move(m)), samples(std::move(s)) {}
    std::size_t sample_count() const override { return samples.size(); }
    std::vector<double> params() const override { return model.flat_params(); }
    void set_params(std::span<const double> p) override { model.set_flat_params(p); }
    double sample_loss(std::size_t i) const override { return encoder_loss(model, std::span(&samples[i], 1)); }
    double sample_loss_grad(std::size_t i, std::span<double> grad) const override
    {
        return encoder_sample_loss_grad(model, samples[i], grad);
    }

    EncoderModel model;
    std::vector<EncoderSample> samples;
};

void expect_kind(const TrainConfig& config, std::initializer_list<ModelKind> kinds)
{
    if (std::find(kinds.begin(), kinds.end(), config.model_kind) == kinds.end())
        throw InvalidArgument("config model_kind '" + to_string(config.model_kind) + "' does not fit this trainer");
}

} // namespace

Trained<SeparableModel> train_asrnn(const TrainConfig& config, std::vector<RolloutWindow> windows)
{
    expect_kind(config, {ModelKind::asrnn});
    AsrnnProblem p(SeparableModel::create(config.hidden, config.param_channels, config.fixed_kinetic, config.seed),
                   std::move(windows), config.dt);
    TrainReport r = train(config, p);
    return {std::move(p.model), std::move(r)};
}

Trained<HnnModel> train_hnn(const TrainConfig& config, std::vector<DerivativeSample> samples)
{
    expect_kind(config, {ModelKind::hnn, ModelKind::ahnn});
    HnnProblem p(HnnModel::create(config.hidden, config.param_channels, config.seed), std::move(samples));
    TrainReport r = train(config, p);
    return {std::move(p.model), std::move(r)};
}

Trained<BaselineModel> train_baseline(const TrainConfig& config, std::vector<DerivativeSample> samples)
{
    expect_kind(config, {ModelKind::baseline});
    BaselineProblem p(BaselineModel::create(config.hidden, config.param_channels, config.seed), std::move(samples));
    TrainReport r = train(config, p);
    return {std::move(p.model), std::move(r)};
}

Trained<EncoderModel> train_encoder(const TrainConfig& config, std::vector<EncoderSample> samples)
{
    expect_kind(config, {ModelKind::encoder});
    EncoderProblem p(EncoderModel::create(config.encoder_hidden, config.param_channels, config.window_len, config.seed),
                     std::move(samples));
    TrainReport r = train(config, p);
    return {std::move(p.model), std::move(r)};
}

} // namespace symml
