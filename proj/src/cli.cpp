#include "symml/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "symml/analysis.hpp"
#include "symml/checkpoint.hpp"
#include "symml/config.hpp"
#include "symml/data.hpp"
#include "symml/errors.hpp"
#include "symml/training.hpp"

#ifndef SYMML_VERSION
#define SYMML_VERSION "unknown"
#endif

namespace symml::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr double kTruthDt = 0.001;

// Options shared by every subcommand.
struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    int jobs = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c, bool with_config)
{
    if (with_config) {
        sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
    }
    sub->add_option("--seed", c.seed, "RNG seed (falls back to the config, then $SYMPLECTIC_ML_SEED, then 0)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
}

template <class F>
auto as_usage(F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        throw UsageError(e.what());
    } catch (const json::exception& e) {
        throw UsageError(e.what());
    }
}

double number_arg(const std::string& text, const std::string& name)
{
    try {
        return parse_number(text);
    } catch (const Error&) {
        throw UsageError("--" + name + " expects a number or fraction, got '" + text + "'");
    }
}

json load_config(const Common& c)
{
    json j = json::object();
    if (!c.config_path.empty())
        j = as_usage([&] { return read_json_file(c.config_path); });
    if (!j.is_object())
        throw UsageError("config file must hold a JSON object");
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("--set expects key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        json parsed = json::parse(value, nullptr, false);
        j[key] = parsed.is_discarded() ? json(value) : parsed;
    }
    return j;
}

std::uint64_t env_seed()
{
    const char* v = std::getenv(kSeedEnv);
    if (v == nullptr || *v == '\0')
        return 0;
    try {
        std::size_t used = 0;
        const unsigned long long s = std::stoull(v, &used);
        if (used != std::strlen(v))
            throw std::invalid_argument(v);
        return s;
    } catch (const std::exception&) {
        throw UsageError(std::string(kSeedEnv) + " must be an unsigned integer, got '" + v + "'");
    }
}

std::uint64_t resolve_seed(const Common& c, const json& config)
{
    if (c.seed)
        return *c.seed;
    if (config.contains("seed"))
        return as_usage([&] { return config.at("seed").get<std::uint64_t>(); });
    return env_seed();
}

// Output location, metadata header and config hash of one invocation.
class Run {
public:
    Run(std::string command, const Common& c, std::uint64_t seed, json effective)
        : command_(std::move(command)), out_(c.out), seed_(seed), effective_(std::move(effective))
    {
        effective_["command"] = command_;
        effective_["seed"] = seed_;
        hash_ = config_hash(effective_);
        set_worker_count(c.jobs);
        fs::create_directories(out_);
    }

    std::uint64_t seed() const { return seed_; }
    const std::string& hash() const { return hash_; }

    std::string header() const
    {
        return "# symml " + std::string(SYMML_VERSION) + "\n# command: " + command_ + "\n# seed: " +
               std::to_string(seed_) + "\n# config_hash: " + hash_ + "\n";
    }

    json metadata() const
    {
        return {{"version", SYMML_VERSION}, {"command", command_}, {"seed", seed_}, {"config_hash", hash_}};
    }

    // Plain file names only, so nothing lands outside the output directory.
    std::string path(const std::string& name) const
    {
        if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
            throw UsageError("output name '" + name + "' must be a plain file name");
        return (out_ / name).string();
    }

    void write_text(const std::string& name, const std::string& body) const
    {
        std::ofstream f(path(name), std::ios::binary);
        f << body;
        if (!f)
            throw InvalidArgument("failed writing " + path(name));
    }

    void write_csv(const std::string& name, const std::string& body) const { write_text(name, header() + body); }

    void write_run_record() const
    {
        write_text("run_" + command_ + ".json", json{{"metadata", metadata()}, {"config", effective_}}.dump(1) + "\n");
    }

private:
    std::string command_;
    fs::path out_;
    std::uint64_t seed_;
    json effective_;
    std::string hash_;
};

PotentialParams params_arg(const std::string& alpha, const std::string& beta)
{
    const double a = number_arg(alpha, "alpha");
    return {a, beta.empty() ? a : number_arg(beta, "beta")};
}

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{seed, stream};
    return std::mt19937_64(seq);
}

std::size_t coarse_factor_for(double dt)
{
    const double f = dt / kTruthDt;
    const auto n = static_cast<std::size_t>(std::llround(f));
    if (n == 0 || std::abs(f - static_cast<double>(n)) > 1e-9 * f)
        throw UsageError("--dt must be a positive multiple of " + format_double(kTruthDt));
    return n;
}

// Fine leapfrog on the analytic field, sampled every dt.
Trajectory ground_truth(const PhaseState& s0, const PotentialParams& p, double dt, std::size_t steps)
{
    const std::size_t factor = coarse_factor_for(dt);
    return coarse_grain(integrate(s0, kTruthDt, steps * factor, henon_heiles_field(), p), factor);
}

// A trained dynamics model loaded from a checkpoint.
struct LoadedModel {
    std::string kind;
    double dt = 0.1;
    std::function<Trajectory(const PhaseState&, const PotentialParams&, std::size_t)> rollout;
    std::optional<DerivativeField> field; // separable models only
    std::function<PhaseState(const PhaseState&, const PotentialParams&)> step;
};

double checkpoint_dt(const Checkpoint& c)
{
    if (c.training_config.contains("dt"))
        return number_from_json(c.training_config.at("dt"), "dt");
    return 0.1;
}

LoadedModel load_model(const std::string& path, std::optional<double> dt_override)
{
    const Checkpoint ck = load_checkpoint(path);
    LoadedModel m;
    m.kind = ck.model_kind;
    m.dt = dt_override ? *dt_override : checkpoint_dt(ck);
    const double dt = m.dt;
    if (ck.model_kind == "asrnn") {
        auto model = std::make_shared<SeparableModel>(separable_from_checkpoint(ck));
        m.field = network_field(*model);
        m.rollout = [model, dt](const PhaseState& s, const PotentialParams& p, std::size_t n) {
            return asrnn_rollout(*model, s, p, dt, n);
        };
    } else if (ck.model_kind == "hnn" || ck.model_kind == "ahnn") {
        auto model = std::make_shared<HnnModel>(hnn_from_checkpoint(ck));
        m.rollout = [model, dt](const PhaseState& s, const PotentialParams& p, std::size_t n) {
            return hnn_rollout(*model, s, p, dt, n);
        };
    } else if (ck.model_kind == "baseline") {
        auto model = std::make_shared<BaselineModel>(baseline_from_checkpoint(ck));
        m.rollout = [model, dt](const PhaseState& s, const PotentialParams& p, std::size_t n) {
            return baseline_rollout(*model, s, p, dt, n);
        };
    } else {
        throw UsageError("checkpoint " + path + " holds a '" + ck.model_kind + "' model, not a dynamics model");
    }
    auto roll = m.rollout;
    m.step = [roll](const PhaseState& s, const PotentialParams& p) { return roll(s, p, 1)[1]; };
    return m;
}

EncoderModel load_encoder(const std::string& path)
{
    const Checkpoint ck = load_checkpoint(path);
    if (ck.model_kind != "lstm-encoder")
        throw UsageError("checkpoint " + path + " holds a '" + ck.model_kind + "' model, not an encoder");
    return encoder_from_checkpoint(ck);
}

int dataset_param_count(const DatasetManifest& data)
{
    for (const auto& r : data.records)
        if (r.params.alpha != r.params.beta)
            return 2;
    return 1;
}

// ---- generate ----------------------------------------------------------------

struct GenerateArgs {
    Common common;
};

int run_generate(const GenerateArgs& a, std::ostream& out)
{
    json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    cfg["seed"] = seed;
    const GenerationConfig gc = as_usage([&] { return generation_config_from_json(cfg); });
    Run run("generate", a.common, seed, to_json(gc));

    DatasetManifest data = generate_dataset(gc);
    const json meta = run.metadata();
    for (const auto& [k, v] : meta.items())
        data.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    save_dataset(data, run.path("dataset.smlds"));

    std::ostringstream csv;
    csv << "alpha,beta,energy,trajectories,states\n";
    const std::size_t per_cell = gc.trajectories;
    for (std::size_t i = 0; i < data.records.size(); i += per_cell) {
        std::uint64_t states = 0;
        for (std::size_t k = i; k < i + per_cell; ++k)
            states += data.records[k].length;
        const auto& r = data.records[i];
        csv << format_double(r.params.alpha) << ',' << format_double(r.params.beta) << ','
            << format_double(r.energy) << ',' << per_cell << ',' << states << '\n';
    }
    run.write_csv("dataset_summary.csv", csv.str());
    run.write_run_record();

    out << run.header() << "trajectories " << data.records.size() << "\nstates " << data.total_states
        << "\nresampled " << data.resampled << "\n";
    return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string model;
    std::string data;
    std::size_t stride = 1;
};

int run_train(const TrainArgs& a, std::ostream& out)
{
    json cfg = load_config(a.common);
    if (cfg.contains("model_kind") && cfg.at("model_kind") != a.model)
        throw UsageError("config model_kind disagrees with --model " + a.model);
    cfg["model_kind"] = a.model;
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    cfg["seed"] = seed;

    const DatasetManifest data = load_dataset(a.data);
    const int n_params = dataset_param_count(data);
    const ModelKind kind = as_usage([&] { return model_kind_from_string(a.model); });
    if (!cfg.contains("param_channels") && kind != ModelKind::hnn && kind != ModelKind::encoder)
        cfg["param_channels"] = n_params;
    if (!cfg.contains("window_len") && kind == ModelKind::encoder)
        cfg["window_len"] = 30;
    if (!cfg.contains("dt") && !data.records.empty())
        cfg["dt"] = data.config.coarse_dt();
    const TrainConfig tc = as_usage([&] { return train_config_from_json(cfg); });

    json effective = to_json(tc);
    effective["data"] = a.data;
    effective["data_config_hash"] = config_hash(to_json(data.config));
    effective["stride"] = a.stride;
    Run run("train", a.common, seed, effective);

    const auto t0 = std::chrono::steady_clock::now();
    Checkpoint ck;
    TrainReport report;
    std::size_t n_samples = 0;
    std::size_t skipped = 0;
    switch (kind) {
    case ModelKind::asrnn: {
        auto w = srnn_windows(data, tc.window_len);
        n_samples = w.items.size();
        skipped = w.skipped;
        auto r = train_asrnn(tc, std::move(w.items));
        ck = make_checkpoint(r.model, seed);
        report = std::move(r.report);
        break;
    }
    case ModelKind::hnn:
    case ModelKind::ahnn: {
        auto w = derivative_pairs(data, a.stride);
        n_samples = w.items.size();
        auto r = train_hnn(tc, std::move(w.items));
        ck = make_checkpoint(r.model, seed);
        report = std::move(r.report);
        break;
    }
    case ModelKind::baseline: {
        auto w = derivative_pairs(data, a.stride);
        n_samples = w.items.size();
        auto r = train_baseline(tc, std::move(w.items));
        ck = make_checkpoint(r.model, seed);
        report = std::move(r.report);
        break;
    }
    case ModelKind::encoder: {
        auto w = encoder_windows(data, tc.window_len, a.stride, n_params);
        n_samples = w.items.size();
        skipped = w.skipped;
        auto r = train_encoder(tc, std::move(w.items));
        ck = make_checkpoint(r.model, seed);
        report = std::move(r.report);
        break;
    }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ck.training_config = to_json(tc);
    ck.metrics = {{"final_train_loss", report.train_loss.back()},
                  {"final_val_loss", report.val_loss.back()},
                  {"diverged_windows", report.diverged_windows},
                  {"samples", n_samples}};
    ck.metadata = run.metadata();
    save_checkpoint(ck, run.path("checkpoint.json"));
    run.write_csv("train_report.csv", report.to_csv());
    run.write_run_record();

    out << run.header() << "samples " << n_samples << "\nskipped_trajectories " << skipped << "\nfinal_train_loss "
        << format_double(report.train_loss.back()) << "\nfinal_val_loss " << format_double(report.val_loss.back())
        << "\ndiverged_windows " << report.diverged_windows << "\nwall_seconds " << wall << "\n";
    return kExitOk;
}

// ---- predict / eval-energy ----------------------------------------------------

struct PredictArgs {
    Common common;
    std::string checkpoint;
    std::string alpha = "1";
    std::string beta;
    std::string energy = "1/12";
    std::size_t steps = 1000;
    std::optional<double> dt;
    std::vector<double> state;
};

int run_predict(const PredictArgs& a, std::ostream& out)
{
    const PotentialParams p = params_arg(a.alpha, a.beta);
    const double energy = number_arg(a.energy, "energy");
    const json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    LoadedModel m = load_model(a.checkpoint, a.dt);
    coarse_factor_for(m.dt);

    PhaseState s0;
    if (!a.state.empty()) {
        if (a.state.size() != 4)
            throw UsageError("--state expects q_x,q_y,p_x,p_y");
        s0 = {Vec2(a.state[0], a.state[1]), Vec2(a.state[2], a.state[3])};
    } else {
        auto rng = seeded_rng(seed, 0);
        s0 = sample_initial_condition(energy, p, rng);
    }

    json effective = {{"checkpoint", a.checkpoint}, {"params", to_json(p)}, {"energy", energy},
                      {"steps", a.steps},           {"dt", m.dt},           {"state", a.state}};
    Run run("predict", a.common, seed, effective);

    const Trajectory pred = m.rollout(s0, p, a.steps);
    const Trajectory truth = ground_truth(s0, p, m.dt, a.steps);
    const auto err = relative_energy_error(pred, truth, p);
    run.write_csv("trajectory.csv", trajectory_csv(pred));
    run.write_csv("truth_trajectory.csv", trajectory_csv(truth));
    run.write_csv("energy_error.csv", energy_error_csv(m.dt, err));
    run.write_run_record();

    out << run.header() << "model " << m.kind << "\nmean_energy_error_percent " << format_double(mean(err))
        << "\nsecular_growth " << (secular_growth(err) ? 1 : 0) << "\n";
    return kExitOk;
}

struct EvalArgs {
    Common common;
    std::string checkpoint;
    std::vector<std::string> alphas{"0.5"};
    std::string beta;
    std::vector<std::string> energies{"1/12"};
    std::size_t rollouts = 20;
    std::size_t steps = 1000;
    std::optional<double> dt;
};

int run_eval_energy(const EvalArgs& a, std::ostream& out)
{
    const json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    LoadedModel m = load_model(a.checkpoint, a.dt);
    coarse_factor_for(m.dt);
    if (a.rollouts == 0)
        throw UsageError("--rollouts must be positive");

    std::vector<PotentialParams> params;
    for (const auto& s : a.alphas)
        params.push_back(params_arg(s, a.beta));
    std::vector<double> energies;
    for (const auto& s : a.energies)
        energies.push_back(number_arg(s, "energy"));

    json jp = json::array();
    for (const auto& p : params)
        jp.push_back(to_json(p));
    json effective = {{"checkpoint", a.checkpoint}, {"params", jp},     {"energies", energies},
                      {"rollouts", a.rollouts},     {"steps", a.steps}, {"dt", m.dt}};
    Run run("eval-energy", a.common, seed, effective);

    std::ostringstream summary;
    summary << "alpha,beta,energy,rollout,mean_percent,max_percent,secular,diverged\n";
    std::ostringstream series;
    series << "alpha,beta,energy,t,percent\n";
    std::size_t cell = 0;
    double grand = 0.0;
    std::size_t n_ok = 0, n_secular = 0, n_total = 0;
    for (const auto& p : params) {
        for (double e : energies) {
            auto rng = seeded_rng(seed, cell++);
            std::vector<double> acc(a.steps + 1, 0.0);
            std::size_t finished = 0;
            for (std::size_t r = 0; r < a.rollouts; ++r) {
                const PhaseState s0 = sample_initial_condition(e, p, rng);
                const std::string prefix =
                    format_double(p.alpha) + ',' + format_double(p.beta) + ',' + format_double(e) + ',';
                ++n_total;
                try {
                    const Trajectory pred = m.rollout(s0, p, a.steps);
                    const auto err = relative_energy_error(pred, ground_truth(s0, p, m.dt, a.steps), p);
                    const double mu = mean(err);
                    const bool sec = secular_growth(err);
                    summary << prefix << r << ',' << format_double(mu) << ','
                            << format_double(*std::max_element(err.begin(), err.end())) << ',' << (sec ? 1 : 0)
                            << ",0\n";
                    for (std::size_t k = 0; k < err.size(); ++k)
                        acc[k] += err[k];
                    ++finished;
                    grand += mu;
                    ++n_ok;
                    n_secular += sec ? 1 : 0;
                } catch (const IntegrationDiverged&) {
                    summary << prefix << r << ",nan,nan,1,1\n";
                    ++n_secular;
                }
            }
            for (std::size_t k = 0; k < acc.size() && finished > 0; ++k)
                series << format_double(p.alpha) << ',' << format_double(p.beta) << ',' << format_double(e) << ','
                       << format_double(static_cast<double>(k) * m.dt) << ','
                       << format_double(acc[k] / static_cast<double>(finished)) << '\n';
        }
    }
    run.write_csv("energy_errors.csv", summary.str());
    run.write_csv("energy_error_series.csv", series.str());
    run.write_run_record();

    out << run.header() << "model " << m.kind << "\nrollouts " << n_total << "\nmean_energy_error_percent "
        << format_double(n_ok ? grand / static_cast<double>(n_ok) : std::nan("")) << "\nsecular_fraction "
        << format_double(static_cast<double>(n_secular) / static_cast<double>(n_total)) << "\n";
    return kExitOk;
}

// ---- lyapunov ---------------------------------------------------------------------

struct LyapunovArgs {
    Common common;
    std::string grid;
    std::string beta_grid;
    bool single = false;
    std::string energy = "1/7";
    double time = 1000.0;
    std::size_t ics = 1;
    std::string checkpoint;
    std::optional<double> dt;
};

std::vector<double> parse_grid(const std::string& text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string s; std::getline(ss, s, ':');)
        parts.push_back(s);
    if (parts.size() != 3)
        throw UsageError("grid must look like start:stop:step, got '" + text + "'");
    const double lo = number_arg(parts[0], "grid");
    const double hi = number_arg(parts[1], "grid");
    const double step = number_arg(parts[2], "grid");
    if (!(step > 0.0) || hi < lo)
        throw UsageError("grid needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + static_cast<double>(i) * step;
    return v;
}

int run_lyapunov(const LyapunovArgs& a, std::ostream& out)
{
    const std::vector<double> alphas = parse_grid(a.grid);
    const std::vector<double> betas = a.single ? std::vector<double>{} : parse_grid(a.beta_grid.empty() ? a.grid : a.beta_grid);
    const double energy = number_arg(a.energy, "energy");
    if (!(a.time > 0.0) || a.ics == 0)
        throw UsageError("--time and --ics must be positive");
    const json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);

    std::optional<LoadedModel> model;
    if (!a.checkpoint.empty())
        model = load_model(a.checkpoint, a.dt);
    const double dt = model ? model->dt : a.dt.value_or(kTruthDt);
    if (!(dt > 0.0))
        throw UsageError("--dt must be positive");

    std::vector<PotentialParams> cells;
    for (double al : alphas) {
        if (a.single)
            cells.push_back(PotentialParams::single(al));
        else
            for (double be : betas)
                cells.push_back({al, be});
    }

    json effective = {{"alphas", alphas}, {"betas", betas},   {"single", a.single},
                      {"energy", energy}, {"time", a.time},   {"ics", a.ics},
                      {"dt", dt},         {"checkpoint", a.checkpoint}};
    Run run("lyapunov", a.common, seed, effective);

    const auto n_steps = static_cast<std::size_t>(std::llround(a.time / dt));
    const std::size_t renorm = default_renorm_interval(dt);
    std::vector<LyapunovSweepRow> rows(cells.size());
    std::vector<std::size_t> failed(cells.size(), 0);
    const auto n_cells = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < n_cells; ++c) {
        const PotentialParams p = cells[static_cast<std::size_t>(c)];
        auto rng = seeded_rng(seed, static_cast<std::uint64_t>(c));
        double sum = 0.0;
        std::size_t ok = 0;
        for (std::size_t i = 0; i < a.ics; ++i) {
            const PhaseState s0 = sample_initial_condition(energy, p, rng);
            try {
                LyapunovResult res;
                if (!model)
                    res = lyapunov_spectrum(henon_heiles_field(), s0, p, dt, n_steps, renorm);
                else if (model->field)
                    res = lyapunov_spectrum(*model->field, s0, p, dt, n_steps, renorm);
                else {
                    const auto& step = model->step;
                    res = lyapunov_spectrum([&](const PhaseState& s) { return step(s, p); }, s0, dt, n_steps,
                                            renorm);
                }
                sum += res.maximal;
                ++ok;
            } catch (const Error&) {
                ++failed[static_cast<std::size_t>(c)];
            }
        }
        rows[static_cast<std::size_t>(c)] = {p.alpha, p.beta, ok ? sum / static_cast<double>(ok) : std::nan("")};
    }
    run.write_csv("lyapunov.csv", lyapunov_sweep_csv(rows));
    run.write_run_record();

    std::size_t n_failed = 0;
    for (auto f : failed)
        n_failed += f;
    out << run.header() << "cells " << cells.size() << "\nfailed_orbits " << n_failed << "\n";
    return kExitOk;
}

// ---- poincare -------------------------------------------------------------------

struct PoincareArgs {
    Common common;
    std::string alpha = "1";
    std::string beta;
    std::string energy = "1/8";
    std::size_t ics = 10;
    double time = 500.0;
    std::string checkpoint;
    std::optional<double> dt;
};

int run_poincare(const PoincareArgs& a, std::ostream& out)
{
    const PotentialParams p = params_arg(a.alpha, a.beta);
    const double energy = number_arg(a.energy, "energy");
    if (!(a.time > 0.0) || a.ics == 0)
        throw UsageError("--time and --ics must be positive");
    const json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    std::optional<LoadedModel> model;
    if (!a.checkpoint.empty())
        model = load_model(a.checkpoint, a.dt);
    const double dt = model ? model->dt : a.dt.value_or(kTruthDt);

    json effective = {{"params", to_json(p)}, {"energy", energy}, {"ics", a.ics},
                      {"time", a.time},       {"dt", dt},         {"checkpoint", a.checkpoint}};
    Run run("poincare", a.common, seed, effective);

    const auto n_steps = static_cast<std::size_t>(std::llround(a.time / dt));
    auto rng = seeded_rng(seed, 0);
    std::vector<SectionPoint> points;
    std::size_t escaped = 0;
    for (std::size_t i = 0; i < a.ics; ++i) {
        const PhaseState s0 = sample_initial_condition(energy, p, rng);
        try {
            const Trajectory traj =
                model ? model->rollout(s0, p, n_steps) : integrate(s0, dt, n_steps, henon_heiles_field(), p);
            const auto pts = poincare_section(traj);
            points.insert(points.end(), pts.begin(), pts.end());
        } catch (const IntegrationDiverged&) {
            ++escaped;
        }
    }
    run.write_csv("section.csv", section_csv(points));
    run.write_run_record();
    out << run.header() << "points " << points.size() << "\nescaped " << escaped << "\n";
    return kExitOk;
}

// ---- infer-params / predict-partial ---------------------------------------------

struct InferArgs {
    Common common;
    std::string encoder;
    std::string data;
    std::string alpha = "0.5";
    std::string beta;
    std::vector<std::string> energies{"1/24", "1/12"};
    std::size_t trajectories = 5;
    std::size_t length = 500;
    std::size_t transient = 100;
    std::size_t stride = 0;
};

DatasetManifest observation_set(const PotentialParams& p, const std::vector<double>& energies, std::size_t n,
                                std::size_t length, std::size_t transient, std::uint64_t seed)
{
    GenerationConfig g;
    g.params = {p};
    g.energies = energies;
    g.trajectories = n;
    g.series_length = length + transient;
    g.transient = transient;
    g.seed = seed;
    as_usage([&] { g.validate(); return 0; });
    return generate_dataset(g);
}

int run_infer_params(const InferArgs& a, std::ostream& out)
{
    const json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    const EncoderModel enc = load_encoder(a.encoder);
    const std::size_t stride = a.stride ? a.stride : enc.window_len;

    json effective = {{"encoder", a.encoder}, {"stride", stride}};
    DatasetManifest data;
    if (!a.data.empty()) {
        data = load_dataset(a.data);
        effective["data"] = a.data;
        effective["data_config_hash"] = config_hash(to_json(data.config));
    } else {
        const PotentialParams p = params_arg(a.alpha, a.beta);
        std::vector<double> energies;
        for (const auto& s : a.energies)
            energies.push_back(number_arg(s, "energy"));
        effective.update({{"params", to_json(p)},
                          {"energies", energies},
                          {"trajectories", a.trajectories},
                          {"length", a.length},
                          {"transient", a.transient}});
        data = observation_set(p, energies, a.trajectories, a.length, a.transient, seed);
    }
    Run run("infer-params", a.common, seed, effective);

    std::ostringstream per;
    per << "trajectory,alpha_true,beta_true,energy,param,mean,stddev,windows\n";
    std::ostringstream samples;
    samples << "trajectory,param,window,estimate\n";
    const int n_params = enc.n_params();
    std::vector<std::vector<double>> pooled(static_cast<std::size_t>(n_params));
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto obs = partial_observation(data.trajectory(i));
        for (int k = 0; k < n_params; ++k) {
            const ParamEstimate est = infer_param_ensemble(enc, obs, stride, k);
            const char* name = k == 0 ? "alpha" : "beta";
            per << i << ',' << format_double(data.records[i].params.alpha) << ','
                << format_double(data.records[i].params.beta) << ',' << format_double(data.records[i].energy) << ','
                << name << ',' << format_double(est.mean) << ',' << format_double(est.stddev) << ','
                << est.samples.size() << '\n';
            for (std::size_t w = 0; w < est.samples.size(); ++w)
                samples << i << ',' << name << ',' << w << ',' << format_double(est.samples[w]) << '\n';
            auto& pool = pooled[static_cast<std::size_t>(k)];
            pool.insert(pool.end(), est.samples.begin(), est.samples.end());
        }
    }
    run.write_csv("infer_params.csv", per.str());
    run.write_csv("infer_params_samples.csv", samples.str());
    run.write_run_record();

    out << run.header() << "trajectories " << data.records.size() << "\n";
    for (int k = 0; k < n_params; ++k) {
        const auto& pool = pooled[static_cast<std::size_t>(k)];
        if (pool.empty())
            continue;
        const double mu = mean(pool);
        double var = 0.0;
        for (double x : pool)
            var += (x - mu) * (x - mu);
        const char* name = k == 0 ? "alpha" : "beta";
        out << name << "_mean " << format_double(mu) << "\n"
            << name << "_stddev " << format_double(std::sqrt(var / static_cast<double>(pool.size()))) << "\n";
    }
    return kExitOk;
}

struct PartialArgs {
    Common common;
    std::string encoder;
    std::string asrnn;
    std::string alpha = "0.3";
    std::string beta;
    std::string energy = "1/24";
    std::size_t observe = 300;
    std::size_t steps = 1000;
    std::size_t stride = 1;
    std::size_t transient = 100;
};

int run_predict_partial(const PartialArgs& a, std::ostream& out)
{
    const PotentialParams p = params_arg(a.alpha, a.beta);
    const double energy = number_arg(a.energy, "energy");
    const json cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    const EncoderModel enc = load_encoder(a.encoder);
    const Checkpoint ck = load_checkpoint(a.asrnn);
    if (ck.model_kind != "asrnn")
        throw UsageError("--asrnn expects an asrnn checkpoint, got '" + ck.model_kind + "'");
    const SeparableModel model = separable_from_checkpoint(ck);
    const double dt = checkpoint_dt(ck);
    coarse_factor_for(dt);
    if (a.observe < enc.window_len)
        throw UsageError("--observe must cover at least one encoder window");

    json effective = {{"encoder", a.encoder}, {"asrnn", a.asrnn},   {"params", to_json(p)},
                      {"energy", energy},     {"observe", a.observe}, {"steps", a.steps},
                      {"stride", a.stride},   {"transient", a.transient}, {"dt", dt}};
    Run run("predict-partial", a.common, seed, effective);

    // The observed series and its true continuation come from one generated trajectory.
    const DatasetManifest data = observation_set(p, {energy}, 1, a.observe + a.steps, a.transient, seed);
    const Trajectory full = data.trajectory(0);
    const auto obs_all = partial_observation(full);
    const std::span<const Vec2> observed(obs_all.data(), a.observe);

    const ParamEstimate est = infer_param_ensemble(enc, observed, a.stride, 0);
    const Trajectory pred = predict_from_partial(enc, model, observed, a.steps, dt, a.stride);
    const Trajectory truth_from_start = ground_truth(pred[0], p, dt, a.steps);
    const auto err = relative_energy_error(pred, truth_from_start, p);
    std::vector<PhaseState> cont(full.states().begin() + static_cast<std::ptrdiff_t>(a.observe - 1),
                                 full.states().end());
    const Trajectory continuation(full.dt(), std::move(cont), p);

    run.write_csv("partial_prediction.csv", trajectory_csv(pred));
    run.write_csv("partial_truth.csv", trajectory_csv(continuation));
    run.write_csv("partial_energy_error.csv", energy_error_csv(dt, err));
    run.write_run_record();

    const PhaseState& last = full[a.observe - 1];
    out << run.header() << "alpha_estimate " << format_double(est.mean) << "\nalpha_stddev "
        << format_double(est.stddev) << "\nq_y_reconstructed " << format_double(pred[0].q.y()) << "\nq_y_true "
        << format_double(last.q.y()) << "\np_y_reconstructed " << format_double(pred[0].p.y()) << "\np_y_true "
        << format_double(last.p.y()) << "\nmean_energy_error_percent " << format_double(mean(err)) << "\n";
    return kExitOk;
}

} // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Hamiltonian learning toolkit for the Henon-Heiles system", "symml"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SYMML_VERSION);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "generate a trajectory dataset");
    add_common(g, gen.common, true);

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train a model on a dataset");
    add_common(t, tr.common, true);
    t->add_option("--model", tr.model, "baseline|hnn|ahnn|asrnn|encoder")
        ->required()
        ->check(CLI::IsMember({"baseline", "hnn", "ahnn", "asrnn", "encoder"}));
    t->add_option("--data", tr.data, "dataset file")->required()->check(CLI::ExistingFile);
    t->add_option("--stride", tr.stride, "state stride for derivative pairs and encoder windows")
        ->check(CLI::PositiveNumber);

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "roll a trained model out from one initial condition");
    add_common(p, pr.common, true);
    p->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
    p->add_option("--alpha", pr.alpha);
    p->add_option("--beta", pr.beta, "defaults to alpha");
    p->add_option("--energy", pr.energy, "initial energy, decimal or fraction");
    p->add_option("--steps", pr.steps);
    p->add_option("--dt", pr.dt, "rollout step (default: the training dt)");
    p->add_option("--state", pr.state, "explicit initial state q_x,q_y,p_x,p_y")->delimiter(',');

    PartialArgs pp;
    auto* q = app.add_subcommand("predict-partial", "infer parameters from (q_x, p_x) and predict with an ASRNN");
    add_common(q, pp.common, true);
    q->add_option("--encoder", pp.encoder)->required()->check(CLI::ExistingFile);
    q->add_option("--asrnn", pp.asrnn)->required()->check(CLI::ExistingFile);
    q->add_option("--alpha", pp.alpha);
    q->add_option("--beta", pp.beta);
    q->add_option("--energy", pp.energy);
    q->add_option("--observe", pp.observe, "observed coarse states");
    q->add_option("--steps", pp.steps);
    q->add_option("--stride", pp.stride, "window stride for the parameter ensemble")->check(CLI::PositiveNumber);
    q->add_option("--transient", pp.transient);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval-energy", "relative energy error of model rollouts");
    add_common(e, ev.common, true);
    e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
    e->add_option("--alpha", ev.alphas, "one or more values")->delimiter(',');
    e->add_option("--beta", ev.beta);
    e->add_option("--energy", ev.energies, "one or more values")->delimiter(',');
    e->add_option("--rollouts", ev.rollouts, "rollouts per (params, energy)");
    e->add_option("--steps", ev.steps);
    e->add_option("--dt", ev.dt);

    LyapunovArgs ly;
    auto* l = app.add_subcommand("lyapunov", "maximal Lyapunov exponent over an (alpha, beta) grid");
    add_common(l, ly.common, true);
    l->add_option("--grid", ly.grid, "alpha grid start:stop:step")->required();
    l->add_option("--beta-grid", ly.beta_grid, "beta grid (default: same as --grid)");
    l->add_flag("--single", ly.single, "beta = alpha");
    l->add_option("--energy", ly.energy);
    l->add_option("--time", ly.time, "integration time per orbit");
    l->add_option("--ics", ly.ics, "orbits averaged per cell");
    l->add_option("--checkpoint", ly.checkpoint, "model flow instead of the analytic field")
        ->check(CLI::ExistingFile);
    l->add_option("--dt", ly.dt);

    PoincareArgs po;
    auto* s = app.add_subcommand("poincare", "Poincare section q_x = 0, p_x > 0");
    add_common(s, po.common, true);
    s->add_option("--alpha", po.alpha);
    s->add_option("--beta", po.beta);
    s->add_option("--energy", po.energy);
    s->add_option("--ics", po.ics);
    s->add_option("--time", po.time);
    s->add_option("--checkpoint", po.checkpoint)->check(CLI::ExistingFile);
    s->add_option("--dt", po.dt);

    InferArgs in;
    auto* n = app.add_subcommand("infer-params", "encoder parameter ensembles from (q_x, p_x) series");
    add_common(n, in.common, true);
    n->add_option("--encoder", in.encoder)->required()->check(CLI::ExistingFile);
    n->add_option("--data", in.data, "dataset file (default: generate fresh trajectories)")
        ->check(CLI::ExistingFile);
    n->add_option("--alpha", in.alpha);
    n->add_option("--beta", in.beta);
    n->add_option("--energy", in.energies)->delimiter(',');
    n->add_option("--trajectories", in.trajectories, "per energy");
    n->add_option("--length", in.length, "observed coarse states per trajectory");
    n->add_option("--transient", in.transient);
    n->add_option("--stride", in.stride, "window stride (default: window length)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (g->parsed())
            return run_generate(gen, out);
        if (t->parsed())
            return run_train(tr, out);
        if (p->parsed())
            return run_predict(pr, out);
        if (q->parsed())
            return run_predict_partial(pp, out);
        if (e->parsed())
            return run_eval_energy(ev, out);
        if (l->parsed())
            return run_lyapunov(ly, out);
        if (s->parsed())
            return run_poincare(po, out);
        if (n->parsed())
            return run_infer_params(in, out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << "\nsee 'symml <subcommand> --help'\n";
        return kExitUsage;
    } catch (const Error& ex) {
        err << "runtime error: " << ex.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& ex) {
        err << "runtime error: " << ex.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"symml"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace symml::cli
