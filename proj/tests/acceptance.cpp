// Desk-scale acceptance suite. One PASS/FAIL line per criterion; metric CSVs go to --out.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "CLI11.hpp"

#include "symml/analysis.hpp"
#include "symml/autodiff.hpp"
#include "symml/data.hpp"
#include "symml/errors.hpp"
#include "symml/lstm.hpp"
#include "symml/models.hpp"
#include "symml/training.hpp"

using namespace symml;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances --------------------------------------------------------

constexpr double kC1InputTol = 1e-5;
constexpr double kC1ParamTol = 1e-4;
constexpr double kC2DetTol = 1e-5;
constexpr double kC3EnergyTol = 1e-4;
constexpr double kC4EnergyPct = 5.0;
constexpr double kC4MaxSecular = 0.10;
constexpr double kC5MinBaselineSecular = 0.70;
constexpr double kC6FlatTol = 1e-3;
constexpr double kC6PairTol = 0.01;
constexpr double kC7RelTol = 0.5;
constexpr double kC8MeanTol = 0.1;
constexpr double kC8MaxSigma = 0.2;
constexpr double kC9EnergyPct = 10.0;

// ---- desk protocol ----------------------------------------------------------------

constexpr std::uint64_t kDataSeed = 1;
constexpr std::uint64_t kTrainSeed = 7;
constexpr double kDt = 0.1;
constexpr double kFineDt = 0.001;
constexpr std::size_t kCoarse = 100;
constexpr std::size_t kRolloutSteps = 1000;
constexpr std::size_t kTestRollouts = 20;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f)
        throw InvalidArgument("failed writing " + p.string());
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// |fd - a| / max(|a|, 1e-3 max|a|), worst component.
double relative_gap(std::span<const double> fd, std::span<const double> analytic)
{
    double scale = 0.0;
    for (double a : analytic)
        scale = std::max(scale, std::abs(a));
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i)
        worst = std::max(worst, std::abs(fd[i] - analytic[i]) / std::max(std::abs(analytic[i]), 1e-3 * scale));
    return worst;
}

Trajectory ground_truth(const PhaseState& s0, const PotentialParams& p, std::size_t steps)
{
    return coarse_grain(integrate(s0, kFineDt, steps * kCoarse, henon_heiles_field(), p), kCoarse);
}

GenerationConfig desk_generation()
{
    GenerationConfig g;
    g.params = {PotentialParams::single(0.2), PotentialParams::single(0.8)};
    g.energies = {1.0 / 24.0, 1.0 / 12.0};
    g.trajectories = 20;
    g.fine_dt = kFineDt;
    g.coarse_factor = kCoarse;
    g.series_length = 600;
    g.transient = 100;
    g.seed = kDataSeed;
    return g;
}

TrainConfig desk_train(ModelKind kind)
{
    TrainConfig c;
    c.model_kind = kind;
    c.epochs = 100;
    c.hidden = {256};
    c.window_len = 11;
    c.dt = kDt;
    c.batch_size = 32;
    c.lr = 1e-2;
    c.schedule = LrSchedule::cosine;
    c.lr_min = 1e-4;
    c.seed = kTrainSeed;
    c.param_channels = 1;
    return c;
}

TrainConfig desk_encoder_train()
{
    TrainConfig c;
    c.model_kind = ModelKind::encoder;
    c.epochs = 100;
    c.window_len = 30;
    c.encoder_hidden = 9;
    c.batch_size = 16;
    c.lr = 1e-2;
    c.schedule = LrSchedule::cosine;
    c.lr_min = 1e-4;
    c.seed = kTrainSeed;
    return c;
}

constexpr std::size_t kEncoderStride = 5;

std::vector<PhaseState> held_out_ics(double energy, const PotentialParams& p, std::uint64_t seed, std::size_t n)
{
    std::mt19937_64 rng(seed);
    std::vector<PhaseState> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(sample_initial_condition(energy, p, rng));
    return out;
}

struct RolloutStats {
    double mean = std::nan("");
    double max = std::nan("");
    bool secular = true;
    bool escaped = false;
};

using Rollout = std::function<Trajectory(const PhaseState&, const PotentialParams&, std::size_t)>;

std::vector<RolloutStats> energy_stats(const Rollout& rollout, const std::vector<PhaseState>& ics,
                                       const PotentialParams& p)
{
    std::vector<RolloutStats> out;
    for (const auto& s0 : ics) {
        RolloutStats st;
        try {
            const auto err = relative_energy_error(rollout(s0, p, kRolloutSteps), ground_truth(s0, p, kRolloutSteps), p);
            st.mean = mean(err);
            st.max = *std::max_element(err.begin(), err.end());
            st.secular = secular_growth(err);
        } catch (const IntegrationDiverged&) {
            st.escaped = true; // unbounded, counted as secular growth
        }
        out.push_back(st);
    }
    return out;
}

std::string stats_csv(const std::vector<RolloutStats>& s)
{
    std::ostringstream o;
    o << "rollout,mean_percent,max_percent,secular,escaped\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        o << i << ',' << format_double(s[i].mean) << ',' << format_double(s[i].max) << ',' << s[i].secular << ','
          << s[i].escaped << '\n';
    return o.str();
}

double secular_fraction(const std::vector<RolloutStats>& s)
{
    return static_cast<double>(std::count_if(s.begin(), s.end(), [](const auto& x) { return x.secular; })) /
           static_cast<double>(s.size());
}

// ---- criteria --------------------------------------------------------------------

Outcome criterion1(const fs::path& out)
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> depth(1, 3);
    std::uniform_int_distribution<int> width(2, 64);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    double worst_inputs = 0.0;
    double worst_params = 0.0;
    std::ostringstream csv;
    csv << "net,layer_sizes,input_gap,param_gap\n";
    for (int trial = 0; trial < 50; ++trial) {
        DenseNetSpec spec;
        spec.layer_sizes = {3};
        const int d = depth(rng);
        for (int i = 0; i < d; ++i)
            spec.layer_sizes.push_back(width(rng));
        spec.layer_sizes.push_back(1);
        DenseNetSpec kspec = spec;
        kspec.layer_sizes.front() = 2;

        // grad_inputs of the potential net against central differences in x.
        const NetParams vp = init_params(spec, 500 + trial);
        const Eigen::Vector3d x(u(rng), u(rng), 0.2 + u(rng) + 0.5);
        const Eigen::VectorXd g = grad_inputs(spec, vp, x, 0);
        const std::vector<double> xs(x.data(), x.data() + 3);
        const auto fx = central_difference(
            [&](std::span<const double> v) { return forward(spec, vp, Eigen::Vector3d(v[0], v[1], v[2]))[0]; }, xs,
            1e-6);
        const double gi = relative_gap(fx, std::span<const double>(g.data(), 3));

        // Parameter gradient of a 3-step rollout loss, which differentiates through input-gradient nodes.
        SeparableModel m;
        m.kinetic = DenseNet(kspec, init_params(kspec, 900 + trial));
        m.potential = DenseNet(spec, vp);
        m.param_channels = 1;
        const PotentialParams pp = PotentialParams::single(0.2 + 0.6 * (u(rng) + 0.5));
        const PhaseState s0{Vec2(0.3 * u(rng), 0.3 * u(rng)), Vec2(0.3 * u(rng), 0.3 * u(rng))};
        const auto window = integrate(s0, kDt, 3, henon_heiles_field(), pp).states();
        std::vector<double> grad(m.param_count(), 0.0);
        srnn_loss_grad(m, window, pp, kDt, grad);
        const std::vector<double> theta = m.flat_params();
        auto loss = [&](std::span<const double> th) {
            SeparableModel c = m;
            c.set_flat_params(th);
            return srnn_loss(c, window, pp, kDt).loss;
        };
        std::vector<double> fd, an;
        std::vector<double> th = theta;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double h = 1e-6;
            th[i] = theta[i] + h;
            const double up = loss(th);
            th[i] = theta[i] - h;
            const double down = loss(th);
            th[i] = theta[i];
            fd.push_back((up - down) / (2.0 * h));
            an.push_back(grad[i]);
        }
        const double gp = relative_gap(fd, an);

        worst_inputs = std::max(worst_inputs, gi);
        worst_params = std::max(worst_params, gp);
        std::string sizes;
        for (int s : spec.layer_sizes)
            sizes += (sizes.empty() ? "" : "-") + std::to_string(s);
        csv << trial << ',' << sizes << ',' << format_double(gi) << ',' << format_double(gp) << '\n';
    }
    write_file(out / "c1_gradients.csv", csv.str());
    return {worst_inputs <= kC1InputTol && worst_params <= kC1ParamTol,
            "50 nets, worst input-gradient gap " + fmt("%.2e", worst_inputs) + " (<= 1e-5), worst parameter gap " +
                fmt("%.2e", worst_params) + " (<= 1e-4)"};
}

Outcome criterion2(const fs::path& out)
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const auto net = SeparableModel::create({64}, 1, false, 3);
    const DerivativeField fields[2] = {henon_heiles_field(), network_field(net)};
    double worst = 0.0;
    std::ostringstream csv;
    csv << "field,state,det_minus_one\n";
    for (int f = 0; f < 2; ++f) {
        for (int i = 0; i < 100; ++i) {
            const PhaseState s{Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng))};
            const PotentialParams pp{0.2 + 0.6 * (u(rng) + 0.5), 1.0};
            Eigen::Matrix4d J;
            const double eps = 1e-6;
            for (int j = 0; j < 4; ++j) {
                PhaseState up = s, down = s;
                (j < 2 ? up.q[j] : up.p[j - 2]) += eps;
                (j < 2 ? down.q[j] : down.p[j - 2]) -= eps;
                const PhaseState a = leapfrog_step(up, kDt, fields[f], pp, kEscapeRadius);
                const PhaseState b = leapfrog_step(down, kDt, fields[f], pp, kEscapeRadius);
                J.col(j) << (a.q - b.q) / (2 * eps), (a.p - b.p) / (2 * eps);
            }
            const double gap = J.determinant() - 1.0;
            worst = std::max(worst, std::abs(gap));
            csv << (f == 0 ? "analytic" : "network") << ',' << i << ',' << format_double(gap) << '\n';
        }
    }
    write_file(out / "c2_symplecticity.csv", csv.str());
    return {worst <= kC2DetTol, "200 states, max |det J - 1| = " + fmt("%.2e", worst) + " (<= 1e-5)"};
}

Outcome criterion3(const fs::path& out)
{
    GenerationConfig g;
    g.params = {PotentialParams::single(1.0)};
    g.energies = {1.0 / 24.0, 1.0 / 12.0, 1.0 / 8.0, 1.0 / 6.0};
    g.trajectories = 3;
    g.fine_dt = kFineDt;
    g.coarse_factor = kCoarse;
    g.series_length = 3001; // T = 300
    g.transient = 0;
    g.seed = 300;
    const DatasetManifest data = generate_dataset(g);
    double worst = 0.0;
    std::ostringstream csv;
    csv << "trajectory,energy,max_rel_energy_error\n";
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const Trajectory t = data.trajectory(i);
        const double e0 = data.records[i].energy;
        double m = 0.0;
        for (const auto& s : t.states())
            m = std::max(m, std::abs(hh_energy(s, t.params()) - e0) / e0);
        worst = std::max(worst, m);
        csv << i << ',' << format_double(e0) << ',' << format_double(m) << '\n';
    }
    csv << "resampled," << data.resampled << ",\n";
    write_file(out / "c3_conservation.csv", csv.str());
    return {worst <= kC3EnergyTol && data.resampled == 0,
            std::to_string(data.records.size()) + " trajectories to T=300, max |dE/E| = " + fmt("%.2e", worst) +
                " (<= 1e-4), redrawn " + std::to_string(data.resampled)};
}

struct Desk {
    DatasetManifest data;
    SeparableModel asrnn;
    std::vector<PhaseState> test_ics;
    std::vector<RolloutStats> asrnn_stats;
    EncoderModel encoder;
};

Outcome criterion4(const fs::path& out, Desk& desk)
{
    desk.data = generate_dataset(desk_generation());
    auto windows = srnn_windows(desk.data, 11);
    auto trained = train_asrnn(desk_train(ModelKind::asrnn), std::move(windows.items));
    desk.asrnn = trained.model;
    write_file(out / "c4_train_report.csv", trained.report.to_csv());

    const PotentialParams p = PotentialParams::single(0.5);
    desk.test_ics = held_out_ics(1.0 / 12.0, p, 99, kTestRollouts);
    const SeparableModel& model = desk.asrnn;
    desk.asrnn_stats = energy_stats(
        [&](const PhaseState& s, const PotentialParams& pp, std::size_t n) { return asrnn_rollout(model, s, pp, kDt, n); },
        desk.test_ics, p);
    write_file(out / "c4_energy.csv", stats_csv(desk.asrnn_stats));

    double total = 0.0;
    std::size_t escaped = 0;
    for (const auto& s : desk.asrnn_stats) {
        escaped += s.escaped;
        total += s.escaped ? 0.0 : s.mean;
    }
    const double mu = total / static_cast<double>(desk.asrnn_stats.size());
    const double sec = secular_fraction(desk.asrnn_stats);
    const double reduction = trained.report.val_loss.front() / trained.report.val_loss.back();
    return {escaped == 0 && mu < kC4EnergyPct && sec <= kC4MaxSecular,
            "alpha=0.5 E=1/12, " + std::to_string(kTestRollouts) + " rollouts: mean dE " + fmt("%.2f", mu) +
                "% (< 5%), secular " + fmt("%.0f", sec * 100) + "% (<= 10%), escaped " + std::to_string(escaped) +
                ", val loss reduced x" + fmt("%.1f", reduction)};
}

Outcome criterion5(const fs::path& out, const Desk& desk)
{
    auto pairs = derivative_pairs(desk.data, 1);
    auto trained = train_baseline(desk_train(ModelKind::baseline), std::move(pairs.items));
    write_file(out / "c5_train_report.csv", trained.report.to_csv());
    const BaselineModel& model = trained.model;
    const auto stats = energy_stats(
        [&](const PhaseState& s, const PotentialParams& pp, std::size_t n) {
            return baseline_rollout(model, s, pp, kDt, n);
        },
        desk.test_ics, PotentialParams::single(0.5));
    write_file(out / "c5_baseline_energy.csv", stats_csv(stats));
    const double base = secular_fraction(stats);
    const double asrnn = secular_fraction(desk.asrnn_stats);
    double total = 0.0;
    std::size_t finished = 0;
    for (const auto& s : stats)
        if (!s.escaped) {
            total += s.mean;
            ++finished;
        }
    return {base >= kC5MinBaselineSecular && asrnn <= kC4MaxSecular,
            "secular growth: baseline " + fmt("%.0f", base * 100) + "% (>= 70%), ASRNN " + fmt("%.0f", asrnn * 100) +
                "% (<= 10%); baseline mean dE " + fmt("%.2f", finished ? total / finished : std::nan("")) + "%"};
}

Outcome criterion6(const fs::path& out)
{
    std::ostringstream csv;
    csv << "case,seed,l1,l2,l3,l4\n";
    auto row = [&](const char* name, int seed, const Eigen::Vector4d& l) {
        csv << name << ',' << seed << ',' << format_double(l[0]) << ',' << format_double(l[1]) << ','
            << format_double(l[2]) << ',' << format_double(l[3]) << '\n';
    };

    const PotentialParams flat{0.0, 0.0};
    const PhaseState harmonic{Vec2(0.2, -0.1), Vec2(0.15, 0.25)};
    const auto free = lyapunov_spectrum(henon_heiles_field(), harmonic, flat, kFineDt, 1000000, 1000);
    row("harmonic", 0, free.exponents);
    const double flat_max = free.exponents.cwiseAbs().maxCoeff();

    const PotentialParams hh{1.0, 1.0};
    std::vector<double> lmax;
    double pairing = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        const Vec2 q(0.0, -0.1 + u(rng));
        const double angle = u(rng);
        const double speed = std::sqrt(2.0 * (1.0 / 6.0 - hh_potential(q, hh)));
        const PhaseState s0{q, Vec2(speed * std::cos(angle), speed * std::sin(angle))};
        const auto r = lyapunov_spectrum(henon_heiles_field(), s0, hh, kFineDt, 5000000, 1000);
        row("chaotic", seed, r.exponents);
        lmax.push_back(r.maximal);
        pairing = std::max({pairing, std::abs(r.exponents[0] + r.exponents[3]),
                            std::abs(r.exponents[1] + r.exponents[2])});
    }
    write_file(out / "c6_lyapunov.csv", csv.str());
    const double mu = mean(lmax);
    double var = 0.0;
    for (double v : lmax)
        var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / static_cast<double>(lmax.size() - 1));
    return {flat_max <= kC6FlatTol && mu - 3.0 * sigma > 0.0 && pairing <= kC6PairTol,
            "alpha=beta=0 max|lambda| " + fmt("%.1e", flat_max) + " (<= 1e-3); chaotic lambda_max " + fmt("%.4f", mu) +
                " +- " + fmt("%.4f", sigma) + " (mean - 3 sigma > 0); pairing " + fmt("%.1e", pairing) + " (<= 0.01)"};
}

Outcome criterion7(const fs::path& out, const Desk& desk)
{
    const PotentialParams p = PotentialParams::single(0.8);
    const auto ics = held_out_ics(1.0 / 6.0, p, 5, 10);
    const DerivativeField field = network_field(desk.asrnn);
    std::ostringstream csv;
    csv << "ic,truth,asrnn\n";
    double truth = 0.0, model = 0.0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < ics.size(); ++i) {
        const double t = lyapunov_spectrum(henon_heiles_field(), ics[i], p, kFineDt, 1000000, 1000).maximal;
        double m = std::nan("");
        try {
            m = lyapunov_spectrum(field, ics[i], p, kDt, 10000, 10).maximal;
        } catch (const Error&) {
            ++failed;
        }
        csv << i << ',' << format_double(t) << ',' << format_double(m) << '\n';
        truth += t;
        model += m;
    }
    write_file(out / "c7_lyapunov_transfer.csv", csv.str());
    truth /= static_cast<double>(ics.size());
    model /= static_cast<double>(ics.size());
    const double rel = std::abs(model - truth) / std::abs(truth);
    return {failed == 0 && (model > 0) == (truth > 0) && rel <= kC7RelTol,
            "alpha=0.8 E=1/6, 10 orbits to T=1000: truth " + fmt("%.4f", truth) + ", ASRNN " + fmt("%.4f", model) +
                ", relative gap " + fmt("%.2f", rel) + " (<= 0.5)"};
}

Outcome criterion8(const fs::path& out, Desk& desk)
{
    if (desk.data.records.empty())
        desk.data = generate_dataset(desk_generation());
    auto windows = encoder_windows(desk.data, 30, kEncoderStride, 1);
    auto trained = train_encoder(desk_encoder_train(), std::move(windows.items));
    desk.encoder = trained.model;
    write_file(out / "c8_train_report.csv", trained.report.to_csv());

    GenerationConfig g = desk_generation();
    g.params = {PotentialParams::single(0.5)};
    g.trajectories = 5;
    g.seed = 2;
    const DatasetManifest held = generate_dataset(g);
    std::vector<double> pooled;
    std::ostringstream csv;
    csv << "trajectory,window,alpha_estimate\n";
    for (std::size_t i = 0; i < held.records.size(); ++i) {
        const auto obs = partial_observation(held.trajectory(i));
        const auto est = infer_param_ensemble(desk.encoder, obs, 30);
        for (std::size_t w = 0; w < est.samples.size(); ++w)
            csv << i << ',' << w << ',' << format_double(est.samples[w]) << '\n';
        pooled.insert(pooled.end(), est.samples.begin(), est.samples.end());
    }
    write_file(out / "c8_encoder.csv", csv.str());
    const double mu = mean(pooled);
    double var = 0.0;
    for (double v : pooled)
        var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / static_cast<double>(pooled.size()));
    return {std::abs(mu - 0.5) <= kC8MeanTol && sigma <= kC8MaxSigma,
            std::to_string(held.records.size()) + " held-out alpha=0.5 trajectories, " + std::to_string(pooled.size()) +
                " windows: mean " + fmt("%.3f", mu) + " (within 0.1 of 0.5), sigma " + fmt("%.3f", sigma) +
                " (<= 0.2)"};
}

Outcome criterion9(const fs::path& out, const Desk& desk)
{
    constexpr std::size_t kObserved = 300;
    const PotentialParams p = PotentialParams::single(0.3);
    const auto ics = held_out_ics(1.0 / 24.0, p, 11, 5);
    std::ostringstream csv;
    csv << "ic,alpha_estimate,mean_percent,max_abs_q,escaped\n";
    bool ok = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < ics.size(); ++i) {
        const auto obs = partial_observation(ground_truth(ics[i], p, kObserved - 1));
        const double alpha_hat = infer_param_ensemble(desk.encoder, obs, 1).mean;
        try {
            const Trajectory pred = predict_from_partial(desk.encoder, desk.asrnn, obs, kRolloutSteps, kDt, 1);
            const auto err = relative_energy_error(pred, ground_truth(pred[0], p, kRolloutSteps), p);
            double qmax = 0.0;
            for (const auto& s : pred.states())
                qmax = std::max(qmax, s.q.cwiseAbs().maxCoeff());
            const double mu = mean(err);
            worst = std::max(worst, mu);
            ok = ok && mu < kC9EnergyPct;
            csv << i << ',' << format_double(alpha_hat) << ',' << format_double(mu) << ',' << format_double(qmax)
                << ",0\n";
        } catch (const IntegrationDiverged&) {
            ok = false;
            csv << i << ',' << format_double(alpha_hat) << ",nan,nan,1\n";
        }
    }
    write_file(out / "c9_coupled.csv", csv.str());
    return {ok, "alpha=0.3 E=1/24, 5 observed (q_x,p_x) series of 300 states, 1000-step rollouts bounded, worst mean dE " +
                    fmt("%.2f", worst) + "% (< 10%)"};
}

Outcome criterion10(const fs::path& first, const fs::path& second)
{
    // Rerun with a different worker count; the metric files must match byte for byte.
    set_worker_count(3);
    Desk desk;
    fs::create_directories(second);
    criterion3(second);
    criterion4(second, desk);
    criterion8(second, desk);
    set_worker_count(0);
    const char* files[] = {"c3_conservation.csv", "c4_train_report.csv", "c4_energy.csv", "c8_train_report.csv",
                           "c8_encoder.csv"};
    std::string mismatched;
    for (const char* f : files)
        if (slurp(first / f).empty() || slurp(first / f) != slurp(second / f))
            mismatched += std::string(mismatched.empty() ? "" : ", ") + f;
    return {mismatched.empty(), mismatched.empty()
                                    ? "criteria 3, 4, 8 rerun on 3 workers: 5 metric CSVs bit-identical"
                                    : "differing files: " + mismatched};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"desk-scale acceptance suite"};
    std::string out = "acceptance_out";
    std::vector<int> only;
    std::vector<int> expected_failures;
    app.add_option("--out", out, "directory for metric CSVs");
    app.add_option("--only", only, "run a subset of criteria; ones that reuse trained models also run 4 or 8");
    app.add_option("--expect-fail", expected_failures, "criteria whose FAIL does not fail the run");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir = fs::path(out) / "run1";
    fs::create_directories(dir);
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

    Desk desk;
    int unexpected = 0;
    auto report = [&](int id, const std::function<Outcome()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool expected = std::find(expected_failures.begin(), expected_failures.end(), id) !=
                              expected_failures.end();
        if (!o.pass && !expected)
            ++unexpected;
        std::printf("criterion %2d: %s  %s [%.1f s]%s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(t0), !o.pass && expected ? " (known failure)" : "");
        std::fflush(stdout);
    };

    const bool need_desk = wanted(4) || wanted(5) || wanted(7) || wanted(9);
    if (wanted(1))
        report(1, [&] { return criterion1(dir); });
    if (wanted(2))
        report(2, [&] { return criterion2(dir); });
    if (wanted(3) || wanted(10))
        report(3, [&] { return criterion3(dir); });
    if (need_desk || wanted(10))
        report(4, [&] { return criterion4(dir, desk); });
    if (wanted(5))
        report(5, [&] { return criterion5(dir, desk); });
    if (wanted(6))
        report(6, [&] { return criterion6(dir); });
    if (wanted(7))
        report(7, [&] { return criterion7(dir, desk); });
    if (wanted(8) || wanted(9) || wanted(10))
        report(8, [&] { return criterion8(dir, desk); });
    if (wanted(9))
        report(9, [&] { return criterion9(dir, desk); });
    if (wanted(10))
        report(10, [&] { return criterion10(dir, fs::path(out) / "run2"); });
    return unexpected == 0 ? 0 : 1;
}
