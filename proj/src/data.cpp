#include "symml/data.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "symml/config.hpp"
#include "symml/errors.hpp"

namespace symml {

void GenerationConfig::validate() const
{
    if (params.empty() || energies.empty())
        throw InvalidArgument("generation needs at least one parameter set and one energy");
    if (trajectories < 1 || coarse_factor < 1)
        throw InvalidArgument("trajectory count and coarse factor must be >= 1");
    if (!(fine_dt > 0.0) || !std::isfinite(fine_dt))
        throw InvalidArgument("fine dt must be positive");
    if (series_length < 1 || transient >= series_length)
        throw InvalidArgument("series length must exceed the transient");
    for (double e : energies)
        if (!(e > 0.0) || !std::isfinite(e))
            throw InvalidArgument("energies must be positive");
    for (const auto& p : params)
        if (!std::isfinite(p.alpha) || !std::isfinite(p.beta))
            throw InvalidArgument("potential parameters must be finite");
}

PhaseState sample_initial_condition(double energy, const PotentialParams& params, std::mt19937_64& rng)
{
    if (energy < 0.0 || !std::isfinite(energy))
        throw InvalidArgument("initial-condition energy must be non-negative");
    if (energy == 0.0)
        return {};
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
        const Vec2 q(box(rng), box(rng));
        const double v = hh_potential(q, params);
        if (v > energy)
            continue;
        const double speed = std::sqrt(2.0 * (energy - v));
        const double phi = angle(rng);
        return {q, Vec2(speed * std::cos(phi), speed * std::sin(phi))};
    }
    throw RejectionExhausted("no position with V(q) <= " + std::to_string(energy) + " after " +
                             std::to_string(kMaxRejections) + " draws");
}

void DatasetManifest::validate() const
{
    std::uint64_t expected = 0;
    for (const auto& r : records) {
        if (r.offset != expected)
            throw CorruptRecord("trajectory records are not contiguous");
        expected += r.length;
    }
    if (expected != total_states || states.size() != total_states)
        throw CorruptRecord("dataset totals do not match the trajectory records");
}

Trajectory DatasetManifest::trajectory(std::size_t i) const
{
    const auto& r = records.at(i);
    std::vector<PhaseState> s(states.begin() + static_cast<std::ptrdiff_t>(r.offset),
                              states.begin() + static_cast<std::ptrdiff_t>(r.offset + r.length));
    return Trajectory(config.coarse_dt(), std::move(s), r.params);
}

namespace {

constexpr int kMaxRedraws = 20;

// Coarse states after the transient, or nothing if the orbit diverged or failed the audit.
bool generate_one(const GenerationConfig& c, const PotentialParams& params, double energy, std::mt19937_64& rng,
                  std::vector<PhaseState>& out)
{
    const PhaseState s0 = sample_initial_condition(energy, params, rng);
    const double e0 = hh_energy(s0, params);
    const auto field = henon_heiles_field();
    out.clear();
    out.reserve(c.stored_length());
    PhaseState s = s0;
    try {
        for (std::size_t k = 0; k < c.series_length; ++k) {
            if (k > 0)
                s = advance(s, c.fine_dt, c.coarse_factor, field, params);
            if (k >= c.transient)
                out.push_back(s);
        }
    } catch (const IntegrationDiverged&) {
        return false;
    }
    for (const auto& st : out)
        if (std::abs(hh_energy(st, params) - e0) > kEnergyAuditTolerance * std::abs(e0))
            return false;
    return true;
}

} // namespace

DatasetManifest generate_dataset(const GenerationConfig& config)
{
    config.validate();
    const std::size_t n = config.trajectory_count();
    const std::size_t per_param = config.energies.size() * config.trajectories;
    std::vector<std::vector<PhaseState>> series(n);
    std::vector<std::uint64_t> redraws(n, 0);
    std::vector<std::string> failures(n);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(n); ++kk) {
        const auto k = static_cast<std::size_t>(kk);
        const auto& params = config.params[k / per_param];
        const double energy = config.energies[(k % per_param) / config.trajectories];
        std::seed_seq seq{config.seed, static_cast<std::uint64_t>(k)};
        std::mt19937_64 rng(seq);
        try {
            int attempt = 0;
            while (!generate_one(config, params, energy, rng, series[k])) {
                if (++attempt > kMaxRedraws)
                    throw IntegrationDiverged(0, "trajectory " + std::to_string(k) + " kept diverging after " +
                                                     std::to_string(kMaxRedraws) + " redraws");
                ++redraws[k];
            }
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        if (!failures[k].empty())
            throw InvalidArgument("generation failed: " + failures[k]);

    DatasetManifest m;
    m.config = config;
    m.states.reserve(n * config.stored_length());
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryRecord r;
        r.offset = m.states.size();
        r.length = series[k].size();
        r.params = config.params[k / per_param];
        r.energy = config.energies[(k % per_param) / config.trajectories];
        m.records.push_back(r);
        m.states.insert(m.states.end(), series[k].begin(), series[k].end());
        m.resampled += redraws[k];
    }
    m.total_states = m.states.size();
    return m;
}

Windows<DerivativeSample> derivative_pairs(const DatasetManifest& data, std::size_t stride)
{
    if (stride < 1)
        throw InvalidArgument("stride must be >= 1");
    if (data.records.empty())
        throw EmptyDataset("dataset has no trajectories");
    Windows<DerivativeSample> out;
    for (const auto& r : data.records) {
        for (std::uint64_t i = 0; i < r.length; i += stride) {
            DerivativeSample s;
            s.state = data.states[r.offset + i];
            s.params = r.params;
            s.qdot = s.state.p;
            s.pdot = -hh_grad_v(s.state.q, r.params);
            out.items.push_back(s);
        }
    }
    return out;
}

Windows<RolloutWindow> srnn_windows(const DatasetManifest& data, std::size_t window_len)
{
    if (window_len < 2)
        throw InvalidArgument("rollout windows need at least two states");
    if (data.records.empty())
        throw EmptyDataset("dataset has no trajectories");
    Windows<RolloutWindow> out;
    for (const auto& r : data.records) {
        const std::size_t n = r.length / window_len;
        if (n == 0)
            ++out.skipped;
        for (std::size_t w = 0; w < n; ++w) {
            const auto begin = data.states.begin() + static_cast<std::ptrdiff_t>(r.offset + w * window_len);
            out.items.push_back({std::vector<PhaseState>(begin, begin + static_cast<std::ptrdiff_t>(window_len)),
                                 r.params});
        }
    }
    return out;
}

Windows<EncoderSample> encoder_windows(const DatasetManifest& data, std::size_t window_len, std::size_t stride,
                                       int n_params)
{
    if (n_params < 1 || n_params > 2)
        throw InvalidArgument("encoder targets hold one or two parameters");
    if (data.records.empty())
        throw EmptyDataset("dataset has no trajectories");
    Windows<EncoderSample> out;
    for (const auto& r : data.records) {
        const std::size_t n = window_count(r.length, window_len, stride);
        if (n == 0)
            ++out.skipped;
        for (std::size_t w = 0; w < n; ++w) {
            EncoderSample s;
            const std::size_t first = r.offset + w * stride;
            for (std::size_t j = first; j < first + window_len; ++j)
                s.window.push_back(Vec2(data.states[j].q.x(), data.states[j].p.x()));
            const PhaseState& last = data.states[first + window_len - 1];
            s.q_y = last.q.y();
            s.p_y = last.p.y();
            s.params = param_channels(r.params, n_params);
            out.items.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<Vec2> partial_observation(const Trajectory& traj)
{
    std::vector<Vec2> out;
    out.reserve(traj.size());
    for (const auto& s : traj.states())
        out.push_back(Vec2(s.q.x(), s.p.x()));
    return out;
}

namespace {

std::uint64_t to_little(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        return __builtin_bswap64(v);
    return v;
}

std::string encode_states(const std::vector<PhaseState>& states)
{
    std::string block(states.size() * 4 * sizeof(double), '\0');
    char* out = block.data();
    for (const auto& s : states) {
        for (double v : {s.q.x(), s.q.y(), s.p.x(), s.p.y()}) {
            const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
            std::memcpy(out, &bits, sizeof bits);
            out += sizeof bits;
        }
    }
    return block;
}

std::vector<PhaseState> decode_states(const std::string& block)
{
    std::vector<PhaseState> states(block.size() / (4 * sizeof(double)));
    const char* in = block.data();
    for (auto& s : states) {
        double v[4];
        for (double& x : v) {
            std::uint64_t bits;
            std::memcpy(&bits, in, sizeof bits);
            x = std::bit_cast<double>(to_little(bits));
            in += sizeof bits;
        }
        s = {Vec2(v[0], v[1]), Vec2(v[2], v[3])};
    }
    return states;
}

} // namespace

void save_dataset(const DatasetManifest& data, const std::string& path)
{
    data.validate();
    const std::string block = encode_states(data.states);
    json records = json::array();
    for (const auto& r : data.records)
        records.push_back({{"offset", r.offset}, {"length", r.length}, {"params", to_json(r.params)},
                           {"energy", r.energy}});
    const json manifest = {{"config", to_json(data.config)},
                           {"records", records},
                           {"total_states", data.total_states},
                           {"resampled", data.resampled},
                           {"layout", "f64le q_x q_y p_x p_y"},
                           {"crc32", crc32_bytes(block.data(), block.size())},
                           {"metadata", data.metadata}};
    const std::string text = manifest.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw InvalidArgument("cannot write " + path);
    f << "SMLDS " << kDatasetFormatVersion << ' ' << text.size() << '\n' << text << block;
    if (!f)
        throw InvalidArgument("failed writing " + path);
}

DatasetManifest load_dataset(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw InvalidArgument("cannot read " + path);
    std::string header;
    if (!std::getline(f, header))
        throw CorruptRecord("missing dataset header");
    std::istringstream hs(header);
    std::string magic;
    int version = -1;
    std::size_t text_len = 0;
    if (!(hs >> magic >> version >> text_len) || magic != "SMLDS")
        throw CorruptRecord("not a dataset file: " + path);
    if (version != kDatasetFormatVersion)
        throw FormatVersionMismatch("dataset format " + std::to_string(version) + ", expected " +
                                    std::to_string(kDatasetFormatVersion));
    std::string text(text_len, '\0');
    if (!f.read(text.data(), static_cast<std::streamsize>(text_len)))
        throw CorruptRecord("truncated dataset manifest");
    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptRecord(std::string("unreadable dataset manifest: ") + e.what());
    }

    DatasetManifest m;
    try {
        m.config = generation_config_from_json(manifest.at("config"), false);
        for (const auto& r : manifest.at("records")) {
            TrajectoryRecord rec;
            rec.offset = r.at("offset").get<std::uint64_t>();
            rec.length = r.at("length").get<std::uint64_t>();
            rec.params = {r.at("params").at(0).get<double>(), r.at("params").at(1).get<double>()};
            rec.energy = r.at("energy").get<double>();
            m.records.push_back(rec);
        }
        m.total_states = manifest.at("total_states").get<std::uint64_t>();
        m.resampled = manifest.at("resampled").get<std::uint64_t>();
        m.metadata = manifest.value("metadata", std::map<std::string, std::string>{});
    } catch (const json::exception& e) {
        throw CorruptRecord(std::string("malformed dataset manifest: ") + e.what());
    }

    const std::size_t expected = m.total_states * 4 * sizeof(double);
    std::string block(expected, '\0');
    if (!f.read(block.data(), static_cast<std::streamsize>(expected)))
        throw CorruptRecord("truncated state block in " + path);
    if (f.peek() != std::char_traits<char>::eof())
        throw CorruptRecord("trailing bytes after the state block in " + path);
    if (crc32_bytes(block.data(), block.size()) != manifest.at("crc32").get<std::uint32_t>())
        throw CorruptRecord("state block checksum mismatch in " + path);
    m.states = decode_states(block);
    m.validate();
    return m;
}

} // namespace symml
