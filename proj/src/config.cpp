#include "symml/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <zlib.h>

#include "symml/errors.hpp"

namespace symml {

namespace {

double parse_plain(std::string_view text)
{
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw InvalidArgument("not a number: '" + std::string(text) + "'");
    return v;
}

} // namespace

double parse_number(std::string_view text)
{
    const auto slash = text.find('/');
    if (slash == std::string_view::npos)
        return parse_plain(text);
    const double num = parse_plain(text.substr(0, slash));
    const double den = parse_plain(text.substr(slash + 1));
    if (den == 0.0)
        throw InvalidArgument("zero denominator in '" + std::string(text) + "'");
    return num / den;
}

double number_from_json(const json& j, const std::string& key)
{
    if (j.is_number())
        return j.get<double>();
    if (j.is_string())
        return parse_number(j.get<std::string>());
    throw InvalidArgument("'" + key + "' must be a number or a fraction string");
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!j.is_object())
        throw InvalidArgument(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed)
            known = known || key == a;
        if (!known)
            throw InvalidArgument("unknown key '" + key + "' in " + where);
    }
}

json read_json_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw InvalidArgument("cannot read config file " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw InvalidArgument("config file " + path + " is not valid JSON: " + e.what());
    }
}

std::uint32_t crc32_bytes(const void* data, std::size_t size)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* bytes = static_cast<const Bytef*>(data);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, bytes, chunk);
        bytes += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string config_hash(const json& j)
{
    const std::string text = j.dump();
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc32_bytes(text.data(), text.size()));
    return buf;
}

json to_json(const PotentialParams& p) { return json::array({p.alpha, p.beta}); }

json to_json(const GenerationConfig& c)
{
    json params = json::array();
    for (const auto& p : c.params)
        params.push_back(to_json(p));
    return {{"params", params},
            {"energies", c.energies},
            {"trajectories", c.trajectories},
            {"fine_dt", c.fine_dt},
            {"coarse_factor", c.coarse_factor},
            {"series_length", c.series_length},
            {"transient", c.transient},
            {"seed", c.seed}};
}

GenerationConfig generation_config_from_json(const json& j, bool check)
{
    reject_unknown_keys(j,
                        {"alphas", "params", "energies", "trajectories", "fine_dt", "coarse_factor", "series_length",
                         "transient", "seed"},
                        "generation config");
    GenerationConfig c;
    if (j.contains("alphas") == j.contains("params"))
        throw InvalidArgument("generation config needs exactly one of 'alphas' or 'params'");
    if (j.contains("alphas"))
        for (const auto& a : j.at("alphas"))
            c.params.push_back(PotentialParams::single(number_from_json(a, "alphas")));
    else
        for (const auto& p : j.at("params")) {
            if (!p.is_array() || p.size() != 2)
                throw InvalidArgument("each 'params' entry must be [alpha, beta]");
            c.params.push_back({number_from_json(p[0], "params"), number_from_json(p[1], "params")});
        }
    if (!j.contains("energies"))
        throw InvalidArgument("generation config needs 'energies'");
    for (const auto& e : j.at("energies"))
        c.energies.push_back(number_from_json(e, "energies"));
    if (j.contains("trajectories"))
        c.trajectories = j.at("trajectories").get<std::size_t>();
    if (j.contains("fine_dt"))
        c.fine_dt = number_from_json(j.at("fine_dt"), "fine_dt");
    if (j.contains("coarse_factor"))
        c.coarse_factor = j.at("coarse_factor").get<std::size_t>();
    if (j.contains("series_length"))
        c.series_length = j.at("series_length").get<std::size_t>();
    if (j.contains("transient"))
        c.transient = j.at("transient").get<std::size_t>();
    if (j.contains("seed"))
        c.seed = j.at("seed").get<std::uint64_t>();
    if (check)
        c.validate();
    return c;
}

json to_json(const TrainConfig& c)
{
    return {{"model_kind", to_string(c.model_kind)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"window_len", c.window_len},
            {"lr", c.lr},
            {"schedule", to_string(c.schedule)},
            {"lr_decay", c.lr_decay},
            {"lr_min", c.lr_min},
            {"seed", c.seed},
            {"validation_fraction", c.validation_fraction},
            {"clip_norm", c.clip_norm},
            {"hidden", c.hidden},
            {"param_channels", c.param_channels},
            {"fixed_kinetic", c.fixed_kinetic},
            {"dt", c.dt},
            {"encoder_hidden", c.encoder_hidden},
            {"adam", {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}}}};
}

TrainConfig train_config_from_json(const json& j)
{
    reject_unknown_keys(j,
                        {"model_kind", "epochs", "batch_size", "window_len", "lr", "schedule", "lr_decay", "lr_min",
                         "seed", "validation_fraction", "clip_norm", "hidden", "param_channels", "fixed_kinetic", "dt",
                         "encoder_hidden", "adam"},
                        "training config");
    TrainConfig c;
    try {
        if (j.contains("model_kind"))
            c.model_kind = model_kind_from_string(j.at("model_kind").get<std::string>());
        if (j.contains("epochs"))
            c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("batch_size"))
            c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("window_len"))
            c.window_len = j.at("window_len").get<std::size_t>();
        if (j.contains("lr"))
            c.lr = number_from_json(j.at("lr"), "lr");
        if (j.contains("schedule"))
            c.schedule = lr_schedule_from_string(j.at("schedule").get<std::string>());
        if (j.contains("lr_decay"))
            c.lr_decay = number_from_json(j.at("lr_decay"), "lr_decay");
        if (j.contains("lr_min"))
            c.lr_min = number_from_json(j.at("lr_min"), "lr_min");
        if (j.contains("seed"))
            c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("validation_fraction"))
            c.validation_fraction = number_from_json(j.at("validation_fraction"), "validation_fraction");
        if (j.contains("clip_norm"))
            c.clip_norm = number_from_json(j.at("clip_norm"), "clip_norm");
        if (j.contains("hidden"))
            c.hidden = j.at("hidden").get<std::vector<int>>();
        if (j.contains("param_channels"))
            c.param_channels = j.at("param_channels").get<int>();
        if (j.contains("fixed_kinetic"))
            c.fixed_kinetic = j.at("fixed_kinetic").get<bool>();
        if (j.contains("dt"))
            c.dt = number_from_json(j.at("dt"), "dt");
        if (j.contains("encoder_hidden"))
            c.encoder_hidden = j.at("encoder_hidden").get<int>();
        if (j.contains("adam")) {
            const auto& a = j.at("adam");
            reject_unknown_keys(a, {"beta1", "beta2", "eps"}, "adam settings");
            if (a.value("beta1", 0.9) != 0.9 || a.value("beta2", 0.999) != 0.999 || a.value("eps", 1e-8) != 1e-8)
                throw InvalidArgument("only the default Adam moments (0.9, 0.999, 1e-8) are supported");
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("bad value in training config: ") + e.what());
    }
    if (j.contains("model_kind") && !j.contains("param_channels")) {
        if (c.model_kind == ModelKind::hnn)
            c.param_channels = 0;
    }
    c.validate();
    return c;
}

} // namespace symml
