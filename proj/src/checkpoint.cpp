#include "symml/checkpoint.hpp"

#include <fstream>

#include "symml/errors.hpp"

namespace symml {

json to_json(const Checkpoint& c)
{
    return {{"format_version", c.format_version},
            {"model_kind", c.model_kind},
            {"spec", c.spec},
            {"activation", c.activation},
            {"init_scheme", c.init_scheme},
            {"seed", c.seed},
            {"params", c.params},
            {"training_config", c.training_config},
            {"metrics", c.metrics},
            {"metadata", c.metadata}};
}

Checkpoint checkpoint_from_json(const json& j)
{
    Checkpoint c;
    try {
        c.format_version = j.at("format_version").get<int>();
        if (c.format_version != kCheckpointFormatVersion)
            throw FormatVersionMismatch("checkpoint format " + std::to_string(c.format_version) + ", expected " +
                                        std::to_string(kCheckpointFormatVersion));
        reject_unknown_keys(j,
                            {"format_version", "model_kind", "spec", "activation", "init_scheme", "seed", "params",
                             "training_config", "metrics", "metadata"},
                            "checkpoint");
        c.model_kind = j.at("model_kind").get<std::string>();
        c.spec = j.at("spec");
        c.activation = j.at("activation").get<std::string>();
        c.init_scheme = j.at("init_scheme").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.params = j.at("params").get<std::vector<double>>();
        c.training_config = j.value("training_config", json::object());
        c.metrics = j.value("metrics", json::object());
        c.metadata = j.value("metadata", json::object());
    } catch (const json::exception& e) {
        throw CorruptRecord(std::string("malformed checkpoint: ") + e.what());
    }
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw InvalidArgument("cannot write " + path);
    f << to_json(c).dump(1) << '\n';
    if (!f)
        throw InvalidArgument("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw InvalidArgument("cannot read " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw CorruptRecord("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

namespace {

json net_json(const std::string& name, const DenseNetSpec& spec)
{
    return {{"name", name}, {"layer_sizes", spec.layer_sizes}};
}

DenseNetSpec net_from(const json& nets, const std::string& name, Activation act)
{
    for (const auto& n : nets)
        if (n.at("name").get<std::string>() == name) {
            DenseNetSpec s{n.at("layer_sizes").get<std::vector<int>>(), act};
            s.validate();
            return s;
        }
    throw CorruptRecord("checkpoint spec has no '" + name + "' network");
}

void expect_kind(const Checkpoint& c, std::initializer_list<const char*> kinds)
{
    for (const char* k : kinds)
        if (c.model_kind == k)
            return;
    throw InvalidArgument("checkpoint holds a '" + c.model_kind + "' model");
}

// Splits the flat vector into consecutive blocks of the given sizes.
std::vector<std::vector<double>> split_params(const std::vector<double>& flat, std::initializer_list<std::size_t> sizes)
{
    std::size_t total = 0;
    for (auto s : sizes)
        total += s;
    if (total != flat.size())
        throw ShapeMismatch("checkpoint holds " + std::to_string(flat.size()) + " parameters, spec needs " +
                            std::to_string(total));
    std::vector<std::vector<double>> out;
    std::size_t pos = 0;
    for (auto s : sizes) {
        out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                         flat.begin() + static_cast<std::ptrdiff_t>(pos + s));
        pos += s;
    }
    return out;
}

template <class F>
auto guarded(F&& f)
{
    try {
        return f();
    } catch (const json::exception& e) {
        throw CorruptRecord(std::string("malformed checkpoint spec: ") + e.what());
    }
}

} // namespace

Checkpoint make_checkpoint(const SeparableModel& m, std::uint64_t seed)
{
    m.validate();
    Checkpoint c;
    c.model_kind = "asrnn";
    json nets = json::array();
    if (!m.fixed_kinetic)
        nets.push_back(net_json("kinetic", m.kinetic.spec));
    nets.push_back(net_json("potential", m.potential.spec));
    c.spec = {{"nets", nets}, {"param_channels", m.param_channels}, {"fixed_kinetic", m.fixed_kinetic}};
    c.activation = to_string(m.potential.spec.activation);
    c.seed = seed;
    c.params = m.flat_params();
    return c;
}

SeparableModel separable_from_checkpoint(const Checkpoint& c)
{
    expect_kind(c, {"asrnn"});
    return guarded([&] {
        const Activation act = activation_from_string(c.activation);
        SeparableModel m;
        m.param_channels = c.spec.at("param_channels").get<int>();
        m.fixed_kinetic = c.spec.at("fixed_kinetic").get<bool>();
        const auto& nets = c.spec.at("nets");
        m.potential.spec = net_from(nets, "potential", act);
        std::size_t k_count = 0;
        if (!m.fixed_kinetic) {
            m.kinetic.spec = net_from(nets, "kinetic", act);
            k_count = m.kinetic.spec.param_count();
        }
        const auto blocks = split_params(c.params, {k_count, m.potential.spec.param_count()});
        m.kinetic.params = blocks[0];
        m.potential.params = blocks[1];
        m.validate();
        return m;
    });
}

Checkpoint make_checkpoint(const HnnModel& m, std::uint64_t seed)
{
    m.validate();
    Checkpoint c;
    c.model_kind = m.adaptable() ? "ahnn" : "hnn";
    c.spec = {{"nets", json::array({net_json("hamiltonian", m.net.spec)})}, {"param_channels", m.param_channels}};
    c.activation = to_string(m.net.spec.activation);
    c.seed = seed;
    c.params = m.net.params;
    return c;
}

HnnModel hnn_from_checkpoint(const Checkpoint& c)
{
    expect_kind(c, {"hnn", "ahnn"});
    return guarded([&] {
        HnnModel m;
        m.param_channels = c.spec.at("param_channels").get<int>();
        m.net.spec = net_from(c.spec.at("nets"), "hamiltonian", activation_from_string(c.activation));
        m.net.params = split_params(c.params, {m.net.spec.param_count()})[0];
        m.validate();
        return m;
    });
}

Checkpoint make_checkpoint(const BaselineModel& m, std::uint64_t seed)
{
    m.validate();
    Checkpoint c;
    c.model_kind = "baseline";
    c.spec = {{"nets", json::array({net_json("derivatives", m.net.spec)})}, {"param_channels", m.param_channels}};
    c.activation = to_string(m.net.spec.activation);
    c.seed = seed;
    c.params = m.net.params;
    return c;
}

BaselineModel baseline_from_checkpoint(const Checkpoint& c)
{
    expect_kind(c, {"baseline"});
    return guarded([&] {
        BaselineModel m;
        m.param_channels = c.spec.at("param_channels").get<int>();
        m.net.spec = net_from(c.spec.at("nets"), "derivatives", activation_from_string(c.activation));
        m.net.params = split_params(c.params, {m.net.spec.param_count()})[0];
        m.validate();
        return m;
    });
}

Checkpoint make_checkpoint(const EncoderModel& m, std::uint64_t seed)
{
    m.validate();
    Checkpoint c;
    c.model_kind = "lstm-encoder";
    c.spec = {{"input_size", m.cell.input_size()},
              {"hidden_size", m.cell.hidden_size()},
              {"n_params", m.n_params()},
              {"window_len", m.window_len},
              {"gate_order", "f,i,o,c"}};
    c.activation = "sigmoid-gates,tanh-cell";
    c.seed = seed;
    c.params = m.flat_params();
    return c;
}

EncoderModel encoder_from_checkpoint(const Checkpoint& c)
{
    expect_kind(c, {"lstm-encoder"});
    return guarded([&] {
        if (c.spec.at("input_size").get<int>() != 2)
            throw ShapeMismatch("encoder checkpoints must take (q_x, p_x) inputs");
        EncoderModel m = EncoderModel::zeros(c.spec.at("hidden_size").get<int>(), c.spec.at("n_params").get<int>(),
                                             c.spec.at("window_len").get<std::size_t>());
        if (c.params.size() != m.param_count())
            throw ShapeMismatch("checkpoint parameter count does not match the encoder spec");
        m.set_flat_params(c.params);
        return m;
    });
}

} // namespace symml
