#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symml/config.hpp"
#include "symml/lstm.hpp"
#include "symml/models.hpp"

namespace symml {

inline constexpr int kCheckpointFormatVersion = 1;

// Model kinds: "baseline", "hnn", "ahnn", "asrnn", "lstm-encoder".
struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    std::string model_kind;
    json spec = json::object();
    std::string activation = "tanh";
    std::string init_scheme = "scaled-uniform";
    std::uint64_t seed = 0;
    std::vector<double> params;
    json training_config = json::object();
    json metrics = json::object();
    json metadata = json::object(); // run header: version, seed, config hash

    bool operator==(const Checkpoint&) const = default;
};

json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const json& j);

// Numbers are written in shortest round-trip decimal form, so save/load is bit-exact.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const SeparableModel& m, std::uint64_t seed);
Checkpoint make_checkpoint(const HnnModel& m, std::uint64_t seed);
Checkpoint make_checkpoint(const BaselineModel& m, std::uint64_t seed);
Checkpoint make_checkpoint(const EncoderModel& m, std::uint64_t seed);

SeparableModel separable_from_checkpoint(const Checkpoint& c);
HnnModel hnn_from_checkpoint(const Checkpoint& c);
BaselineModel baseline_from_checkpoint(const Checkpoint& c);
EncoderModel encoder_from_checkpoint(const Checkpoint& c);

} // namespace symml
