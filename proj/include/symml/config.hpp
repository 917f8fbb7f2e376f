#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

#include "symml/data.hpp"
#include "symml/training.hpp"

namespace symml {

using json = nlohmann::json;

// Accepts a plain decimal ("0.125") or a fraction ("1/8").
double parse_number(std::string_view text);

// Numbers in config files may be JSON numbers or fraction strings.
double number_from_json(const json& j, const std::string& key);

// Throws InvalidArgument naming the first key not in `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where);

json read_json_file(const std::string& path);

// CRC-32 of the compact JSON dump, as 8 hex digits.
std::string config_hash(const json& j);
std::uint32_t crc32_bytes(const void* data, std::size_t size);

json to_json(const GenerationConfig& c);
// `check` runs GenerationConfig::validate(); dataset loading skips it so empty manifests round-trip.
GenerationConfig generation_config_from_json(const json& j, bool check = true);

json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);

json to_json(const PotentialParams& p);

} // namespace symml
