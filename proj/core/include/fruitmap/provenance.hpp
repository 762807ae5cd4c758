#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace fruitmap {

std::string_view tool_version();

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Digest of the compact serialization of `config` (object keys are sorted by nlohmann::json).
std::string config_digest(const nlohmann::json& config);

/// {"tool", "version", "dataset_id", "config_digest", "seed"}.
nlohmann::json make_provenance(std::string_view dataset_id, const nlohmann::json& config, std::uint64_t seed);

}  // namespace fruitmap
