#include "fruitmap/provenance.hpp"

#include <array>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "fruitmap/errors.hpp"

#ifndef FRUITMAP_VERSION
#define FRUITMAP_VERSION "0.0.0"
#endif

namespace fruitmap {

std::string_view tool_version() { return FRUITMAP_VERSION; }

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += fmt::format("{:02x}", digest[i]);
    }
    return out;
}

std::string config_digest(const nlohmann::json& config) { return sha256_hex(config.dump()); }

nlohmann::json make_provenance(std::string_view dataset_id, const nlohmann::json& config, std::uint64_t seed) {
    return {{"tool", "fruitmap"},
            {"version", std::string(tool_version())},
            {"dataset_id", std::string(dataset_id)},
            {"config_digest", config_digest(config)},
            {"seed", seed}};
}

}  // namespace fruitmap
