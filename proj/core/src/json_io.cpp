#include "fruitmap/json_io.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "fruitmap/errors.hpp"

namespace fruitmap {

namespace fs = std::filesystem;
using nlohmann::json;

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("malformed JSON in '{}': {}", path.string(), e.what()));
    }
}

void write_text_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError(fmt::format("cannot create directory '{}': {}", path.parent_path().string(), ec.message()));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw IoError(fmt::format("write failed for '{}'", path.string()));
    }
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw ValidationError("expected a 3-element array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json pose_to_json(const RigidTransform& t) {
    const auto rm = t.to_row_major();
    return json(std::vector<double>(rm.begin(), rm.end()));
}

RigidTransform pose_from_json(const json& j) {
    if (!j.is_array() || j.size() != 16) {
        throw ValidationError("pose must be an array of 16 reals (row-major 4x4)");
    }
    std::array<double, 16> v{};
    for (std::size_t i = 0; i < 16; ++i) {
        if (!j[i].is_number()) {
            throw ValidationError("pose entries must be numbers");
        }
        v[i] = j[i].get<double>();
    }
    return RigidTransform::from_row_major(v);
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
    if (!j.is_object()) {
        throw ValidationError(fmt::format("{} must be a JSON object", context));
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(fmt::format("unknown key '{}' in {}", key, context));
        }
    }
}

void throw_bad_value(std::string_view key, std::string_view what) {
    throw ValidationError(fmt::format("bad value for '{}': {}", key, what));
}

}  // namespace fruitmap
