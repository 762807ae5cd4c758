#pragma once

#include <array>
#include <filesystem>
#include <initializer_list>
#include <string_view>

#include <nlohmann/json.hpp>

#include "fruitmap/geometry.hpp"

namespace fruitmap {

/// Parses a JSON file. Missing/unreadable files raise IoError, parse failures ValidationError.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline. Creates parent directories.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Writes `text` verbatim. Creates parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

nlohmann::json pose_to_json(const RigidTransform& t);
RigidTransform pose_from_json(const nlohmann::json& j);

/// Throws ValidationError naming the first key of object `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

[[noreturn]] void throw_bad_value(std::string_view key, std::string_view what);

/// Overwrites `out` with j[key] when present; type mismatches raise ValidationError.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw_bad_value(key, e.what());
        }
    }
}

}  // namespace fruitmap
