#pragma once

#include <string_view>

namespace fruitmap {

/// The two faces of the planar canopy.
enum class Side { A, B };

std::string_view to_string(Side side);
/// Accepts "A" or "B"; throws ValidationError otherwise.
Side parse_side(std::string_view text);

}  // namespace fruitmap
