#include "fruitmap/side.hpp"

#include <string>

#include "fruitmap/errors.hpp"

namespace fruitmap {

std::string_view to_string(Side side) { return side == Side::A ? "A" : "B"; }

Side parse_side(std::string_view text) {
    if (text == "A") {
        return Side::A;
    }
    if (text == "B") {
        return Side::B;
    }
    throw ValidationError("side must be \"A\" or \"B\", got \"" + std::string(text) + "\"");
}

}  // namespace fruitmap
