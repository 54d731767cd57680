#pragma once

#include <json.hpp>

namespace nds {
// std::map-backed objects keep keys sorted, which is what makes dump() canonical.
using json = nlohmann::json;
}
