#pragma once

// Text form of strategies. See docs/strategy-dsl.md for the schema.

#include <string>

#include "poolgt/strategy.hpp"

namespace poolgt {

std::string serialize(const Strategy& strategy, int indent = 2);
// Schema errors raise ParseError naming the offending location. The result is
// not validated; run validate() on it before executing.
StrategyPtr deserialize(const std::string& text);

}  // namespace poolgt
