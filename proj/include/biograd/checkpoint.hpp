#pragma once

#include <string>

#include "biograd/network.hpp"

namespace biograd {

// Versioned binary container; see docs/checkpoint-format.md for the exact
// byte layout. All multi-byte fields are little-endian.
void save_network(const Network& net, const std::string& path);

Network load_network(const std::string& path);

} // namespace biograd
