#pragma once

#include <string>

#include "polycred/polymatroid.hpp"

namespace polycred {

std::string sha256_hex(const std::string& data);

// "{0,3,5}" for a sorted, de-duplicated subset.
std::string canonical_subset(const Subset& s);
// Round-trippable decimal encoding.
std::string canonical_value(double v);

std::string subset_digest(const Subset& s);
// Stand-in for an authenticated rank value: binds subset, value and root.
std::string auth_tag(const Subset& s, double value, const std::string& root);
std::string commitment_root(const RankOracle& f);

}  // namespace polycred
