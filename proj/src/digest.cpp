#include "polycred/digest.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace polycred {

std::string sha256_hex(const std::string& data) {
    unsigned char md[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char c : md) {
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 15]);
    }
    return out;
}

std::string canonical_subset(const Subset& s) {
    Subset u = s;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::string out = "{";
    for (std::size_t i = 0; i < u.size(); ++i) out += (i ? "," : "") + std::to_string(u[i]);
    return out + "}";
}

std::string canonical_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string subset_digest(const Subset& s) { return sha256_hex(canonical_subset(s)); }

std::string auth_tag(const Subset& s, double value, const std::string& root) {
    return sha256_hex(canonical_subset(s) + "|" + canonical_value(value) + "|" + root);
}

std::string commitment_root(const RankOracle& f) { return sha256_hex("clinching|" + f.digest_material()); }

}  // namespace polycred
