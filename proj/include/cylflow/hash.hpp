#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include <Eigen/Dense>

namespace cylflow {

/// FNV-1a over raw bytes.  Used for artifact manifests and regression pins;
/// stable across platforms because every producer writes IEEE doubles with
/// one arithmetic path.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t fnv1a64(const Eigen::VectorXd& v) {
    return fnv1a64(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

} // namespace cylflow
