#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>

namespace fog {

/// Identifier of a tree node. Leaves (devices) take ids 0..N-1, upper layers follow.
struct NodeId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const NodeId&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, NodeId id) { return os << id.value; }

using ClusterId = std::size_t;

/// Deterministic 64-bit mixing (splitmix64 finalizer). Used to derive
/// independent RNG streams from (seed, round, phase, ...) tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Parts... parts) noexcept {
    std::uint64_t h = mix64(seed);
    ((h = mix64(h ^ static_cast<std::uint64_t>(parts))), ...);
    return h;
}

}  // namespace fog

template <>
struct std::hash<fog::NodeId> {
    std::size_t operator()(fog::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
