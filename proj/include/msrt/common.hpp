#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace msrt {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Error for configuration or argument values that violate a contract.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Error for operations invoked in a state that does not permit them.
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

/// Error for infeasible case specifications.
class InfeasibleSpec : public std::runtime_error {
public:
    explicit InfeasibleSpec(const std::string& msg) : std::runtime_error(msg) {}
};

/// splitmix64 step; used to derive independent seed streams from one base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Named seed streams hanging off RunConfig::seed. Every source of randomness
// in the pipeline draws from exactly one of these.
enum class SeedStream : std::uint64_t {
    Scenario = 1,
    VoxelSample = 2,
    Train = 3,
    Simulate = 4,
};

inline std::uint64_t derive_seed(std::uint64_t base, SeedStream s) {
    return mix_seed(base, static_cast<std::uint64_t>(s));
}

}  // namespace msrt
