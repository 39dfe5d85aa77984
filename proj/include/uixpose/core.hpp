#pragma once

/**
 * @file core.hpp
 * @brief Shared vocabulary: the three behaviour axes, 3-vectors over them,
 *        clipping helpers, and the error types every module throws.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uixpose {

/// Action space: network utilisation, memory pressure, resource intensity.
enum class Axis : std::size_t { Net = 0, Mem = 1, Res = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::Net, Axis::Mem, Axis::Res};

constexpr std::string_view axis_name(Axis a) noexcept {
    switch (a) {
        case Axis::Net: return "net";
        case Axis::Mem: return "mem";
        case Axis::Res: return "res";
    }
    return "?";
}

/// Fixed-size vector over the action space, indexable by Axis.
struct Vec3 {
    std::array<double, 3> v{0.0, 0.0, 0.0};

    constexpr double& operator[](Axis a) noexcept { return v[static_cast<std::size_t>(a)]; }
    constexpr double operator[](Axis a) const noexcept { return v[static_cast<std::size_t>(a)]; }
    constexpr double& operator[](std::size_t i) noexcept { return v[i]; }
    constexpr double operator[](std::size_t i) const noexcept { return v[i]; }

    constexpr double net() const noexcept { return v[0]; }
    constexpr double mem() const noexcept { return v[1]; }
    constexpr double res() const noexcept { return v[2]; }

    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

inline double squared_distance(const Vec3& a, const Vec3& b) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return acc;
}

inline double l2_norm(const Vec3& a) noexcept {
    return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

constexpr double clip(double x, double lo, double hi) noexcept {
    return x < lo ? lo : (x > hi ? hi : x);
}

constexpr double clip01(double x) noexcept { return clip(x, 0.0, 1.0); }

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

/// Argmax over the axes; ties resolve net > mem > res.
inline Axis dominant_axis(const Vec3& b) noexcept {
    Axis best = Axis::Net;
    for (Axis a : {Axis::Mem, Axis::Res}) {
        if (b[a] > b[best]) best = a;
    }
    return best;
}

// Error taxonomy. Operational failures throw; data problems are diagnostics.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace uixpose
