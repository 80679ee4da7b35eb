#pragma once
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

// All quantities are in reduced Lennard-Jones units: sigma = epsilon = m =
// k_B = 1 for the reference species.

namespace ljcell {

struct Vec3 {
    double x{}, y{}, z{};

    constexpr double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
    constexpr double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
inline bool is_finite(const Vec3& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

struct Molecule {
    std::int64_t id = 0;
    int species = 0;
    Vec3 r;  // position
    Vec3 v;  // velocity
    Vec3 f;  // force accumulator
};

struct Species {
    std::string name;
    double sigma = 1.0;
    double epsilon = 1.0;
    double mass = 1.0;
};

/// Pure-species parameters plus binary interaction parameters and the
/// mixed unlike-pair tables derived from them (Lorentz-Berthelot form
/// scaled by eta for size and xi for energy).
class SpeciesTable {
public:
    SpeciesTable() = default;

    explicit SpeciesTable(std::vector<Species> species) : species_(std::move(species)) {
        for (const auto& s : species_) {
            if (!(s.sigma > 0) || !(s.epsilon > 0) || !(s.mass > 0))
                throw ConfigError("species '" + s.name + "' needs positive sigma, epsilon and mass",
                                  "species." + s.name);
        }
        const std::size_t n = species_.size();
        xi_.assign(n * n, 1.0);
        eta_.assign(n * n, 1.0);
        mixed_sigma_.assign(n * n, 0.0);
        mixed_epsilon_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) remix(i, j);
    }

    std::size_t size() const { return species_.size(); }
    const std::vector<Species>& species() const { return species_; }
    const Species& operator[](std::size_t i) const { return species_.at(i); }

    std::optional<std::size_t> index_of(const std::string& name) const {
        for (std::size_t i = 0; i < species_.size(); ++i)
            if (species_[i].name == name) return i;
        return std::nullopt;
    }

    void set_binary(std::size_t i, std::size_t j, double xi, double eta) {
        if (!(xi > 0) || !(eta > 0))
            throw ConfigError("binary parameters xi and eta must be positive");
        const std::size_t n = size();
        xi_.at(i * n + j) = xi_.at(j * n + i) = xi;
        eta_.at(i * n + j) = eta_.at(j * n + i) = eta;
        remix(i, j);
        remix(j, i);
    }

    double xi(std::size_t i, std::size_t j) const { return xi_[i * size() + j]; }
    double eta(std::size_t i, std::size_t j) const { return eta_[i * size() + j]; }
    double mixed_sigma(std::size_t i, std::size_t j) const { return mixed_sigma_[i * size() + j]; }
    double mixed_epsilon(std::size_t i, std::size_t j) const { return mixed_epsilon_[i * size() + j]; }

    bool operator==(const SpeciesTable&) const = default;

private:
    void remix(std::size_t i, std::size_t j) {
        const std::size_t n = size();
        const auto& a = species_[i];
        const auto& b = species_[j];
        // (a+b) and a*b are commutative in IEEE arithmetic, so the tables
        // come out bit-symmetric.
        mixed_sigma_[i * n + j] = eta_[i * n + j] * (a.sigma + b.sigma) / 2.0;
        mixed_epsilon_[i * n + j] = xi_[i * n + j] * std::sqrt(a.epsilon * b.epsilon);
    }

    std::vector<Species> species_;
    std::vector<double> xi_, eta_, mixed_sigma_, mixed_epsilon_;
};

/// Planar 9-3 wall on the z = 0 face.
struct WallSpec {
    double epsilon = 1.0;
    double sigma = 1.0;
    double cutoff = 2.5;

    bool operator==(const WallSpec&) const = default;
};

struct Domain {
    Vec3 lengths{1.0, 1.0, 1.0};
    std::array<bool, 3> periodic{true, true, true};
    std::array<bool, 3> reflecting{false, false, false};
    std::optional<WallSpec> wall;

    double volume() const { return lengths.x * lengths.y * lengths.z; }
    bool fully_periodic() const { return periodic[0] && periodic[1] && periodic[2]; }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (!(lengths[a] > 0) || !std::isfinite(lengths[a]))
                throw ConfigError("domain lengths must be positive", "lengths");
            const bool walled = a == 2 && wall.has_value();
            if (!periodic[a] && !reflecting[a] && !walled)
                throw ConfigError("non-periodic axis " + std::string(1, "xyz"[a]) +
                                      " needs a wall or a reflecting boundary",
                                  "periodic");
        }
        if (wall && periodic[2]) throw ConfigError("a z=0 wall requires a non-periodic z axis", "wall_epsilon");
        if (wall && (!(wall->epsilon > 0) || !(wall->sigma > 0) || !(wall->cutoff > 0)))
            throw ConfigError("wall parameters must be positive", "wall_epsilon");
    }

    bool operator==(const Domain&) const = default;
};

/// Maps each periodic component into [0, L). Non-periodic components pass
/// through untouched.
inline Vec3 wrap_position(Vec3 r, const Domain& d) {
    for (int a = 0; a < 3; ++a) {
        if (!d.periodic[a]) continue;
        const double len = d.lengths[a];
        double x = r[a];
        if (x >= 0.0 && x < len) continue;
        x -= len * std::floor(x / len);
        // rounding can land exactly on L (tiny negative input) or just below 0
        if (x >= len || x < 0.0) x = 0.0;
        r[a] = x;
    }
    return r;
}

/// Folds each periodic component of a separation into [-L/2, L/2).
inline Vec3 minimum_image(Vec3 dr, const Domain& d) {
    for (int a = 0; a < 3; ++a) {
        if (!d.periodic[a]) continue;
        const double len = d.lengths[a];
        dr[a] -= len * std::floor(dr[a] / len + 0.5);
    }
    return dr;
}

/// Counter-based generator: output n is the SplitMix64 finalizer applied to
/// key + (n+1)*golden_gamma. Substreams get their own key through derive(),
/// which hashes (parent key, purpose, index); streams are never shared.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    Rng derive(std::uint64_t purpose, std::uint64_t index = 0) const {
        Rng child(0);
        child.key_ = mix(key_ ^ mix(purpose * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL) ^
                         mix(index + 0x3c6ef372fe94f82bULL));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = -n % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t x = next_u64();
            const __uint128_t m = static_cast<__uint128_t>(x) * n;
            if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Standard normal deviate (Box-Muller, one value per two uniforms).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t counter() const { return counter_; }

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return next_u64(); }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Purpose tags for Rng::derive.
namespace rng_purpose {
inline constexpr std::uint64_t lattice = 1;
inline constexpr std::uint64_t velocities = 2;
inline constexpr std::uint64_t species = 3;
inline constexpr std::uint64_t monte_carlo = 4;
inline constexpr std::uint64_t test = 99;
}  // namespace rng_purpose

}  // namespace ljcell
