#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"

namespace ljcell {

/// Squared distances below this are treated as overlapping sites.
inline constexpr double kOverlapR2 = 1e-12;

struct PairParams {
    double sigma = 1.0;
    double epsilon = 1.0;
    double cutoff = 2.5;
    double u_shift = 0.0;  // untruncated potential at the cutoff

    // cached
    double sigma2 = 1.0;
    double cutoff2 = 6.25;
};

/// Untruncated 12-6 potential.
inline double lj_bare(double r2, double sigma, double epsilon) {
    const double sr2 = sigma * sigma / r2;
    const double sr6 = sr2 * sr2 * sr2;
    return 4.0 * epsilon * (sr6 * sr6 - sr6);
}

inline PairParams make_pair_params(double sigma, double epsilon, double cutoff) {
    if (!(sigma > 0) || !(epsilon > 0) || !(cutoff > 0))
        throw ConfigError("pair parameters sigma, epsilon and cutoff must be positive");
    PairParams p;
    p.sigma = sigma;
    p.epsilon = epsilon;
    p.cutoff = cutoff;
    p.sigma2 = sigma * sigma;
    p.cutoff2 = cutoff * cutoff;
    p.u_shift = lj_bare(p.cutoff2, sigma, epsilon);
    return p;
}

/// Unlike-pair parameters: sigma_ij = eta (s_i + s_j)/2, eps_ij = xi sqrt(e_i e_j).
inline PairParams mix(const Species& a, const Species& b, double xi, double eta, double cutoff) {
    if (!(a.sigma > 0) || !(b.sigma > 0) || !(a.epsilon > 0) || !(b.epsilon > 0) || !(xi > 0) ||
        !(eta > 0))
        throw ConfigError("mixing requires positive sigma, epsilon, xi and eta");
    return make_pair_params(eta * (a.sigma + b.sigma) / 2.0, xi * std::sqrt(a.epsilon * b.epsilon),
                            cutoff);
}

struct PairResult {
    double u = 0.0;
    double fscal = 0.0;  // force / r; force on i is fscal * (r_i - r_j)
};

/// Truncated-shifted 12-6 pair interaction.
inline PairResult lj_pair(double r2, const PairParams& p) {
    if (r2 < kOverlapR2) [[unlikely]]
        throw OverlapError("overlapping interaction sites (r^2 = " + std::to_string(r2) + ")");
    if (r2 >= p.cutoff2) return {};
    const double sr2 = p.sigma2 / r2;
    const double sr6 = sr2 * sr2 * sr2;
    const double sr12 = sr6 * sr6;
    return {4.0 * p.epsilon * (sr12 - sr6) - p.u_shift, 24.0 * p.epsilon * (2.0 * sr12 - sr6) / r2};
}

struct WallResult {
    double u = 0.0;
    double fz = 0.0;
};

inline double wall_bare(double z, const WallSpec& w) {
    const double s3 = std::pow(w.sigma / z, 3);
    return w.epsilon * (2.0 / 15.0 * s3 * s3 * s3 - s3);
}

/// Integrated 9-3 wall at z = 0, shifted to zero at the wall cutoff.
inline WallResult wall_93(double z, const WallSpec& w) {
    if (!(z > 0))
        throw WallEscapeError("molecule escaped through the z=0 wall (z = " + std::to_string(z) + ")");
    if (z >= w.cutoff) return {};
    const double s = w.sigma / z;
    const double s3 = s * s * s;
    const double s9 = s3 * s3 * s3;
    const double u = w.epsilon * (2.0 / 15.0 * s9 - s3) - wall_bare(w.cutoff, w);
    const double fz = w.epsilon * (6.0 / 5.0 * s9 - 3.0 * s3) / z;
    return {u, fz};
}

struct EnergyVirial {
    double u_pot = 0.0;
    double virial = 0.0;  // sum over pairs of r_ij . f_ij
    double u_lrc = 0.0;
    double p_lrc = 0.0;

    EnergyVirial& operator+=(const EnergyVirial& o) {
        u_pot += o.u_pot;
        virial += o.virial;
        u_lrc += o.u_lrc;
        p_lrc += o.p_lrc;
        return *this;
    }
    friend EnergyVirial operator+(EnergyVirial a, const EnergyVirial& b) { return a += b; }
};

struct TailCorrection {
    double u_lrc = 0.0;  // total, not per molecule
    double p_lrc = 0.0;
};

/// Mean-field tail beyond the cutoff for a uniform fluid of one pair type.
inline TailCorrection long_range_correction(double density, const PairParams& p, std::int64_t n,
                                            bool homogeneous = true) {
    if (!homogeneous)
        throw ConfigError("long-range correction requested for an interfacial scenario", "homogeneous");
    const double src3 = std::pow(p.sigma / p.cutoff, 3);
    const double src9 = src3 * src3 * src3;
    const double s3 = p.sigma * p.sigma * p.sigma;
    const double pi = std::numbers::pi;
    TailCorrection t;
    t.u_lrc = static_cast<double>(n) * (8.0 / 3.0) * pi * density * p.epsilon * s3 *
              (src9 / 3.0 - src3);
    t.p_lrc = (16.0 / 3.0) * pi * density * density * p.epsilon * s3 * (2.0 / 3.0 * src9 - src3);
    return t;
}

/// P = rho T + W/(3V) + p_lrc.
inline double virial_pressure(const EnergyVirial& ev, std::int64_t n, double volume, double t_inst) {
    return static_cast<double>(n) / volume * t_inst + ev.virial / (3.0 * volume) + ev.p_lrc;
}

/// Pair tables for every species combination plus the optional wall.
class ForceField {
public:
    ForceField() = default;

    ForceField(SpeciesTable table, double cutoff, std::optional<WallSpec> wall = std::nullopt,
               bool homogeneous = false)
        : table_(std::move(table)), cutoff_(cutoff), wall_(wall), homogeneous_(homogeneous) {
        if (!(cutoff > 0)) throw ConfigError("cutoff must be positive", "cutoff");
        const std::size_t n = table_.size();
        pairs_.resize(n * n);
        masses_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            masses_[i] = table_[i].mass;
            for (std::size_t j = 0; j < n; ++j)
                pairs_[i * n + j] =
                    make_pair_params(table_.mixed_sigma(i, j), table_.mixed_epsilon(i, j), cutoff);
        }
    }

    const PairParams& pair(int i, int j) const { return pairs_[static_cast<std::size_t>(i) * table_.size() + j]; }
    double mass(int s) const { return masses_[static_cast<std::size_t>(s)]; }
    std::span<const double> masses() const { return masses_; }
    double cutoff() const { return cutoff_; }
    const std::optional<WallSpec>& wall() const { return wall_; }
    bool homogeneous() const { return homogeneous_; }
    const SpeciesTable& species() const { return table_; }

    /// Composition-weighted tail correction; zero unless the system is
    /// declared homogeneous.
    TailCorrection tail(std::span<const std::int64_t> counts, double volume) const {
        TailCorrection t;
        if (!homogeneous_) return t;
        std::int64_t total = 0;
        for (auto c : counts) total += c;
        if (total == 0) return t;
        const double rho = static_cast<double>(total) / volume;
        const std::size_t n = table_.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double w = static_cast<double>(counts[i]) / static_cast<double>(total) *
                                 static_cast<double>(counts[j]) / static_cast<double>(total);
                if (w == 0.0) continue;
                const auto single = long_range_correction(rho, pairs_[i * n + j], total);
                t.u_lrc += w * single.u_lrc;
                t.p_lrc += w * single.p_lrc;
            }
        return t;
    }

private:
    SpeciesTable table_;
    double cutoff_ = 2.5;
    std::optional<WallSpec> wall_;
    bool homogeneous_ = false;
    std::vector<PairParams> pairs_;
    std::vector<double> masses_;
};

}  // namespace ljcell
