#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cells.hpp"
#include "forcefield.hpp"

namespace ljcell {

struct Observables {
    std::int64_t step = 0;
    double time = 0.0;
    double T_inst = 0.0;
    double u_pot = 0.0;  // excludes the tail correction
    double e_kin = 0.0;
    double e_total = 0.0;  // u_pot + e_kin + u_lrc
    double P = 0.0;
    std::int64_t N = 0;
    double density = 0.0;
    double imbalance = 1.0;
    double u_lrc = 0.0;
};

inline double kinetic_energy(std::span<const Molecule> mols, std::span<const double> masses) {
    double e = 0.0;
    for (const auto& m : mols) e += 0.5 * masses[static_cast<std::size_t>(m.species)] * norm2(m.v);
    return e;
}

inline Vec3 total_momentum(std::span<const Molecule> mols, std::span<const double> masses) {
    Vec3 p;
    for (const auto& m : mols) p += masses[static_cast<std::size_t>(m.species)] * m.v;
    return p;
}

/// Degrees of freedom: 3N - 3 when total momentum is conserved (fully
/// periodic, no wall), otherwise 3N.
inline double degrees_of_freedom(std::int64_t n, bool momentum_conserved) {
    return 3.0 * static_cast<double>(n) - (momentum_conserved ? 3.0 : 0.0);
}

inline double temperature_from(double e_kin, std::int64_t n, bool momentum_conserved) {
    if (n < 2) throw NumericalError("temperature undefined for fewer than 2 molecules");
    return 2.0 * e_kin / degrees_of_freedom(n, momentum_conserved);
}

inline double sample_temperature(std::span<const Molecule> mols, std::span<const double> masses,
                                 bool momentum_conserved = true) {
    return temperature_from(kinetic_energy(mols, masses), static_cast<std::int64_t>(mols.size()),
                            momentum_conserved);
}

/// Multiplies all velocities by sqrt(target / T_inst). Returns the factor.
inline double rescale_thermostat(std::span<Molecule> mols, std::span<const double> masses, double target,
                                 bool momentum_conserved = true) {
    if (!(target > 0)) throw ConfigError("thermostat target temperature must be positive", "thermostat_temperature");
    const double t = sample_temperature(mols, masses, momentum_conserved);
    if (!(t > 0)) throw NumericalError("cannot rescale: all velocities are zero");
    const double s = std::sqrt(target / t);
    for (auto& m : mols) m.v *= s;
    return s;
}

inline void remove_net_momentum(std::span<Molecule> mols, std::span<const double> masses) {
    if (mols.empty()) return;
    Vec3 p;
    double mtot = 0.0;
    for (const auto& m : mols) {
        const double mass = masses[static_cast<std::size_t>(m.species)];
        p += mass * m.v;
        mtot += mass;
    }
    const Vec3 vcm = p * (1.0 / mtot);
    for (auto& m : mols) m.v -= vcm;
}

inline void half_kick(std::span<Molecule> mols, std::span<const double> masses, double dt) {
    for (auto& m : mols) m.v += (0.5 * dt / masses[static_cast<std::size_t>(m.species)]) * m.f;
}

/// Reflect a position back across non-periodic faces. The z = 0 face is
/// left alone when the wall is present (the wall potential handles it).
inline void apply_boundaries(Molecule& m, const Domain& d) {
    for (int a = 0; a < 3; ++a) {
        if (d.periodic[a]) continue;
        const bool walled = a == 2 && d.wall.has_value();
        const double len = d.lengths[a];
        if (m.r[a] > len) {
            m.r[a] = 2.0 * len - m.r[a];
            m.v[a] = -m.v[a];
        } else if (m.r[a] < 0.0 && !walled) {
            m.r[a] = -m.r[a];
            m.v[a] = -m.v[a];
        }
    }
}

/// r += dt v, then periodic wrap and reflection.
inline void drift(std::span<Molecule> mols, double dt, const Domain& d) {
    for (auto& m : mols) {
        m.r += dt * m.v;
        apply_boundaries(m, d);
        m.r = wrap_position(m.r, d);
    }
}

inline void check_finite(std::span<const Molecule> mols, std::int64_t step) {
    for (const auto& m : mols)
        if (!is_finite(m.r) || !is_finite(m.v))
            throw NumericalError("non-finite position or velocity for molecule " + std::to_string(m.id) +
                                     " at step " + std::to_string(step),
                                 step);
}

/// Zeroes and recomputes forces on the owned molecules of `grid`.
/// Owned-halo pairs contribute half their energy and virial, since the
/// worker owning the other member evaluates the same pair again.
inline EnergyVirial compute_forces(CellGrid& grid, const ForceField& ff) {
    EnergyVirial ev;
    grid.for_each_owned([](Molecule& m) { m.f = Vec3{}; });
    double u_full = 0.0, w_full = 0.0, u_half = 0.0, w_half = 0.0;
    grid.for_each_pair([&](Molecule& a, Molecule& b, const Vec3& dr, double r2, bool halo) {
        const PairResult pr = lj_pair(r2, ff.pair(a.species, b.species));
        const Vec3 fa = pr.fscal * dr;
        a.f += fa;
        if (halo) {
            u_half += pr.u;
            w_half += pr.fscal * r2;
        } else {
            b.f -= fa;
            u_full += pr.u;
            w_full += pr.fscal * r2;
        }
    });
    ev.u_pot = u_full + 0.5 * u_half;
    ev.virial = w_full + 0.5 * w_half;
    if (ff.wall()) {
        const WallSpec& w = *ff.wall();
        double uw = 0.0;
        grid.for_each_owned([&](Molecule& m) {
            const WallResult wr = wall_93(m.r.z, w);
            m.f.z += wr.fz;
            uw += wr.u;
        });
        ev.u_pot += uw;
    }
    return ev;
}

/// Serial whole-domain state used by tests and tools that do not need the
/// worker runtime.
struct System {
    Domain domain;
    ForceField ff;
    CellGrid grid;
    EnergyVirial last;

    System(Domain d, ForceField f, std::vector<Molecule> mols)
        : domain(std::move(d)), ff(std::move(f)), grid(CellGrid::global(domain, ff.cutoff())) {
        grid.assign(std::move(mols));
        last = compute_forces(grid, ff);
    }

    std::vector<Molecule> molecules() const {
        std::vector<Molecule> out;
        grid.for_each_owned([&](const Molecule& m) { out.push_back(m); });
        return out;
    }
};

/// Half kick, drift, periodic wrap and reflection for one molecule.
inline void kick_drift(Molecule& m, double inv_mass, double dt, const Domain& d, std::int64_t step) {
    m.v += (0.5 * dt * inv_mass) * m.f;
    m.r += dt * m.v;
    apply_boundaries(m, d);
    if (!is_finite(m.r) || !is_finite(m.v))
        throw NumericalError("non-finite position or velocity for molecule " + std::to_string(m.id) +
                                 " at step " + std::to_string(step),
                             step);
    if (d.wall && !(m.r.z > 0.0))
        throw WallEscapeError("molecule " + std::to_string(m.id) + " escaped through the z=0 wall at step " +
                                  std::to_string(step),
                              step);
    m.r = wrap_position(m.r, d);
}

inline void closing_kick(Molecule& m, double inv_mass, double dt, std::int64_t step) {
    m.v += (0.5 * dt * inv_mass) * m.f;
    if (!is_finite(m.v))
        throw NumericalError("non-finite velocity for molecule " + std::to_string(m.id) + " at step " +
                                 std::to_string(step),
                             step);
}

/// One velocity-Verlet step: v += dt/2 f/m; r += dt v; wrap; recompute f;
/// v += dt/2 f/m.
inline void velocity_verlet_step(System& s, double dt, std::int64_t step = 0) {
    const auto masses = s.ff.masses();
    s.grid.for_each_owned([&](Molecule& m) {
        kick_drift(m, 1.0 / masses[static_cast<std::size_t>(m.species)], dt, s.domain, step);
    });
    if (!s.grid.reassign().empty()) throw OwnershipError("molecule left the global domain");
    try {
        s.last = compute_forces(s.grid, s.ff);
    } catch (NumericalError& e) {
        e.step = step;
        throw;
    }
    s.grid.for_each_owned([&](Molecule& m) {
        closing_kick(m, 1.0 / masses[static_cast<std::size_t>(m.species)], dt, step);
    });
}

enum class DensityGeometry { z, rz, xyz };

struct DensityGridSpec {
    DensityGeometry geometry = DensityGeometry::z;
    std::vector<int> bins{50};
    double r_max = 0.0;  // rz: radial extent around the vertical axis through the box centre

    bool operator==(const DensityGridSpec&) const = default;
};

/// Time-averaged number density histogram. Counts are integers so the
/// per-sample normalisation is exact.
class DensityGrid {
public:
    DensityGrid() = default;

    DensityGrid(const DensityGridSpec& spec, const Domain& domain) : spec_(spec), domain_(domain) {
        const std::size_t want = spec.geometry == DensityGeometry::z ? 1 : (spec.geometry == DensityGeometry::rz ? 2 : 3);
        if (spec.bins.size() != want) throw ConfigError("density grid needs " + std::to_string(want) + " bin counts", "density_bins");
        for (int b : spec.bins)
            if (b < 1) throw ConfigError("density bin counts must be >= 1", "density_bins");
        const Vec3& L = domain.lengths;
        std::size_t total = 1;
        for (int b : spec.bins) total *= static_cast<std::size_t>(b);
        counts_.assign(total, 0);
        volume_.assign(total, 0.0);
        switch (spec.geometry) {
            case DensityGeometry::z: {
                width_ = {L.z / spec.bins[0]};
                for (auto& v : volume_) v = L.x * L.y * width_[0];
                break;
            }
            case DensityGeometry::rz: {
                if (!(spec.r_max > 0)) throw ConfigError("density_rmax must be positive for rz grids", "density_rmax");
                width_ = {spec.r_max / spec.bins[0], L.z / spec.bins[1]};
                for (int i = 0; i < spec.bins[0]; ++i) {
                    const double r0 = i * width_[0];
                    const double r1 = (i + 1) * width_[0];
                    const double v = std::numbers::pi * (r1 * r1 - r0 * r0) * width_[1];
                    for (int k = 0; k < spec.bins[1]; ++k) volume_[static_cast<std::size_t>(i) * spec.bins[1] + k] = v;
                }
                break;
            }
            case DensityGeometry::xyz: {
                width_ = {L.x / spec.bins[0], L.y / spec.bins[1], L.z / spec.bins[2]};
                for (auto& v : volume_) v = width_[0] * width_[1] * width_[2];
                break;
            }
        }
        for (double v : volume_)
            if (!(v > 0)) throw ConfigError("zero density bin volume", "density_bins");
    }

    void accumulate(std::span<const Molecule> mols) {
        for (const auto& m : mols) {
            const auto idx = bin_of(m.r);
            if (idx < 0) continue;
            ++counts_[static_cast<std::size_t>(idx)];
            ++inside_total_;
        }
        ++samples_;
    }

    /// Flat bin index or -1 when outside the gridded region.
    std::int64_t bin_of(const Vec3& r) const {
        const Vec3& L = domain_.lengths;
        auto clampbin = [](double x, double w, int n) -> int {
            if (x < 0) return -1;
            int i = static_cast<int>(std::floor(x / w));
            if (i == n) i = n - 1;
            return i < n ? i : -1;
        };
        switch (spec_.geometry) {
            case DensityGeometry::z: {
                if (r.z > L.z) return -1;
                return clampbin(r.z, width_[0], spec_.bins[0]);
            }
            case DensityGeometry::rz: {
                Vec3 d{r.x - 0.5 * L.x, r.y - 0.5 * L.y, 0.0};
                d = minimum_image(d, domain_);
                const double rad = std::sqrt(d.x * d.x + d.y * d.y);
                if (rad >= spec_.r_max || r.z > L.z) return -1;
                const int i = clampbin(rad, width_[0], spec_.bins[0]);
                const int k = clampbin(r.z, width_[1], spec_.bins[1]);
                if (i < 0 || k < 0) return -1;
                return static_cast<std::int64_t>(i) * spec_.bins[1] + k;
            }
            case DensityGeometry::xyz: {
                int c[3];
                for (int a = 0; a < 3; ++a) {
                    if (r[a] > L[a]) return -1;
                    c[a] = clampbin(r[a], width_[static_cast<std::size_t>(a)], spec_.bins[static_cast<std::size_t>(a)]);
                    if (c[a] < 0) return -1;
                }
                return (static_cast<std::int64_t>(c[0]) * spec_.bins[1] + c[1]) * spec_.bins[2] + c[2];
            }
        }
        return -1;
    }

    double density(std::size_t bin) const {
        return samples_ == 0 ? 0.0
                             : static_cast<double>(counts_[bin]) / (static_cast<double>(samples_) * volume_[bin]);
    }
    std::vector<double> densities() const {
        std::vector<double> d(counts_.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = density(i);
        return d;
    }
    double max_density() const {
        double m = 0.0;
        for (std::size_t i = 0; i < counts_.size(); ++i) m = std::max(m, density(i));
        return m;
    }

    const DensityGridSpec& spec() const { return spec_; }
    const std::vector<double>& bin_widths() const { return width_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    double bin_volume(std::size_t bin) const { return volume_[bin]; }
    std::int64_t samples() const { return samples_; }
    std::uint64_t inside_total() const { return inside_total_; }

private:
    DensityGridSpec spec_;
    Domain domain_;
    std::vector<double> width_;
    std::vector<std::uint64_t> counts_;
    std::vector<double> volume_;
    std::int64_t samples_ = 0;
    std::uint64_t inside_total_ = 0;
};

/// Single-sample density grid.
inline DensityGrid accumulate_density(const DensityGridSpec& spec, const Domain& domain,
                                      std::span<const Molecule> mols) {
    DensityGrid g(spec, domain);
    g.accumulate(mols);
    return g;
}

}  // namespace ljcell
