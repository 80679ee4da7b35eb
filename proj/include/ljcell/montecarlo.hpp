#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cells.hpp"
#include "dynamics.hpp"
#include "forcefield.hpp"

namespace ljcell {

/// Metropolis acceptance probability for an energy change dU.
inline double acceptance_probability(double dU, double temperature) {
    if (!(dU > 0.0)) return dU == dU ? 1.0 : 0.0;
    if (std::isinf(dU)) return 0.0;
    return std::exp(-dU / temperature);
}

/// Canonical-ensemble configuration sampler. Positions only; velocities of
/// the input molecules are ignored.
class McState {
public:
    McState(Domain domain, ForceField ff, std::vector<Molecule> mols, double temperature, double max_displacement)
        : temperature(temperature),
          max_displacement(max_displacement),
          domain_(std::move(domain)),
          ff_(std::move(ff)),
          grid_(CellGrid::global(domain_, ff_.cutoff())) {
        if (!(temperature > 0.0)) throw ConfigError("temperature must be positive", "temperature");
        if (!(max_displacement >= 0.0)) throw ConfigError("max_displacement must be non-negative", "max_displacement");
        for (auto& m : mols) {
            m.v = Vec3{};
            m.f = Vec3{};
        }
        grid_.assign(std::move(mols));
        grid_.for_each_owned_cell([&](const CellIndex& c, std::span<const Molecule> ms) {
            for (const auto& m : ms) {
                ids_.push_back(m.id);
                where_.push_back(c);
            }
        });
        energy_ = full_energy();
    }

    const Domain& domain() const { return domain_; }
    const ForceField& force_field() const { return ff_; }
    const CellGrid& grid() const { return grid_; }
    std::size_t size() const { return ids_.size(); }

    /// Running potential energy (no tail correction).
    double energy() const { return energy_; }
    std::int64_t sweeps() const { return sweeps_; }

    double acceptance() const {
        return attempts == 0 ? 0.0 : static_cast<double>(accepts) / static_cast<double>(attempts);
    }
    void reset_statistics() {
        attempts = 0;
        accepts = 0;
    }

    const Molecule& molecule(std::size_t index) const {
        for (const auto& m : grid_.cell(where_[index]))
            if (m.id == ids_[index]) return m;
        throw OwnershipError("molecule " + std::to_string(ids_[index]) + " missing from its cell");
    }

    std::vector<Molecule> molecules() const {
        std::vector<Molecule> out;
        grid_.for_each_owned([&](const Molecule& m) { out.push_back(m); });
        std::sort(out.begin(), out.end(), [](const Molecule& a, const Molecule& b) { return a.id < b.id; });
        return out;
    }

    /// Interaction energy of molecule `index` if it sat at p (in cell c).
    /// +inf on overlap.
    double site_energy(std::size_t index, const Vec3& p, const CellIndex& c, int species) const {
        const std::int64_t id = ids_[index];
        double u = 0.0;
        bool overlap = false;
        grid_.for_each_neighbor_of(p, c, [&](const Molecule& m, const Vec3&, double r2) {
            if (m.id == id || overlap) return;
            if (r2 < kOverlapR2) {
                overlap = true;
                return;
            }
            u += lj_pair(r2, ff_.pair(species, m.species)).u;
        });
        if (overlap) return std::numeric_limits<double>::infinity();
        if (ff_.wall()) {
            if (p.z <= 0.0) return std::numeric_limits<double>::infinity();
            u += wall_93(p.z, *ff_.wall()).u;
        }
        return u;
    }

    /// Full recomputation of energy and virial.
    EnergyVirial measure() { return compute_forces(grid_, ff_); }

    double full_energy() { return measure().u_pot; }

    /// Move molecule `index` to `trial` if the Metropolis test passes.
    bool attempt(std::size_t index, const Vec3& trial_in, double u01) {
        ++attempts;
        const Molecule& m = molecule(index);
        Vec3 trial = trial_in;
        for (int a = 0; a < 3; ++a) {
            if (domain_.periodic[a]) continue;
            if (trial[a] < 0.0 || trial[a] >= domain_.lengths[a]) return false;
        }
        trial = wrap_position(trial, domain_);
        const CellIndex to = grid_.cell_of(trial);
        const double u_old = site_energy(index, m.r, where_[index], m.species);
        const double u_new = site_energy(index, trial, to, m.species);
        const double dU = u_new - u_old;
        if (!(u01 < acceptance_probability(dU, temperature))) return false;
        where_[index] = grid_.update_position(ids_[index], where_[index], trial);
        energy_ += dU;
        ++accepts;
        return true;
    }

    void finish_sweep() {
        ++sweeps_;
        if (sweeps_ % kRevalidateEvery == 0) revalidate();
    }

    /// Compares the running energy with a full recomputation.
    void revalidate() {
        const double full = full_energy();
        const double scale = std::max({1.0, std::abs(full), std::abs(energy_)});
        if (std::abs(full - energy_) > kTolerance * scale)
            throw ConsistencyError("Monte Carlo energy bookkeeping drifted: running " + std::to_string(energy_) +
                                   ", recomputed " + std::to_string(full));
        energy_ = full;
    }

    static constexpr std::int64_t kRevalidateEvery = 100;
    static constexpr double kTolerance = 1e-8;

    double temperature;
    double max_displacement;
    std::int64_t attempts = 0;
    std::int64_t accepts = 0;

private:
    Domain domain_;
    ForceField ff_;
    CellGrid grid_;
    std::vector<std::int64_t> ids_;
    std::vector<CellIndex> where_;
    double energy_ = 0.0;
    std::int64_t sweeps_ = 0;
};

/// Uniform trial displacement in a cube of half-width max_displacement.
inline bool metropolis_move(McState& s, std::size_t index, Rng& rng) {
    const Vec3 r = s.molecule(index).r;
    const double h = s.max_displacement;
    const Vec3 d{rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h)};
    const double u = rng.uniform();
    if (h == 0.0) {
        ++s.attempts;
        ++s.accepts;
        return true;
    }
    return s.attempt(index, r + d, u);
}

/// N attempts on uniformly chosen molecules.
inline McState& mc_sweep(McState& s, Rng& rng) {
    const std::size_t n = s.size();
    if (n == 0) throw ConfigError("Monte Carlo needs at least one molecule", "N");
    for (std::size_t k = 0; k < n; ++k) metropolis_move(s, static_cast<std::size_t>(rng.below(n)), rng);
    s.finish_sweep();
    return s;
}

/// Multiplicative step toward the target acceptance ratio.
inline double tune_displacement(McState& s, double target = 0.4) {
    const double acc = s.acceptance();
    if (acc > target) s.max_displacement *= 1.1;
    else if (acc < target) s.max_displacement *= 0.9;
    s.reset_statistics();
    return s.max_displacement;
}

/// Observable row for a configuration sample, with the ideal-gas kinetic
/// part at the input temperature.
inline Observables mc_observables(McState& s, std::int64_t sweep) {
    EnergyVirial ev = s.measure();
    const auto n = static_cast<std::int64_t>(s.size());
    const double volume = s.domain().volume();
    std::vector<std::int64_t> counts(s.force_field().species().size(), 0);
    s.grid().for_each_owned([&](const Molecule& m) { ++counts[static_cast<std::size_t>(m.species)]; });
    const TailCorrection tail = s.force_field().tail(counts, volume);
    Observables o;
    o.step = sweep;
    o.time = static_cast<double>(sweep);
    o.N = n;
    o.density = static_cast<double>(n) / volume;
    o.T_inst = s.temperature;
    o.u_lrc = tail.u_lrc;
    o.u_pot = ev.u_pot;
    o.e_kin = 1.5 * static_cast<double>(n) * s.temperature;
    o.e_total = o.u_pot + o.e_kin + tail.u_lrc;
    ev.u_lrc = tail.u_lrc;
    ev.p_lrc = tail.p_lrc;
    o.P = virial_pressure(ev, n, volume, s.temperature);
    return o;
}

}  // namespace ljcell
