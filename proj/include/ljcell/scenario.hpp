#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "config.hpp"
#include "dynamics.hpp"

namespace ljcell {

struct GeneratedScenario {
    std::vector<Molecule> molecules;
    std::int64_t liquid_count = 0;  // ids [0, liquid_count) started in the liquid region
};

namespace detail {

struct Lattice {
    std::vector<Vec3> sites;
    Vec3 spacing;  // unit-cell edges actually used
};

/// FCC sites filling [0, L) on x and y and [z0, z1) on z, with unit cells
/// stretched so an integer number fits each axis. Cell edge is at most the
/// ideal edge (4/rho)^(1/3), so the site density is >= rho.
inline Lattice fcc(const Vec3& lengths, double z0, double z1, double density) {
    const double a = std::cbrt(4.0 / density);
    Lattice lat;
    int n[3];
    const double ext[3] = {lengths.x, lengths.y, z1 - z0};
    for (int k = 0; k < 3; ++k) {
        n[k] = std::max(1, static_cast<int>(std::ceil(ext[k] / a - 1e-9)));
        lat.spacing[k] = ext[k] / n[k];
    }
    static constexpr double basis[4][3] = {{0, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
    lat.sites.reserve(static_cast<std::size_t>(4) * n[0] * n[1] * n[2]);
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i)
                for (const auto& b : basis)
                    lat.sites.push_back({(i + b[0] + 0.25) * lat.spacing.x, (j + b[1] + 0.25) * lat.spacing.y,
                                         z0 + (k + b[2] + 0.25) * lat.spacing.z});
    return lat;
}

inline double fcc_nearest_neighbor(const Vec3& s) {
    return 0.5 * std::sqrt(std::min({s.x * s.x + s.y * s.y, s.y * s.y + s.z * s.z, s.x * s.x + s.z * s.z}));
}

/// Keeps `count` sites chosen uniformly at random, preserving site order.
inline void thin(std::vector<Vec3>& sites, std::size_t count, Rng& rng) {
    if (count >= sites.size()) return;
    std::vector<std::size_t> idx(sites.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    std::vector<Vec3> kept;
    kept.reserve(count);
    for (auto i : idx) kept.push_back(sites[i]);
    sites = std::move(kept);
}

inline double min_sigma(const SpeciesTable& t) {
    double s = t[0].sigma;
    for (const auto& sp : t.species()) s = std::min(s, sp.sigma);
    return s;
}

}  // namespace detail

/// Initial configuration for the configured scenario:
///  - bulk: FCC lattice at the target density (randomly thinned to exactly
///    round(rho V) sites when the stretched lattice holds more);
///  - droplet: liquid FCC sphere at the box centre in a vapour lattice;
///  - sessile: liquid FCC hemisphere with its flat base at cap_height above
///    the z = 0 wall, in vapour.
/// Velocities are Maxwell-Boltzmann at the scenario temperature with the net
/// momentum removed and then rescaled to the exact temperature.
inline GeneratedScenario generate_scenario(const RunConfig& cfg, std::uint64_t seed) {
    const auto& spec = cfg.scenario;
    const Domain& d = cfg.domain;
    const Vec3& L = d.lengths;
    const Rng root(seed);
    Rng lattice_rng = root.derive(rng_purpose::lattice);
    const double nn_min = 0.75 * detail::min_sigma(cfg.species_table);

    std::vector<Vec3> liquid, vapor;
    if (spec.kind == ScenarioKind::bulk) {
        const double volume = d.volume();
        const auto target = static_cast<std::int64_t>(std::llround(spec.density * volume));
        if (target < 1)
            throw GenerationError("density " + std::to_string(spec.density) +
                                      " gives no molecule in this domain; nearest achievable density is " +
                                      std::to_string(1.0 / volume),
                                  1.0 / volume);
        auto lat = detail::fcc(L, 0.0, L.z, spec.density);
        if (detail::fcc_nearest_neighbor(lat.spacing) < nn_min) {
            const double a = nn_min * std::sqrt(2.0);
            const double rho_max = 4.0 / (a * a * a);
            throw GenerationError("density " + std::to_string(spec.density) +
                                      " packs lattice sites closer than " + std::to_string(nn_min) +
                                      "; nearest achievable density is " + std::to_string(rho_max),
                                  rho_max);
        }
        detail::thin(lat.sites, static_cast<std::size_t>(target), lattice_rng);
        liquid = std::move(lat.sites);
    } else {
        const bool sessile = spec.kind == ScenarioKind::sessile;
        const Vec3 centre{0.5 * L.x, 0.5 * L.y, sessile ? spec.cap_height : 0.5 * L.z};
        const double r2max = spec.radius * spec.radius;
        if (spec.radius > 0) {
            // unstretched cells: the sphere never touches the box faces, and on
            // a sessile cap the lowest layer sits exactly at cap_height
            const double a = std::cbrt(4.0 / spec.liquid_density);
            const Vec3 span{a * std::ceil(L.x / a), a * std::ceil(L.y / a), 0.0};
            const double z0 = sessile ? spec.cap_height - 0.25 * a : 0.0;
            const detail::Lattice lat = detail::fcc(span, z0, z0 + a * std::ceil((L.z - z0) / a), spec.liquid_density);
            if (detail::fcc_nearest_neighbor(lat.spacing) < nn_min) {
                const double a = nn_min * std::sqrt(2.0);
                throw GenerationError("liquid density packs lattice sites too closely", 4.0 / (a * a * a));
            }
            for (const auto& p : lat.sites) {
                if (p.z >= L.z || (sessile && p.z < centre.z - 1e-9)) continue;
                if (norm2(p - centre) < r2max) liquid.push_back(p);
            }
        }
        const double gap = spec.radius > 0 ? spec.radius + 1.0 : 0.0;
        const double vz0 = sessile ? 1.0 : 0.0;
        const double vz1 = d.periodic[2] ? L.z : L.z - 0.5;
        auto vlat = detail::fcc(L, vz0, vz1, spec.vapor_density);
        double excluded = 0.0;
        for (const auto& p : vlat.sites) {
            if (spec.radius > 0 && norm2(p - centre) < gap * gap) continue;
            vapor.push_back(p);
        }
        if (spec.radius > 0) {
            excluded = 4.0 / 3.0 * std::numbers::pi * gap * gap * gap;
            if (sessile) excluded = 0.5 * excluded;
        }
        const double vvol = std::max(0.0, L.x * L.y * (vz1 - vz0) - excluded);
        const auto vtarget = static_cast<std::size_t>(std::llround(spec.vapor_density * vvol));
        detail::thin(vapor, vtarget, lattice_rng);
        if (liquid.empty() && vapor.empty())
            throw GenerationError("scenario produces no molecules; nearest achievable vapour density is " +
                                      std::to_string(1.0 / vvol),
                                  1.0 / vvol);
    }

    GeneratedScenario out;
    out.liquid_count = static_cast<std::int64_t>(liquid.size());
    std::vector<int> species_ids;
    std::vector<double> cumulative;
    for (std::size_t k = 0; k < spec.species.size(); ++k) {
        species_ids.push_back(static_cast<int>(*cfg.species_table.index_of(spec.species[k])));
        const double f = spec.fractions.empty() ? 1.0 : spec.fractions[k];
        cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + f);
    }
    Rng species_rng = root.derive(rng_purpose::species);
    Rng vel_rng = root.derive(rng_purpose::velocities);
    const auto ff = cfg.force_field();

    auto add = [&](const Vec3& p) {
        Molecule m;
        m.id = static_cast<std::int64_t>(out.molecules.size());
        m.r = wrap_position(p, d);
        if (species_ids.size() > 1) {
            const double u = species_rng.uniform() * cumulative.back();
            std::size_t k = 0;
            while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
            m.species = species_ids[k];
        } else if (!species_ids.empty()) {
            m.species = species_ids[0];
        }
        const double s = std::sqrt(spec.temperature / ff.mass(m.species));
        m.v = {s * vel_rng.normal(), s * vel_rng.normal(), s * vel_rng.normal()};
        out.molecules.push_back(m);
    };
    for (const auto& p : liquid) add(p);
    for (const auto& p : vapor) add(p);

    const bool conserved = d.fully_periodic() && !d.wall;
    if (out.molecules.size() >= 2) {
        remove_net_momentum(out.molecules, ff.masses());
        rescale_thermostat(out.molecules, ff.masses(), spec.temperature, conserved);
    }
    return out;
}

}  // namespace ljcell
