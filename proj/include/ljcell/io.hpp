#pragma once
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "benchmark.hpp"
#include "config.hpp"
#include "dynamics.hpp"

namespace ljcell {

/// Shortest text that parses back to the same double.
inline std::string format_number(double x) { return detail::fmt_double(x); }

inline std::string format_number(std::int64_t x) { return std::to_string(x); }

struct ImbalanceRow {
    std::int64_t step = 0;
    double max_load = 0.0;
    double mean_load = 0.0;
    double imbalance = 1.0;
    bool rebalanced = false;
};

inline void write_observables_csv(std::ostream& os, std::span<const Observables> rows) {
    os << "step,time,T_inst,u_pot,e_kin,e_total,P,imbalance\n";
    for (const auto& o : rows)
        os << o.step << ',' << format_number(o.time) << ',' << format_number(o.T_inst) << ','
           << format_number(o.u_pot) << ',' << format_number(o.e_kin) << ',' << format_number(o.e_total) << ','
           << format_number(o.P) << ',' << format_number(o.imbalance) << '\n';
}

inline void write_imbalance_csv(std::ostream& os, std::span<const ImbalanceRow> rows) {
    os << "step,max_load,mean_load,imbalance,rebalanced\n";
    for (const auto& r : rows)
        os << r.step << ',' << format_number(r.max_load) << ',' << format_number(r.mean_load) << ','
           << format_number(r.imbalance) << ',' << (r.rebalanced ? 1 : 0) << '\n';
}

inline void write_bench_csv(std::ostream& os, std::span<const BenchRecord> rows) {
    os << "decomposition,workers,N,steps_completed,wall_seconds,steps_per_second,speedup,imbalance,ell,condensed\n";
    for (const auto& b : rows)
        os << b.decomposition << ',' << b.workers << ',' << b.N << ',' << b.steps_completed << ','
           << format_number(b.wall_seconds) << ',' << format_number(b.steps_per_second) << ','
           << format_number(b.speedup) << ',' << format_number(b.imbalance) << ','
           << (b.ell ? format_number(*b.ell) : std::string("NA")) << ',' << (b.condensed ? "true" : "false") << '\n';
}

/// Two header lines (bin counts, bin sizes), then the density matrix:
/// z grids one value per line, rz grids one line per radial bin, xyz grids
/// one line per (x, y) column.
inline void write_density_grid(std::ostream& os, const DensityGrid& g) {
    const auto& spec = g.spec();
    os << "dims";
    for (int b : spec.bins) os << ' ' << b;
    os << "\nbin_sizes";
    for (double w : g.bin_widths()) os << ' ' << format_number(w);
    os << '\n';
    const auto rho = g.densities();
    const std::size_t row = spec.bins.size() == 1 ? 1 : static_cast<std::size_t>(spec.bins.back());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        os << format_number(rho[i]);
        os << ((i + 1) % row == 0 ? '\n' : ' ');
    }
}

/// Extended XYZ frame with ids and velocities.
inline void write_xyz(std::ostream& os, std::span<const Molecule> mols, const Domain& d, const SpeciesTable& species,
                      std::int64_t step) {
    const Vec3& L = d.lengths;
    os << mols.size() << '\n';
    os << "Lattice=\"" << format_number(L.x) << " 0 0 0 " << format_number(L.y) << " 0 0 0 " << format_number(L.z)
       << "\" Properties=species:S:1:id:I:1:pos:R:3:vel:R:3 step=" << step << '\n';
    for (const auto& m : mols) {
        os << species[static_cast<std::size_t>(m.species)].name << ' ' << m.id;
        for (int a = 0; a < 3; ++a) os << ' ' << format_number(m.r[a]);
        for (int a = 0; a < 3; ++a) os << ' ' << format_number(m.v[a]);
        os << '\n';
    }
}

/// Reads a frame written by write_xyz.
inline std::vector<Molecule> read_xyz(std::istream& is, const SpeciesTable& species) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty XYZ stream", "xyz");
    const auto n = std::stoll(line);
    std::getline(is, line);
    std::vector<Molecule> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
        std::string name;
        Molecule m;
        if (!(is >> name >> m.id >> m.r.x >> m.r.y >> m.r.z >> m.v.x >> m.v.y >> m.v.z))
            throw ConfigError("truncated XYZ frame", "xyz");
        const auto idx = species.index_of(name);
        if (!idx) throw ConfigError("unknown species '" + name + "' in XYZ frame", "xyz");
        m.species = static_cast<int>(*idx);
        out.push_back(m);
    }
    return out;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

}  // namespace ljcell
