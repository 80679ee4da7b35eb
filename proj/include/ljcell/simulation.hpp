#pragma once
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "balance.hpp"
#include "benchmark.hpp"
#include "config.hpp"
#include "io.hpp"
#include "montecarlo.hpp"
#include "runtime.hpp"
#include "scenario.hpp"

namespace ljcell {

struct RunOptions {
    std::optional<int> workers;
    std::optional<Decomposition> decomposition;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;  // nothing written when empty
    std::chrono::milliseconds timeout{600000};
};

struct RunResult {
    std::vector<Observables> rows;
    std::vector<ImbalanceRow> imbalance;
    std::optional<DensityGrid> density;
    std::vector<Molecule> final_state;
    std::int64_t liquid_count = 0;
    int rebalances = 0;
    double mc_acceptance = 0.0;
    BenchRecord bench;
};

/// Molecule count per global cell, x fastest.
inline std::vector<std::uint32_t> occupancy_of(std::span<const Molecule> mols, const Domain& d, double cutoff) {
    const CellGrid probe = CellGrid::global(d, cutoff);
    const auto& n = probe.counts();
    std::vector<std::uint32_t> occ(static_cast<std::size_t>(n[0]) * n[1] * n[2], 0);
    for (const auto& m : mols) ++occ[static_cast<std::size_t>(probe.global_linear(probe.cell_of(m.r)))];
    return occ;
}

inline PartitionTree initial_partition(Decomposition how, int workers, std::span<const Molecule> mols, const Domain& d,
                                       double cutoff) {
    const auto dims = cell_counts_for(d, cutoff);
    if (how == Decomposition::uniform_grid || workers == 1) return uniform_partition(dims, workers);
    const auto occ = occupancy_of(mols, d, cutoff);
    return kd_partition(estimate_loads(dims, occ, d.periodic), workers);
}

inline std::unique_ptr<Engine> make_engine(const RunConfig& cfg, int workers, Decomposition how,
                                           std::vector<Molecule> mols, std::chrono::milliseconds timeout) {
    EngineParams p{cfg.domain, cfg.force_field(), cfg.timestep, workers};
    p.timeout = timeout;
    if (workers == 1) return std::make_unique<SerialEngine>(std::move(p), std::move(mols));
    PartitionTree tree = initial_partition(how, workers, mols, cfg.domain, cfg.cutoff);
    return std::make_unique<ParallelEngine>(std::move(p), std::move(mols), std::move(tree));
}

/// Observable row from a merged frame.
inline Observables observables_from(const StepFrame& f, const ForceField& ff, const Domain& d, std::int64_t step,
                                    double time, double imbalance) {
    const bool conserved = d.fully_periodic() && !d.wall;
    const double volume = d.volume();
    Observables o;
    o.step = step;
    o.time = time;
    o.N = f.n;
    o.density = static_cast<double>(f.n) / volume;
    o.T_inst = f.n >= 2 ? temperature_from(f.e_kin, f.n, conserved) : 0.0;
    const TailCorrection tail = ff.tail(f.species_counts, volume);
    EnergyVirial ev = f.ev;
    ev.u_lrc = tail.u_lrc;
    ev.p_lrc = tail.p_lrc;
    o.u_lrc = tail.u_lrc;
    o.u_pot = ev.u_pot;
    o.e_kin = f.e_kin;
    o.e_total = ev.u_pot + f.e_kin + tail.u_lrc;
    o.P = virial_pressure(ev, f.n, volume, o.T_inst);
    o.imbalance = imbalance;
    return o;
}

namespace detail {

inline double wall_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const RunResult& r) {
    {
        auto os = open_output(dir / "observables.csv");
        write_observables_csv(os, r.rows);
    }
    {
        auto os = open_output(dir / "imbalance.csv");
        write_imbalance_csv(os, r.imbalance);
    }
    {
        auto os = open_output(dir / "bench.csv");
        write_bench_csv(os, std::span(&r.bench, 1));
    }
    if (r.density) {
        auto os = open_output(dir / "density.txt");
        write_density_grid(os, *r.density);
    }
    auto os = open_output(dir / "final.xyz");
    write_xyz(os, r.final_state, cfg.domain, cfg.species_table, cfg.steps);
}

inline RunResult run_mc(const RunConfig& cfg, std::vector<Molecule> mols, const RunOptions& opt) {
    RunResult r;
    Rng rng = Rng(opt.seed.value_or(cfg.seed)).derive(rng_purpose::monte_carlo);
    McState s(cfg.domain, cfg.force_field(), std::move(mols), cfg.scenario.temperature, cfg.max_displacement);
    std::optional<std::ofstream> traj;
    if (opt.output_dir && cfg.sampling.snapshot_interval > 0) traj = open_output(*opt.output_dir / "trajectory.xyz");
    if (cfg.sampling.density) r.density.emplace(*cfg.sampling.density, cfg.domain);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::int64_t k = 1; k <= cfg.equilibration; ++k) {
        mc_sweep(s, rng);
        if (k % 10 == 0) tune_displacement(s);
    }
    s.reset_statistics();
    for (std::int64_t p = 0; p <= cfg.steps; ++p) {
        if (p > 0) mc_sweep(s, rng);
        if (p % cfg.sampling.sample_interval == 0) {
            r.rows.push_back(mc_observables(s, p));
            if (r.density) r.density->accumulate(s.molecules());
        }
        if (traj && p % cfg.sampling.snapshot_interval == 0)
            write_xyz(*traj, s.molecules(), cfg.domain, cfg.species_table, p);
    }
    const double wall = wall_since(t0);
    r.mc_acceptance = s.acceptance();
    r.final_state = s.molecules();
    const auto n = static_cast<std::int64_t>(r.final_state.size());
    const double densest = r.density ? r.density->max_density() : static_cast<double>(n) / cfg.domain.volume();
    r.bench = make_bench_record(n, cfg.equilibration + cfg.steps, wall, 1, densest);
    return r;
}

}  // namespace detail

/// Runs the configured schedule: equilibration (thermostat if configured),
/// then production sampling every sample_interval steps starting at the
/// first production state. Writes the output files when an output
/// directory is given.
inline RunResult run_simulation(const RunConfig& cfg_in, const RunOptions& opt = {},
                                std::optional<std::vector<Molecule>> initial = std::nullopt) {
    RunConfig cfg = cfg_in;
    if (opt.workers) cfg.workers = *opt.workers;
    if (opt.decomposition) cfg.decomposition = *opt.decomposition;
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.validate();

    RunResult r;
    std::vector<Molecule> mols;
    if (initial) {
        mols = std::move(*initial);
    } else {
        auto gen = generate_scenario(cfg, cfg.seed);
        mols = std::move(gen.molecules);
        r.liquid_count = gen.liquid_count;
    }

    if (cfg.method == Method::mc) {
        const auto liquid = r.liquid_count;
        r = detail::run_mc(cfg, std::move(mols), opt);
        r.liquid_count = liquid;
        r.bench.decomposition = "serial";
        if (opt.output_dir) detail::write_outputs(*opt.output_dir, cfg, r);
        return r;
    }

    const ForceField ff = cfg.force_field();
    const auto dims = cell_counts_for(cfg.domain, cfg.cutoff);
    auto engine = make_engine(cfg, cfg.workers, cfg.decomposition, std::move(mols), opt.timeout);
    const bool can_rebalance = cfg.workers > 1 && cfg.decomposition == Decomposition::kd_tree;

    std::optional<std::ofstream> traj;
    if (opt.output_dir && cfg.sampling.snapshot_interval > 0) traj = open_output(*opt.output_dir / "trajectory.xyz");
    if (cfg.sampling.density) r.density.emplace(*cfg.sampling.density, cfg.domain);

    double imbalance = 1.0;
    std::shared_ptr<const CellLoadField> pending_loads;
    auto measure = [&](const StepFrame& f, std::int64_t step, bool rebalanced) {
        auto loads = std::make_shared<CellLoadField>(estimate_loads(dims, f.occupancy, cfg.domain.periodic));
        const ImbalanceReport rep = measure_imbalance(engine->partition(), *loads);
        imbalance = rep.imbalance;
        r.imbalance.push_back({step, rep.max_load, rep.mean_load, rep.imbalance, rebalanced});
        if (can_rebalance && step > 0 &&
            should_rebalance(step, cfg.rebalance_interval, rep.imbalance, cfg.rebalance_threshold))
            pending_loads = std::move(loads);
    };

    const std::int64_t total = cfg.equilibration + cfg.steps;
    auto sample = [&](const StepFrame& f, std::int64_t step) {
        if (step < cfg.equilibration) return;
        const std::int64_t p = step - cfg.equilibration;
        const bool row = p % cfg.sampling.sample_interval == 0;
        const bool snap = traj && p % cfg.sampling.snapshot_interval == 0;
        if (row) r.rows.push_back(observables_from(f, ff, cfg.domain, p, static_cast<double>(p) * cfg.timestep, imbalance));
        if ((row && r.density) || snap) {
            const std::vector<Molecule> mols_now = f.snapshot ? *f.snapshot : engine->gather();
            if (row && r.density) r.density->accumulate(mols_now);
            if (snap) write_xyz(*traj, mols_now, cfg.domain, cfg.species_table, p);
        }
    };
    auto wants_positions = [&](std::int64_t step) {
        if (step < cfg.equilibration) return false;
        const std::int64_t p = step - cfg.equilibration;
        return (r.density && p % cfg.sampling.sample_interval == 0) ||
               (traj && p % cfg.sampling.snapshot_interval == 0);
    };

    const std::int64_t n0 = engine->current().n;
    const auto t0 = std::chrono::steady_clock::now();
    measure(engine->current(), 0, false);
    sample(engine->current(), 0);
    const bool conserved = cfg.domain.fully_periodic() && !cfg.domain.wall;
    for (std::int64_t step = 1; step <= total; ++step) {
        StepControl ctl;
        const std::int64_t prev = step - 1;
        if (cfg.thermostat && step <= cfg.equilibration && prev % cfg.thermostat->interval == 0) {
            const StepFrame& f = engine->current();
            if (f.n >= 2 && f.e_kin > 0) {
                const double t = temperature_from(f.e_kin, f.n, conserved);
                ctl.velocity_scale = std::sqrt(cfg.thermostat->target / t);
            }
        }
        ctl.want_snapshot = wants_positions(step);
        const bool rebalancing = static_cast<bool>(pending_loads);
        ctl.rebalance_loads = std::move(pending_loads);
        pending_loads.reset();
        if (rebalancing) ++r.rebalances;
        const StepFrame& f = engine->advance(ctl);
        if (f.n != n0) throw OwnershipError("molecule count changed at step " + std::to_string(step));
        measure(f, step, rebalancing);
        sample(f, step);
    }
    const double wall = detail::wall_since(t0);
    r.final_state = engine->gather();

    const auto n = static_cast<std::int64_t>(r.final_state.size());
    const double densest = r.density ? r.density->max_density() : static_cast<double>(n) / cfg.domain.volume();
    r.bench = make_bench_record(n, total, wall, cfg.workers, densest);
    r.bench.decomposition = cfg.workers == 1 ? "serial" : (cfg.decomposition == Decomposition::kd_tree ? "kd" : "uniform");
    double mean_imb = 0.0;
    for (const auto& row : r.imbalance) mean_imb += row.imbalance;
    r.bench.imbalance = r.imbalance.empty() ? 1.0 : mean_imb / static_cast<double>(r.imbalance.size());

    if (opt.output_dir) detail::write_outputs(*opt.output_dir, cfg, r);
    return r;
}

/// Runs the same scenario once per worker count. A single-worker baseline
/// is added when missing, so every output carries speedup(1) = 1.
inline std::vector<BenchRecord> run_bench(const RunConfig& cfg, std::vector<int> worker_list, const RunOptions& opt = {}) {
    if (worker_list.empty()) throw ConfigError("bench needs at least one worker count", "workers");
    if (std::find(worker_list.begin(), worker_list.end(), 1) == worker_list.end()) worker_list.insert(worker_list.begin(), 1);
    std::vector<BenchRecord> out;
    for (int w : worker_list) {
        RunOptions o = opt;
        o.workers = w;
        o.output_dir.reset();
        auto rec = run_simulation(cfg, o).bench;
        rec.decomposition = opt.decomposition.value_or(cfg.decomposition) == Decomposition::kd_tree ? "kd" : "uniform";
        out.push_back(rec);
    }
    assign_speedups(out);
    if (opt.output_dir) {
        auto os = open_output(*opt.output_dir / "bench.csv");
        write_bench_csv(os, out);
    }
    return out;
}

}  // namespace ljcell
