#include <CLI11.hpp>

#include <iostream>

#include "ljcell/ljcell.hpp"

namespace {

using namespace ljcell;

struct Flags {
    std::string config;
    std::optional<int> workers;
    std::string decomposition;
    std::optional<std::uint64_t> seed;
    std::string output_dir = ".";
    std::string initial;
    std::vector<int> worker_list;
    std::string out_file;
};

RunOptions options_from(const Flags& f) {
    RunOptions o;
    o.workers = f.workers;
    o.seed = f.seed;
    o.output_dir = f.output_dir;
    if (f.decomposition == "kd") o.decomposition = Decomposition::kd_tree;
    else if (f.decomposition == "uniform") o.decomposition = Decomposition::uniform_grid;
    return o;
}

int cmd_run(const Flags& f) {
    const RunConfig cfg = load_config(f.config);
    std::optional<std::vector<Molecule>> initial;
    if (!f.initial.empty()) {
        std::ifstream in(f.initial);
        if (!in) throw ConfigError("cannot open initial state '" + f.initial + "'", "initial");
        initial = read_xyz(in, cfg.species_table);
    }
    const auto r = run_simulation(cfg, options_from(f), std::move(initial));
    std::cout << "N=" << r.bench.N << " steps=" << r.bench.steps_completed << " rows=" << r.rows.size()
              << " wall=" << format_number(r.bench.wall_seconds) << "s rebalances=" << r.rebalances
              << " ell=" << (r.bench.ell ? format_number(*r.bench.ell) : std::string("NA")) << '\n';
    return 0;
}

int cmd_bench(const Flags& f) {
    const RunConfig cfg = load_config(f.config);
    const auto list = f.worker_list.empty() ? std::vector<int>{1} : f.worker_list;
    const auto records = run_bench(cfg, list, options_from(f));
    write_bench_csv(std::cout, records);
    return 0;
}

int cmd_make_scenario(const Flags& f) {
    RunConfig cfg = load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    const auto gen = generate_scenario(cfg, cfg.seed);
    auto os = open_output(f.out_file);
    write_xyz(os, gen.molecules, cfg.domain, cfg.species_table, 0);
    std::cout << "wrote " << gen.molecules.size() << " molecules (" << gen.liquid_count << " liquid) to " << f.out_file
              << '\n';
    return 0;
}

int cmd_check_config(const Flags& f) {
    std::cout << serialize_config(load_config(f.config));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linked-cell Lennard-Jones molecular dynamics with kd-tree load balancing"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&](CLI::App* sub) {
        sub->add_option("config", f.config, "INI configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", f.seed, "override the configured seed");
        sub->add_option("--decomposition", f.decomposition, "uniform or kd")->check(CLI::IsMember({"uniform", "kd"}));
        sub->add_option("--output-dir", f.output_dir, "directory for output files");
    };
    auto* run = app.add_subcommand("run", "run the configured schedule");
    common(run);
    run->add_option("--workers", f.workers, "number of workers")->check(CLI::PositiveNumber);
    run->add_option("--initial", f.initial, "start from an XYZ frame instead of the generated scenario");

    auto* bench = app.add_subcommand("bench", "strong-scaling benchmark over worker counts");
    common(bench);
    bench->add_option("--workers", f.worker_list, "worker counts, e.g. 1,2,4,8")->delimiter(',')->check(CLI::PositiveNumber);

    auto* make = app.add_subcommand("make-scenario", "write the initial configuration as XYZ");
    make->add_option("config", f.config, "INI configuration file")->required()->check(CLI::ExistingFile);
    make->add_option("--seed", f.seed, "override the configured seed");
    make->add_option("-o,--output", f.out_file, "XYZ file to write")->required();

    auto* check = app.add_subcommand("check-config", "validate and print the canonical configuration");
    check->add_option("config", f.config, "INI configuration file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) return cmd_run(f);
        if (*bench) return cmd_bench(f);
        if (*make) return cmd_make_scenario(f);
        if (*check) return cmd_check_config(f);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what();
        if (!e.key.empty()) std::cerr << " [key '" << e.key << "'";
        if (!e.key.empty() && e.line > 0) std::cerr << ", line " << e.line;
        if (!e.key.empty()) std::cerr << ']';
        std::cerr << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error at step " << e.step << ": " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
