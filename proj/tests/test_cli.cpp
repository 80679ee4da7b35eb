#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ljcell/ljcell.hpp"

using namespace ljcell;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ljcell_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kBulk = R"([domain]
lengths = 8
homogeneous = true
[scenario]
kind = bulk
density = 0.7
temperature = 1.0
[schedule]
steps = 200
equilibration = 20
thermostat_temperature = 1.0
thermostat_interval = 5
seed = 5
[output]
sample_interval = 10
)";

struct Exit {
    int code;
    std::string out, err;
};

Exit cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(LJCELL_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const fs::path& dir, const std::string& text, const std::string& name = "run.ini") {
    std::ofstream(dir / name) << text;
    return dir / name;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Ell, Examples) {
    EXPECT_EQ(ell_exponent(1000, 100000, 86400.0, true), 1.0);
    EXPECT_EQ(ell_exponent(1000000, 100000, 86400.0, true), 1.0);
    EXPECT_EQ(ell_exponent(1000, 10000, 86400.0, true), 0.0);
    EXPECT_EQ(ell_exponent_per_day(1000, 1e5, true).value(), 1.0);
}

TEST(Ell, Undefined) {
    EXPECT_THROW(ell_exponent(1000, 0, 10.0, true), std::domain_error);
    EXPECT_THROW(ell_exponent(0, 10, 10.0, true), std::domain_error);
    EXPECT_FALSE(ell_exponent(1000, 100000, 86400.0, false).has_value());
}

TEST(Condensed, Threshold) {
    EXPECT_TRUE(condensed_check(0.8));
    EXPECT_FALSE(condensed_check(0.01));
    EXPECT_TRUE(condensed_check(0.5));
}

TEST(Condensed, DropletCoreReadout) {
    auto cfg = parse_config(R"([domain]
lengths = 20
[scenario]
kind = droplet
radius = 5
temperature = 0.7
[schedule]
steps = 20
[output]
sample_interval = 5
density_grid = rz
density_bins = 5 10
density_rmax = 5
)");
    const auto r = run_simulation(cfg);
    ASSERT_TRUE(r.density);
    EXPECT_GT(r.density->max_density(), 0.5);
    EXPECT_TRUE(r.bench.condensed);
    EXPECT_TRUE(r.bench.ell.has_value());
}

TEST(Run, RowCountFromSchedule) {
    auto cfg = parse_config(kBulk);
    cfg.steps = 1000;
    cfg.equilibration = 0;
    const auto r = run_simulation(cfg);
    EXPECT_EQ(r.rows.size(), 1u + 1000 / 10);
    EXPECT_EQ(r.rows.front().step, 0);
    EXPECT_EQ(r.rows.back().step, 1000);
    EXPECT_EQ(r.bench.steps_completed, 1000);
    EXPECT_DOUBLE_EQ(r.bench.steps_per_second, 1000 / r.bench.wall_seconds);
}

TEST(Run, ObservablesIdentities) {
    const auto r = run_simulation(parse_config(kBulk));
    for (const auto& o : r.rows) {
        EXPECT_DOUBLE_EQ(o.e_total, o.u_pot + o.e_kin + o.u_lrc);
        EXPECT_LT(o.u_lrc, 0.0);
        EXPECT_DOUBLE_EQ(o.T_inst, 2.0 * o.e_kin / (3.0 * static_cast<double>(o.N) - 3.0));
    }
}

TEST(Run, ParallelMatchesSerialRows) {
    auto cfg = parse_config(kBulk);
    cfg.domain.lengths = {10, 10, 10};
    RunOptions one, four;
    one.workers = 1;
    four.workers = 4;
    const auto a = run_simulation(cfg, one), b = run_simulation(cfg, four);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_NEAR(a.rows[i].u_pot, b.rows[i].u_pot, 1e-8 * std::abs(a.rows[i].u_pot));
        EXPECT_NEAR(a.rows[i].e_kin, b.rows[i].e_kin, 1e-8 * a.rows[i].e_kin);
    }
}

TEST(Run, MonteCarloRows) {
    auto cfg = parse_config(kBulk);
    cfg.method = Method::mc;
    cfg.steps = 40;
    cfg.equilibration = 20;
    const auto r = run_simulation(cfg);
    EXPECT_EQ(r.rows.size(), 5u);
    EXPECT_GT(r.mc_acceptance, 0.0);
    EXPECT_LT(r.mc_acceptance, 1.0);
    for (const auto& o : r.rows) EXPECT_EQ(o.T_inst, 1.0);
}

TEST(Bench, SingleWorkerSpeedupIsOne) {
    auto cfg = parse_config(kBulk);
    cfg.steps = 20;
    const auto recs = run_bench(cfg, {1});
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].speedup, 1.0);
    const auto more = run_bench(cfg, {2});
    ASSERT_EQ(more.size(), 2u);
    EXPECT_EQ(more[0].workers, 1);
    EXPECT_EQ(more[0].speedup, 1.0);
}

TEST(Io, XyzRoundTrip) {
    const auto cfg = parse_config(kBulk);
    const auto gen = generate_scenario(cfg, 3);
    std::stringstream ss;
    write_xyz(ss, gen.molecules, cfg.domain, cfg.species_table, 0);
    const auto back = read_xyz(ss, cfg.species_table);
    ASSERT_EQ(back.size(), gen.molecules.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].id, gen.molecules[i].id);
        EXPECT_EQ(back[i].r, gen.molecules[i].r);
        EXPECT_EQ(back[i].v, gen.molecules[i].v);
    }
}

TEST(Io, DensityGridHeader) {
    Domain d;
    d.lengths = {10, 10, 8};
    std::vector<Molecule> one(1);
    one[0].r = {1, 1, 1};
    const auto g = accumulate_density({DensityGeometry::xyz, {2, 2, 4}}, d, one);
    std::stringstream ss;
    write_density_grid(ss, g);
    std::string l1, l2;
    std::getline(ss, l1);
    std::getline(ss, l2);
    EXPECT_EQ(l1, "dims 2 2 4");
    EXPECT_EQ(l2, "bin_sizes 5 5 2");
    EXPECT_EQ(lines(ss.str()), 2u + 4u);
}

TEST(Cli, StepsZeroEmitsInitialRowOnly) {
    const auto dir = scratch("zero");
    std::string text = kBulk;
    text.replace(text.find("steps = 200"), 11, "steps = 0");
    text.replace(text.find("equilibration = 20"), 18, "equilibration = 0");
    const auto cfg = write_config(dir, text);
    const auto r = cli("run " + cfg.string() + " --output-dir " + (dir / "out").string(), dir);
    EXPECT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir / "out" / "observables.csv");
    EXPECT_EQ(lines(csv), 2u);
    EXPECT_EQ(csv.rfind("step,time,T_inst,u_pot,e_kin,e_total,P,imbalance\n0,0,", 0), 0u);
    EXPECT_TRUE(fs::exists(dir / "out" / "final.xyz"));
    EXPECT_TRUE(fs::exists(dir / "out" / "imbalance.csv"));
}

TEST(Cli, UnknownKeyExitsTwo) {
    const auto dir = scratch("badkey");
    const auto cfg = write_config(dir, "[domain]\nlengths = 10\n[schedule]\nstepz = 5\n");
    const auto r = cli("run " + cfg.string() + " --output-dir " + dir.string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("stepz"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
    EXPECT_EQ(cli("check-config " + cfg.string(), dir).code, 2);
}

TEST(Cli, GenerationErrorExitsTwo) {
    const auto dir = scratch("gen");
    const auto cfg = write_config(dir, "[domain]\nlengths = 8\n[scenario]\ndensity = 6\n");
    const auto r = cli("make-scenario " + cfg.string() + " -o " + (dir / "x.xyz").string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("nearest achievable density"), std::string::npos) << r.err;
}

TEST(Cli, BlowUpExitsThree) {
    const auto dir = scratch("blowup");
    std::string text = kBulk;
    text.replace(text.find("steps = 200"), 11, "steps = 50\ntimestep = 0.2");
    text.replace(text.find("density = 0.7"), 13, "density = 0.95");
    text.replace(text.find("temperature = 1.0"), 17, "temperature = 5.0");
    const auto cfg = write_config(dir, text);
    const auto r = cli("run " + cfg.string() + " --output-dir " + dir.string(), dir);
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_NE(r.err.find("at step"), std::string::npos) << r.err;
}

TEST(Cli, DeterministicCsv) {
    const auto dir = scratch("det");
    const auto cfg = write_config(dir, kBulk);
    for (const char* run : {"a", "b"}) {
        const auto r = cli("run " + cfg.string() + " --workers 2 --decomposition kd --output-dir " + (dir / run).string(), dir);
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(slurp(dir / "a" / "observables.csv"), slurp(dir / "b" / "observables.csv"));
    EXPECT_EQ(slurp(dir / "a" / "final.xyz"), slurp(dir / "b" / "final.xyz"));
    const auto r = cli("run " + cfg.string() + " --workers 2 --seed 6 --output-dir " + (dir / "c").string(), dir);
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(slurp(dir / "a" / "observables.csv"), slurp(dir / "c" / "observables.csv"));
}

TEST(Cli, MakeScenarioAndRestart) {
    const auto dir = scratch("make");
    const auto cfg = write_config(dir, kBulk);
    const auto r = cli("make-scenario " + cfg.string() + " -o " + (dir / "init.xyz").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "init.xyz");
    const auto mols = read_xyz(in, parse_config(kBulk).species_table);
    EXPECT_EQ(mols.size(), 358u);
    const auto run = cli("run " + cfg.string() + " --initial " + (dir / "init.xyz").string() + " --output-dir " +
                             (dir / "out").string(),
                         dir);
    EXPECT_EQ(run.code, 0) << run.err;
    const auto direct = cli("run " + cfg.string() + " --output-dir " + (dir / "direct").string(), dir);
    EXPECT_EQ(slurp(dir / "out" / "observables.csv"), slurp(dir / "direct" / "observables.csv"));
}

TEST(Cli, CheckConfigIsCanonical) {
    const auto dir = scratch("check");
    const auto cfg = write_config(dir, kBulk);
    const auto r = cli("check-config " + cfg.string(), dir);
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, serialize_config(parse_config(kBulk)));
    const auto again = write_config(dir, r.out, "canonical.ini");
    EXPECT_EQ(cli("check-config " + again.string(), dir).out, r.out);
}

TEST(Cli, BenchWritesSpeedups) {
    const auto dir = scratch("bench");
    std::string text = kBulk;
    text.replace(text.find("steps = 200"), 11, "steps = 20");
    text.replace(text.find("lengths = 8"), 11, "lengths = 10");
    const auto cfg = write_config(dir, text);
    const auto r = cli("bench " + cfg.string() + " --workers 2,4 --decomposition uniform --output-dir " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir / "bench.csv");
    EXPECT_EQ(lines(csv), 4u);
    EXPECT_NE(csv.find("\nuniform,1,"), std::string::npos) << csv;
    EXPECT_NE(csv.find(",1,1,"), std::string::npos) << csv;
}

TEST(Cli, UsageErrors) {
    const auto dir = scratch("usage");
    EXPECT_NE(cli("", dir).code, 0);
    EXPECT_EQ(cli("run /nonexistent.ini", dir).code, 2);
    const auto cfg = write_config(dir, kBulk);
    EXPECT_EQ(cli("run " + cfg.string() + " --decomposition diagonal", dir).code, 2);
}
