#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <set>
#include <thread>

#include "ljcell/runtime.hpp"
#include "ljcell/scenario.hpp"
#include "oracles.hpp"

using namespace ljcell;
using namespace std::chrono_literals;

namespace {

Domain box(double lx, double ly, double lz) {
    Domain d;
    d.lengths = {lx, ly, lz};
    return d;
}

ForceField lj_ff() { return ForceField(SpeciesTable({Species{"Ar", 1, 1, 1}}), 2.5); }

std::vector<Molecule> gas(std::size_t n, const Vec3& L, std::uint64_t seed) {
    Rng rng(seed);
    return oracle::random_gas(n, L, 0.95, rng);
}

struct WorkerState {
    WorkerTopology topo;
    CellGrid grid;
};

/// Runs `body` on one thread per worker with a scattered copy of `mols`.
/// Returns the per-worker states and rethrows the first worker error.
std::vector<WorkerState> run_workers(const PartitionTree& tree, const Domain& d, const std::vector<Molecule>& mols,
                                     const std::function<void(WorkerState&, Endpoint&)>& body,
                                     std::chrono::milliseconds timeout = 20000ms) {
    const auto topo = make_topologies(tree, d, 2.5);
    const int nw = tree.workers();
    InProcessTransport transport(nw);
    std::vector<WorkerState> st;
    for (int w = 0; w < nw; ++w) {
        st.push_back({topo[static_cast<std::size_t>(w)], CellGrid(d, 2.5, topo[static_cast<std::size_t>(w)].box, HaloMode::exchange)});
    }
    const auto owner = *topo[0].owner;
    std::vector<std::vector<Molecule>> scatter(static_cast<std::size_t>(nw));
    for (const auto& m : mols)
        scatter[static_cast<std::size_t>(owner[static_cast<std::size_t>(st[0].grid.global_linear(st[0].grid.cell_of(m.r)))])]
            .push_back(m);
    for (int w = 0; w < nw; ++w) st[static_cast<std::size_t>(w)].grid.assign(scatter[static_cast<std::size_t>(w)]);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nw));
    std::vector<std::thread> threads;
    for (int w = 0; w < nw; ++w)
        threads.emplace_back([&, w] {
            try {
                Endpoint ep(w, transport, timeout);
                body(st[static_cast<std::size_t>(w)], ep);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
                transport.shutdown();
            }
        });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) {
            try {
                std::rethrow_exception(e);
            } catch (const Aborted&) {
                continue;
            }
        }
    return st;
}

std::map<std::int64_t, Molecule> owned_by_id(const std::vector<WorkerState>& st) {
    std::map<std::int64_t, Molecule> out;
    for (const auto& s : st)
        s.grid.for_each_owned([&](const Molecule& m) { EXPECT_TRUE(out.emplace(m.id, m).second) << "duplicate " << m.id; });
    return out;
}

EngineParams params(const Domain& d, int workers) {
    EngineParams p;
    p.domain = d;
    p.ff = lj_ff();
    p.workers = workers;
    p.timeout = 60000ms;
    return p;
}

}  // namespace

TEST(Halo, SelfExchangeIsPeriodicImage) {
    const Domain d = box(10, 10, 10);
    const auto mols = gas(300, d.lengths, 1);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 1);
    auto st = run_workers(tree, d, mols, [](WorkerState& s, Endpoint& ep) { exchange_halos(s.topo, s.grid, ep, 0); });
    EXPECT_EQ(st[0].topo.neighbors, std::vector<int>{0});

    CellGrid serial = CellGrid::global(d, 2.5);
    serial.assign(mols);
    std::size_t expected = 0;
    for (const auto& h : st[0].grid.halo_cells()) {
        CellIndex c = h.image;
        for (int a = 0; a < 3; ++a) c[a] = (c[a] + 4) % 4;
        expected += serial.cell(c).size();
    }
    EXPECT_EQ(st[0].grid.halo_count(), expected);

    compute_forces(serial, lj_ff());
    compute_forces(st[0].grid, lj_ff());
    std::map<std::int64_t, Vec3> ref;
    serial.for_each_owned([&](const Molecule& m) { ref[m.id] = m.f; });
    st[0].grid.for_each_owned([&](const Molecule& m) {
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(m.f[a], ref[m.id][a], 1e-12);
    });
}

TEST(Halo, EmptyMessagesStillDelivered) {
    const Domain d = box(16, 16, 16);
    std::vector<Molecule> mols;
    for (int k = 0; k < 5; ++k) {
        Molecule m;
        m.id = k;
        m.r = {1.0 + 0.3 * k, 1.0, 1.0};
        mols.push_back(m);
    }
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 8);
    std::atomic<int> received = 0;
    auto st = run_workers(tree, d, mols, [&](WorkerState& s, Endpoint& ep) {
        for (int to : s.topo.neighbors) ep.send(to, MoleculeMessage{MessageKind::halo_copy, 0, 7, {}, {}});
        received += static_cast<int>(ep.collect(MessageKind::halo_copy, 7, s.topo.neighbors).size());
        exchange_halos(s.topo, s.grid, ep, 0);
    }, 5000ms);
    int expected = 0;
    for (const auto& s : st) expected += static_cast<int>(s.topo.neighbors.size());
    EXPECT_EQ(received.load(), expected);
    std::size_t halo = 0;
    for (const auto& s : st) halo += s.grid.halo_count();
    EXPECT_GT(halo, 0u);
}

TEST(Halo, EightWorkerForcesMatchSerial) {
    const Domain d = box(15, 15, 15);
    const auto mols = gas(2000, d.lengths, 3);
    CellGrid serial = CellGrid::global(d, 2.5);
    serial.assign(mols);
    const EnergyVirial ref_ev = compute_forces(serial, lj_ff());
    std::map<std::int64_t, Vec3> ref;
    serial.for_each_owned([&](const Molecule& m) { ref[m.id] = m.f; });

    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 8);
    std::vector<EnergyVirial> evs(8);
    auto st = run_workers(tree, d, mols, [&](WorkerState& s, Endpoint& ep) {
        exchange_halos(s.topo, s.grid, ep, 0);
        evs[static_cast<std::size_t>(s.topo.id)] = compute_forces(s.grid, lj_ff());
    });
    const auto got = owned_by_id(st);
    ASSERT_EQ(got.size(), mols.size());
    for (const auto& [id, m] : got)
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(m.f[a], ref[id][a], 1e-12) << id;
    EnergyVirial sum;
    for (const auto& e : evs) sum += e;
    EXPECT_NEAR(sum.u_pot, ref_ev.u_pot, 1e-12 * std::abs(ref_ev.u_pot));
    EXPECT_NEAR(sum.virial, ref_ev.virial, 1e-12 * std::abs(ref_ev.virial));
}

TEST(Migrate, NoCrossingNoTransfer) {
    const Domain d = box(15, 15, 15);
    const auto mols = gas(500, d.lengths, 4);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 4);
    std::vector<std::size_t> before(4), after(4);
    run_workers(tree, d, mols, [&](WorkerState& s, Endpoint& ep) {
        before[static_cast<std::size_t>(s.topo.id)] = s.grid.owned_count();
        migrate(s.topo, s.grid, ep, 1);
        after[static_cast<std::size_t>(s.topo.id)] = s.grid.owned_count();
    });
    EXPECT_EQ(before, after);
}

TEST(Migrate, SingleHandoff) {
    const Domain d = box(15, 7.5, 7.5);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 2);
    ASSERT_EQ(tree.leaves()[0].hi[0], 3);
    Molecule m;
    m.id = 42;
    m.r = {7.4, 3, 3};
    auto st = run_workers(tree, d, {m}, [](WorkerState& s, Endpoint& ep) {
        s.grid.for_each_owned([](Molecule& x) { x.r.x = 7.6; });
        migrate(s.topo, s.grid, ep, 1);
    });
    EXPECT_EQ(st[0].grid.owned_count(), 0u);
    ASSERT_EQ(st[1].grid.owned_count(), 1u);
    st[1].grid.for_each_owned([](const Molecule& x) { EXPECT_EQ(x.id, 42); });
}

TEST(Migrate, ConservationOverRun) {
    RunConfig cfg;
    cfg.domain = box(24, 24, 24);
    cfg.species_table = SpeciesTable({Species{"Ar", 1, 1, 1}});
    cfg.scenario.density = 0.72;
    cfg.scenario.temperature = 1.5;
    const auto mols = generate_scenario(cfg, 5).molecules;
    ASSERT_GE(mols.size(), 9900u);
    const auto tree = uniform_partition(cell_counts_for(cfg.domain, 2.5), 8);
    ParallelEngine eng(params(cfg.domain, 8), mols, tree);
    for (int k = 1; k <= 100; ++k) {
        const auto& f = eng.advance({});
        ASSERT_EQ(f.n, static_cast<std::int64_t>(mols.size())) << "step " << k;
    }
    const auto all = eng.gather();
    std::set<std::int64_t> ids;
    for (const auto& m : all) ids.insert(m.id);
    EXPECT_EQ(ids.size(), mols.size());
}

TEST(Migrate, NonNeighbourDestination) {
    const Domain d = box(40, 7.5, 7.5);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 8);
    const auto topo = make_topologies(tree, d, 2.5);
    const auto owner = *topo[0].owner;
    const CellGrid g = CellGrid::global(d, 2.5);
    double far_x = -1;
    for (int x = 0; x < g.counts()[0] && far_x < 0; ++x) {
        const int w = owner[static_cast<std::size_t>(g.global_linear({x, 0, 0}))];
        if (w != 0 && std::count(topo[0].neighbors.begin(), topo[0].neighbors.end(), w) == 0)
            far_x = (x + 0.5) * g.cell_lengths().x;
    }
    ASSERT_GT(far_x, 0);
    Molecule m;
    m.id = 1;
    m.r = {0.5 * g.cell_lengths().x, 1, 1};
    EXPECT_THROW(run_workers(tree, d, {m}, [&](WorkerState& s, Endpoint& ep) {
                     s.grid.for_each_owned([&](Molecule& x) { x.r.x = far_x; });
                     migrate(s.topo, s.grid, ep, 1);
                 }, 2000ms),
                 PartitionError);
}

TEST(Endpoint, NonNeighbourMessageIsTopologyError) {
    const Domain d = box(20, 7.5, 7.5);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 8);
    const auto topo = make_topologies(tree, d, 2.5);
    ASSERT_EQ(std::count(topo[0].neighbors.begin(), topo[0].neighbors.end(), 4), 0);
    InProcessTransport t(8);
    Endpoint e4(4, t, 1000ms), e0(0, t, 1000ms);
    e4.send(0, MoleculeMessage{MessageKind::halo_copy, 4, 0, {}, {}});
    EXPECT_THROW(e0.collect(MessageKind::halo_copy, 0, topo[0].neighbors), TopologyError);
}

TEST(Endpoint, TimeoutAndShutdown) {
    InProcessTransport t(2);
    Endpoint e0(0, t, 50ms);
    EXPECT_THROW(e0.collect(MessageKind::halo_copy, 0, {1}), WorkerFailure);
    t.shutdown();
    EXPECT_THROW(e0.collect(MessageKind::halo_copy, 0, {1}), Aborted);
}

TEST(Endpoint, OutOfPhaseMessagesAreKept) {
    InProcessTransport t(2);
    Endpoint e0(0, t, 1000ms), e1(1, t, 1000ms);
    e1.send(0, MoleculeMessage{MessageKind::halo_copy, 0, 2, {}, {}});
    e1.send(0, MoleculeMessage{MessageKind::migration, 0, 1, {}, {}});
    EXPECT_EQ(e0.collect(MessageKind::migration, 1, {1}).size(), 1u);
    EXPECT_EQ(e0.collect(MessageKind::halo_copy, 2, {1}).size(), 1u);
}

TEST(NewPartition, IdentityMovesNothing) {
    const Domain d = box(15, 15, 15);
    const auto mols = gas(800, d.lengths, 6);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 4);
    std::vector<std::size_t> before(4);
    auto st = run_workers(tree, d, mols, [&](WorkerState& s, Endpoint& ep) {
        std::set<std::int64_t> mine;
        s.grid.for_each_owned([&](const Molecule& m) { mine.insert(m.id); });
        s.grid = apply_new_partition(s.topo, s.grid, ep, 1);
        std::set<std::int64_t> now;
        s.grid.for_each_owned([&](const Molecule& m) { now.insert(m.id); });
        EXPECT_EQ(mine, now);
    });
    EXPECT_EQ(owned_by_id(st).size(), mols.size());
}

TEST(NewPartition, LeafSwapExchangesContents) {
    const Domain d = box(15, 15, 15);
    const auto mols = gas(800, d.lengths, 7);
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 2);
    PartitionTree swapped = tree;
    for (auto& n : swapped.nodes)
        if (n.leaf()) n.worker = 1 - n.worker;
    const auto new_topo = make_topologies(swapped, d, 2.5);
    std::vector<std::set<std::int64_t>> before(2), after(2);
    run_workers(tree, d, mols, [&](WorkerState& s, Endpoint& ep) {
        const auto id = static_cast<std::size_t>(s.topo.id);
        s.grid.for_each_owned([&](const Molecule& m) { before[id].insert(m.id); });
        s.grid = apply_new_partition(new_topo[id], s.grid, ep, 1);
        s.grid.for_each_owned([&](const Molecule& m) { after[id].insert(m.id); });
    });
    EXPECT_EQ(before[0], after[1]);
    EXPECT_EQ(before[1], after[0]);
}

TEST(NewPartition, RebalanceMatchesUnbalancedRun) {
    const Domain d = box(15, 15, 15);
    auto mols = gas(1500, d.lengths, 8);
    std::erase_if(mols, [](const Molecule& m) { return m.r.x > 6.0 || m.r.y > 9.0; });
    const auto tree = uniform_partition(cell_counts_for(d, 2.5), 4);
    ParallelEngine a(params(d, 4), mols, tree), b(params(d, 4), mols, tree);
    for (int k = 0; k < 5; ++k) {
        a.advance({});
        b.advance({});
    }
    StepControl rebalance;
    const auto& occ = a.current().occupancy;
    rebalance.rebalance_loads = std::make_shared<const CellLoadField>(estimate_loads(cell_counts_for(d, 2.5), occ, d.periodic));
    const auto& fa = a.advance(rebalance);
    const auto& fb = b.advance({});
    EXPECT_NE(a.partition(), tree);
    EXPECT_NEAR(fa.ev.u_pot, fb.ev.u_pot, 1e-12 * std::abs(fb.ev.u_pot));
    EXPECT_NEAR(fa.e_kin, fb.e_kin, 1e-12 * std::abs(fb.e_kin));
    const auto ma = a.gather(), mb = b.gather();
    ASSERT_EQ(ma.size(), mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i)
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(ma[i].r[k], mb[i].r[k], 1e-12);
}

TEST(Reduce, Examples) {
    WorkerFrame f;
    f.worker = 0;
    f.step = 3;
    f.ev.u_pot = -12.5;
    f.ev.virial = 4;
    f.e_kin = 7;
    f.n = 9;
    f.species_counts = {9};
    f.box = {{0, 0, 0}, {1, 1, 1}};
    f.occupancy = {9};
    const auto one = reduce_observables(std::span(&f, 1), {1, 1, 1}, 1);
    EXPECT_EQ(one.ev.u_pot, -12.5);
    EXPECT_EQ(one.e_kin, 7.0);
    EXPECT_EQ(one.n, 9);
    EXPECT_EQ(one.step, 3);

    std::vector<WorkerFrame> zeros(4);
    for (int w = 0; w < 4; ++w) {
        zeros[static_cast<std::size_t>(w)].worker = 3 - w;
        zeros[static_cast<std::size_t>(w)].box = {{w, 0, 0}, {w + 1, 1, 1}};
        zeros[static_cast<std::size_t>(w)].occupancy = {0};
    }
    const auto z = reduce_observables(zeros, {4, 1, 1}, 1);
    EXPECT_EQ(z.ev.u_pot, 0.0);
    EXPECT_EQ(z.n, 0);

    zeros.pop_back();
    EXPECT_THROW(reduce_observables(zeros, {4, 1, 1}, 1), WorkerFailure);
}

TEST(Reduce, SameAcrossWorkerCounts) {
    const Domain d = box(15, 15, 15);
    const auto mols = gas(1500, d.lengths, 9);
    SerialEngine serial(params(d, 1), mols);
    const double u = serial.current().ev.u_pot;
    for (int nw : {2, 4, 8}) {
        ParallelEngine p(params(d, nw), mols, uniform_partition(cell_counts_for(d, 2.5), nw));
        EXPECT_NEAR(p.current().ev.u_pot, u, 1e-12 * std::abs(u)) << nw;
        EXPECT_NEAR(p.current().ev.virial, serial.current().ev.virial, 1e-12 * std::abs(serial.current().ev.virial));
    }
}

TEST(Engine, SerialEquivalenceDroplet) {
    RunConfig cfg;
    cfg.domain = box(20, 20, 20);
    cfg.species_table = SpeciesTable({Species{"Ar", 1, 1, 1}});
    cfg.scenario.kind = ScenarioKind::droplet;
    cfg.scenario.radius = 5;
    cfg.scenario.temperature = 0.75;
    const auto mols = generate_scenario(cfg, 11).molecules;
    SerialEngine serial(params(cfg.domain, 1), mols);
    std::vector<std::vector<Molecule>> ref;
    for (int k = 0; k < 10; ++k) {
        serial.advance({});
        ref.push_back(serial.gather());
    }
    const auto loads = estimate_loads(cell_counts_for(cfg.domain, 2.5), serial.current().occupancy, cfg.domain.periodic);
    for (int nw : {2, 4, 8}) {
        ParallelEngine p(params(cfg.domain, nw), mols, kd_partition(loads, nw));
        for (int k = 0; k < 10; ++k) {
            StepControl ctl;
            ctl.want_snapshot = true;
            const auto& f = p.advance(ctl);
            ASSERT_TRUE(f.snapshot);
            const auto& got = *f.snapshot;
            ASSERT_EQ(got.size(), mols.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                ASSERT_EQ(got[i].id, static_cast<std::int64_t>(i));
                for (int a = 0; a < 3; ++a) ASSERT_NEAR(got[i].r[a], ref[static_cast<std::size_t>(k)][i].r[a], 1e-9);
            }
        }
    }
}

TEST(Engine, WorkerErrorPropagates) {
    const Domain d = box(15, 15, 15);
    auto mols = gas(200, d.lengths, 12);
    mols[1].r = mols[0].r;
    EXPECT_THROW(ParallelEngine(params(d, 4), mols, uniform_partition(cell_counts_for(d, 2.5), 4)), OverlapError);
}

TEST(Engine, DeterministicAcrossRuns) {
    const Domain d = box(15, 15, 15);
    const auto mols = gas(1000, d.lengths, 13);
    auto run = [&] {
        ParallelEngine p(params(d, 4), mols, uniform_partition(cell_counts_for(d, 2.5), 4));
        for (int k = 0; k < 20; ++k) p.advance({});
        return p.gather();
    };
    const auto a = run(), b = run();
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].r, b[i].r);
        EXPECT_EQ(a[i].v, b[i].v);
    }
}
