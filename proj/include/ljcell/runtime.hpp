#pragma once
#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "balance.hpp"
#include "cells.hpp"
#include "dynamics.hpp"
#include "forcefield.hpp"

// Worker runtime. Each worker owns one cuboid of cells and talks to the
// others only through typed messages; the coordinator drives the
// bulk-synchronous step loop (control message out, one reduction frame back
// per worker) and merges frames in ascending worker order.

namespace ljcell {

// ---------------------------------------------------------------------------
// messages and transport

/// Wire record for one molecule. Never carries force state.
struct Particle {
    std::int64_t id = 0;
    int species = 0;
    Vec3 r;
    Vec3 v;
};

inline Particle to_particle(const Molecule& m) { return {m.id, m.species, m.r, m.v}; }
inline Molecule to_molecule(const Particle& p) { return Molecule{p.id, p.species, p.r, p.v, Vec3{}}; }

enum class MessageKind { halo_copy, migration };

struct CellPayload {
    CellIndex image;  // halo cell in the receiver's frame (unwrapped global index)
    std::vector<Particle> particles;
};

struct MoleculeMessage {
    MessageKind kind = MessageKind::halo_copy;
    int from = -1;
    std::int64_t step = 0;
    std::vector<CellPayload> cells;   // halo_copy: positions pre-shifted by the image vector
    std::vector<Particle> particles;  // migration
};

enum class PopStatus { ok, timeout, closed };

/// Unbounded MPSC queue.
template <class T>
class Channel {
public:
    void push(T item) {
        {
            std::lock_guard lock(mutex_);
            if (closed_) return;
            queue_.push_back(std::move(item));
        }
        cv_.notify_one();
    }

    PopStatus pop(T& out, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mutex_);
        if (!cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); })) return PopStatus::timeout;
        if (queue_.empty()) return PopStatus::closed;
        out = std::move(queue_.front());
        queue_.pop_front();
        return PopStatus::ok;
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
            queue_.clear();
        }
        cv_.notify_all();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<T> queue_;
    bool closed_ = false;
};

/// Point-to-point molecule messaging between workers.
class Transport {
public:
    virtual ~Transport() = default;
    virtual int size() const = 0;
    virtual void send(int to, MoleculeMessage msg) = 0;
    virtual PopStatus receive(int self, MoleculeMessage& out, std::chrono::milliseconds timeout) = 0;
    virtual void shutdown() = 0;
};

class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(int workers) : boxes_(static_cast<std::size_t>(workers)) {}

    int size() const override { return static_cast<int>(boxes_.size()); }
    void send(int to, MoleculeMessage msg) override { boxes_.at(static_cast<std::size_t>(to)).push(std::move(msg)); }
    PopStatus receive(int self, MoleculeMessage& out, std::chrono::milliseconds timeout) override {
        return boxes_.at(static_cast<std::size_t>(self)).pop(out, timeout);
    }
    void shutdown() override {
        for (auto& b : boxes_) b.close();
    }

private:
    std::vector<Channel<MoleculeMessage>> boxes_;
};

/// Raised inside a worker when the fabric was shut down under it.
struct Aborted : Error {
    Aborted() : Error("worker fabric shut down") {}
};

/// One worker's receiving side: buffers messages that belong to a later
/// phase and hands out complete phases sorted by sender.
class Endpoint {
public:
    Endpoint(int id, Transport& t, std::chrono::milliseconds timeout) : id_(id), transport_(&t), timeout_(timeout) {}

    int id() const { return id_; }
    Transport& transport() { return *transport_; }

    void send(int to, MoleculeMessage msg) {
        msg.from = id_;
        transport_->send(to, std::move(msg));
    }

    /// Exactly one message of (kind, step) from every sender in `senders`.
    std::vector<MoleculeMessage> collect(MessageKind kind, std::int64_t step, const std::vector<int>& senders) {
        std::vector<std::optional<MoleculeMessage>> got(static_cast<std::size_t>(transport_->size()));
        std::size_t remaining = senders.size();
        auto accept = [&](MoleculeMessage& msg) {
            if (msg.from < 0 || msg.from >= transport_->size() ||
                std::find(senders.begin(), senders.end(), msg.from) == senders.end())
                throw TopologyError("worker " + std::to_string(id_) + " got a message from non-neighbour " +
                                    std::to_string(msg.from));
            auto& slot = got[static_cast<std::size_t>(msg.from)];
            if (slot) throw TopologyError("duplicate message from worker " + std::to_string(msg.from));
            slot = std::move(msg);
            --remaining;
        };
        for (auto it = pending_.begin(); it != pending_.end() && remaining > 0;) {
            if (it->kind == kind && it->step == step) {
                accept(*it);
                it = pending_.erase(it);
            } else {
                ++it;
            }
        }
        while (remaining > 0) {
            MoleculeMessage msg;
            const auto st = transport_->receive(id_, msg, timeout_);
            if (st == PopStatus::closed) throw Aborted();
            if (st == PopStatus::timeout)
                throw WorkerFailure("worker " + std::to_string(id_) + " timed out waiting for " +
                                    std::to_string(remaining) + " message(s) at step " + std::to_string(step));
            if (msg.kind == kind && msg.step == step) accept(msg);
            else pending_.push_back(std::move(msg));
        }
        std::vector<MoleculeMessage> out;
        out.reserve(senders.size());
        for (auto& g : got)
            if (g) out.push_back(std::move(*g));
        return out;
    }

private:
    int id_;
    Transport* transport_;
    std::chrono::milliseconds timeout_;
    std::deque<MoleculeMessage> pending_;
};

// ---------------------------------------------------------------------------
// topology

struct HaloSend {
    int to = 0;
    CellIndex source;  // owned global cell
    CellIndex image;   // halo cell index in the receiver's frame
    Vec3 shift;        // added to positions
};

struct WorkerTopology {
    int id = 0;
    int workers = 1;
    CellBox box;
    std::vector<int> neighbors;        // workers exchanging halo data with this one (may include itself)
    std::vector<int> peers;            // neighbours other than itself (migration partners)
    std::vector<HaloSend> sends;       // sorted by receiver, then receiver's halo order
    std::vector<int> recv_from;        // senders of halo data to this worker
    std::shared_ptr<const std::vector<int>> owner;  // global cell -> worker
};

/// Builds every worker's topology for a partition. The computation is
/// deterministic, so workers can run it independently.
inline std::vector<WorkerTopology> make_topologies(const PartitionTree& tree, const Domain& domain, double cutoff) {
    const auto n = cell_counts_for(domain, cutoff);
    if (tree.dims != n) throw PartitionError("partition tree does not match the cell grid");
    auto owner = std::make_shared<const std::vector<int>>(tree.owner_map());
    for (int o : *owner)
        if (o < 0) throw PartitionError("partition leaves do not tile the cell grid");
    const int workers = tree.workers();
    const auto boxes = tree.leaves();
    std::vector<WorkerTopology> topo(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        auto& t = topo[static_cast<std::size_t>(w)];
        t.id = w;
        t.workers = workers;
        t.box = boxes[static_cast<std::size_t>(w)];
        t.owner = owner;
    }
    auto glin = [&](const CellIndex& c) {
        return (static_cast<std::size_t>(c.z) * n[1] + c.y) * n[0] + c.x;
    };
    // receiver-major order keeps every sender's list in the receiver's halo order
    for (int w = 0; w < workers; ++w) {
        const CellBox& b = boxes[static_cast<std::size_t>(w)];
        for (int z = b.lo[2] - 1; z <= b.hi[2]; ++z)
            for (int y = b.lo[1] - 1; y <= b.hi[1]; ++y)
                for (int x = b.lo[0] - 1; x <= b.hi[0]; ++x) {
                    const CellIndex img{x, y, z};
                    if (b.contains(img)) continue;
                    CellIndex src = img;
                    Vec3 shift;
                    bool inside = true;
                    for (int a = 0; a < 3; ++a) {
                        if (src[a] >= 0 && src[a] < n[a]) continue;
                        if (!domain.periodic[a]) {
                            inside = false;
                            break;
                        }
                        if (src[a] < 0) {
                            src[a] += n[a];
                            shift[a] = -domain.lengths[a];
                        } else {
                            src[a] -= n[a];
                            shift[a] = domain.lengths[a];
                        }
                    }
                    if (!inside) continue;
                    const int o = (*owner)[glin(src)];
                    topo[static_cast<std::size_t>(o)].sends.push_back({w, src, img, shift});
                    auto& rf = topo[static_cast<std::size_t>(w)].recv_from;
                    if (std::find(rf.begin(), rf.end(), o) == rf.end()) rf.push_back(o);
                }
    }
    for (auto& t : topo) {
        std::stable_sort(t.sends.begin(), t.sends.end(), [](const HaloSend& a, const HaloSend& b) { return a.to < b.to; });
        std::sort(t.recv_from.begin(), t.recv_from.end());
        for (const auto& s : t.sends) t.neighbors.push_back(s.to);
        for (int r : t.recv_from) t.neighbors.push_back(r);
        std::sort(t.neighbors.begin(), t.neighbors.end());
        t.neighbors.erase(std::unique(t.neighbors.begin(), t.neighbors.end()), t.neighbors.end());
        for (int v : t.neighbors)
            if (v != t.id) t.peers.push_back(v);
    }
    return topo;
}

// ---------------------------------------------------------------------------
// worker-side operations

/// Fill the halo layer of `grid` with copies of the neighbours' boundary
/// cells (periodic images shifted). Every neighbour receives exactly one
/// message per call, empty or not.
inline void exchange_halos(const WorkerTopology& topo, CellGrid& grid, Endpoint& ep, std::int64_t step) {
    grid.clear_halo();
    std::size_t k = 0;
    for (int to : topo.neighbors) {
        MoleculeMessage msg;
        msg.kind = MessageKind::halo_copy;
        msg.step = step;
        for (; k < topo.sends.size() && topo.sends[k].to == to; ++k) {
            const auto& s = topo.sends[k];
            CellPayload payload;
            payload.image = s.image;
            const auto mols = grid.cell(s.source);
            payload.particles.reserve(mols.size());
            for (const auto& m : mols) {
                Particle p = to_particle(m);
                p.r += s.shift;
                payload.particles.push_back(p);
            }
            msg.cells.push_back(std::move(payload));
        }
        ep.send(to, std::move(msg));
    }
    std::vector<Molecule> buf;
    for (auto& msg : ep.collect(MessageKind::halo_copy, step, topo.neighbors)) {
        for (auto& payload : msg.cells) {
            buf.clear();
            for (const auto& p : payload.particles) buf.push_back(to_molecule(p));
            grid.insert_halo(payload.image, buf);
        }
    }
}

/// Hand molecules that left the owned box to the neighbour owning their new
/// cell and take in the ones arriving here.
inline void migrate(const WorkerTopology& topo, CellGrid& grid, Endpoint& ep, std::int64_t step) {
    auto leaving = grid.reassign();
    std::vector<MoleculeMessage> out(topo.peers.size());
    for (auto& m : leaving) {
        const CellIndex c = grid.cell_of(m.r);
        bool inside = c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < grid.counts()[0] && c.y < grid.counts()[1] &&
                      c.z < grid.counts()[2];
        const int o = inside ? (*topo.owner)[static_cast<std::size_t>(grid.global_linear(c))] : -1;
        const auto it = std::find(topo.peers.begin(), topo.peers.end(), o);
        if (it == topo.peers.end())
            throw PartitionError("molecule " + std::to_string(m.id) + " moved outside every neighbouring subdomain at step " +
                                 std::to_string(step));
        out[static_cast<std::size_t>(it - topo.peers.begin())].particles.push_back(to_particle(m));
    }
    for (std::size_t i = 0; i < topo.peers.size(); ++i) {
        out[i].kind = MessageKind::migration;
        out[i].step = step;
        ep.send(topo.peers[i], std::move(out[i]));
    }
    for (auto& msg : ep.collect(MessageKind::migration, step, topo.peers))
        for (const auto& p : msg.particles) grid.insert_owned(to_molecule(p));
    grid.sort_owned();
}

/// Redistribute all owned molecules according to a new partition. Every
/// worker exchanges one message with every other worker. Returns the grid
/// for the new owned box.
inline CellGrid apply_new_partition(const WorkerTopology& new_topo, CellGrid& old_grid, Endpoint& ep, std::int64_t step) {
    CellGrid grid(old_grid.domain(), old_grid.cutoff(), new_topo.box, HaloMode::exchange);
    auto mine = old_grid.extract_owned();
    std::vector<MoleculeMessage> out(static_cast<std::size_t>(new_topo.workers));
    std::vector<int> others;
    for (int w = 0; w < new_topo.workers; ++w)
        if (w != new_topo.id) others.push_back(w);
    for (auto& m : mine) {
        const CellIndex c = grid.cell_of(m.r);
        const int o = (*new_topo.owner)[static_cast<std::size_t>(grid.global_linear(c))];
        if (o < 0) throw PartitionError("molecule outside every leaf box of the new partition");
        if (o == new_topo.id) grid.insert_owned(std::move(m));
        else out[static_cast<std::size_t>(o)].particles.push_back(to_particle(m));
    }
    for (int w : others) {
        auto& msg = out[static_cast<std::size_t>(w)];
        msg.kind = MessageKind::migration;
        msg.step = step;
        ep.send(w, std::move(msg));
    }
    for (auto& msg : ep.collect(MessageKind::migration, step, others))
        for (const auto& p : msg.particles) grid.insert_owned(to_molecule(p));
    grid.sort_owned();
    return grid;
}

// ---------------------------------------------------------------------------
// frames and reduction

/// One worker's contribution to a step.
struct WorkerFrame {
    int worker = 0;
    std::int64_t step = 0;
    EnergyVirial ev;
    double e_kin = 0.0;
    Vec3 momentum;
    std::int64_t n = 0;
    std::vector<std::int64_t> species_counts;
    CellBox box;
    std::vector<std::uint32_t> occupancy;  // owned cells in box order
    std::optional<std::vector<Molecule>> snapshot;
};

/// Globally merged state summary for one step.
struct StepFrame {
    std::int64_t step = 0;
    EnergyVirial ev;
    double e_kin = 0.0;
    Vec3 momentum;
    std::int64_t n = 0;
    std::vector<std::int64_t> species_counts;
    std::vector<std::uint32_t> occupancy;  // every global cell, x fastest
    std::optional<std::vector<Molecule>> snapshot;  // sorted by id
};

/// Merge in ascending worker order (fixed summation order).
inline StepFrame reduce_observables(std::span<const WorkerFrame> frames, const std::array<int, 3>& dims,
                                    std::size_t n_species) {
    std::vector<const WorkerFrame*> order;
    for (const auto& f : frames) order.push_back(&f);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->worker < b->worker; });
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i]->worker != static_cast<int>(i))
            throw WorkerFailure("missing reduction contribution from worker " + std::to_string(i));

    StepFrame out;
    out.occupancy.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
    out.species_counts.assign(n_species, 0);
    bool snap = false;
    for (const auto* f : order) {
        out.step = f->step;
        out.ev += f->ev;
        out.e_kin += f->e_kin;
        out.momentum += f->momentum;
        out.n += f->n;
        for (std::size_t s = 0; s < n_species && s < f->species_counts.size(); ++s) out.species_counts[s] += f->species_counts[s];
        std::size_t k = 0;
        for (int z = f->box.lo[2]; z < f->box.hi[2]; ++z)
            for (int y = f->box.lo[1]; y < f->box.hi[1]; ++y)
                for (int x = f->box.lo[0]; x < f->box.hi[0]; ++x)
                    out.occupancy[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x] = f->occupancy.at(k++);
        if (f->snapshot) snap = true;
    }
    if (snap) {
        std::vector<Molecule> all;
        for (const auto* f : order)
            if (f->snapshot) all.insert(all.end(), f->snapshot->begin(), f->snapshot->end());
        std::sort(all.begin(), all.end(), [](const Molecule& a, const Molecule& b) { return a.id < b.id; });
        out.snapshot = std::move(all);
    }
    return out;
}

inline WorkerFrame make_frame(int worker, std::int64_t step, const CellGrid& grid, const EnergyVirial& ev,
                              const ForceField& ff, bool snapshot) {
    WorkerFrame f;
    f.worker = worker;
    f.step = step;
    f.ev = ev;
    f.box = grid.owned_box();
    f.species_counts.assign(ff.species().size(), 0);
    const auto masses = ff.masses();
    if (snapshot) f.snapshot.emplace();
    grid.for_each_owned([&](const Molecule& m) {
        const double mass = masses[static_cast<std::size_t>(m.species)];
        f.e_kin += 0.5 * mass * norm2(m.v);
        f.momentum += mass * m.v;
        ++f.n;
        ++f.species_counts[static_cast<std::size_t>(m.species)];
        if (snapshot) f.snapshot->push_back(m);
    });
    f.occupancy = grid.occupancy();
    return f;
}

// ---------------------------------------------------------------------------
// engines

struct EngineParams {
    Domain domain;
    ForceField ff;
    double dt = 0.002;
    int workers = 1;
    int axis0 = 0;
    bool allow_axis_skip = false;
    std::chrono::milliseconds timeout{300000};
};

struct StepControl {
    double velocity_scale = 1.0;  // applied to all velocities before the step
    std::shared_ptr<const CellLoadField> rebalance_loads;  // recompute a kd partition from these
    std::shared_ptr<const PartitionTree> new_tree;         // or switch to this partition
    bool want_snapshot = false;
};

/// Common interface of the serial reference engine and the worker fabric.
class Engine {
public:
    virtual ~Engine() = default;
    /// Frame of the latest completed step (step 0 = initial state).
    virtual const StepFrame& current() const = 0;
    /// One velocity-Verlet step.
    virtual const StepFrame& advance(const StepControl& ctl) = 0;
    virtual std::vector<Molecule> gather() = 0;
    virtual const PartitionTree& partition() const = 0;
    virtual int workers() const = 0;
};

/// Single-process reference integrator over the global wrap-mode grid.
/// It is the correctness oracle for the parallel runtime.
class SerialEngine final : public Engine {
public:
    SerialEngine(EngineParams params, std::vector<Molecule> mols)
        : p_(std::move(params)), grid_(CellGrid::global(p_.domain, p_.ff.cutoff())) {
        tree_ = uniform_partition(grid_.counts(), 1);
        grid_.assign(std::move(mols));
        ev_ = forces(0);
        frame_ = frame(0, true);
    }

    const StepFrame& current() const override { return frame_; }

    const StepFrame& advance(const StepControl& ctl) override {
        const std::int64_t step = frame_.step + 1;
        const auto masses = p_.ff.masses();
        const double s = ctl.velocity_scale;
        grid_.for_each_owned([&](Molecule& m) {
            if (s != 1.0) m.v *= s;
            kick_drift(m, 1.0 / masses[static_cast<std::size_t>(m.species)], p_.dt, p_.domain, step);
        });
        if (!grid_.reassign().empty()) throw OwnershipError("molecule left the global domain");
        ev_ = forces(step);
        grid_.for_each_owned([&](Molecule& m) {
            closing_kick(m, 1.0 / masses[static_cast<std::size_t>(m.species)], p_.dt, step);
        });
        frame_ = frame(step, ctl.want_snapshot);
        return frame_;
    }

    std::vector<Molecule> gather() override {
        std::vector<Molecule> out;
        grid_.for_each_owned([&](const Molecule& m) { out.push_back(m); });
        std::sort(out.begin(), out.end(), [](const Molecule& a, const Molecule& b) { return a.id < b.id; });
        return out;
    }

    const PartitionTree& partition() const override { return tree_; }
    int workers() const override { return 1; }
    const CellGrid& grid() const { return grid_; }

private:
    EnergyVirial forces(std::int64_t step) {
        try {
            return compute_forces(grid_, p_.ff);
        } catch (NumericalError& e) {
            e.step = step;
            throw;
        }
    }

    StepFrame frame(std::int64_t step, bool snapshot) const {
        const WorkerFrame f = make_frame(0, step, grid_, ev_, p_.ff, snapshot);
        return reduce_observables(std::span(&f, 1), grid_.counts(), p_.ff.species().size());
    }

    EngineParams p_;
    CellGrid grid_;
    PartitionTree tree_;
    EnergyVirial ev_;
    StepFrame frame_;
};

/// N_p worker threads over an in-process transport.
class ParallelEngine final : public Engine {
public:
    ParallelEngine(EngineParams params, std::vector<Molecule> mols, PartitionTree tree)
        : p_(std::move(params)), tree_(std::move(tree)), transport_(tree_.workers()) {
        const int nw = tree_.workers();
        if (nw != p_.workers) throw PartitionError("partition tree worker count does not match");
        dims_ = cell_counts_for(p_.domain, p_.ff.cutoff());
        const auto topo = make_topologies(tree_, p_.domain, p_.ff.cutoff());
        const CellGrid probe(p_.domain, p_.ff.cutoff(), topo[0].box, HaloMode::exchange);
        std::vector<std::vector<Molecule>> scatter(static_cast<std::size_t>(nw));
        for (auto& m : mols) {
            const CellIndex c = probe.cell_of(m.r);
            if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= dims_[0] || c.y >= dims_[1] || c.z >= dims_[2])
                throw OwnershipError("molecule " + std::to_string(m.id) + " outside the domain");
            scatter[static_cast<std::size_t>((*topo[0].owner)[static_cast<std::size_t>(probe.global_linear(c))])]
                .push_back(std::move(m));
        }
        controls_.reserve(static_cast<std::size_t>(nw));
        for (int w = 0; w < nw; ++w) controls_.push_back(std::make_unique<Channel<Control>>());
        for (int w = 0; w < nw; ++w)
            threads_.emplace_back(&ParallelEngine::worker_main, this, w, topo[static_cast<std::size_t>(w)],
                                  std::move(scatter[static_cast<std::size_t>(w)]));
        frame_ = collect(0);
    }

    ~ParallelEngine() override { shutdown(); }

    ParallelEngine(const ParallelEngine&) = delete;
    ParallelEngine& operator=(const ParallelEngine&) = delete;

    const StepFrame& current() const override { return frame_; }

    const StepFrame& advance(const StepControl& ctl) override {
        ensure_alive();
        Control c;
        c.kind = Control::Kind::step;
        c.step = frame_.step + 1;
        c.velocity_scale = ctl.velocity_scale;
        c.want_snapshot = ctl.want_snapshot;
        if (ctl.new_tree) {
            c.new_tree = ctl.new_tree;
        } else if (ctl.rebalance_loads) {
            c.loads = ctl.rebalance_loads;
        }
        for (auto& ch : controls_) ch->push(c);
        // replicated: the coordinator derives the same tree the workers do
        if (c.new_tree) tree_ = *c.new_tree;
        else if (c.loads) tree_ = kd_partition(*c.loads, p_.workers, p_.axis0, p_.allow_axis_skip);
        frame_ = collect(c.step);
        return frame_;
    }

    std::vector<Molecule> gather() override {
        ensure_alive();
        Control c;
        c.kind = Control::Kind::gather;
        c.step = frame_.step;
        for (auto& ch : controls_) ch->push(c);
        const StepFrame f = collect(frame_.step);
        return f.snapshot ? *f.snapshot : std::vector<Molecule>{};
    }

    const PartitionTree& partition() const override { return tree_; }
    int workers() const override { return p_.workers; }

private:
    struct Control {
        enum class Kind { step, gather, stop } kind = Kind::step;
        std::int64_t step = 0;
        double velocity_scale = 1.0;
        std::shared_ptr<const CellLoadField> loads;
        std::shared_ptr<const PartitionTree> new_tree;
        bool want_snapshot = false;
    };

    struct Report {
        WorkerFrame frame;
        std::exception_ptr error;
    };

    void worker_main(int id, WorkerTopology topo, std::vector<Molecule> mols) {
        try {
            Endpoint ep(id, transport_, p_.timeout);
            const ForceField ff = p_.ff;
            CellGrid grid(p_.domain, ff.cutoff(), topo.box, HaloMode::exchange);
            grid.assign(std::move(mols));
            exchange_halos(topo, grid, ep, 0);
            EnergyVirial ev = worker_forces(grid, ff, 0);
            reports_.push(Report{make_frame(id, 0, grid, ev, ff, false), nullptr});

            const auto masses = ff.masses();
            for (;;) {
                Control c;
                const auto st = controls_[static_cast<std::size_t>(id)]->pop(c, p_.timeout);
                if (st == PopStatus::closed) return;
                if (st == PopStatus::timeout) throw WorkerFailure("worker " + std::to_string(id) + " got no control message");
                if (c.kind == Control::Kind::stop) return;
                if (c.kind == Control::Kind::gather) {
                    reports_.push(Report{make_frame(id, c.step, grid, ev, ff, true), nullptr});
                    continue;
                }
                const double s = c.velocity_scale;
                grid.for_each_owned([&](Molecule& m) {
                    if (s != 1.0) m.v *= s;
                    kick_drift(m, 1.0 / masses[static_cast<std::size_t>(m.species)], p_.dt, p_.domain, c.step);
                });
                if (c.new_tree || c.loads) {
                    const PartitionTree next =
                        c.new_tree ? *c.new_tree : kd_partition(*c.loads, topo.workers, p_.axis0, p_.allow_axis_skip);
                    auto all = make_topologies(next, p_.domain, ff.cutoff());
                    topo = std::move(all[static_cast<std::size_t>(id)]);
                    grid = apply_new_partition(topo, grid, ep, c.step);
                } else {
                    migrate(topo, grid, ep, c.step);
                }
                exchange_halos(topo, grid, ep, c.step);
                ev = worker_forces(grid, ff, c.step);
                grid.for_each_owned([&](Molecule& m) {
                    closing_kick(m, 1.0 / masses[static_cast<std::size_t>(m.species)], p_.dt, c.step);
                });
                reports_.push(Report{make_frame(id, c.step, grid, ev, ff, c.want_snapshot), nullptr});
            }
        } catch (const Aborted&) {
            return;
        } catch (...) {
            WorkerFrame failed;
            failed.worker = id;
            reports_.push(Report{std::move(failed), std::current_exception()});
        }
    }

    static EnergyVirial worker_forces(CellGrid& grid, const ForceField& ff, std::int64_t step) {
        try {
            return compute_forces(grid, ff);
        } catch (NumericalError& e) {
            e.step = step;
            throw;
        }
    }

    StepFrame collect(std::int64_t step) {
        std::vector<WorkerFrame> frames;
        frames.reserve(static_cast<std::size_t>(p_.workers));
        while (static_cast<int>(frames.size()) < p_.workers) {
            Report r;
            const auto st = reports_.pop(r, p_.timeout);
            if (st != PopStatus::ok) {
                abort_all();
                throw WorkerFailure("no reduction frame from some worker at step " + std::to_string(step));
            }
            if (r.error) {
                abort_all();
                std::rethrow_exception(r.error);
            }
            if (r.frame.step != step) {
                abort_all();
                throw WorkerFailure("reduction frame for the wrong step");
            }
            frames.push_back(std::move(r.frame));
        }
        return reduce_observables(frames, dims_, p_.ff.species().size());
    }

    void ensure_alive() const {
        if (dead_) throw WorkerFailure("worker fabric was aborted");
    }

    void abort_all() {
        dead_ = true;
        transport_.shutdown();
        for (auto& ch : controls_) ch->close();
        join();
    }

    void shutdown() {
        if (!dead_) {
            Control c;
            c.kind = Control::Kind::stop;
            for (auto& ch : controls_) ch->push(c);
            dead_ = true;
        }
        join();
    }

    void join() {
        for (auto& t : threads_)
            if (t.joinable()) t.join();
    }

    EngineParams p_;
    PartitionTree tree_;
    std::array<int, 3> dims_{};
    InProcessTransport transport_;
    std::vector<std::unique_ptr<Channel<Control>>> controls_;
    Channel<Report> reports_;
    std::vector<std::thread> threads_;
    StepFrame frame_;
    bool dead_ = false;
};

}  // namespace ljcell
