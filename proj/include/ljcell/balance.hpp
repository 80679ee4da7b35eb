#pragma once
#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cells.hpp"

namespace ljcell {

/// Estimated compute cost per global cell, x-fastest linear layout.
struct CellLoadField {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> cost;

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }
    double at(int x, int y, int z) const { return cost[index(x, y, z)]; }
    double total() const {
        double s = 0.0;
        for (double c : cost) s += c;
        return s;
    }
    double sum(const CellBox& b) const {
        double s = 0.0;
        for (int z = b.lo[2]; z < b.hi[2]; ++z)
            for (int y = b.lo[1]; y < b.hi[1]; ++y)
                for (int x = b.lo[0]; x < b.hi[0]; ++x) s += at(x, y, z);
        return s;
    }
    bool operator==(const CellLoadField&) const = default;
};

/// Pair-work proxy: n_c (n_c - 1)/2 for the cell itself plus half of
/// n_c * n_c' for every distinct neighbour c' in the 26-neighbourhood.
inline CellLoadField estimate_loads(const std::array<int, 3>& dims, std::span<const std::uint32_t> occupancy,
                                    const std::array<bool, 3>& periodic = {true, true, true}) {
    CellLoadField f;
    f.dims = dims;
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    if (occupancy.size() != n) throw ConfigError("occupancy size does not match the cell grid");
    f.cost.assign(n, 0.0);
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const double nc = occupancy[f.index(x, y, z)];
                if (nc == 0.0) continue;
                double cost = nc * (nc - 1.0) / 2.0;
                double neigh = 0.0;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dx == 0 && dy == 0 && dz == 0) continue;
                            int c[3] = {x + dx, y + dy, z + dz};
                            bool ok = true;
                            for (int a = 0; a < 3; ++a) {
                                if (c[a] >= 0 && c[a] < dims[a]) continue;
                                if (!periodic[a] || dims[a] < 3) {
                                    ok = false;
                                    break;
                                }
                                c[a] = (c[a] + dims[a]) % dims[a];
                            }
                            if (ok) neigh += occupancy[f.index(c[0], c[1], c[2])];
                        }
                cost += 0.5 * nc * neigh;
                f.cost[f.index(x, y, z)] = cost;
            }
    return f;
}

struct PartitionNode {
    CellBox box;
    int axis = -1;   // -1 for leaves
    int split = 0;   // global cell index of the split plane
    int workers = 1;
    int workers_left = 0;
    int workers_right = 0;
    int left = -1;
    int right = -1;
    int worker = -1;  // leaves only

    bool leaf() const { return axis < 0; }
    bool operator==(const PartitionNode&) const = default;
};

/// Binary tree of axis-aligned splits. Leaves are numbered 0..N_p-1 in
/// depth-first (left before right) order; leaf i is worker i's cuboid.
class PartitionTree {
public:
    std::array<int, 3> dims{0, 0, 0};
    int axis0 = 0;
    std::vector<PartitionNode> nodes;  // nodes[0] is the root

    int workers() const { return nodes.empty() ? 0 : nodes[0].workers; }

    std::vector<CellBox> leaves() const {
        std::vector<CellBox> out(static_cast<std::size_t>(workers()));
        for (const auto& n : nodes)
            if (n.leaf()) out.at(static_cast<std::size_t>(n.worker)) = n.box;
        return out;
    }

    /// Worker id for every global cell (x-fastest).
    std::vector<int> owner_map() const {
        std::vector<int> owner(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], -1);
        for (const auto& n : nodes) {
            if (!n.leaf()) continue;
            for (int z = n.box.lo[2]; z < n.box.hi[2]; ++z)
                for (int y = n.box.lo[1]; y < n.box.hi[1]; ++y)
                    for (int x = n.box.lo[0]; x < n.box.hi[0]; ++x)
                        owner[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x] = n.worker;
        }
        return owner;
    }

    bool operator==(const PartitionTree&) const = default;
};

namespace detail {

inline CellBox full_box(const std::array<int, 3>& dims) { return CellBox{{0, 0, 0}, dims}; }

inline int add_leaf(PartitionTree& t, const CellBox& box, int& next_worker) {
    PartitionNode n;
    n.box = box;
    n.worker = next_worker++;
    t.nodes.push_back(n);
    return static_cast<int>(t.nodes.size()) - 1;
}

inline int build_uniform(PartitionTree& t, const CellBox& box, std::array<int, 3> groups,
                         std::array<int, 3> first, const std::array<std::vector<int>, 3>& bounds,
                         int& next_worker) {
    int axis = -1;
    for (int a = 0; a < 3; ++a)
        if (groups[a] > 1) {
            axis = a;
            break;
        }
    if (axis < 0) return add_leaf(t, box, next_worker);

    const int gl = groups[axis] / 2;
    const int split = bounds[axis][static_cast<std::size_t>(first[axis] + gl)];
    const int idx = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    CellBox lb = box, rb = box;
    lb.hi[axis] = split;
    rb.lo[axis] = split;
    auto lg = groups, rg = groups;
    lg[axis] = gl;
    rg[axis] = groups[axis] - gl;
    auto rf = first;
    rf[axis] += gl;
    const int left = build_uniform(t, lb, lg, first, bounds, next_worker);
    const int right = build_uniform(t, rb, rg, rf, bounds, next_worker);
    auto& n = t.nodes[static_cast<std::size_t>(idx)];
    n.box = box;
    n.axis = axis;
    n.split = split;
    n.workers_left = lg[0] * lg[1] * lg[2];
    n.workers_right = rg[0] * rg[1] * rg[2];
    n.workers = n.workers_left + n.workers_right;
    n.left = left;
    n.right = right;
    return idx;
}

}  // namespace detail

/// Static decomposition into a px * py * pz block grid of near-equal
/// volume, ignoring loads. The factorisation minimises block surface area;
/// ties prefer more blocks along x, then y.
inline PartitionTree uniform_partition(const std::array<int, 3>& dims, int workers) {
    if (workers < 1) throw PartitionError("worker count must be at least 1");
    const std::int64_t cells = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    if (workers > cells)
        throw PartitionError(std::to_string(workers) + " workers exceed " + std::to_string(cells) + " cells");

    std::array<int, 3> best{0, 0, 0};
    double best_area = std::numeric_limits<double>::infinity();
    for (int px = workers; px >= 1; --px) {
        if (workers % px != 0 || px > dims[0]) continue;
        const int rest = workers / px;
        for (int py = rest; py >= 1; --py) {
            if (rest % py != 0 || py > dims[1]) continue;
            const int pz = rest / py;
            if (pz > dims[2]) continue;
            const double bx = static_cast<double>(dims[0]) / px;
            const double by = static_cast<double>(dims[1]) / py;
            const double bz = static_cast<double>(dims[2]) / pz;
            const double area = bx * by + by * bz + bx * bz;
            if (area < best_area) {
                best_area = area;
                best = {px, py, pz};
            }
        }
    }
    if (best[0] == 0)
        throw PartitionError(std::to_string(workers) + " workers cannot be arranged as a block grid over " +
                             std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" +
                             std::to_string(dims[2]) + " cells");

    std::array<std::vector<int>, 3> bounds;
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k <= best[a]; ++k)
            bounds[a].push_back(static_cast<int>(static_cast<std::int64_t>(k) * dims[a] / best[a]));

    PartitionTree t;
    t.dims = dims;
    int next = 0;
    detail::build_uniform(t, detail::full_box(dims), best, {0, 0, 0}, bounds, next);
    return t;
}

/// Result of scanning one axis of a region for the best split plane.
struct SplitChoice {
    bool feasible = false;
    int split = 0;
    double score = 0.0;  // max(load_left / n_left, load_right / n_right)
};

/// Exhaustive scan of the cell-boundary planes normal to `axis` inside
/// `box`. A plane is admissible when each side has at least as many cells
/// as workers. Ties go to the lowest split index.
inline SplitChoice best_split(const CellLoadField& loads, const CellBox& box, int axis, int n_left,
                              int n_right) {
    SplitChoice best;
    const int ext = box.extent(axis);
    if (ext < 2) return best;
    std::int64_t cross = 1;
    for (int a = 0; a < 3; ++a)
        if (a != axis) cross *= box.extent(a);

    std::vector<double> slab(static_cast<std::size_t>(ext), 0.0);
    for (int z = box.lo[2]; z < box.hi[2]; ++z)
        for (int y = box.lo[1]; y < box.hi[1]; ++y)
            for (int x = box.lo[0]; x < box.hi[0]; ++x) {
                const int c[3] = {x, y, z};
                slab[static_cast<std::size_t>(c[axis] - box.lo[axis])] += loads.at(x, y, z);
            }
    double total = 0.0;
    for (double s : slab) total += s;

    double left = 0.0;
    for (int k = 1; k < ext; ++k) {
        left += slab[static_cast<std::size_t>(k - 1)];
        if (k * cross < n_left || (ext - k) * cross < n_right) continue;
        const double right = total - left;
        const double score = std::max(left / n_left, right / n_right);
        if (!best.feasible || score < best.score) {
            best.feasible = true;
            best.split = box.lo[axis] + k;
            best.score = score;
        }
    }
    return best;
}

namespace detail {

inline int build_kd(PartitionTree& t, const CellLoadField& loads, const CellBox& box, int workers, int axis,
                    bool allow_axis_skip, int& next_worker) {
    if (box.count() < workers)
        throw PartitionError("partition infeasible: region of " + std::to_string(box.count()) +
                             " cells cannot host " + std::to_string(workers) + " workers");
    if (workers == 1) return add_leaf(t, box, next_worker);

    const int nl = workers / 2;
    const int nr = workers - nl;
    int used_axis = axis;
    SplitChoice choice = best_split(loads, box, axis, nl, nr);
    if (!choice.feasible && allow_axis_skip) {
        for (int k = 1; k < 3 && !choice.feasible; ++k) {
            used_axis = (axis + k) % 3;
            choice = best_split(loads, box, used_axis, nl, nr);
        }
    }
    if (!choice.feasible)
        throw PartitionError("partition infeasible: no admissible plane normal to axis " +
                             std::string(1, "xyz"[axis]) + " for " + std::to_string(workers) + " workers");

    const int idx = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    CellBox lb = box, rb = box;
    lb.hi[used_axis] = choice.split;
    rb.lo[used_axis] = choice.split;
    const int next_axis = (used_axis + 1) % 3;
    const int left = build_kd(t, loads, lb, nl, next_axis, allow_axis_skip, next_worker);
    const int right = build_kd(t, loads, rb, nr, next_axis, allow_axis_skip, next_worker);
    auto& n = t.nodes[static_cast<std::size_t>(idx)];
    n.box = box;
    n.axis = used_axis;
    n.split = choice.split;
    n.workers = workers;
    n.workers_left = nl;
    n.workers_right = nr;
    n.left = left;
    n.right = right;
    return idx;
}

}  // namespace detail

/// Recursive bisection with planes normal to x, y, z, x, ... starting at
/// axis0. Each level splits the worker count into floor/ceil halves and
/// picks the plane minimising the larger per-worker load of the two sides.
/// With allow_axis_skip (off by default) a level whose axis admits no plane
/// falls through to the next axis instead of failing.
inline PartitionTree kd_partition(const CellLoadField& loads, int workers, int axis0 = 0,
                                  bool allow_axis_skip = false) {
    if (workers < 1) throw PartitionError("worker count must be at least 1");
    if (axis0 < 0 || axis0 > 2) throw PartitionError("axis0 must be 0, 1 or 2");
    for (double c : loads.cost)
        if (!(c >= 0.0) || !std::isfinite(c)) throw PartitionError("cell loads must be finite and >= 0");
    PartitionTree t;
    t.dims = loads.dims;
    t.axis0 = axis0;
    int next = 0;
    detail::build_kd(t, loads, detail::full_box(loads.dims), workers, axis0, allow_axis_skip, next);
    return t;
}

struct ImbalanceReport {
    std::vector<double> load;  // per worker
    double max_load = 0.0;
    double mean_load = 0.0;
    double imbalance = 1.0;  // max / mean, 1 when nothing is loaded
};

inline ImbalanceReport measure_imbalance(const PartitionTree& tree, const CellLoadField& loads) {
    ImbalanceReport r;
    const auto boxes = tree.leaves();
    r.load.reserve(boxes.size());
    double total = 0.0;
    for (const auto& b : boxes) {
        r.load.push_back(loads.sum(b));
        total += r.load.back();
        r.max_load = std::max(r.max_load, r.load.back());
    }
    r.mean_load = boxes.empty() ? 0.0 : total / static_cast<double>(boxes.size());
    r.imbalance = r.mean_load > 0.0 ? r.max_load / r.mean_load : 1.0;
    return r;
}

inline bool should_rebalance(std::int64_t step, std::int64_t interval, double last_imbalance, double threshold) {
    if (interval < 1) throw ConfigError("rebalance interval must be >= 1", "rebalance_interval");
    return step % interval == 0 || last_imbalance > threshold;
}

}  // namespace ljcell
