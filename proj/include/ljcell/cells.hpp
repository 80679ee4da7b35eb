#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"

namespace ljcell {

struct CellIndex {
    int x = 0, y = 0, z = 0;

    constexpr int& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
    constexpr int operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
    constexpr bool operator==(const CellIndex&) const = default;
};

/// Half-open cuboid of global cell indices [lo, hi).
struct CellBox {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};

    int extent(int a) const { return hi[a] - lo[a]; }
    std::int64_t count() const {
        return static_cast<std::int64_t>(extent(0)) * extent(1) * extent(2);
    }
    bool empty() const { return extent(0) <= 0 || extent(1) <= 0 || extent(2) <= 0; }
    bool contains(const CellIndex& c) const {
        for (int a = 0; a < 3; ++a)
            if (c[a] < lo[a] || c[a] >= hi[a]) return false;
        return true;
    }
    bool operator==(const CellBox&) const = default;
};

/// Global cell counts per axis for a domain: floor(L / cutoff), at least 3.
inline std::array<int, 3> cell_counts_for(const Domain& d, double cutoff) {
    std::array<int, 3> n{};
    for (int a = 0; a < 3; ++a) {
        n[a] = static_cast<int>(std::floor(d.lengths[a] / cutoff));
        if (n[a] < 3)
            throw ConfigError("domain too small: axis " + std::string(1, "xyz"[a]) + " has length " +
                                  std::to_string(d.lengths[a]) + " < 3 * cutoff",
                              "lengths");
    }
    return n;
}

/// How neighbour cells across the owned box boundary are resolved.
enum class HaloMode {
    /// Periodic neighbours fold back onto owned cells with an image shift;
    /// requires ownership of every periodic axis in full (serial use).
    wrap,
    /// A one-cell halo layer is filled from outside (exchange_halos).
    exchange,
};

/// Linked-cell structure over one worker's cuboid of the global cell grid,
/// plus a one-cell halo. Molecules are stored by value inside their cells
/// and kept sorted by id, so traversal order depends only on the state.
class CellGrid {
public:
    struct HaloCell {
        std::size_t local = 0;
        CellIndex image;       // unwrapped global index, may be -1 or n on periodic axes
        bool in_domain = true;  // false beyond a non-periodic face
    };

    CellGrid() = default;

    CellGrid(const Domain& domain, double cutoff, const CellBox& owned, HaloMode mode)
        : domain_(domain), cutoff_(cutoff), cutoff2_(cutoff * cutoff), box_(owned), mode_(mode) {
        counts_ = cell_counts_for(domain, cutoff);
        for (int a = 0; a < 3; ++a) {
            lengths_[a] = domain.lengths[a] / counts_[a];
            inv_lengths_[a] = counts_[a] / domain.lengths[a];
            if (box_.lo[a] < 0 || box_.hi[a] > counts_[a] || box_.extent(a) < 1)
                throw PartitionError("owned cell box outside the global grid");
            if (mode_ == HaloMode::wrap && domain.periodic[a] &&
                (box_.lo[a] != 0 || box_.hi[a] != counts_[a]))
                throw PartitionError("wrap halo mode needs the full extent of every periodic axis");
            dims_[a] = box_.extent(a) + 2;
        }
        cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
        build_tables();
    }

    /// Grid covering the whole domain with periodic wrap-around.
    static CellGrid global(const Domain& domain, double cutoff) {
        const auto n = cell_counts_for(domain, cutoff);
        return CellGrid(domain, cutoff, CellBox{{0, 0, 0}, {n[0], n[1], n[2]}}, HaloMode::wrap);
    }

    const std::array<int, 3>& counts() const { return counts_; }
    const Vec3& cell_lengths() const { return lengths_; }
    const CellBox& owned_box() const { return box_; }
    const Domain& domain() const { return domain_; }
    double cutoff() const { return cutoff_; }
    HaloMode mode() const { return mode_; }
    std::int64_t global_cell_count() const {
        return static_cast<std::int64_t>(counts_[0]) * counts_[1] * counts_[2];
    }

    /// Global cell of a position: floor(p / cell_length), with a position on
    /// the upper domain face clamped into the last cell.
    CellIndex cell_of(const Vec3& p) const {
        CellIndex c;
        for (int a = 0; a < 3; ++a) {
            int i = static_cast<int>(std::floor(p[a] * inv_lengths_[a]));
            if (i == counts_[a] && p[a] <= domain_.lengths[a]) i = counts_[a] - 1;
            c[a] = i;
        }
        return c;
    }

    std::int64_t global_linear(const CellIndex& c) const {
        return (static_cast<std::int64_t>(c.z) * counts_[1] + c.y) * counts_[0] + c.x;
    }

    CellIndex global_from_linear(std::int64_t g) const {
        CellIndex c;
        c.x = static_cast<int>(g % counts_[0]);
        g /= counts_[0];
        c.y = static_cast<int>(g % counts_[1]);
        c.z = static_cast<int>(g / counts_[1]);
        return c;
    }

    /// Replace the owned contents with `molecules`.
    void assign(std::vector<Molecule> molecules) {
        for (std::size_t c : owned_) cells_[c].clear();
        for (auto& m : molecules) insert_owned(std::move(m));
        for (std::size_t c : owned_) sort_cell(cells_[c]);
    }

    /// Adds one molecule to its owned cell (cell left unsorted; call
    /// sort_owned() after a batch).
    void insert_owned(Molecule m) {
        const CellIndex g = cell_of(m.r);
        if (!box_.contains(g))
            throw OwnershipError("molecule " + std::to_string(m.id) + " at (" + std::to_string(m.r.x) +
                                 ", " + std::to_string(m.r.y) + ", " + std::to_string(m.r.z) +
                                 ") lies outside the owned region");
        cells_[local_of(g)].push_back(std::move(m));
    }

    void sort_owned() {
        for (std::size_t c : owned_) sort_cell(cells_[c]);
    }

    /// Incremental update after positions changed: molecules that moved to
    /// another owned cell are relocated, those that left the owned box are
    /// removed and returned.
    std::vector<Molecule> reassign() {
        std::vector<Molecule> leaving;
        std::vector<Molecule> moved;
        for (std::size_t c : owned_) {
            auto& cell = cells_[c];
            std::size_t keep = 0;
            for (std::size_t k = 0; k < cell.size(); ++k) {
                const CellIndex g = cell_of(cell[k].r);
                const bool stays = box_.contains(g) && local_of(g) == c;
                if (stays) {
                    if (keep != k) cell[keep] = std::move(cell[k]);
                    ++keep;
                } else if (box_.contains(g)) {
                    moved.push_back(std::move(cell[k]));
                } else {
                    leaving.push_back(std::move(cell[k]));
                }
            }
            cell.resize(keep);
        }
        for (auto& m : moved) cells_[local_of(cell_of(m.r))].push_back(std::move(m));
        if (!moved.empty()) sort_owned();
        return leaving;
    }

    /// Move every owned molecule out of the grid, in traversal order.
    std::vector<Molecule> extract_owned() {
        std::vector<Molecule> out;
        out.reserve(owned_count());
        for (std::size_t c : owned_) {
            for (auto& m : cells_[c]) out.push_back(std::move(m));
            cells_[c].clear();
        }
        return out;
    }

    std::size_t owned_count() const {
        std::size_t n = 0;
        for (std::size_t c : owned_) n += cells_[c].size();
        return n;
    }

    /// Molecule counts of the owned cells in box order (x fastest).
    std::vector<std::uint32_t> occupancy() const {
        std::vector<std::uint32_t> occ;
        occ.reserve(owned_.size());
        for (std::size_t c : owned_) occ.push_back(static_cast<std::uint32_t>(cells_[c].size()));
        return occ;
    }

    template <class Fn>
    void for_each_owned(Fn&& fn) {
        for (std::size_t c : owned_)
            for (auto& m : cells_[c]) fn(m);
    }
    template <class Fn>
    void for_each_owned(Fn&& fn) const {
        for (std::size_t c : owned_)
            for (const auto& m : cells_[c]) fn(m);
    }

    /// Owned cells in box order, as (global index, molecules).
    template <class Fn>
    void for_each_owned_cell(Fn&& fn) const {
        for (std::size_t c : owned_) fn(global_of_local(c), std::span<const Molecule>(cells_[c]));
    }

    std::span<const Molecule> cell(const CellIndex& global) const {
        return cells_[local_of(global)];
    }

    const std::vector<HaloCell>& halo_cells() const { return halo_; }

    void clear_halo() {
        for (const auto& h : halo_) cells_[h.local].clear();
    }

    /// Fill the halo cell that images global cell `image` (unwrapped index).
    void insert_halo(const CellIndex& image, std::span<const Molecule> copies) {
        CellIndex local;
        for (int a = 0; a < 3; ++a) {
            local[a] = image[a] - box_.lo[a] + 1;
            if (local[a] < 0 || local[a] >= dims_[a])
                throw OwnershipError("halo image cell outside this worker's halo layer");
        }
        const std::size_t idx = linear(local);
        if (is_owned_local(local)) throw OwnershipError("halo copy addressed to an owned cell");
        auto& cell = cells_[idx];
        for (const auto& m : copies) {
            cell.push_back(m);
            cell.back().f = Vec3{};
        }
    }

    std::size_t halo_count() const {
        std::size_t n = 0;
        for (const auto& h : halo_) n += cells_[h.local].size();
        return n;
    }

    /// Visits every interacting pair (distance < cutoff) reachable from the
    /// owned cells: each owned-owned pair once (same cell, or one of the 13
    /// forward neighbour cells) and each owned-halo pair once from the owned
    /// side. visit(a, b, dr, r2, b_is_halo) gets dr = r_a - r_b with the
    /// periodic image applied.
    template <class Visit>
    void for_each_pair(Visit&& visit) {
        for (std::size_t oc = 0; oc < owned_.size(); ++oc) {
            auto& ci = cells_[owned_[oc]];
            const std::size_t ni = ci.size();
            for (std::size_t p = 0; p < ni; ++p) {
                for (std::size_t q = p + 1; q < ni; ++q) {
                    const Vec3 dr = ci[p].r - ci[q].r;
                    const double r2 = norm2(dr);
                    if (r2 < cutoff2_) visit(ci[p], ci[q], dr, r2, false);
                }
            }
            for (const auto& nb : neighbors_[oc]) {
                auto& cj = cells_[nb.cell];
                for (auto& a : ci) {
                    for (auto& b : cj) {
                        const Vec3 dr = (a.r - b.r) - nb.shift;
                        const double r2 = norm2(dr);
                        if (r2 < cutoff2_) visit(a, b, dr, r2, nb.halo);
                    }
                }
            }
        }
    }

    /// Visits every stored molecule within the cutoff of position p, where
    /// p belongs to global cell c. Molecules in c itself are included, so
    /// the caller filters the probe molecule out by id. visit(m, dr, r2)
    /// with dr = p - r_m. Wrap mode only.
    template <class Visit>
    void for_each_neighbor_of(const Vec3& p, const CellIndex& c, Visit&& visit) const {
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    CellIndex g{c.x + dx, c.y + dy, c.z + dz};
                    Vec3 shift{};
                    bool inside = true;
                    for (int a = 0; a < 3 && inside; ++a) {
                        if (g[a] < 0 || g[a] >= counts_[a]) {
                            if (!domain_.periodic[a] || mode_ != HaloMode::wrap) {
                                inside = false;
                            } else if (g[a] < 0) {
                                g[a] += counts_[a];
                                shift[a] = -domain_.lengths[a];
                            } else {
                                g[a] -= counts_[a];
                                shift[a] = domain_.lengths[a];
                            }
                        }
                    }
                    if (!inside || !box_.contains(g)) continue;
                    for (const auto& m : cells_[local_of(g)]) {
                        const Vec3 dr = (p - m.r) - shift;
                        const double r2 = norm2(dr);
                        if (r2 < cutoff2_) visit(m, dr, r2);
                    }
                }
    }

    /// Moves molecule `id` (currently in owned cell `from`) to position r.
    /// Returns the new global cell.
    CellIndex update_position(std::int64_t id, const CellIndex& from, const Vec3& r) {
        auto& src = cells_[local_of(from)];
        auto it = std::find_if(src.begin(), src.end(), [id](const Molecule& m) { return m.id == id; });
        if (it == src.end()) throw OwnershipError("molecule " + std::to_string(id) + " not in its cell");
        const CellIndex to = cell_of(r);
        if (!box_.contains(to)) throw OwnershipError("position outside the owned region");
        it->r = r;
        if (to == from) return to;
        Molecule m = *it;
        src.erase(it);
        auto& dst = cells_[local_of(to)];
        dst.insert(std::upper_bound(dst.begin(), dst.end(), m,
                                    [](const Molecule& a, const Molecule& b) { return a.id < b.id; }),
                   m);
        return to;
    }

private:
    struct NeighborRef {
        std::size_t cell = 0;
        Vec3 shift;
        bool halo = false;
    };

    std::size_t linear(const CellIndex& local) const {
        return (static_cast<std::size_t>(local.z) * dims_[1] + local.y) * dims_[0] + local.x;
    }
    std::size_t local_of(const CellIndex& global) const {
        return linear({global.x - box_.lo[0] + 1, global.y - box_.lo[1] + 1, global.z - box_.lo[2] + 1});
    }
    CellIndex global_of_local(std::size_t idx) const {
        CellIndex l;
        l.x = static_cast<int>(idx % dims_[0]);
        idx /= dims_[0];
        l.y = static_cast<int>(idx % dims_[1]);
        l.z = static_cast<int>(idx / dims_[1]);
        return {l.x + box_.lo[0] - 1, l.y + box_.lo[1] - 1, l.z + box_.lo[2] - 1};
    }
    bool is_owned_local(const CellIndex& l) const {
        for (int a = 0; a < 3; ++a)
            if (l[a] < 1 || l[a] > dims_[a] - 2) return false;
        return true;
    }

    static void sort_cell(std::vector<Molecule>& cell) {
        std::sort(cell.begin(), cell.end(), [](const Molecule& a, const Molecule& b) { return a.id < b.id; });
    }

    void build_tables() {
        owned_.clear();
        halo_.clear();
        neighbors_.clear();
        for (int k = 0; k < dims_[2]; ++k)
            for (int j = 0; j < dims_[1]; ++j)
                for (int i = 0; i < dims_[0]; ++i) {
                    const CellIndex l{i, j, k};
                    if (is_owned_local(l)) {
                        owned_.push_back(linear(l));
                        continue;
                    }
                    HaloCell h;
                    h.local = linear(l);
                    for (int a = 0; a < 3; ++a) {
                        h.image[a] = l[a] + box_.lo[a] - 1;
                        if ((h.image[a] < 0 || h.image[a] >= counts_[a]) &&
                            (!domain_.periodic[a] || mode_ == HaloMode::wrap))
                            h.in_domain = false;
                    }
                    // in wrap mode periodic axes never need halo cells
                    if (mode_ == HaloMode::wrap) h.in_domain = false;
                    halo_.push_back(h);
                }

        neighbors_.resize(owned_.size());
        for (std::size_t oc = 0; oc < owned_.size(); ++oc) {
            const std::size_t idx = owned_[oc];
            const CellIndex l{static_cast<int>(idx % dims_[0]),
                              static_cast<int>((idx / dims_[0]) % dims_[1]),
                              static_cast<int>(idx / (static_cast<std::size_t>(dims_[0]) * dims_[1]))};
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0 && dz == 0) continue;
                        const bool forward = dz > 0 || (dz == 0 && dy > 0) || (dz == 0 && dy == 0 && dx > 0);
                        const int d[3] = {dx, dy, dz};
                        CellIndex n;
                        Vec3 shift{};
                        bool skip = false;
                        for (int a = 0; a < 3; ++a) {
                            n[a] = l[a] + d[a];
                            const int g = n[a] + box_.lo[a] - 1;
                            if (g >= 0 && g < counts_[a]) continue;
                            if (!domain_.periodic[a]) {
                                skip = true;
                            } else if (mode_ == HaloMode::wrap) {
                                // full axis owned: fold back with an image shift
                                if (g < 0) {
                                    n[a] += counts_[a];
                                    shift[a] = -domain_.lengths[a];
                                } else {
                                    n[a] -= counts_[a];
                                    shift[a] = domain_.lengths[a];
                                }
                            }
                        }
                        if (skip) continue;
                        if (is_owned_local(n)) {
                            if (forward) neighbors_[oc].push_back({linear(n), shift, false});
                        } else {
                            neighbors_[oc].push_back({linear(n), Vec3{}, true});
                        }
                    }
        }
    }

    Domain domain_;
    double cutoff_ = 0.0;
    double cutoff2_ = 0.0;
    CellBox box_;
    HaloMode mode_ = HaloMode::wrap;
    std::array<int, 3> counts_{};
    std::array<int, 3> dims_{};
    Vec3 lengths_;
    Vec3 inv_lengths_;
    std::vector<std::vector<Molecule>> cells_;
    std::vector<std::size_t> owned_;
    std::vector<HaloCell> halo_;
    std::vector<std::vector<NeighborRef>> neighbors_;
};

/// Global-grid build with the whole domain owned.
inline CellGrid build_grid(const Domain& domain, double cutoff) { return CellGrid::global(domain, cutoff); }

inline CellGrid build_grid(const Domain& domain, double cutoff, const CellBox& owned, HaloMode mode) {
    return CellGrid(domain, cutoff, owned, mode);
}

}  // namespace ljcell
