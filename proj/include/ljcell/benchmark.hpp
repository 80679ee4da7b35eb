#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ljcell {

inline constexpr double kCondensedDensity = 0.5;

inline bool condensed_check(double density) { return density >= kCondensedDensity; }

/// min(log10(N)/3, log10(steps per day) - 4), or nullopt when the system
/// is not condensed.
inline std::optional<double> ell_exponent(std::int64_t n, std::int64_t steps_completed, double wall_seconds,
                                          bool condensed) {
    if (n < 1) throw std::domain_error("ell exponent needs N >= 1");
    if (steps_completed <= 0) throw std::domain_error("ell exponent undefined for zero steps");
    if (!(wall_seconds > 0)) throw std::domain_error("ell exponent needs a positive wall time");
    if (!condensed) return std::nullopt;
    const double per_day = static_cast<double>(steps_completed) * 86400.0 / wall_seconds;
    return std::min(std::log10(static_cast<double>(n)) / 3.0, std::log10(per_day) - 4.0);
}

/// Same, from a steps-per-day rate.
inline std::optional<double> ell_exponent_per_day(std::int64_t n, double steps_per_day, bool condensed) {
    return ell_exponent(n, 1, 86400.0 / steps_per_day, condensed);
}

struct BenchRecord {
    std::string decomposition = "kd";
    std::int64_t N = 0;
    std::int64_t steps_completed = 0;
    double wall_seconds = 0.0;
    int workers = 1;
    double steps_per_second = 0.0;
    double speedup = 1.0;
    double imbalance = 1.0;
    std::optional<double> ell;
    bool condensed = false;
};

inline BenchRecord make_bench_record(std::int64_t n, std::int64_t steps, double wall_seconds, int workers,
                                     double densest_region) {
    BenchRecord b;
    b.N = n;
    b.steps_completed = steps;
    b.wall_seconds = wall_seconds;
    b.workers = workers;
    b.steps_per_second = wall_seconds > 0 ? static_cast<double>(steps) / wall_seconds : 0.0;
    b.condensed = condensed_check(densest_region);
    if (steps > 0 && wall_seconds > 0) b.ell = ell_exponent(n, steps, wall_seconds, b.condensed);
    return b;
}

/// Speedup relative to the single-worker record of the same decomposition.
inline void assign_speedups(std::vector<BenchRecord>& records) {
    for (auto& r : records) {
        const auto base = std::find_if(records.begin(), records.end(), [&](const BenchRecord& b) {
            return b.workers == 1 && b.decomposition == r.decomposition;
        });
        if (r.workers == 1) r.speedup = 1.0;
        else if (base != records.end() && base->steps_per_second > 0) r.speedup = r.steps_per_second / base->steps_per_second;
    }
}

}  // namespace ljcell
