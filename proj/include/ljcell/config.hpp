#pragma once
#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "dynamics.hpp"

// Run configuration and its INI representation.
//
//   [domain]            lengths, periodic, reflecting, cutoff, homogeneous,
//                       wall_epsilon, wall_sigma, wall_cutoff
//   [species.<name>]    sigma, epsilon, mass            (file order = index)
//   [mix.<a>.<b>]       xi, eta
//   [scenario]          kind, species, fractions, density, temperature,
//                       liquid_density, vapor_density, radius, cap_height
//   [schedule]          method, steps, equilibration, timestep,
//                       thermostat_temperature, thermostat_interval,
//                       max_displacement, seed
//   [decomposition]     method, workers, rebalance_interval,
//                       rebalance_threshold
//   [output]            sample_interval, density_grid, density_bins,
//                       density_rmax, snapshot_interval
//
// `key = value` lines, `#` comments, case-sensitive keys. Lists are
// whitespace or comma separated.

namespace ljcell {

enum class ScenarioKind { bulk, droplet, sessile };
enum class Decomposition { uniform_grid, kd_tree };
enum class Method { md, mc };

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::bulk;
    std::vector<std::string> species;  // empty = first species only
    std::vector<double> fractions;
    double density = 0.8;  // bulk
    double temperature = 1.0;
    double liquid_density = 0.8;  // droplet / sessile
    double vapor_density = 0.01;
    double radius = 0.0;
    double cap_height = 1.0;  // sessile: z of the hemisphere's flat base

    bool operator==(const ScenarioSpec&) const = default;
};

struct ThermostatSpec {
    double target = 1.0;
    std::int64_t interval = 1;

    bool operator==(const ThermostatSpec&) const = default;
};

struct SamplingSpec {
    std::int64_t sample_interval = 1;
    std::optional<DensityGridSpec> density;
    std::int64_t snapshot_interval = 0;  // 0 = no trajectory frames

    bool operator==(const SamplingSpec&) const = default;
};

struct RunConfig {
    Domain domain;
    SpeciesTable species_table;
    double cutoff = 2.5;
    bool homogeneous = false;  // enables the long-range correction
    Method method = Method::md;
    double timestep = 0.002;
    std::int64_t steps = 0;
    std::int64_t equilibration = 0;
    std::optional<ThermostatSpec> thermostat;
    double max_displacement = 0.1;
    Decomposition decomposition = Decomposition::kd_tree;
    int workers = 1;
    std::int64_t rebalance_interval = 1000;
    double rebalance_threshold = 1.5;
    std::uint64_t seed = 1;
    ScenarioSpec scenario;
    SamplingSpec sampling;

    ForceField force_field() const { return ForceField(species_table, cutoff, domain.wall, homogeneous); }

    void validate() const {
        domain.validate();
        if (species_table.size() == 0) throw ConfigError("at least one [species.<name>] section is required", "species");
        if (!(cutoff > 0)) throw ConfigError("cutoff must be positive", "cutoff");
        const double lmin = std::min({domain.lengths.x, domain.lengths.y, domain.lengths.z});
        if (cutoff > lmin / 3.0) throw ConfigError("cutoff must not exceed min(domain length)/3", "cutoff");
        if (!(timestep > 0)) throw ConfigError("timestep must be positive", "timestep");
        if (steps < 0) throw ConfigError("steps must be >= 0", "steps");
        if (equilibration < 0) throw ConfigError("equilibration must be >= 0", "equilibration");
        if (thermostat) {
            if (!(thermostat->target > 0)) throw ConfigError("thermostat temperature must be positive", "thermostat_temperature");
            if (thermostat->interval < 1) throw ConfigError("thermostat interval must be >= 1", "thermostat_interval");
        }
        if (!(max_displacement >= 0)) throw ConfigError("max_displacement must be >= 0", "max_displacement");
        if (workers < 1) throw ConfigError("workers must be >= 1", "workers");
        if (rebalance_interval < 1) throw ConfigError("rebalance_interval must be >= 1", "rebalance_interval");
        if (!(rebalance_threshold >= 1)) throw ConfigError("rebalance_threshold must be >= 1", "rebalance_threshold");
        if (sampling.sample_interval < 1) throw ConfigError("sample_interval must be >= 1", "sample_interval");
        if (sampling.snapshot_interval < 0) throw ConfigError("snapshot_interval must be >= 0", "snapshot_interval");
        if (sampling.density) DensityGrid check(*sampling.density, domain);

        const auto& s = scenario;
        if (!(s.temperature > 0)) throw ConfigError("scenario temperature must be positive", "temperature");
        for (const auto& name : s.species)
            if (!species_table.index_of(name)) throw ConfigError("unknown species '" + name + "'", "species");
        if (!s.fractions.empty()) {
            if (s.fractions.size() != s.species.size())
                throw ConfigError("one fraction per scenario species is required", "fractions");
            double sum = 0.0;
            for (double f : s.fractions) {
                if (!(f >= 0)) throw ConfigError("fractions must be >= 0", "fractions");
                sum += f;
            }
            if (!(sum > 0)) throw ConfigError("fractions must not all be zero", "fractions");
        }
        if (s.kind == ScenarioKind::bulk) {
            if (!(s.density > 0)) throw ConfigError("density must be positive", "density");
        } else {
            if (!(s.liquid_density > 0)) throw ConfigError("liquid_density must be positive", "liquid_density");
            if (!(s.vapor_density > 0)) throw ConfigError("vapor_density must be positive", "vapor_density");
            if (!(s.radius >= 0)) throw ConfigError("radius must be >= 0", "radius");
            if (s.radius > 0 && !(s.radius < lmin / 2.0 - cutoff))
                throw ConfigError("droplet radius must be below min(L)/2 - cutoff", "radius");
            if (homogeneous)
                throw ConfigError("long-range correction requested for an interfacial scenario", "homogeneous");
        }
        if (s.kind == ScenarioKind::sessile) {
            if (!domain.wall) throw ConfigError("sessile scenario requires a wall (wall_epsilon)", "kind");
            if (!(s.cap_height > 0)) throw ConfigError("cap_height must be positive", "cap_height");
        }
    }

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::string fmt_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

struct Entry {
    std::string value;
    int line = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<std::pair<std::string, Entry>> entries;
};

class SectionReader {
public:
    explicit SectionReader(const Section& s) : s_(s) {}

    const Entry* find(const std::string& key) {
        for (const auto& [k, e] : s_.entries)
            if (k == key) {
                used_.push_back(k);
                return &e;
            }
        return nullptr;
    }

    double number(const std::string& key, double fallback) {
        const Entry* e = find(key);
        return e ? parse_double(key, *e) : fallback;
    }
    std::optional<double> maybe_number(const std::string& key) {
        const Entry* e = find(key);
        if (!e) return std::nullopt;
        return parse_double(key, *e);
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const Entry* e = find(key);
        return e ? parse_int(key, *e) : fallback;
    }
    std::string text(const std::string& key, const std::string& fallback) {
        const Entry* e = find(key);
        return e ? e->value : fallback;
    }
    std::vector<double> numbers(const std::string& key) {
        const Entry* e = find(key);
        std::vector<double> out;
        if (!e) return out;
        for (const auto& t : split_list(e->value)) out.push_back(parse_double(key, Entry{t, e->line}));
        return out;
    }
    std::vector<bool> flags(const std::string& key) {
        const Entry* e = find(key);
        std::vector<bool> out;
        if (!e) return out;
        for (const auto& t : split_list(e->value)) out.push_back(parse_bool(key, Entry{t, e->line}));
        return out;
    }
    std::optional<bool> flag(const std::string& key) {
        const Entry* e = find(key);
        if (!e) return std::nullopt;
        return parse_bool(key, *e);
    }

    /// Any key not consumed by the section handler is an error.
    void finish() const {
        for (const auto& [k, e] : s_.entries)
            if (std::find(used_.begin(), used_.end(), k) == used_.end())
                throw ConfigError("unknown key '" + k + "' in [" + s_.name + "] at line " + std::to_string(e.line),
                                  k, e.line);
    }

    static double parse_double(const std::string& key, const Entry& e) {
        double x = 0.0;
        const char* b = e.value.data();
        const char* end = b + e.value.size();
        auto res = std::from_chars(b, end, x);
        if (res.ec != std::errc() || res.ptr != end)
            throw ConfigError("key '" + key + "' at line " + std::to_string(e.line) + ": expected a number, got '" +
                                  e.value + "'",
                              key, e.line);
        return x;
    }
    static std::int64_t parse_int(const std::string& key, const Entry& e) {
        std::int64_t x = 0;
        const char* b = e.value.data();
        const char* end = b + e.value.size();
        auto res = std::from_chars(b, end, x);
        if (res.ec != std::errc() || res.ptr != end)
            throw ConfigError("key '" + key + "' at line " + std::to_string(e.line) + ": expected an integer, got '" +
                                  e.value + "'",
                              key, e.line);
        return x;
    }
    static bool parse_bool(const std::string& key, const Entry& e) {
        const std::string& v = e.value;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("key '" + key + "' at line " + std::to_string(e.line) + ": expected a boolean, got '" + v + "'",
                          key, e.line);
    }

private:
    const Section& s_;
    std::vector<std::string> used_;
};

inline std::vector<Section> tokenize(std::string_view text) {
    std::vector<Section> sections;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("malformed section header at line " + std::to_string(line_no), line, line_no);
            const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
            for (const auto& s : sections)
                if (s.name == name)
                    throw ConfigError("duplicate section [" + name + "] at line " + std::to_string(line_no), name, line_no);
            sections.push_back(Section{name, line_no, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value' at line " + std::to_string(line_no), line, line_no);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (sections.empty())
            throw ConfigError("key '" + key + "' at line " + std::to_string(line_no) + " appears before any section", key,
                              line_no);
        auto& entries = sections.back().entries;
        for (const auto& [k, e] : entries)
            if (k == key)
                throw ConfigError("duplicate key '" + key + "' at line " + std::to_string(line_no), key, line_no);
        entries.push_back({key, Entry{value, line_no}});
    }
    return sections;
}

inline std::array<bool, 3> three_flags(SectionReader& r, const std::string& key, std::array<bool, 3> fallback, int line) {
    auto f = r.flags(key);
    if (f.empty()) return fallback;
    if (f.size() != 3) throw ConfigError("key '" + key + "' needs three booleans", key, line);
    return {f[0], f[1], f[2]};
}

}  // namespace detail

inline RunConfig parse_config(std::string_view text) {
    using detail::SectionReader;
    const auto sections = detail::tokenize(text);
    std::map<std::string, int> key_lines;
    for (const auto& s : sections)
        for (const auto& [k, e] : s.entries) key_lines.emplace(k, e.line);
    auto line_of = [&](const std::string& key) {
        auto it = key_lines.find(key);
        return it == key_lines.end() ? 0 : it->second;
    };

    RunConfig c;
    std::vector<Species> species;
    struct MixEntry {
        std::string a, b;
        double xi, eta;
        int line;
    };
    std::vector<MixEntry> mixes;
    std::optional<double> wall_eps, wall_sigma, wall_cut;
    std::optional<double> thermo_t;
    std::int64_t thermo_interval = 1;
    bool thermo_interval_set = false;

    for (const auto& sec : sections) {
        SectionReader r(sec);
        if (sec.name == "domain") {
            auto len = r.numbers("lengths");
            if (len.size() == 1) len = {len[0], len[0], len[0]};
            if (len.size() != 3) throw ConfigError("key 'lengths' needs one or three numbers", "lengths", line_of("lengths"));
            c.domain.lengths = {len[0], len[1], len[2]};
            c.domain.periodic = detail::three_flags(r, "periodic", {true, true, true}, line_of("periodic"));
            c.domain.reflecting = detail::three_flags(r, "reflecting", {false, false, false}, line_of("reflecting"));
            c.cutoff = r.number("cutoff", c.cutoff);
            c.homogeneous = r.flag("homogeneous").value_or(false);
            wall_eps = r.maybe_number("wall_epsilon");
            wall_sigma = r.maybe_number("wall_sigma");
            wall_cut = r.maybe_number("wall_cutoff");
        } else if (sec.name.rfind("species.", 0) == 0) {
            Species s;
            s.name = sec.name.substr(8);
            if (s.name.empty()) throw ConfigError("species section needs a name", sec.name, sec.line);
            s.sigma = r.number("sigma", 1.0);
            s.epsilon = r.number("epsilon", 1.0);
            s.mass = r.number("mass", 1.0);
            species.push_back(s);
        } else if (sec.name.rfind("mix.", 0) == 0) {
            const auto rest = sec.name.substr(4);
            const auto dot = rest.find('.');
            if (dot == std::string::npos || dot == 0 || dot + 1 == rest.size())
                throw ConfigError("mix section must be [mix.<a>.<b>]", sec.name, sec.line);
            mixes.push_back({rest.substr(0, dot), rest.substr(dot + 1), r.number("xi", 1.0), r.number("eta", 1.0), sec.line});
        } else if (sec.name == "scenario") {
            const auto kind = r.text("kind", "bulk");
            if (kind == "bulk") c.scenario.kind = ScenarioKind::bulk;
            else if (kind == "droplet") c.scenario.kind = ScenarioKind::droplet;
            else if (kind == "sessile") c.scenario.kind = ScenarioKind::sessile;
            else throw ConfigError("unknown scenario kind '" + kind + "'", "kind", line_of("kind"));
            if (const auto* e = r.find("species")) c.scenario.species = detail::split_list(e->value);
            c.scenario.fractions = r.numbers("fractions");
            c.scenario.density = r.number("density", c.scenario.density);
            c.scenario.temperature = r.number("temperature", c.scenario.temperature);
            c.scenario.liquid_density = r.number("liquid_density", c.scenario.liquid_density);
            c.scenario.vapor_density = r.number("vapor_density", c.scenario.vapor_density);
            c.scenario.radius = r.number("radius", c.scenario.radius);
            c.scenario.cap_height = r.number("cap_height", c.scenario.cap_height);
        } else if (sec.name == "schedule") {
            const auto method = r.text("method", "md");
            if (method == "md") c.method = Method::md;
            else if (method == "mc") c.method = Method::mc;
            else throw ConfigError("unknown schedule method '" + method + "'", "method", line_of("method"));
            c.steps = r.integer("steps", c.steps);
            c.equilibration = r.integer("equilibration", c.equilibration);
            c.timestep = r.number("timestep", c.timestep);
            thermo_t = r.maybe_number("thermostat_temperature");
            if (r.find("thermostat_interval")) {
                thermo_interval = r.integer("thermostat_interval", 1);
                thermo_interval_set = true;
            }
            c.max_displacement = r.number("max_displacement", c.max_displacement);
            if (const auto* e = r.find("seed")) {
                std::uint64_t seed = 0;
                auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), seed);
                if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
                    throw ConfigError("key 'seed' at line " + std::to_string(e->line) + ": expected an unsigned integer",
                                      "seed", e->line);
                c.seed = seed;
            }
        } else if (sec.name == "decomposition") {
            const auto m = r.text("method", "kd_tree");
            if (m == "kd_tree" || m == "kd") c.decomposition = Decomposition::kd_tree;
            else if (m == "uniform_grid" || m == "uniform") c.decomposition = Decomposition::uniform_grid;
            else throw ConfigError("unknown decomposition method '" + m + "'", "method", line_of("method"));
            c.workers = static_cast<int>(r.integer("workers", c.workers));
            c.rebalance_interval = r.integer("rebalance_interval", c.rebalance_interval);
            c.rebalance_threshold = r.number("rebalance_threshold", c.rebalance_threshold);
        } else if (sec.name == "output") {
            c.sampling.sample_interval = r.integer("sample_interval", c.sampling.sample_interval);
            c.sampling.snapshot_interval = r.integer("snapshot_interval", c.sampling.snapshot_interval);
            const auto grid = r.text("density_grid", "none");
            const auto bins = r.numbers("density_bins");
            const double rmax = r.number("density_rmax", 0.0);
            if (grid != "none") {
                DensityGridSpec g;
                if (grid == "z") g.geometry = DensityGeometry::z;
                else if (grid == "rz") g.geometry = DensityGeometry::rz;
                else if (grid == "xyz") g.geometry = DensityGeometry::xyz;
                else throw ConfigError("unknown density_grid '" + grid + "'", "density_grid", line_of("density_grid"));
                g.bins.clear();
                for (double b : bins) g.bins.push_back(static_cast<int>(b));
                if (g.bins.empty()) g.bins.assign(g.geometry == DensityGeometry::z ? 1 : (g.geometry == DensityGeometry::rz ? 2 : 3), 20);
                g.r_max = rmax;
                c.sampling.density = g;
            }
        } else {
            throw ConfigError("unknown section [" + sec.name + "] at line " + std::to_string(sec.line), sec.name, sec.line);
        }
        r.finish();
    }

    try {
        if (species.empty()) species.push_back(Species{"LJ", 1.0, 1.0, 1.0});
        c.species_table = SpeciesTable(species);
        for (const auto& m : mixes) {
            const auto a = c.species_table.index_of(m.a);
            const auto b = c.species_table.index_of(m.b);
            if (!a || !b)
                throw ConfigError("mix section references unknown species", "mix." + m.a + "." + m.b, m.line);
            c.species_table.set_binary(*a, *b, m.xi, m.eta);
        }
        if (wall_eps || wall_sigma || wall_cut) {
            WallSpec w;
            w.epsilon = wall_eps.value_or(1.0);
            w.sigma = wall_sigma.value_or(1.0);
            w.cutoff = wall_cut.value_or(2.5);
            c.domain.wall = w;
        }
        if (thermo_t) c.thermostat = ThermostatSpec{*thermo_t, thermo_interval};
        else if (thermo_interval_set)
            throw ConfigError("thermostat_interval given without thermostat_temperature", "thermostat_interval");
        c.validate();
    } catch (ConfigError& e) {
        if (e.line == 0 && !e.key.empty()) e.line = line_of(e.key);
        if (e.line == 0)
            for (const auto& s : sections)
                if (s.name == e.key) e.line = s.line;
        throw;
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text form; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const RunConfig& c) {
    using detail::fmt_double;
    std::ostringstream o;
    auto b = [](bool x) { return x ? "true" : "false"; };
    o << "[domain]\n";
    o << "lengths = " << fmt_double(c.domain.lengths.x) << ' ' << fmt_double(c.domain.lengths.y) << ' '
      << fmt_double(c.domain.lengths.z) << '\n';
    o << "periodic = " << b(c.domain.periodic[0]) << ' ' << b(c.domain.periodic[1]) << ' ' << b(c.domain.periodic[2]) << '\n';
    o << "reflecting = " << b(c.domain.reflecting[0]) << ' ' << b(c.domain.reflecting[1]) << ' '
      << b(c.domain.reflecting[2]) << '\n';
    o << "cutoff = " << fmt_double(c.cutoff) << '\n';
    o << "homogeneous = " << b(c.homogeneous) << '\n';
    if (c.domain.wall) {
        o << "wall_epsilon = " << fmt_double(c.domain.wall->epsilon) << '\n';
        o << "wall_sigma = " << fmt_double(c.domain.wall->sigma) << '\n';
        o << "wall_cutoff = " << fmt_double(c.domain.wall->cutoff) << '\n';
    }
    const auto& st = c.species_table;
    for (const auto& s : st.species()) {
        o << "\n[species." << s.name << "]\n";
        o << "sigma = " << fmt_double(s.sigma) << "\nepsilon = " << fmt_double(s.epsilon)
          << "\nmass = " << fmt_double(s.mass) << '\n';
    }
    for (std::size_t i = 0; i < st.size(); ++i)
        for (std::size_t j = i + 1; j < st.size(); ++j)
            if (st.xi(i, j) != 1.0 || st.eta(i, j) != 1.0)
                o << "\n[mix." << st[i].name << '.' << st[j].name << "]\nxi = " << fmt_double(st.xi(i, j))
                  << "\neta = " << fmt_double(st.eta(i, j)) << '\n';

    const auto& s = c.scenario;
    o << "\n[scenario]\n";
    o << "kind = " << (s.kind == ScenarioKind::bulk ? "bulk" : s.kind == ScenarioKind::droplet ? "droplet" : "sessile") << '\n';
    if (!s.species.empty()) {
        o << "species =";
        for (const auto& n : s.species) o << ' ' << n;
        o << '\n';
    }
    if (!s.fractions.empty()) {
        o << "fractions =";
        for (double f : s.fractions) o << ' ' << fmt_double(f);
        o << '\n';
    }
    o << "density = " << fmt_double(s.density) << '\n';
    o << "temperature = " << fmt_double(s.temperature) << '\n';
    o << "liquid_density = " << fmt_double(s.liquid_density) << '\n';
    o << "vapor_density = " << fmt_double(s.vapor_density) << '\n';
    o << "radius = " << fmt_double(s.radius) << '\n';
    o << "cap_height = " << fmt_double(s.cap_height) << '\n';

    o << "\n[schedule]\n";
    o << "method = " << (c.method == Method::md ? "md" : "mc") << '\n';
    o << "steps = " << c.steps << '\n';
    o << "equilibration = " << c.equilibration << '\n';
    o << "timestep = " << fmt_double(c.timestep) << '\n';
    if (c.thermostat) {
        o << "thermostat_temperature = " << fmt_double(c.thermostat->target) << '\n';
        o << "thermostat_interval = " << c.thermostat->interval << '\n';
    }
    o << "max_displacement = " << fmt_double(c.max_displacement) << '\n';
    o << "seed = " << c.seed << '\n';

    o << "\n[decomposition]\n";
    o << "method = " << (c.decomposition == Decomposition::kd_tree ? "kd_tree" : "uniform_grid") << '\n';
    o << "workers = " << c.workers << '\n';
    o << "rebalance_interval = " << c.rebalance_interval << '\n';
    o << "rebalance_threshold = " << fmt_double(c.rebalance_threshold) << '\n';

    o << "\n[output]\n";
    o << "sample_interval = " << c.sampling.sample_interval << '\n';
    o << "snapshot_interval = " << c.sampling.snapshot_interval << '\n';
    if (c.sampling.density) {
        const auto& g = *c.sampling.density;
        o << "density_grid = "
          << (g.geometry == DensityGeometry::z ? "z" : g.geometry == DensityGeometry::rz ? "rz" : "xyz") << '\n';
        o << "density_bins =";
        for (int n : g.bins) o << ' ' << n;
        o << '\n';
        o << "density_rmax = " << fmt_double(g.r_max) << '\n';
    } else {
        o << "density_grid = none\n";
    }
    return o.str();
}

}  // namespace ljcell
