#include "taxflow/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <system_error>

namespace taxflow {

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : "\n") + x;
    return s;
}

std::string_view trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

bool read_double(std::string_view s, double& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

template <class U>
bool read_unsigned(std::string_view s, U& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

struct Field {
    std::function<std::string(std::string_view)> set;  // empty string on success
    std::function<std::string()> get;
};

Field number(double& v) {
    return {[&v](std::string_view s) { return read_double(s, v) ? std::string() : "expected a number"; },
            [&v] { return format_double(v); }};
}

Field count(std::size_t& v) {
    return {[&v](std::string_view s) { return read_unsigned(s, v) ? std::string() : "expected a nonnegative integer"; },
            [&v] { return std::to_string(v); }};
}

Field seed(std::uint64_t& v) {
    return {[&v](std::string_view s) { return read_unsigned(s, v) ? std::string() : "expected an unsigned 64-bit integer"; },
            [&v] { return std::to_string(v); }};
}

Field flag(bool& v) {
    return {[&v](std::string_view s) {
                if (s == "true") v = true;
                else if (s == "false") v = false;
                else return std::string("expected true or false");
                return std::string();
            },
            [&v] { return std::string(v ? "true" : "false"); }};
}

Field text(std::string& v) {
    return {[&v](std::string_view s) {
                v = std::string(s);
                return std::string();
            },
            [&v] { return v; }};
}

Field numbers(std::vector<double>& v) {
    return {[&v](std::string_view s) {
                std::vector<double> out;
                while (!s.empty()) {
                    const auto c = s.find(',');
                    const auto item = trim(s.substr(0, c));
                    double x;
                    if (!read_double(item, x)) return std::string("expected a comma-separated list of numbers");
                    out.push_back(x);
                    s = c == std::string_view::npos ? std::string_view() : s.substr(c + 1);
                }
                v = std::move(out);
                return std::string();
            },
            [&v] {
                std::string s;
                for (double x : v) s += (s.empty() ? "" : ",") + format_double(x);
                return s;
            }};
}

std::map<std::string, Field> fields(ScenarioConfig& c) {
    return {
        {"grid.y_min", number(c.grid.y_min)},
        {"grid.y_max", number(c.grid.y_max)},
        {"grid.n", count(c.grid.n)},
        {"grid.sigma_taper", number(c.grid.sigma_taper)},
        {"skills.family", text(c.skills.family)},
        {"skills.log_mean", number(c.skills.log_mean)},
        {"skills.log_sd", number(c.skills.log_sd)},
        {"skills.theta_min", number(c.skills.theta_min)},
        {"skills.theta_max", number(c.skills.theta_max)},
        {"skills.taper", number(c.skills.taper)},
        {"skills.n", count(c.skills.n)},
        {"prefs.elasticity", number(c.prefs.elasticity)},
        {"agent.verify", flag(c.agent.verify)},
        {"agent.mesh", count(c.agent.mesh)},
        {"initial.family", text(c.initial.family)},
        {"initial.rate", number(c.initial.rate)},
        {"initial.curvature", number(c.initial.curvature)},
        {"initial.file", text(c.initial.file)},
        {"optimal.damping", number(c.optimal.damping)},
        {"optimal.tol", number(c.optimal.tol)},
        {"optimal.max_iter", count(c.optimal.max_iter)},
        {"optimal.retention_floor", number(c.optimal.retention_floor)},
        {"optimal.interior_quantile", number(c.optimal.interior_quantile)},
        {"optimal.initial_rate", number(c.optimal.initial_rate)},
        {"kernel.cfl", number(c.kernel.cfl)},
        {"kernel.startup_steps", count(c.kernel.startup_steps)},
        {"kernel.sources", numbers(c.kernel.sources)},
        {"kernel.times", numbers(c.kernel.times)},
        {"fairness.probes", count(c.fairness.probes)},
        {"fairness.time_fraction", number(c.fairness.time_fraction)},
        {"flow.from_optimal", flag(c.flow.from_optimal)},
        {"flow.dt_outer", number(c.flow.dt_outer)},
        {"flow.dt_inner", number(c.flow.dt_inner)},
        {"flow.t_end", number(c.flow.t_end)},
        {"flow.probes", count(c.flow.probes)},
        {"flow.probe_dt", number(c.flow.probe_dt)},
        {"flow.paths", count(c.flow.paths)},
        {"spectral.modes", count(c.spectral.modes)},
        {"spectral.trials", count(c.spectral.trials)},
        {"run.seed", seed(c.run.seed)},
        {"run.out", text(c.run.out)},
    };
}

bool whole_multiple(double a, double b) {
    const double r = a / b;
    return r >= 1.0 - 1e-9 && std::abs(r - std::round(r)) < 1e-9 * r;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error("invalid config:\n" + join(violations)), violations_(std::move(violations)) {}

std::vector<std::string> validate(const ScenarioConfig& c) {
    std::vector<std::string> v;
    auto need = [&v](bool ok, const std::string& what) {
        if (!ok) v.push_back(what);
    };
    need(c.grid.n >= 16, "grid.n below minimum 16");
    need(c.grid.y_min > 0.0, "grid.y_min must be positive");
    need(c.grid.y_max > c.grid.y_min, "grid.y_max must exceed grid.y_min");
    need(c.grid.sigma_taper > 0.0 && c.grid.sigma_taper < 0.25, "grid.sigma_taper must lie in (0, 0.25)");
    need(c.skills.family == "lognormal", "skills.family must be lognormal");
    need(c.skills.log_sd > 0.0, "skills.log_sd must be positive");
    need(c.skills.theta_min > 0.0, "skills.theta_min must be positive");
    need(c.skills.theta_max > c.skills.theta_min, "skills.theta_max must exceed skills.theta_min");
    need(c.skills.taper > 0.0 && c.skills.taper < 0.5, "skills.taper must lie in (0, 0.5)");
    need(c.skills.n >= 16, "skills.n below minimum 16");
    need(c.prefs.elasticity > 0.0, "prefs.elasticity must be positive");
    need(c.agent.mesh >= 16, "agent.mesh below minimum 16");
    const auto& f = c.initial.family;
    need(f == "zero" || f == "linear" || f == "quadratic" || f == "file",
         "initial.family must be zero, linear, quadratic or file");
    need(c.initial.rate >= 0.0 && c.initial.rate < 1.0, "initial.rate must lie in [0, 1)");
    need(f != "file" || !c.initial.file.empty(), "initial.file is required when initial.family = file");
    need(c.optimal.damping > 0.0 && c.optimal.damping <= 1.0, "optimal.damping must lie in (0, 1]");
    need(c.optimal.tol > 0.0, "optimal.tol must be positive");
    need(c.optimal.max_iter >= 1, "optimal.max_iter must be at least 1");
    need(c.optimal.retention_floor > 0.0 && c.optimal.retention_floor < 1.0,
         "optimal.retention_floor must lie in (0, 1)");
    need(c.optimal.interior_quantile > 0.0 && c.optimal.interior_quantile < 1.0,
         "optimal.interior_quantile must lie in (0, 1)");
    need(c.optimal.initial_rate >= 0.0 && c.optimal.initial_rate < 1.0 - c.optimal.retention_floor,
         "optimal.initial_rate must lie below 1 - optimal.retention_floor");
    need(c.kernel.cfl > 0.0, "kernel.cfl must be positive");
    need(!c.kernel.sources.empty(), "kernel.sources must not be empty");
    for (double x : c.kernel.sources)
        need(x > c.grid.y_min && x < c.grid.y_max, "kernel.sources entry " + format_double(x) + " outside the grid");
    need(!c.kernel.times.empty(), "kernel.times must not be empty");
    for (std::size_t k = 0; k < c.kernel.times.size(); ++k)
        need(c.kernel.times[k] > 0.0 && (k == 0 || c.kernel.times[k] > c.kernel.times[k - 1]),
             "kernel.times must be positive and strictly ascending");
    need(c.fairness.probes >= 1, "fairness.probes must be at least 1");
    need(c.fairness.time_fraction > 0.0, "fairness.time_fraction must be positive");
    need(c.flow.dt_outer > 0.0, "flow.dt_outer must be positive");
    need(c.flow.dt_inner > 0.0 && c.flow.dt_inner <= c.flow.dt_outer, "flow.dt_inner must lie in (0, flow.dt_outer]");
    if (c.flow.dt_outer > 0.0 && c.flow.dt_inner > 0.0) {
        need(whole_multiple(c.flow.dt_outer, c.flow.dt_inner), "flow.dt_outer must be a whole multiple of flow.dt_inner");
        need(whole_multiple(c.flow.t_end, c.flow.dt_outer), "flow.t_end must be a whole multiple of flow.dt_outer");
    }
    need(c.flow.probe_dt > 0.0, "flow.probe_dt must be positive");
    need(c.flow.paths == 0 || c.flow.paths >= 2, "flow.paths must be 0 or at least 2");
    need(c.spectral.modes >= 1, "spectral.modes must be at least 1");
    need(!c.run.out.empty(), "run.out must not be empty");
    return v;
}

ScenarioConfig parse_config(std::string_view input) {
    ScenarioConfig cfg;
    auto table = fields(cfg);
    std::vector<std::string> errors;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    while (!input.empty()) {
        const auto nl = input.find('\n');
        std::string_view line = input.substr(0, nl);
        input = nl == std::string_view::npos ? std::string_view() : input.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            errors.push_back(where + "expected key = value");
            continue;
        }
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) {
            errors.push_back(where + "unknown key \"" + key + "\"");
            continue;
        }
        if (!seen.insert(key).second) {
            errors.push_back(where + "duplicate key \"" + key + "\"");
            continue;
        }
        if (auto e = it->second.set(value); !e.empty()) errors.push_back(where + key + ": " + e);
    }
    for (auto& e : validate(cfg)) errors.push_back(std::move(e));
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot read config file " + path});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::map<std::string, std::string> canonical_entries(const ScenarioConfig& cfg) {
    ScenarioConfig copy = cfg;
    std::map<std::string, std::string> out;
    for (const auto& [k, f] : fields(copy)) out[k] = f.get();
    return out;
}

std::string config_hash(const ScenarioConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : canonical_entries(cfg)) {
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace taxflow
