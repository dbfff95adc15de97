#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "taxflow/error.hpp"

namespace taxflow {

struct ScenarioConfig {
    struct {
        double y_min = 0.05;
        double y_max = 5.5;
        std::size_t n = 1601;
        double sigma_taper = 0.02;
    } grid;
    struct {
        std::string family = "lognormal";
        double log_mean = 0.0;
        double log_sd = 0.4;
        double theta_min = 0.5;
        double theta_max = 3.0;
        double taper = 0.05;
        std::size_t n = 801;
    } skills;
    struct {
        double elasticity = 0.5;
    } prefs;
    struct {
        bool verify = true;
        std::size_t mesh = 400;
    } agent;
    struct {
        std::string family = "linear";  // zero | linear | quadratic | file
        double rate = 0.1;
        double curvature = 0.0;  // quadratic: T = rate y + curvature y^2
        std::string file;        // file: CSV with columns y, T
    } initial;
    struct {
        double damping = 0.5;
        double tol = 1e-10;
        std::size_t max_iter = 5000;
        double retention_floor = 0.02;
        double interior_quantile = 0.02;
        double initial_rate = 0.3;
    } optimal;
    struct {
        double cfl = 0.25;
        std::size_t startup_steps = 2;
        std::vector<double> sources{1.0, 2.0, 3.0};
        std::vector<double> times{0.01, 0.02, 0.04, 0.08};
    } kernel;
    struct {
        std::size_t probes = 5;
        double time_fraction = 0.05;
    } fairness;
    struct {
        bool from_optimal = false;
        double dt_outer = 1e-5;
        double dt_inner = 2.5e-6;
        double t_end = 1e-4;
        std::size_t probes = 5;
        double probe_dt = 0.005;
        std::size_t paths = 20000;
    } flow;
    struct {
        std::size_t modes = 20;
        std::size_t trials = 5;
    } spectral;
    struct {
        std::uint64_t seed = 1;
        std::string out = "out";
    } run;
};

// Every violation found while reading or validating a config.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

// `key = value` lines; `#` starts a comment. Unknown keys and out-of-range values are all reported.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::string& path);

// Range checks only; returns the violations.
std::vector<std::string> validate(const ScenarioConfig& cfg);

// Every key with its value in canonical text form, sorted by key.
std::map<std::string, std::string> canonical_entries(const ScenarioConfig& cfg);

// FNV-1a over the canonical entries, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace taxflow
