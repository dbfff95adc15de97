#include "taxflow/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>

#include "json.hpp"

#include "taxflow/fairness.hpp"
#include "taxflow/flow.hpp"
#include "taxflow/heatkernel.hpp"
#include "taxflow/io.hpp"
#include "taxflow/optimal.hpp"
#include "taxflow/revenue.hpp"
#include "taxflow/spectral.hpp"

namespace taxflow {

namespace fs = std::filesystem;
using nlohmann::json;

Mode parse_mode(std::string_view name) {
    if (name == "optimal") return Mode::optimal;
    if (name == "fairness") return Mode::fairness;
    if (name == "flow") return Mode::flow;
    if (name == "spectral") return Mode::spectral;
    if (name == "all") return Mode::all;
    throw Error("unknown mode \"" + std::string(name) + "\"; expected optimal, fairness, flow, spectral or all");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::optimal: return "optimal";
        case Mode::fairness: return "fairness";
        case Mode::flow: return "flow";
        case Mode::spectral: return "spectral";
        case Mode::all: return "all";
    }
    return "all";
}

bool StageRecord::passed() const {
    if (!error.empty()) return false;
    for (const auto& c : certificates)
        if (!c.passed()) return false;
    return true;
}

bool RunManifest::passed() const {
    for (const auto& s : stages)
        if (!s.passed()) return false;
    return true;
}

std::vector<std::string> RunManifest::files() const {
    std::vector<std::string> f;
    for (const auto& s : stages) f.insert(f.end(), s.files.begin(), s.files.end());
    return f;
}

Economy make_economy(const ScenarioConfig& cfg) {
    SkillSpec spec{cfg.skills.theta_min, cfg.skills.theta_max, cfg.skills.log_mean, cfg.skills.log_sd,
                   cfg.skills.taper};
    Economy eco(Grid(cfg.grid.y_min, cfg.grid.y_max, cfg.grid.n), Preferences(cfg.prefs.elasticity),
                SkillModel(spec), cfg.skills.n, cfg.grid.sigma_taper);
    eco.foc.verify = cfg.agent.verify;
    eco.foc.brute.mesh = cfg.agent.mesh;
    return eco;
}

GridFunction initial_tax(const ScenarioConfig& cfg, const Grid& g) {
    const auto& f = cfg.initial.family;
    if (f == "zero") return GridFunction(g, 0.0);
    if (f == "linear") return GridFunction::sample(g, [&](double y) { return cfg.initial.rate * y; });
    if (f == "quadratic")
        return GridFunction::sample(g, [&](double y) { return cfg.initial.rate * y + cfg.initial.curvature * y * y; });
    return read_tax_csv(cfg.initial.file, g);
}

namespace {

std::string format_short(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

json certificate_json(const Certificate& c) {
    return {{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"relation", c.relation}, {"passed", c.passed()}};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

class Runner {
public:
    Runner(const ScenarioConfig& cfg) : cfg_(cfg), eco_(make_economy(cfg)), out_(cfg.run.out) {}

    const OptimalResult& optimum() {
        if (!opt_) {
            OptimalOptions o{cfg_.optimal.damping,         cfg_.optimal.tol,
                             cfg_.optimal.max_iter,        cfg_.optimal.retention_floor,
                             cfg_.optimal.interior_quantile, cfg_.optimal.initial_rate};
            opt_ = solve_optimal(eco_, o);
        }
        return *opt_;
    }

    void optimal_stage(StageRecord& st) {
        const auto& r = optimum();
        const auto& s = r.snapshot;
        const GridFunction dT = derivative(r.tax);
        const auto range = certified_interior(s);
        const auto dia = diamond_check(s, eco_);
        st.certificates.push_back({"fixed_point_residual", r.report.foc_residual, 10.0 * cfg_.optimal.tol, "<"});
        st.certificates.push_back({"foc_residual_relative", foc_residual(s, range), 1e-4, "<"});
        st.certificates.push_back({"top_marginal_rate", std::abs(dT.back()), 1e-3, "<"});
        st.certificates.push_back({"diamond_gap", dia.max_gap, 1e-2, "<"});
        st.info["iterations"] = static_cast<double>(r.report.iterations);
        st.info["revenue"] = revenue(s);
        st.info["interior_begin_income"] = eco_.grid.node(r.report.interior_begin);
        st.info["sup_tax"] = sup_norm(r.tax);

        CsvWriter csv(out_ / "optimal_tax.csv", {"y", "T", "T_prime", "phi", "eps"});
        for (std::size_t i = 0; i < eco_.grid.size(); ++i)
            csv.row({eco_.grid.node(i), r.tax[i], dT[i], s.phi[i], s.eps[i]});
        csv.close();
        st.files.push_back("optimal_tax.csv");
    }

    void fairness_stage(StageRecord& st) {
        const auto& r = optimum();
        const auto& s = r.snapshot;
        const Grid& g = eco_.grid;
        KernelOptions ko;
        ko.cfl = cfg_.kernel.cfl;
        ko.startup_steps = cfg_.kernel.startup_steps;

        const DiffusionOperator op(g, s.sigma_half);
        std::vector<HeatKernelSolution> kernels;
        double mass_defect = 0.0, min_value = 0.0;
        for (double x : cfg_.kernel.sources) {
            auto ker = solve_kernel(op, g.nearest(x), cfg_.kernel.times, ko);
            const std::string name = "kernel_" + format_short(ker.x()) + ".csv";
            CsvWriter csv(out_ / name, {"t", "y", "q"});
            for (std::size_t k = 0; k < ker.times.size(); ++k) {
                mass_defect = std::max(mass_defect, std::abs(ker.mass(k) - 1.0));
                for (std::size_t i = 0; i < g.size(); ++i) csv.row({ker.times[k], g.node(i), ker.slices[k][i]});
            }
            csv.close();
            min_value = std::min(min_value, ker.min_value);
            st.files.push_back(name);
            kernels.push_back(std::move(ker));
        }
        double symmetry = 0.0;
        for (std::size_t a = 0; a < kernels.size(); ++a)
            for (std::size_t b = a + 1; b < kernels.size(); ++b)
                for (std::size_t k = 0; k < cfg_.kernel.times.size(); ++k)
                    symmetry = std::max(symmetry, std::abs(kernels[a].slices[k][kernels[b].source] -
                                                           kernels[b].slices[k][kernels[a].source]));
        st.certificates.push_back({"kernel_mass_defect", mass_defect, 1e-6, "<"});
        st.certificates.push_back({"kernel_min_value", min_value, -1e-10, ">="});
        st.certificates.push_back({"kernel_symmetry_defect", symmetry, 1e-6, "<"});

        FairnessOptions fo;
        fo.probes = cfg_.fairness.probes;
        fo.time_fraction = cfg_.fairness.time_fraction;
        fo.kernel = ko;
        const auto probes = fairness_probes(g, fo);
        const auto times = fairness_times(g, fo);
        const auto rep = fairness_report(r.tax, s, r.report.interior_begin + 1, probes, times, ko);
        st.certificates.push_back({"fairness_residual", rep.max_residual(), 1e-3 * rep.tax_scale, "<"});
        st.certificates.push_back(
            {"marginal_fairness_residual", rep.max_marginal_residual(), 5e-3 * rep.slope_scale, "<"});
        st.certificates.push_back({"fairness_time_spread", rep.max_time_spread(), 2e-3 * rep.tax_scale, "<"});

        json pts = json::array();
        for (const auto& p : rep.points)
            pts.push_back({{"x", p.x},
                           {"t", p.t},
                           {"mechanical", p.mechanical},
                           {"averaging", p.averaging},
                           {"residual", p.residual},
                           {"marginal_residual", p.marginal_residual}});
        json probes_y = json::array();
        for (auto i : rep.probes) probes_y.push_back(g.node(i));
        write_json(out_ / "fairness_report.json", {{"probes", probes_y},
                                                   {"times", rep.times},
                                                   {"pinned_nodes", rep.pinned},
                                                   {"sup_tax", rep.tax_scale},
                                                   {"sup_marginal_rate", rep.slope_scale},
                                                   {"max_residual", rep.max_residual()},
                                                   {"max_marginal_residual", rep.max_marginal_residual()},
                                                   {"max_time_spread", rep.max_time_spread()},
                                                   {"points", pts}});
        st.files.push_back("fairness_report.json");
    }

    void flow_stage(StageRecord& st) {
        const Grid& g = eco_.grid;
        GridFunction T0 = initial_tax(cfg_, g);
        FlowBoundary bnd;
        if (cfg_.flow.from_optimal) {
            T0 = optimum().tax;
            bnd.pinned = optimum().report.interior_begin + 1;
        }
        const auto sub = static_cast<std::size_t>(std::llround(cfg_.flow.dt_outer / cfg_.flow.dt_inner));
        const auto tr = evolve(T0, eco_, {cfg_.flow.t_end, cfg_.flow.dt_outer, sub, 0, bnd});
        double drop = 0.0, move = 0.0;
        for (std::size_t k = 1; k < tr.states.size(); ++k) {
            drop = std::max(drop, tr.states[k - 1].revenue - tr.states[k].revenue);
            move = std::max(move, sup_norm(tr.states[k].tax - T0));
        }
        st.certificates.push_back({"completed", tr.completed ? 1.0 : 0.0, 1.0, ">="});
        st.certificates.push_back({"revenue_drop", drop, 1e-10, "<"});
        if (cfg_.flow.from_optimal) st.certificates.push_back({"distance_from_optimum", move, 1e-5, "<"});
        if (!tr.completed) st.error = tr.diagnostic;
        st.info["splitting_step_scale"] = splitting_step_scale(tr.states.front().snapshot);
        st.info["initial_revenue"] = tr.states.front().revenue;
        st.info["final_revenue"] = tr.states.back().revenue;

        CsvWriter csv(out_ / "trajectory.csv", {"t", "y", "T", "T_prime", "phi", "eps", "R"});
        for (const auto& s : tr.states) {
            const GridFunction dT = derivative(s.tax);
            for (std::size_t i = 0; i < g.size(); ++i)
                csv.row({s.t, g.node(i), s.tax[i], dT[i], s.snapshot.phi[i], s.snapshot.eps[i], s.revenue});
        }
        csv.close();
        st.files.push_back("trajectory.csv");

        short_time_check(st, tr.states.front().tax, tr.states.front().snapshot, bnd);
    }

    // Gaussian prediction against the frozen heat step and a Monte Carlo estimate at probe nodes.
    void short_time_check(StageRecord& st, const GridFunction& T, const EconomySnapshot& s, const FlowBoundary& bnd) {
        if (cfg_.flow.probes == 0) return;
        const auto range = certified_interior(s);
        std::vector<std::size_t> probes;
        const std::size_t m = cfg_.flow.probes;
        for (std::size_t j = 0; j < m; ++j) {
            const double f = 0.25 + 0.5 * (m == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(m - 1));
            probes.push_back(range.begin + static_cast<std::size_t>(f * static_cast<double>(range.end - range.begin - 1)));
        }
        const double dt = cfg_.flow.probe_dt;
        auto error_at = [&](double d) {
            const auto F = frozen_step(T, s, d, {64, 0, bnd});
            double e = 0.0;
            for (auto i : probes) e = std::max(e, std::abs(F[i] - short_time_prediction(T, s, d, i)));
            return e;
        };
        const double e1 = error_at(dt), e2 = error_at(0.5 * dt);
        st.certificates.push_back({"prediction_error_ratio", e2 / e1, 0.7, "<"});
        st.info["prediction_error"] = e1;

        const auto F = frozen_step(T, s, dt, {64, 0, bnd});
        CsvWriter csv(out_ / "short_time.csv", {"y", "prediction", "frozen_step", "mc_mean", "mc_stderr"});
        double worst_z = 0.0;
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const auto i = probes[j];
            const double pred = short_time_prediction(T, s, dt, i);
            MonteCarloEstimate mc{0.0, 0.0};
            if (cfg_.flow.paths > 0) {
                mc = feynman_kac_estimate(T, s, dt, i, {cfg_.flow.paths, 20, cfg_.run.seed + j});
                worst_z = std::max(worst_z, std::abs(mc.mean - pred) / mc.std_error);
            }
            csv.row({eco_.grid.node(i), pred, F[i], mc.mean, mc.std_error});
        }
        csv.close();
        st.files.push_back("short_time.csv");
        if (cfg_.flow.paths > 0) st.certificates.push_back({"monte_carlo_z", worst_z, 3.0, "<"});
    }

    void spectral_stage(StageRecord& st) {
        const auto& s = optimum().snapshot;
        const auto comp = restrict_to_component(eco_.grid, s.sigma_half);
        const Grid& g = comp.grid;
        const std::size_t modes = std::min(cfg_.spectral.modes, g.size() / 4);
        const auto sp = eigensolve(g, comp.half, modes);
        const double l1 = sp.values[1];
        const double rl = rayleigh_lambda1(g, comp.half);
        double ortho = 0.0;
        for (std::size_t a = 0; a < sp.functions.size(); ++a)
            for (std::size_t b = a; b < sp.functions.size(); ++b)
                ortho = std::max(ortho, std::abs(integrate(sp.functions[a] * sp.functions[b]) - (a == b ? 1.0 : 0.0)));
        st.certificates.push_back({"lambda0", std::abs(sp.values[0]), 1e-8, "<"});
        st.certificates.push_back({"rayleigh_agreement", std::abs(rl - l1) / l1, 1e-8, "<"});
        st.certificates.push_back({"orthonormality_defect", ortho, 1e-8, "<"});
        st.info["lambda1"] = l1;
        st.info["component_lo"] = g.lo();
        st.info["component_hi"] = g.hi();

        // Frozen flow toward tau on the component, with the source mass drained at its bottom node.
        const DiffusionOperator op(g, comp.half);
        std::vector<double> phi(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) phi[i] = s.phi[comp.offset + i];
        const auto src = flow_source(g, phi, {0, true});
        const auto ref = stationary_tau(op, src, 0.0, 0);
        const double k = std::min(decay_step_limit(op, l1), 0.05 / l1);
        const auto steps = static_cast<std::size_t>(std::ceil(1.0 / (l1 * k)));
        double margin = 1e300;
        std::mt19937_64 rng(cfg_.run.seed);
        std::normal_distribution<double> nd;
        for (std::size_t trial = 0; trial < cfg_.spectral.trials; ++trial) {
            std::vector<double> c(6);
            for (double& x : c) x = nd(rng);
            GridFunction z = GridFunction::sample(g, [&](double y) {
                const double u = (y - g.lo()) / g.span();
                double v = 0.0;
                for (std::size_t m = 0; m < c.size(); ++m)
                    v += c[m] * std::sin(static_cast<double>(m + 1) * std::numbers::pi * u) / static_cast<double>(m + 1);
                return 0.1 * v * two_sided_taper(y, g.lo(), g.hi(), 0.05 * g.span());
            });
            z = z + (-integrate(z) / g.span());
            const auto run = run_frozen(op, src, ref.tau + z, k, steps, std::max<std::size_t>(1, steps / 200));
            margin = std::min(margin, decay_certificate(run, ref.tau, l1));
        }
        if (cfg_.spectral.trials > 0) st.certificates.push_back({"decay_margin", margin, -1e-8, ">="});

        CsvWriter csv(out_ / "spectrum.csv", {"j", "lambda"});
        for (std::size_t j = 0; j < sp.values.size(); ++j) csv.row({static_cast<double>(j), sp.values[j]});
        csv.close();
        std::vector<std::string> cols{"y"};
        for (std::size_t j = 0; j < sp.functions.size(); ++j) cols.push_back("eta_" + std::to_string(j));
        CsvWriter ef(out_ / "eigenfunctions.csv", cols);
        for (std::size_t i = 0; i < g.size(); ++i) {
            std::vector<double> row{g.node(i)};
            for (const auto& f : sp.functions) row.push_back(f[i]);
            ef.row(row);
        }
        ef.close();
        st.files.push_back("spectrum.csv");
        st.files.push_back("eigenfunctions.csv");
    }

private:
    const ScenarioConfig& cfg_;
    Economy eco_;
    fs::path out_;
    std::optional<OptimalResult> opt_;
};

json manifest_json(const RunManifest& m, const ScenarioConfig& cfg) {
    json stages = json::array();
    for (const auto& s : m.stages) {
        json certs = json::array();
        for (const auto& c : s.certificates) certs.push_back(certificate_json(c));
        stages.push_back({{"name", s.name},
                          {"status", s.passed() ? "passed" : (s.error.empty() ? "failed" : "error")},
                          {"error", s.error},
                          {"certificates", certs},
                          {"info", s.info},
                          {"files", s.files},
                          {"wall_clock_seconds", s.seconds}});
    }
    return {{"artifact_version", m.version},
            {"config_hash", m.config_hash},
            {"config", canonical_entries(cfg)},
            {"mode", mode_name(m.mode)},
            {"passed", m.passed()},
            {"stages", stages},
            {"files", m.files()}};
}

}  // namespace

RunManifest run(const ScenarioConfig& cfg, Mode mode) {
    if (auto v = validate(cfg); !v.empty()) throw ConfigError(std::move(v));
    const fs::path out(cfg.run.out);
    fs::create_directories(out);
    Runner runner(cfg);
    RunManifest m;
    m.config_hash = config_hash(cfg);
    m.mode = mode;

    std::vector<std::pair<std::string, std::function<void(StageRecord&)>>> stages;
    auto want = [mode](Mode s) { return mode == Mode::all || mode == s; };
    if (want(Mode::optimal)) stages.emplace_back("optimal", [&](StageRecord& s) { runner.optimal_stage(s); });
    if (want(Mode::fairness)) stages.emplace_back("fairness", [&](StageRecord& s) { runner.fairness_stage(s); });
    if (want(Mode::flow)) stages.emplace_back("flow", [&](StageRecord& s) { runner.flow_stage(s); });
    if (want(Mode::spectral)) stages.emplace_back("spectral", [&](StageRecord& s) { runner.spectral_stage(s); });

    for (auto& [name, body] : stages) {
        StageRecord st;
        st.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(st);
        } catch (const std::exception& e) {
            st.error = name + ": " + e.what();
        }
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.stages.push_back(std::move(st));
    }
    write_json(out / "manifest.json", manifest_json(m, cfg));
    return m;
}

}  // namespace taxflow
