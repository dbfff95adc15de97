#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "taxflow/config.hpp"
#include "taxflow/run.hpp"

namespace {

int do_run(const std::string& config, const std::string& mode, const std::string& out, const std::string& seed) {
    taxflow::ScenarioConfig cfg = taxflow::load_config(config);
    if (!out.empty()) cfg.run.out = out;
    if (!seed.empty()) cfg.run.seed = std::stoull(seed);
    const auto m = taxflow::run(cfg, taxflow::parse_mode(mode));
    for (const auto& s : m.stages) {
        std::printf("%-9s %s  (%.2f s)\n", s.name.c_str(), s.passed() ? "PASS" : "FAIL", s.seconds);
        if (!s.error.empty()) std::printf("  error: %s\n", s.error.c_str());
        for (const auto& c : s.certificates)
            std::printf("  %-28s %.6e %s %.3e  %s\n", c.name.c_str(), c.value, c.relation.c_str(), c.limit,
                        c.passed() ? "ok" : "VIOLATED");
    }
    std::printf("outputs in %s\n", cfg.run.out.c_str());
    return m.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal income taxes, their heat kernel and the revenue gradient flow"};
    app.require_subcommand(1);

    std::string config, mode = "all", out, seed;
    auto* run = app.add_subcommand("run", "Run a scenario and write its outputs");
    run->add_option("--config", config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
    run->add_option("--mode", mode, "optimal | fairness | flow | spectral | all")
        ->check(CLI::IsMember({"optimal", "fairness", "flow", "spectral", "all"}));
    run->add_option("--out", out, "Output directory (overrides run.out)");
    run->add_option("--seed", seed, "Random seed (overrides run.seed)");

    std::string vconfig;
    auto* validate = app.add_subcommand("validate", "Check a config and print its resolved values");
    validate->add_option("--config", vconfig, "Config file (key = value)")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return do_run(config, mode, out, seed);
        const auto cfg = taxflow::load_config(vconfig);
        for (const auto& [k, v] : taxflow::canonical_entries(cfg)) std::printf("%s = %s\n", k.c_str(), v.c_str());
        std::printf("config hash %s\n", taxflow::config_hash(cfg).c_str());
        return 0;
    } catch (const taxflow::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
