#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "taxflow/agent.hpp"
#include "taxflow/config.hpp"
#include "taxflow/model.hpp"

namespace taxflow {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum class Mode { optimal, fairness, flow, spectral, all };

Mode parse_mode(std::string_view name);
std::string mode_name(Mode m);

// value `relation` limit, with relation one of "<" or ">=".
struct Certificate {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    std::string relation = "<";
    bool passed() const { return relation == "<" ? value < limit : value >= limit; }
};

struct StageRecord {
    std::string name;
    std::string error;  // set if the stage threw
    std::vector<Certificate> certificates;
    std::map<std::string, double> info;
    std::vector<std::string> files;
    double seconds = 0.0;

    bool passed() const;
};

struct RunManifest {
    std::string config_hash;
    std::string version = kArtifactVersion;
    Mode mode = Mode::all;
    std::vector<StageRecord> stages;

    bool passed() const;
    std::vector<std::string> files() const;
};

Economy make_economy(const ScenarioConfig& cfg);
GridFunction initial_tax(const ScenarioConfig& cfg, const Grid& grid);

// Runs the stages for `mode`, writes their outputs and manifest.json under cfg.run.out.
RunManifest run(const ScenarioConfig& cfg, Mode mode);

}  // namespace taxflow
