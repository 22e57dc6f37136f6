#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "squeezesim/params.hpp"
#include "squeezesim/sequence.hpp"

namespace squeeze {

struct ExperimentConfig {
    int trials = 2000;
    double sweep_mt_min = 1e3;
    double sweep_mt_max = 1e5;
    int sweep_points = 15;
    double excess_target_w_inv = 0;  // > 0: calibrate model.excess_dephasing at run time
    double phase_psi = 2.3e-3;
    double phase_n = 4.3e5;
    int phase_trials = 10000;
    double phase_target_w_inv = 7.5;
    std::vector<double> scaling_n = {6e4, 1.2e5, 2.4e5, 4.8e5};
    int scaling_points_per_decade = 20;
    int scaling_trials = 2000;
    double fringe_mt = 4.1e4;
    double fringe_readout_mt = 4.1e4;
    int fringe_points = 12;
    int fringe_trials = 200;
    double budget_mt = 4.1e4;
    double calibration_n = 2.1e5;
    std::vector<double> calibration_mt = {0, 2e4, 4e4, 6e4, 8e4, 1e5};
    int calibration_trials = 400;
    int bootstrap = 1000;
};

struct RunConfig {
    SimParams sim;
    ExperimentConfig experiment;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    int threads = 0;  // 0 = hardware, still capped by SQUEEZE_SIM_THREADS
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Full effective config; loading it reproduces the same values bit-exactly.
std::string echo_config(const RunConfig& c);
// git blob SHA-1 of the echoed config.
std::string config_hash(const RunConfig& c);
std::string git_blob_sha1(const std::string& content);

// Section -> key -> value view of the echo, for JSON sidecars.
struct ConfigEntry {
    enum class Kind { real, integer, boolean, text, list };
    std::string key;    // "section.name"
    std::string value;  // echoed literal
    Kind kind = Kind::real;
};
std::vector<ConfigEntry> config_entries(const RunConfig& c);

}  // namespace squeeze
