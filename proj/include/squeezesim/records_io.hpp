#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "squeezesim/config.hpp"
#include "squeezesim/experiments.hpp"
#include "squeezesim/noise_budget.hpp"
#include "squeezesim/sequence.hpp"

namespace squeeze {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 17 significant digits; strtod restores the exact double.
std::string format_double(double v);

void write_records(const RecordSet& rs, const std::string& path);
RecordSet read_records(const std::string& path);
std::string records_to_csv(const RecordSet& rs);
RecordSet records_from_csv(const std::string& text);

std::string sweep_to_csv(const SweepResult& s);
// (mt, R[, weight]) columns of a sweep-shaped CSV.
std::vector<RPoint> read_r_points(const std::string& path);

std::string phase_histograms_to_csv(const std::vector<PhaseDetectionResult>& cases);
std::string scaling_to_csv(const ScalingResult& s);
std::string calibration_to_csv(const RamanCalibration& c);

// JSON metadata sidecar: experiment name, master seed, config hash, the full
// effective config, plus experiment-specific `extra` (a JSON object literal).
std::string sidecar_json(const std::string& experiment, const RunConfig& cfg, const std::string& extra_json);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace squeeze
