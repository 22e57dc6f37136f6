#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "squeezesim/noise_budget.hpp"
#include "squeezesim/params.hpp"
#include "squeezesim/sequence.hpp"

namespace squeeze {

// Single-window contrast: Ci exp(-M_s/N) times the optional excess decay.
double contrast_model(const SimParams& p, double m_t);
// W^-1 from model_r (scaled to the ensemble N) and contrast_model.
double predicted_w_inv(const SimParams& p, double m_t);

struct Optimum {
    double m_t = 0, value = 0;
};
// Maximum of f over log-spaced m_t in [lo, hi], refined by golden section.
template <class F>
Optimum maximize_log(F&& f, double lo, double hi, int grid = 400);
Optimum max_predicted_w_inv(const SimParams& p, double lo = 1e2, double hi = 1e6);

// Excess dephasing (rad/photon) at which the predicted max W^-1 equals target.
double calibrate_excess_dephasing(const SimParams& p, double target_w_inv = 10.5);
// Smallest m_t whose predicted W^-1 reaches target.
double tune_probe_for_enhancement(const SimParams& p, double target_w_inv);

std::vector<double> log_grid(double lo, double hi, int points);

struct SweepRow {
    double m_t = 0, r = 0, contrast = 0, w_inv = 0, r_model = 0;
    double r_psn = 0, r_tf = 0, r_q = 0, r_c = 0;
    BackActionTerms backaction;
};
struct SweepResult {
    double n = 0;
    int trials_per_point = 0;
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> point_seeds;
    std::vector<SweepRow> rows;
};
// Trial records per point are passed to `keep` if given (e.g. for SQL checks).
SweepResult squeezing_sweep(const SimParams& p, std::vector<double> m_t_list, int trials_per_point,
                            std::uint64_t master_seed, int threads = 0,
                            std::vector<RecordSet>* keep = nullptr);

struct FringeResult {
    double contrast = 0, error = 0, offset = 0, amplitude = 0;
    int samples = 0;
};
FringeResult contrast_fringe(const SimParams& p, double m_t, const std::vector<double>& theta_grid, int trials,
                             std::uint64_t master_seed, double readout_mt = 0, int threads = 0);
// Offset + cosine least-squares fit of y(theta); contrast = amplitude/offset.
FringeResult fit_fringe(const std::vector<double>& theta, const std::vector<double>& y);

struct Histogram {
    double lo = 0, hi = 0;
    std::vector<long> applied, reference;
};
struct PhaseDetectionResult {
    bool premeasure = false;
    double psi = 0, m_t = 0, n = 0;
    double mean_applied = 0, mean_reference = 0, sd_applied = 0, sd_reference = 0;
    double threshold = 0, error_rate = 0;
    int trials = 0;
    Histogram histogram;
};
// m_t <= 0 selects params.probe.m_t (CSS) or the W^-1 = target tuning (squeezed).
PhaseDetectionResult phase_detection(const SimParams& p, double psi, bool premeasure, int trials,
                                     std::uint64_t master_seed, double m_t = 0, double target_w_inv = 7.5,
                                     int threads = 0, int bins = 60);

struct ScalingPoint {
    double n = 0, best_m_t = 0, best_w_inv = 0, raw_max_w_inv = 0;
    double dtheta2 = 0;      // 1/(W^-1 N)
    double dtheta_sql = 0;   // projection-noise angle from simulated records
    NoiseCoeffs fit;
};
struct ScalingResult {
    std::vector<ScalingPoint> points;
    double squeezed_slope = 0;  // d log dtheta^2 / d log N
    double sql_slope = 0;       // d log dtheta_SQL / d log N
};
ScalingResult n_scaling(const SimParams& p, const std::vector<double>& n_list, int trials_per_point,
                        std::uint64_t master_seed, int points_per_decade = 20, double m_lo = 1e3,
                        double m_hi = 1e5, int threads = 0);
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct CalibrationPoint {
    double m_t = 0, down_hz = 0, up_hz = 0;
};
struct RamanCalibration {
    double n = 0;
    double down_slope = 0;  // Hz per transmitted photon
    double up_slope = 0;    // pre-swap equivalent
    std::vector<CalibrationPoint> points;
};
RamanCalibration raman_calibration(const SimParams& p, const std::vector<double>& m_t_grid, int trials,
                                   std::uint64_t master_seed, double readout_mt = 0, int threads = 0);

}  // namespace squeeze

namespace squeeze {

template <class F>
Optimum maximize_log(F&& f, double lo, double hi, int grid) {
    const double a = std::log(lo), b = std::log(hi);
    int best = 0;
    double best_v = -1e300;
    for (int i = 0; i <= grid; ++i) {
        const double v = f(std::exp(a + (b - a) * i / grid));
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    double l = a + (b - a) * std::max(0, best - 1) / grid;
    double r = a + (b - a) * std::min(grid, best + 1) / grid;
    const double g = 0.6180339887498949;
    double x1 = r - g * (r - l), x2 = l + g * (r - l);
    double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + g * (r - l);
            f2 = f(std::exp(x2));
        } else {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - g * (r - l);
            f1 = f(std::exp(x1));
        }
    }
    const double x = 0.5 * (l + r);
    const double v = f(std::exp(x));
    return v >= best_v ? Optimum{std::exp(x), v} : Optimum{std::exp(a + (b - a) * best / grid), best_v};
}

}  // namespace squeeze
