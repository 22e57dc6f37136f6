#pragma once

#include <Eigen/Dense>

#include "squeezesim/params.hpp"
#include "squeezesim/physics.hpp"
#include "squeezesim/random.hpp"

namespace squeeze {

// Gaussian-moment collective spin. `mean`/`cov` are the observer's
// conditional moments of (Jx, Jy, Jz); `pops` and `transverse_offset` carry
// the realized spin of this trial (realized J_perp = mean.xy + offset,
// realized Jz = (up - down)/2).
struct EnsembleState {
    double n_total = 0;
    Eigen::Vector3d pops = Eigen::Vector3d::Zero();  // up, down, one
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    Eigen::Vector2d transverse_offset = Eigen::Vector2d::Zero();
    double contrast = 1;
    double dephasing = 0;   // echo-reversible phase spread, rad
    bool polarized = false; // freshly pumped: populations exact, contrast not yet imprinted

    double pop_up() const { return pops(0); }
    double pop_down() const { return pops(1); }
    double pop_one() const { return pops(2); }
    double jz_mean() const { return mean(2); }
    double jz_var() const { return cov(2, 2); }
    double jy_var() const { return cov(1, 1); }
    double realized_jz() const { return 0.5 * (pops(0) - pops(1)); }
    double azimuth() const { return std::atan2(mean(1), mean(0)); }
    double effective_contrast() const { return contrast * std::exp(-0.5 * dephasing * dephasing); }
};

struct MeasurementOutcome {
    double n_up = 0;        // inferred N_up, atoms
    double frequency = 0;   // measured dressed shift, rad/s
    double true_jz = 0;     // window-averaged realized Jz
    double m_s = 0;         // scattered photons this window
};

// Per-trial quantities that persist across windows.
struct ProbeContext {
    double detuning_offset = 0;  // rad/s, set by prealign
    double power_factor = 1;     // classical M_s fluctuation, 1 + frac * z
    double recoil_photons = 0;   // scattered photons so far
};

struct RamanJumps {
    Eigen::Vector3d final = Eigen::Vector3d::Zero();
    Eigen::Vector3d averaged = Eigen::Vector3d::Zero();  // window-averaged change
};

// Deterministic CSS along +x: Jz variance N/4, contrast Ci (no realization drawn).
EnsembleState prepare_css(double n, const EnsembleParams& ens);
// Draws the projection-noise realization of a state from its covariance.
EnsembleState sample_realization(const EnsembleState& s, Rng& rng);
EnsembleState optically_pump(double n, SpinLevel target, const EnsembleParams& ens, Rng& rng);
// Bloch vector along x with given z moments; for tests and tools.
EnsembleState make_state(double n, double jz_mean, double jz_var, double jy_var, double contrast);

Eigen::Vector3d rotation_axis(double pulse_phase);
EnsembleState rotate(const EnsembleState& s, double angle, double pulse_phase);

// Scalar Kalman update of Jz with read variance sigma_m2 (atoms^2), followed by
// the minimal conjugate inflation (observer moments only, no realized kick).
EnsembleState conditional_update(const EnsembleState& s, double observed_jz, double sigma_m2);
// Minimal J_perp-conjugate inflation restoring the uncertainty bound.
double antisqueeze_variance(const EnsembleState& s);

RamanJumps raman_jumps(double m_s, const EnsembleState& s, const TransitionProbs& tp,
                       bool repump_one_to_up, Rng& rng);
EnsembleState apply_raman_diffusion(const EnsembleState& s, double m_s, const TransitionProbs& tp, Rng& rng,
                                    bool repump_one_to_up = false);

// Atom-unit read variance of one window (observer model, no detuning penalty).
double read_variance(double m_t, const SimParams& p);
double scattered_photons(double m_t, double n_total, const CavityParams& cav);

struct ProbeResult {
    MeasurementOutcome outcome;
    EnsembleState state;
};
ProbeResult probe_measure(const EnsembleState& s, const ProbeConfig& probe, const SimParams& p,
                          ProbeContext& ctx, Rng& rng);

bool heisenberg_check(const EnsembleState& s);

}  // namespace squeeze
