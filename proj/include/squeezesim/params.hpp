#pragma once

#include <stdexcept>
#include <string>

namespace squeeze {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Rates are angular (rad/s) unless the name says otherwise.
template <class Scalar>
struct BasicCavityParams {
    Scalar g = Scalar(kTwoPi * 447e3);
    Scalar kappa = Scalar(kTwoPi * 11.8e6);
    Scalar kappa0 = Scalar(kTwoPi * 5.02e6);
    Scalar delta = Scalar(kTwoPi * 200e6);
    Scalar gamma = Scalar(kTwoPi * 6.07e6);
    Scalar omega_ax = Scalar(kTwoPi * 150e3);
    Scalar omega_hf = Scalar(kTwoPi * 6.834e9);
    Scalar recoil_shift_hz = Scalar(1.3);  // per free-space photon

    void validate() const {
        if (!(g > 0 && kappa > 0 && kappa0 > 0 && gamma > 0 && omega_ax > 0 && omega_hf > 0))
            throw std::invalid_argument("cavity: rates must be positive");
        if (kappa0 > kappa) throw std::invalid_argument("cavity: kappa0 exceeds kappa");
        if (!(delta > 0)) throw std::invalid_argument("cavity: delta must be positive");
        if (recoil_shift_hz < 0) throw std::invalid_argument("cavity: negative recoil shift");
    }
};
using CavityParams = BasicCavityParams<double>;

struct EnsembleParams {
    double coupling_fraction = 0.663;
    double n_effective = 4.8e5;
    double n_loaded = 4.8e5 / 0.663;
    double initial_contrast = 0.97;

    void validate() const;
    // Sets N and keeps N0 consistent.
    void set_n(double n) {
        n_effective = n;
        n_loaded = n / coupling_fraction;
    }
};

// Per free-space-scattered photon.
struct TransitionProbs {
    double p_ud = 8e-4;
    double p_du = 7.3e-4;
    double p_u1 = 3.9e-3;
    double p_d1 = 3.6e-4;

    void validate() const;
    static TransitionProbs none() { return {0, 0, 0, 0}; }
};

struct ProbeConfig {
    double m_t = 4.1e4;
    double window = 40e-6;
    double detuning_spread = 0.045 * kTwoPi * 11.8e6 / 2;  // rad/s
    double ms_classical_frac = 0.04;

    void validate() const;
};

// R = r_psn/M + r_tf + r_q M + r_c M^2, defined at NoiseModel::reference_n.
struct NoiseCoeffs {
    double r_psn = 4.1e4 / 32;
    double r_tf = 1.0 / 73;
    double r_q = 0;
    double r_c = 1.0 / (67 * 4.1e4 * 4.1e4);

    void validate() const;
};

// Knobs of the simulated back-action channels not pinned by the fitted coefficients.
struct NoiseModel {
    double reference_n = 4.8e5;      // N at which NoiseCoeffs hold
    double c1 = 2.0 / 3;             // |1> coupling relative to up
    double beta = 2.0 / 3;           // unweighted time-average factor
    double opto_r_inv = 620;         // variable damping R^-1 at opto_ref_mt
    double opto_ref_mt = 4.1e4;
    double opto_tau0 = 10e-6;
    double opto_asymmetry = 0.5;
    double laser_linewidth_r_inv = 520;
    double detuning_penalty = 1.0;   // read variance x (1 + k (dp/(kappa/2))^2)
    double excess_dephasing = 0;     // rad per transmitted photon, irreversible
    double light_shift = 0;          // rad per transmitted photon, echo-reversible
    double rotation_amp_noise = 0;   // fractional rms
    double rotation_phase_noise = 0; // rad rms
    bool raman = true;
    bool recoil = true;
    bool repump_one_to_up = false;

    void validate() const;
    double opto_coefficient() const { return 1.0 / (opto_r_inv * opto_ref_mt * opto_ref_mt); }
};

struct SimParams {
    CavityParams cavity;
    EnsembleParams ensemble;
    TransitionProbs transition;
    ProbeConfig probe;
    NoiseCoeffs noise;
    NoiseModel model;

    void validate() const {
        cavity.validate();
        ensemble.validate();
        transition.validate();
        probe.validate();
        noise.validate();
        model.validate();
    }
};

}  // namespace squeeze
