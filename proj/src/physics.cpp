#include "squeezesim/physics.hpp"

#include <string>

namespace squeeze {

SpinLevel parse_spin_level(std::string_view s) {
    if (s == "up") return SpinLevel::up;
    if (s == "down") return SpinLevel::down;
    if (s == "one") return SpinLevel::one;
    throw std::invalid_argument("unknown spin level '" + std::string(s) + "'");
}

const char* to_string(SpinLevel s) {
    switch (s) {
        case SpinLevel::up: return "up";
        case SpinLevel::down: return "down";
        case SpinLevel::one: return "one";
    }
    return "?";
}

void EnsembleParams::validate() const {
    if (!(coupling_fraction > 0 && coupling_fraction <= 1))
        throw std::invalid_argument("ensemble.coupling_fraction out of range (0,1]");
    if (!(n_effective > 0)) throw std::invalid_argument("ensemble.n_effective must be positive");
    if (std::abs(coupling_fraction * n_loaded - n_effective) > 1e-6 * n_effective + 0.5)
        throw std::invalid_argument("ensemble.n_effective inconsistent with coupling_fraction * n_loaded");
    if (!(initial_contrast > 0 && initial_contrast <= 1))
        throw std::invalid_argument("ensemble.initial_contrast out of range (0,1]");
}

void TransitionProbs::validate() const {
    for (double p : {p_ud, p_du, p_u1, p_d1})
        if (!(p >= 0 && p < 1)) throw std::invalid_argument("transition probability out of range [0,1)");
}

void ProbeConfig::validate() const {
    if (!(m_t >= 0)) throw std::invalid_argument("probe.m_t must be >= 0");
    if (!(window > 0)) throw std::invalid_argument("probe.window must be positive");
    if (!(detuning_spread >= 0)) throw std::invalid_argument("probe.detuning_spread must be >= 0");
    if (!(ms_classical_frac >= 0)) throw std::invalid_argument("probe.ms_classical_frac must be >= 0");
}

void NoiseCoeffs::validate() const {
    for (double c : {r_psn, r_tf, r_q, r_c})
        if (!(c >= 0)) throw std::invalid_argument("noise coefficients must be >= 0");
}

void NoiseModel::validate() const {
    if (!(reference_n > 0)) throw std::invalid_argument("model.reference_n must be positive");
    if (!(c1 >= 0)) throw std::invalid_argument("model.c1 must be >= 0");
    if (!(beta > 0 && beta <= 1)) throw std::invalid_argument("model.beta out of range (0,1]");
    if (!(opto_r_inv > 0 && opto_ref_mt > 0)) throw std::invalid_argument("model.opto terms must be positive");
    if (!(opto_tau0 > 0)) throw std::invalid_argument("model.opto_tau0 must be positive");
    if (!(laser_linewidth_r_inv > 0)) throw std::invalid_argument("model.laser_linewidth_r_inv must be positive");
    for (double v : {detuning_penalty, excess_dephasing, light_shift, rotation_amp_noise, rotation_phase_noise})
        if (!(v >= 0)) throw std::invalid_argument("model knobs must be >= 0");
}

}  // namespace squeeze
