#pragma once

#include <cmath>
#include <stdexcept>
#include <string_view>

#include "squeezesim/params.hpp"

namespace squeeze {

enum class SpinLevel { up, down, one };

SpinLevel parse_spin_level(std::string_view s);
const char* to_string(SpinLevel s);

// Collective dressed-cavity shift, written in the cancellation-free form
// 2 g^2 n / (sqrt(d^2 + 4 g^2 n) + d).
template <class Scalar>
Scalar dressed_shift(Scalar n_up, const BasicCavityParams<Scalar>& cav) {
    using std::sqrt;
    if (n_up < 0) throw std::domain_error("dressed_shift: negative n_up");
    const Scalar g2 = cav.g * cav.g;
    return 2 * g2 * n_up / (sqrt(cav.delta * cav.delta + 4 * g2 * n_up) + cav.delta);
}

template <class Scalar>
Scalar alpha_per_atom(SpinLevel s, Scalar n_up, const BasicCavityParams<Scalar>& cav,
                      Scalar c1 = Scalar(2) / 3) {
    using std::sqrt;
    if (n_up < 0) throw std::domain_error("alpha_per_atom: negative n_up");
    const Scalar g2 = cav.g * cav.g;
    const Scalar up = g2 / sqrt(cav.delta * cav.delta + 4 * g2 * n_up);
    switch (s) {
        case SpinLevel::up: return up;
        case SpinLevel::down: return g2 / (cav.delta + cav.omega_hf);
        case SpinLevel::one: return c1 * up;
    }
    throw std::invalid_argument("alpha_per_atom: bad level");
}

// Std. dev. of the dressed frequency from CSS projection noise sqrt(N)/2.
template <class Scalar>
Scalar qpn_frequency_fluctuation(Scalar n, const BasicCavityParams<Scalar>& cav) {
    using std::sqrt;
    if (!(n > 0)) throw std::domain_error("qpn_frequency_fluctuation: n must be positive");
    return alpha_per_atom(SpinLevel::up, n / 2, cav) * sqrt(n) / 2;
}

// M_s / M_t.
template <class Scalar>
Scalar scattered_ratio(Scalar n_up, const BasicCavityParams<Scalar>& cav) {
    if (n_up < 0) throw std::domain_error("scattered_ratio: negative n_up");
    const Scalar d = cav.delta + dressed_shift(n_up, cav);
    return (2 * cav.gamma / cav.kappa0) * (4 * cav.g * cav.g * n_up) / (4 * d * d);
}

inline double effective_atom_number(double n_loaded, const EnsembleParams& ens) {
    if (n_loaded < 0) throw std::domain_error("effective_atom_number: negative n_loaded");
    return ens.coupling_fraction * n_loaded;
}

// Inverts S(x) + alpha_down (n_total - x) = omega for x, the readout of a
// two-level ensemble with known N. S(x) = s obeys x = (s^2 + s d)/g^2, which
// turns the equation into a quadratic in s.
template <class Scalar>
Scalar population_from_frequency(Scalar omega, Scalar n_total, const BasicCavityParams<Scalar>& cav) {
    using std::sqrt;
    const Scalar g2 = cav.g * cav.g;
    const Scalar ad = alpha_per_atom(SpinLevel::down, Scalar(0), cav);
    const Scalar w = omega - ad * n_total;
    const Scalar a = ad / g2;
    const Scalar b = ad * cav.delta / g2 - 1;
    const Scalar disc = b * b - 4 * a * w;
    if (disc < 0) throw std::domain_error("population_from_frequency: frequency out of range");
    const Scalar s = 2 * w / (-b + sqrt(disc));
    return (s * s + s * cav.delta) / g2;
}

}  // namespace squeeze
