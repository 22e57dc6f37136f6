#include "squeezesim/spin_state.hpp"

#include <cmath>
#include <stdexcept>

#include "squeezesim/noise_budget.hpp"

namespace squeeze {

namespace {

constexpr double kPi = kTwoPi / 2;

// Realized spin vector of the trial.
Eigen::Vector3d realized_vector(const EnsembleState& s) {
    return {s.mean(0) + s.transverse_offset(0), s.mean(1) + s.transverse_offset(1), s.realized_jz()};
}

void set_realized_jz(EnsembleState& s, double jz) {
    const double n2 = s.n_total - s.pops(2);
    s.pops(0) = n2 / 2 + jz;
    s.pops(1) = n2 / 2 - jz;
}

bool is_pi(double angle) {
    const double a = std::remainder(angle, kTwoPi);
    return std::abs(std::abs(a) - kPi) < 1e-9;
}

// Poisson process on the unit window: count and sum of (1 - t_i), the weight
// each event carries in the window average.
std::pair<double, double> poisson_window(double mean, Rng& rng) {
    const long k = rng.poisson(mean);
    if (k == 0) return {0.0, 0.0};
    double w = 0;
    if (k <= 64) {
        for (long i = 0; i < k; ++i) w += 1 - rng.uniform();
    } else {
        w = k / 2.0 + std::sqrt(k / 12.0) * rng.normal();
    }
    return {double(k), w};
}

double expected_jz_drift(const EnsembleState& s, double m_s, const TransitionProbs& tp, bool repump) {
    const double half = s.n_total / 2;
    const double u = s.pops(0) / half, d = s.pops(1) / half;
    double e_up = m_s * (-tp.p_ud * u + tp.p_du * d - tp.p_u1 * u);
    const double e_dn = m_s * (tp.p_ud * u - tp.p_du * d - tp.p_d1 * d);
    if (repump) e_up += m_s * (tp.p_u1 * u + tp.p_d1 * d);
    return 0.5 * (e_up - e_dn);
}

// Variance of the Jz change from independent Poisson channels (predict step).
double jz_jump_variance(const EnsembleState& s, double m_s, const TransitionProbs& tp, bool repump) {
    const double half = s.n_total / 2;
    const double u = s.pops(0) / half, d = s.pops(1) / half;
    const double to_one = repump ? 0 : 0.25;  // |1> leak moves Jz by 1/2; repump back to up moves it by 0
    return m_s * (tp.p_ud * u + tp.p_du * d + to_one * (tp.p_u1 * u) + 0.25 * tp.p_d1 * d);
}

// Orthonormal pair spanning the plane normal to the mean spin; b is the
// horizontal one (the anti-squeezing direction), a lies in the (z, mean) plane.
bool conjugate_axes(const EnsembleState& s, Eigen::Vector3d& a, Eigen::Vector3d& b) {
    const double norm = s.mean.norm();
    if (norm == 0) return false;
    const double m_perp = s.mean.head<2>().norm();
    if (m_perp > 0) {
        const double phi = std::atan2(s.mean(1), s.mean(0));
        b << -std::sin(phi), std::cos(phi), 0;
    } else {
        b << 0, 1, 0;
    }
    a = b.cross(s.mean / norm);
    return true;
}

EnsembleState kalman_update(const EnsembleState& s, double observed_jz, double sigma_m2) {
    if (!(sigma_m2 > 0)) throw std::domain_error("conditional_update: read variance must be positive");
    EnsembleState out = s;
    const double denom = s.cov(2, 2) + sigma_m2;
    const Eigen::Vector3d k = s.cov.col(2) / denom;
    out.mean = s.mean + k * (observed_jz - s.mean(2));
    out.cov = s.cov - k * s.cov.row(2);
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    // the realized transverse spin is unaffected by the observer's update
    out.transverse_offset -= (out.mean - s.mean).head<2>();
    return out;
}

}  // namespace

EnsembleState prepare_css(double n, const EnsembleParams& ens) {
    if (!(n > 0)) throw std::domain_error("prepare_css: n must be positive");
    EnsembleState s;
    s.n_total = n;
    s.pops << n / 2, n / 2, 0;
    s.contrast = ens.initial_contrast;
    s.mean << s.contrast * n / 2, 0, 0;
    s.cov.diagonal() << 0, n / 4, n / 4;
    return s;
}

EnsembleState sample_realization(const EnsembleState& s, Rng& rng) {
    EnsembleState out = s;
    const double zy = rng.normal(), zx = rng.normal(), zz = rng.normal();
    out.transverse_offset << std::sqrt(s.cov(0, 0)) * zx, std::sqrt(s.cov(1, 1)) * zy;
    set_realized_jz(out, s.mean(2) + std::sqrt(s.cov(2, 2)) * zz);
    return out;
}

EnsembleState optically_pump(double n, SpinLevel target, const EnsembleParams& ens, Rng& rng) {
    if (!(n > 0)) throw std::domain_error("optically_pump: n must be positive");
    EnsembleState s;
    s.n_total = n;
    s.contrast = ens.initial_contrast;
    s.polarized = true;
    switch (target) {
        case SpinLevel::up: s.pops << n, 0, 0; break;
        case SpinLevel::down: s.pops << 0, n, 0; break;
        case SpinLevel::one: throw std::invalid_argument("optically_pump: cannot pump to |1>");
    }
    s.mean << 0, 0, s.realized_jz();
    s.cov.diagonal() << n / 4, n / 4, 0;
    const double zx = rng.normal(), zy = rng.normal();
    s.transverse_offset << std::sqrt(n / 4) * zx, std::sqrt(n / 4) * zy;
    return s;
}

EnsembleState make_state(double n, double jz_mean, double jz_var, double jy_var, double contrast) {
    EnsembleState s;
    s.n_total = n;
    s.contrast = contrast;
    s.pops << n / 2 + jz_mean, n / 2 - jz_mean, 0;
    s.mean << contrast * n / 2, 0, jz_mean;
    s.cov.diagonal() << 0, jy_var, jz_var;
    return s;
}

Eigen::Vector3d rotation_axis(double pulse_phase) {
    return {std::sin(pulse_phase), -std::cos(pulse_phase), 0};
}

EnsembleState rotate(const EnsembleState& s, double angle, double pulse_phase) {
    if (angle == 0) return s;
    EnsembleState out = s;
    if (out.polarized) {
        // Imprint the initial contrast; the incoherent remainder carries no vector.
        out.mean *= out.contrast;
        set_realized_jz(out, out.mean(2));
        out.polarized = false;
    }
    if (out.dephasing != 0 && !is_pi(angle)) {
        const double f = std::exp(-0.5 * out.dephasing * out.dephasing);
        const Eigen::Vector3d v = realized_vector(out);
        out.mean.head<2>() *= f;
        out.contrast *= f;
        out.transverse_offset = v.head<2>() * f - out.mean.head<2>();
        out.dephasing = 0;
    }
    const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, rotation_axis(pulse_phase)).toRotationMatrix();
    const Eigen::Vector3d v = r * realized_vector(out);
    out.mean = r * out.mean;
    out.cov = r * out.cov * r.transpose();
    out.transverse_offset = v.head<2>() - out.mean.head<2>();
    set_realized_jz(out, v(2));
    if (is_pi(angle)) out.dephasing = -out.dephasing;
    return out;
}

double antisqueeze_variance(const EnsembleState& s) {
    Eigen::Vector3d a, b;
    if (!conjugate_axes(s, a, b)) return 0;
    const double va = a.dot(s.cov * a), cab = a.dot(s.cov * b);
    if (va <= 0) return 0;
    const double need = (0.25 * s.mean.squaredNorm() + cab * cab) / va;
    return std::max(0.0, need - b.dot(s.cov * b));
}

EnsembleState conditional_update(const EnsembleState& s, double observed_jz, double sigma_m2) {
    EnsembleState out = kalman_update(s, observed_jz, sigma_m2);
    Eigen::Vector3d a, t;
    const double extra = antisqueeze_variance(out);
    if (extra > 0 && conjugate_axes(out, a, t)) out.cov += extra * t * t.transpose();
    return out;
}


RamanJumps raman_jumps(double m_s, const EnsembleState& s, const TransitionProbs& tp, bool repump_one_to_up,
                       Rng& rng) {
    if (m_s < 0) throw std::domain_error("raman: negative m_s");
    RamanJumps j;
    if (m_s == 0 || s.n_total <= 0) return j;
    const double half = s.n_total / 2;
    const int one = repump_one_to_up ? 0 : 2;
    struct Channel {
        int src, dst;
        double p;
    };
    const Channel ch[] = {{0, 1, tp.p_ud}, {1, 0, tp.p_du}, {0, one, tp.p_u1}, {1, one, tp.p_d1}};
    Eigen::Vector3d avail = s.pops;
    for (const auto& c : ch) {
        if (c.p <= 0) continue;
        auto [k, w] = poisson_window(c.p * m_s * s.pops(c.src) / half, rng);
        if (k > avail(c.src)) {
            w *= avail(c.src) / k;
            k = avail(c.src);
        }
        avail(c.src) -= k;
        j.final(c.src) -= k;
        j.final(c.dst) += k;
        j.averaged(c.src) -= w;
        j.averaged(c.dst) += w;
    }
    return j;
}

EnsembleState apply_raman_diffusion(const EnsembleState& s, double m_s, const TransitionProbs& tp, Rng& rng,
                                    bool repump_one_to_up) {
    EnsembleState out = s;
    const RamanJumps j = raman_jumps(m_s, s, tp, repump_one_to_up, rng);
    out.pops += j.final;
    // the observer only knows the expected drift
    out.mean(2) += expected_jz_drift(s, m_s, tp, repump_one_to_up);
    out.cov(2, 2) += jz_jump_variance(s, m_s, tp, repump_one_to_up);
    return out;
}

double read_variance(double m_t, const SimParams& p) {
    return p.model.reference_n / 4 * p.noise.r_psn / (2 * m_t);
}

double scattered_photons(double m_t, double n_total, const CavityParams& cav) {
    return scattered_ratio(n_total / 2, cav) * m_t;
}

ProbeResult probe_measure(const EnsembleState& s, const ProbeConfig& probe, const SimParams& p, ProbeContext& ctx,
                          Rng& rng) {
    if (!(probe.m_t > 0)) throw std::invalid_argument("probe_measure: m_t must be positive");
    const auto& cav = p.cavity;
    const auto& model = p.model;
    const double n = s.n_total;
    const double m_t = probe.m_t;
    const double ms_nominal = scattered_photons(m_t, n, cav);
    const double m_s = ms_nominal * std::max(0.0, ctx.power_factor);

    // population changes during the window
    RamanJumps jumps;
    if (model.raman) jumps = raman_jumps(m_s, s, p.transition, model.repump_one_to_up, rng);
    double k_total = 0, k_avg = 0;
    if (model.recoil && cav.recoil_shift_hz > 0) std::tie(k_total, k_avg) = poisson_window(m_s, rng);

    const Eigen::Vector3d avg = s.pops + jumps.averaged;
    const double up_avg = std::max(0.0, avg(0));
    const double alpha_up = alpha_per_atom(SpinLevel::up, up_avg, cav, model.c1);
    const double alpha_dn = alpha_per_atom(SpinLevel::down, up_avg, cav, model.c1);
    const double alpha_one = model.c1 * alpha_up;
    double omega = dressed_shift(up_avg, cav) + alpha_dn * avg(1) + alpha_one * avg(2);
    if (model.recoil) {
        const double ref = dressed_shift(n / 2, cav);
        omega -= kTwoPi * cav.recoil_shift_hz * (ctx.recoil_photons + k_avg) * dressed_shift(up_avg, cav) / ref;
    }

    // independent atom-unit noise of this window
    const double ref_quarter = model.reference_n / 4;
    const double dp = ctx.detuning_offset / (cav.kappa / 2);
    const ResidualCoeffs resid = residual_backaction(p);
    double var = read_variance(m_t, p) * (1 + model.detuning_penalty * dp * dp);
    var += ref_quarter * p.noise.r_tf / 2;
    var += ref_quarter * model.opto_coefficient() * m_t * m_t / 2;
    var += ref_quarter * resid.r_c * m_t * m_t / 2;
    var += ref_quarter * resid.r_q * m_t / 2;
    omega += (alpha_up - alpha_dn) * std::sqrt(var) * rng.normal();

    ProbeResult res;
    res.outcome.frequency = omega;
    res.outcome.n_up = population_from_frequency(omega, n, cav);
    res.outcome.true_jz = 0.5 * (avg(0) - avg(1));
    res.outcome.m_s = m_s;

    ctx.recoil_photons += k_total;

    // realized state after the window; observer tracks the expected drift
    EnsembleState st = s;
    if (model.raman) {
        st.pops += jumps.final;
        st.mean(2) += expected_jz_drift(s, ms_nominal, p.transition, model.repump_one_to_up);
        st.cov(2, 2) += jz_jump_variance(s, ms_nominal, p.transition, model.repump_one_to_up);
    }

    if (!st.polarized) {
        st = kalman_update(st, res.outcome.n_up - n / 2, read_variance(m_t, p));
        const double extra = antisqueeze_variance(st);
        Eigen::Vector3d a, t;
        if (extra > 0 && conjugate_axes(st, a, t)) {
            st.cov += extra * t * t.transpose();
            st.transverse_offset += std::sqrt(extra) * rng.normal() * t.head<2>();
        }
    }

    const double x = model.excess_dephasing * m_t;
    const double collapse = std::exp(-ms_nominal / n) * std::exp(-0.5 * x * x);
    // Lost coherence acts as J_perp -> c J_perp + xi, with the decohered atoms
    // contributing (1 - c^2) N/4 of fresh transverse noise per axis.
    const double fresh = (1 - collapse * collapse) * n / 4;
    st.mean.head<2>() *= collapse;
    st.cov.topLeftCorner<2, 2>() *= collapse * collapse;
    st.cov.topLeftCorner<2, 2>().diagonal().array() += fresh;
    st.cov.block<2, 1>(0, 2) *= collapse;
    st.cov.block<1, 2>(2, 0) *= collapse;
    st.transverse_offset = collapse * st.transverse_offset +
                           std::sqrt(fresh) * Eigen::Vector2d(rng.normal(), rng.normal());
    st.contrast *= collapse;
    st.dephasing += model.light_shift * m_t;
    res.state = st;
    return res;
}

// Uncertainty relation in the plane normal to <J>: det(cov_perp) >= |<J>|^2/4.
// For a Bloch vector along x this is sqrt(jz_var jy_var) >= C N/4.
bool heisenberg_check(const EnsembleState& s) {
    Eigen::Vector3d a, b;
    if (!conjugate_axes(s, a, b)) return true;
    const double va = a.dot(s.cov * a), vb = b.dot(s.cov * b), cab = a.dot(s.cov * b);
    if (va < 0 || vb < 0) return false;
    return va * vb - cab * cab >= 0.25 * s.mean.squaredNorm() * (1 - 1e-9);
}

}  // namespace squeeze
