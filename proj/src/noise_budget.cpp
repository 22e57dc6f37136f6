#include "squeezesim/noise_budget.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "squeezesim/physics.hpp"
#include "squeezesim/random.hpp"

namespace squeeze {

namespace {

double inv(double r) { return r > 0 ? 1.0 / r : std::numeric_limits<double>::infinity(); }

// The four Raman channels as (probability, alpha difference) pairs, in the
// order up->down, down->up, up->1, down->1.
std::array<double, 4> channel_terms(const TransitionProbs& tp, const Alphas& a, bool squared) {
    const double d_ud = a.down - a.up, d_du = a.up - a.down;
    const double d_u1 = a.one - a.up, d_d1 = a.one - a.down;
    auto f = [&](double p, double d) { return squared ? p * d * d : p * d; };
    return {f(tp.p_ud, d_ud), f(tp.p_du, d_du), f(tp.p_u1, d_u1), f(tp.p_d1, d_d1)};
}

}  // namespace

Alphas balanced_alphas(double n, const CavityParams& cav, double c1) {
    return {alpha_per_atom(SpinLevel::up, n / 2, cav, c1), alpha_per_atom(SpinLevel::down, n / 2, cav, c1),
            alpha_per_atom(SpinLevel::one, n / 2, cav, c1)};
}

double model_r(double m_t, const NoiseCoeffs& c) {
    if (!(m_t > 0)) throw std::domain_error("model_r: m_t must be positive");
    return c.r_psn / m_t + c.r_tf + c.r_q * m_t + c.r_c * m_t * m_t;
}

NoiseCoeffs scaled_coeffs(const NoiseCoeffs& c, double n, double reference_n) {
    if (!(n > 0 && reference_n > 0)) throw std::domain_error("scaled_coeffs: atom numbers must be positive");
    const double k = reference_n / n;
    return {c.r_psn * k, c.r_tf * k, c.r_q * k, c.r_c * k};
}

double pop_noise_quantum(double m_s, double n, const TransitionProbs& tp, const Alphas& a, double beta) {
    if (m_s < 0) throw std::domain_error("pop_noise_quantum: negative m_s");
    double s = 0;
    for (double t : channel_terms(tp, a, true)) s += t;
    return beta * m_s / (n / 4) * s / (a.up * a.up);
}

double pop_noise_classical(double m_s, double frac, double n, const TransitionProbs& tp, const Alphas& a) {
    if (m_s < 0 || frac < 0) throw std::domain_error("pop_noise_classical: negative input");
    double s = 0;
    for (double t : channel_terms(tp, a, false)) s += t;
    const double dm = frac * m_s;
    return dm * dm / (n / 4) * s * s / (a.up * a.up);
}

double population_cancellation_factor(const TransitionProbs& tp, const Alphas& a) {
    double s = 0, sa = 0;
    for (double t : channel_terms(tp, a, false)) {
        s += t;
        sa += std::abs(t);
    }
    return sa * sa / (s * s);
}

RecoilTerms recoil_noise(double m_s, double frac, double n, double eps_hz, double alpha_up_hz, double beta) {
    if (m_s < 0) throw std::domain_error("recoil_noise: negative m_s");
    const double norm = alpha_up_hz * alpha_up_hz * n / 4;
    const double dc = frac * m_s * eps_hz;
    return {beta * m_s * eps_hz * eps_hz / norm, dc * dc / norm};
}

double opto_decay_time(double delta_p, const CavityParams& cav, double tau0, double asymmetry) {
    if (!(tau0 > 0)) throw std::domain_error("opto_decay_time: tau0 must be positive");
    const double tau = tau0 * (1 + asymmetry * delta_p / (cav.kappa / 2));
    return std::max(tau, 1e-3 * tau0);
}

Eigen::VectorXd opto_ringing_trace(double delta_p, const Eigen::VectorXd& t_grid, const CavityParams& cav,
                                   double amp, double tau0, double asymmetry) {
    const double tau = opto_decay_time(delta_p, cav, tau0, asymmetry);
    return amp * ((-t_grid.array() / tau).exp() * (cav.omega_ax * t_grid.array()).cos()).matrix();
}

double opto_noise_term(double m_t, double n, const NoiseModel& m) {
    if (m_t < 0) throw std::domain_error("opto_noise_term: negative m_t");
    return m.opto_coefficient() * m_t * m_t * (m.reference_n / n);
}

double spectroscopic_enhancement(double r, double contrast, double initial_contrast) {
    if (!(r > 0)) throw std::domain_error("spectroscopic_enhancement: R must be positive");
    if (!(contrast > 0 && initial_contrast <= 1 && contrast <= initial_contrast * (1 + 1e-12)))
        throw std::domain_error("spectroscopic_enhancement: need 0 < C <= Ci <= 1");
    return contrast * contrast / (initial_contrast * r);
}

BackActionTerms explicit_backaction(double m_t, double n, const SimParams& p) {
    const auto& cav = p.cavity;
    const double m_s = scattered_ratio(n / 2, cav) * m_t;
    const Alphas a = balanced_alphas(n, cav, p.model.c1);
    const double frac = p.probe.ms_classical_frac;
    const RecoilTerms rec = recoil_noise(m_s, frac, n, cav.recoil_shift_hz, a.up / kTwoPi, p.model.beta);
    return {opto_noise_term(m_t, n, p.model), rec.classical, pop_noise_classical(m_s, frac, n, p.transition, a),
            rec.quantum, pop_noise_quantum(m_s, n, p.transition, a, p.model.beta)};
}

ResidualCoeffs residual_backaction(const SimParams& p) {
    const double m = p.model.opto_ref_mt;
    const BackActionTerms t = explicit_backaction(m, p.model.reference_n, p);
    const double c_expl = (t.r_o + t.r_ext_c + t.r_pop_c) / (m * m);
    const double q_expl = (t.r_ext_q + t.r_pop_q) / m;
    return {std::max(0.0, p.noise.r_q - q_expl), std::max(0.0, p.noise.r_c - c_expl)};
}

double BudgetReport::at(const std::string& term) const {
    for (const auto& r : rows)
        if (r.term == term) return r.r_inv;
    throw std::out_of_range("budget term '" + term + "'");
}

std::string BudgetReport::to_table() const {
    std::string out = "term,R_inv\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.10g", r.r_inv);
        out += r.term + "," + buf + "\n";
    }
    return out;
}

BudgetReport budget_report(const SimParams& p, double m_t) {
    if (!(m_t > 0)) throw std::domain_error("budget_report: m_t must be positive");
    const double n = p.ensemble.n_effective;
    const NoiseCoeffs c = scaled_coeffs(p.noise, n, p.model.reference_n);
    const BackActionTerms t = explicit_backaction(m_t, n, p);
    BudgetReport rep;
    rep.m_t = m_t;
    rep.n = n;
    rep.rows = {
        {"Observed Optimum", inv(model_r(m_t, c))},
        {"Photon Shot Noise r_PSN", inv(c.r_psn / m_t)},
        {"Technical Noise Floor R_t", inv(c.r_tf)},
        {"Laser Linewidth", p.model.laser_linewidth_r_inv},
        {"Classical Noise r_c", inv(c.r_c * m_t * m_t)},
        {"Variable Damping R_o", inv(t.r_o)},
        {"Photon Recoil R_ext,c", inv(t.r_ext_c)},
        {"Population Change R_pop,c", inv(t.r_pop_c)},
        {"Quantum Noise r_q", inv(c.r_q * m_t)},
        {"Photon Recoil R_ext,q", inv(t.r_ext_q)},
        {"Population Diffusion R_pop,q", inv(t.r_pop_q)},
    };
    return rep;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter) {
    const Eigen::Index n = a.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(n, false);
    const double tol = 1e-12 * std::max(1.0, a.norm() * b.norm());

    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[j]) idx.push_back(j);
        Eigen::MatrixXd ap(a.rows(), idx.size());
        for (size_t k = 0; k < idx.size(); ++k) ap.col(k) = a.col(idx[k]);
        const Eigen::VectorXd sp = ap.colPivHouseholderQr().solve(b);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
        for (size_t k = 0; k < idx.size(); ++k) s(idx[k]) = sp(k);
        return s;
    };

    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[j] && w(j) > wmax) {
                wmax = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[best] = true;
        Eigen::VectorXd s = solve_passive();
        for (int inner = 0; inner < max_iter; ++inner) {
            double step = 1;
            bool blocked = false;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j] && s(j) <= 0) {
                    blocked = true;
                    step = std::min(step, x(j) / (x(j) - s(j)));
                }
            if (!blocked) break;
            x += step * (s - x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j] && x(j) <= 1e-300) {
                    passive[j] = false;
                    x(j) = 0;
                }
            s = solve_passive();
        }
        x = s;
    }
    return x;
}

NoiseCoeffs fit_r_point(const std::vector<RPoint>& pts) {
    if (pts.size() < 4) throw FitError("fit_r: need at least 4 points");
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& p : pts) {
        if (!(p.m_t > 0 && p.r > 0)) throw FitError("fit_r: m_t and R must be positive");
        lo = std::min(lo, p.m_t);
        hi = std::max(hi, p.m_t);
    }
    if (hi < 10 * lo * (1 - 1e-12)) throw FitError("fit_r: m_t must span at least a decade");

    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pts[i];
        const double sw = std::sqrt(p.weight > 0 ? p.weight : 1.0 / (p.r * p.r));
        a.row(i) << sw / p.m_t, sw, sw * p.m_t, sw * p.m_t * p.m_t;
        b(i) = sw * p.r;
    }
    const Eigen::VectorXd scale = a.colwise().norm().transpose();
    if ((scale.array() <= 0).any()) throw FitError("fit_r: degenerate design matrix");
    const Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(as);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) throw FitError("fit_r: degenerate design matrix");
    const Eigen::VectorXd x = nnls(as, b).cwiseQuotient(scale);
    return {x(0), x(1), x(2), x(3)};
}

FitResult fit_r(const std::vector<RPoint>& pts, int bootstrap, std::uint64_t seed) {
    FitResult res;
    res.coeffs = fit_r_point(pts);
    if (bootstrap <= 0) {
        const auto& c = res.coeffs;
        res.lower = res.upper = {c.r_psn, c.r_tf, c.r_q, c.r_c};
        return res;
    }
    const size_t n = pts.size();
    const double infl = n > 4 ? std::sqrt(double(n) / double(n - 4)) : 1.0;
    std::vector<double> fitted(n), rel(n);
    for (size_t i = 0; i < n; ++i) {
        fitted[i] = model_r(pts[i].m_t, res.coeffs);
        rel[i] = infl * (pts[i].r - fitted[i]) / fitted[i];
    }
    std::array<std::vector<double>, 4> draws;
    for (int b = 0; b < bootstrap; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<RPoint> rs = pts;
        bool ok = true;
        for (size_t i = 0; i < n; ++i) {
            const size_t j = std::min(n - 1, static_cast<size_t>(rng.uniform() * n));
            rs[i].r = fitted[i] * (1 + rel[j]);
            if (!(rs[i].r > 0)) ok = false;
        }
        if (!ok) continue;
        try {
            const NoiseCoeffs c = fit_r_point(rs);
            draws[0].push_back(c.r_psn);
            draws[1].push_back(c.r_tf);
            draws[2].push_back(c.r_q);
            draws[3].push_back(c.r_c);
        } catch (const FitError&) {
        }
    }
    res.resamples = static_cast<int>(draws[0].size());
    if (res.resamples < 2) throw FitError("fit_r: bootstrap produced no valid resamples");
    for (int k = 0; k < 4; ++k) {
        auto& d = draws[k];
        std::sort(d.begin(), d.end());
        auto q = [&](double p) {
            const double pos = p * (d.size() - 1);
            const size_t i = static_cast<size_t>(pos);
            const double f = pos - i;
            return i + 1 < d.size() ? d[i] * (1 - f) + d[i + 1] * f : d[i];
        };
        res.lower[k] = q(0.025);
        res.upper[k] = q(0.975);
    }
    return res;
}

}  // namespace squeeze
