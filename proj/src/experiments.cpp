#include "squeezesim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "squeezesim/physics.hpp"
#include "squeezesim/random.hpp"

namespace squeeze {

namespace {

constexpr double kPi = kTwoPi / 2;

double mean_of(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / x.size();
}

// Linear regression slope of y on x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx <= 0) throw std::invalid_argument("slope: x values must differ");
    return sxy / sxx;
}

double bisect(auto&& f, double a, double b) {
    double fa = f(a);
    for (int i = 0; i < 200 && b - a > 1e-12 * std::abs(b); ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double contrast_model(const SimParams& p, double m_t) {
    const double n = p.ensemble.n_effective;
    const double x = p.model.excess_dephasing * m_t;
    return p.ensemble.initial_contrast * std::exp(-scattered_photons(m_t, n, p.cavity) / n) * std::exp(-0.5 * x * x);
}

double predicted_w_inv(const SimParams& p, double m_t) {
    const NoiseCoeffs c = scaled_coeffs(p.noise, p.ensemble.n_effective, p.model.reference_n);
    const double ci = p.ensemble.initial_contrast;
    const double cm = contrast_model(p, m_t);
    return cm * cm / (ci * model_r(m_t, c));
}

Optimum max_predicted_w_inv(const SimParams& p, double lo, double hi) {
    return maximize_log([&](double m) { return predicted_w_inv(p, m); }, lo, hi);
}

double calibrate_excess_dephasing(const SimParams& p, double target_w_inv) {
    SimParams q = p;
    auto excess = [&](double x) {
        q.model.excess_dephasing = x;
        return max_predicted_w_inv(q).value - target_w_inv;
    };
    if (excess(0) < 0) throw std::domain_error("calibrate_excess_dephasing: target above the scattering-only optimum");
    double hi = 1e-6;
    while (excess(hi) > 0) {
        hi *= 2;
        if (hi > 1) throw std::domain_error("calibrate_excess_dephasing: no bracket");
    }
    return bisect(excess, 0.0, hi);
}

double tune_probe_for_enhancement(const SimParams& p, double target_w_inv) {
    const Optimum best = max_predicted_w_inv(p);
    if (best.value < target_w_inv) throw std::domain_error("tune_probe_for_enhancement: target W^-1 unreachable");
    auto f = [&](double logm) { return predicted_w_inv(p, std::exp(logm)) - target_w_inv; };
    const double lo = std::log(1.0);
    if (f(lo) >= 0) return 1.0;
    return std::exp(bisect(f, lo, std::log(best.m_t)));
}

std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0 && hi >= lo) || points < 1) throw std::invalid_argument("log_grid: bad range");
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i)
        g[i] = points == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1));
    return g;
}

SweepResult squeezing_sweep(const SimParams& p, std::vector<double> m_t_list, int trials_per_point,
                            std::uint64_t master_seed, int threads, std::vector<RecordSet>* keep) {
    if (m_t_list.empty()) throw std::invalid_argument("squeezing_sweep: empty m_t list");
    std::sort(m_t_list.begin(), m_t_list.end());
    const double n = p.ensemble.n_effective;
    const NoiseCoeffs c = scaled_coeffs(p.noise, n, p.model.reference_n);
    SweepResult res;
    res.n = n;
    res.trials_per_point = trials_per_point;
    res.master_seed = master_seed;
    if (keep) keep->clear();
    for (size_t i = 0; i < m_t_list.size(); ++i) {
        const double m = m_t_list[i];
        const std::uint64_t seed = derive_seed(master_seed, i);
        RecordSet rs = run_trials(squeezing_protocol(m), p, trials_per_point, seed, threads);
        SweepRow row;
        row.m_t = m;
        row.r = spin_noise_reduction(rs, "Nf", "Np");
        row.contrast = contrast_model(p, m);
        row.w_inv = spectroscopic_enhancement(row.r, row.contrast, p.ensemble.initial_contrast);
        row.r_model = model_r(m, c);
        row.r_psn = c.r_psn / m;
        row.r_tf = c.r_tf;
        row.r_q = c.r_q * m;
        row.r_c = c.r_c * m * m;
        row.backaction = explicit_backaction(m, n, p);
        res.point_seeds.push_back(seed);
        res.rows.push_back(row);
        if (keep) keep->push_back(std::move(rs));
    }
    return res;
}

FringeResult fit_fringe(const std::vector<double>& theta, const std::vector<double>& y) {
    const Eigen::Index n = static_cast<Eigen::Index>(theta.size());
    if (n < 4 || y.size() != theta.size()) throw FitError("fit_fringe: need >= 4 samples");
    const auto [lo, hi] = std::minmax_element(theta.begin(), theta.end());
    if (*hi - *lo < kPi * (1 - 1e-9)) throw FitError("fit_fringe: theta must span >= pi");
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) << 1, std::cos(theta[i]), std::sin(theta[i]);
        b(i) = y[i];
    }
    const Eigen::Matrix3d xtx = x.transpose() * x;
    Eigen::LDLT<Eigen::Matrix3d> ldlt(xtx);
    if (ldlt.info() != Eigen::Success || std::abs(xtx.determinant()) < 1e-12 * std::pow(xtx.norm(), 3))
        throw FitError("fit_fringe: singular design");
    const Eigen::Vector3d beta = ldlt.solve(x.transpose() * b);
    const double rss = (b - x * beta).squaredNorm();
    const double s2 = n > 3 ? rss / (n - 3) : 0;
    const Eigen::Matrix3d cov = s2 * ldlt.solve(Eigen::Matrix3d::Identity());
    const double a = beta(0), amp = std::hypot(beta(1), beta(2));
    if (!(a > 0)) throw FitError("fit_fringe: nonpositive offset");
    FringeResult r;
    r.offset = a;
    r.amplitude = amp;
    r.contrast = amp / a;
    r.samples = static_cast<int>(n);
    // delta method on C = sqrt(B^2 + D^2)/A
    Eigen::Vector3d grad(-amp / (a * a), amp > 0 ? beta(1) / (amp * a) : 0, amp > 0 ? beta(2) / (amp * a) : 0);
    r.error = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
    return r;
}

FringeResult contrast_fringe(const SimParams& p, double m_t, const std::vector<double>& theta_grid, int trials,
                             std::uint64_t master_seed, double readout_mt, int threads) {
    if (theta_grid.size() < 6) throw std::invalid_argument("contrast_fringe: need >= 6 grid points");
    const auto [mn, mx] = std::minmax_element(theta_grid.begin(), theta_grid.end());
    if (*mx - *mn < kPi * (1 - 1e-9)) throw std::invalid_argument("contrast_fringe: grid must span >= pi");
    if (m_t < 0 || trials < 1) throw std::invalid_argument("contrast_fringe: bad m_t or trials");
    const double readout = readout_mt > 0 ? readout_mt : p.probe.m_t;
    std::vector<double> th, y;
    for (size_t i = 0; i < theta_grid.size(); ++i) {
        Protocol proto;
        proto.steps.push_back(PumpStep{SpinLevel::down});
        proto.steps.push_back(PulseStep{kPi / 2, 0});
        if (m_t > 0) proto.steps.push_back(ProbeStep{"P", m_t});
        proto.steps.push_back(PulseStep{kPi / 2, theta_grid[i]});
        proto.steps.push_back(ProbeStep{"R", readout});
        const RecordSet rs = run_trials(proto, p, trials, derive_seed(master_seed, i), threads);
        for (const auto& t : rs.trials) {
            th.push_back(theta_grid[i]);
            y.push_back(t.at("R").n_up);
        }
    }
    return fit_fringe(th, y);
}

PhaseDetectionResult phase_detection(const SimParams& p, double psi, bool premeasure, int trials,
                                     std::uint64_t master_seed, double m_t, double target_w_inv, int threads,
                                     int bins) {
    if (trials < 1000) throw std::invalid_argument("phase_detection: need >= 1000 trials");
    if (psi < 0) throw std::invalid_argument("phase_detection: psi must be >= 0");
    PhaseDetectionResult res;
    res.premeasure = premeasure;
    res.psi = psi;
    res.trials = trials;
    res.n = p.ensemble.n_effective;
    res.m_t = m_t > 0 ? m_t : premeasure ? tune_probe_for_enhancement(p, target_w_inv) : p.probe.m_t;

    auto protocol = [&](double angle) {
        Protocol proto;
        proto.steps.push_back(PumpStep{SpinLevel::down});
        proto.steps.push_back(PulseStep{kPi / 2, 0});
        if (premeasure) proto.steps.push_back(ProbeStep{"Np", res.m_t});
        proto.steps.push_back(PulseStep{angle, 0});
        proto.steps.push_back(ProbeStep{"Nf", res.m_t});
        return proto;
    };
    auto quantity = [&](const RecordSet& rs) {
        std::vector<double> q;
        for (const auto& t : rs.trials) q.push_back(t.at("Nf").n_up - (premeasure ? t.at("Np").n_up : res.n / 2));
        return q;
    };
    const auto qa = quantity(run_trials(protocol(psi), p, trials, derive_seed(master_seed, 1), threads));
    const auto qr = quantity(run_trials(protocol(0), p, trials, derive_seed(master_seed, 0), threads));

    res.mean_applied = mean_of(qa);
    res.mean_reference = mean_of(qr);
    res.sd_applied = std::sqrt(sample_variance(qa));
    res.sd_reference = std::sqrt(sample_variance(qr));
    res.threshold = 0.5 * (res.mean_applied + res.mean_reference);
    const bool up = res.mean_applied >= res.mean_reference;
    long errors = 0;
    for (double v : qa) errors += up ? (v < res.threshold) : (v >= res.threshold);
    for (double v : qr) errors += up ? (v >= res.threshold) : (v < res.threshold);
    res.error_rate = double(errors) / (2.0 * trials);

    auto& h = res.histogram;
    h.lo = std::min(*std::min_element(qa.begin(), qa.end()), *std::min_element(qr.begin(), qr.end()));
    h.hi = std::max(*std::max_element(qa.begin(), qa.end()), *std::max_element(qr.begin(), qr.end()));
    h.applied.assign(bins, 0);
    h.reference.assign(bins, 0);
    const double w = (h.hi - h.lo) / bins;
    auto bin = [&](double v) { return w > 0 ? std::clamp(static_cast<int>((v - h.lo) / w), 0, bins - 1) : 0; };
    for (double v : qa) ++h.applied[bin(v)];
    for (double v : qr) ++h.reference[bin(v)];
    return res;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("loglog_slope: needs >= 3 points");
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("loglog_slope: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return slope(lx, ly);
}

ScalingResult n_scaling(const SimParams& p, const std::vector<double>& n_list, int trials_per_point,
                        std::uint64_t master_seed, int points_per_decade, double m_lo, double m_hi, int threads) {
    const std::set<double> distinct(n_list.begin(), n_list.end());
    if (distinct.size() < 3) throw std::invalid_argument("n_scaling: slope fit needs >= 3 distinct N");
    if (*distinct.rbegin() < 2 * *distinct.begin()) throw std::invalid_argument("n_scaling: N range too narrow");
    if (points_per_decade < 2) throw std::invalid_argument("n_scaling: points_per_decade must be >= 2");
    const int points = static_cast<int>(std::ceil(points_per_decade * std::log10(m_hi / m_lo))) + 1;
    const auto grid = log_grid(m_lo, m_hi, points);

    ScalingResult res;
    std::vector<double> ns, dth2, dsql;
    for (size_t k = 0; k < n_list.size(); ++k) {
        SimParams q = p;
        q.ensemble.set_n(n_list[k]);
        std::vector<RecordSet> recs;
        const SweepResult sw = squeezing_sweep(q, grid, trials_per_point, derive_seed(master_seed, k), threads, &recs);

        ScalingPoint pt;
        pt.n = n_list[k];
        std::vector<RPoint> rp;
        size_t raw_best = 0;
        for (size_t i = 0; i < sw.rows.size(); ++i) {
            rp.push_back({sw.rows[i].m_t, sw.rows[i].r, 0});
            if (sw.rows[i].w_inv > sw.rows[raw_best].w_inv) raw_best = i;
        }
        pt.raw_max_w_inv = sw.rows[raw_best].w_inv;
        pt.fit = fit_r_point(rp);
        const double ci = q.ensemble.initial_contrast;
        const Optimum best = maximize_log(
            [&](double m) {
                const double c = contrast_model(q, m);
                return c * c / (ci * model_r(m, pt.fit));
            },
            m_lo, m_hi);
        pt.best_m_t = best.m_t;
        pt.best_w_inv = best.value;
        pt.dtheta2 = 1.0 / (best.value * pt.n);

        // projection noise: Var(Nd - Np) minus the probe noise seen in Var(Nf - Np)
        const RecordSet& rs = recs[raw_best];
        const double proj = 0.25 * (sample_variance(label_difference(rs, "Nd", "Np")) -
                                    sample_variance(label_difference(rs, "Nf", "Np")));
        pt.dtheta_sql = std::sqrt(std::max(proj, 0.0)) / (pt.n / 2);
        res.points.push_back(pt);
        ns.push_back(pt.n);
        dth2.push_back(pt.dtheta2);
        dsql.push_back(pt.dtheta_sql);
    }
    res.squeezed_slope = loglog_slope(ns, dth2);
    res.sql_slope = loglog_slope(ns, dsql);
    return res;
}

RamanCalibration raman_calibration(const SimParams& p, const std::vector<double>& m_t_grid, int trials,
                                   std::uint64_t master_seed, double readout_mt, int threads) {
    if (m_t_grid.empty()) throw std::invalid_argument("raman_calibration: empty grid");
    SimParams q = p;
    q.model.repump_one_to_up = true;
    const double readout = readout_mt > 0 ? readout_mt : p.probe.m_t;

    auto run = [&](double m, bool swap, std::uint64_t seed) {
        Protocol proto;
        proto.steps.push_back(PumpStep{SpinLevel::down});
        if (swap) proto.steps.push_back(PulseStep{kPi, 0});
        if (m > 0) proto.steps.push_back(ProbeStep{"X", m});
        if (swap) proto.steps.push_back(PulseStep{kPi, 0});
        proto.steps.push_back(ProbeStep{"R", readout});
        const RecordSet rs = run_trials(proto, q, trials, seed, threads);
        double s = 0;
        for (const auto& t : rs.trials) s += t.at("R").frequency_hz;
        return s / rs.trials.size();
    };

    RamanCalibration res;
    res.n = p.ensemble.n_effective;
    std::vector<double> ms, fd, fu;
    for (size_t i = 0; i < m_t_grid.size(); ++i) {
        const double m = m_t_grid[i];
        CalibrationPoint cp{m, run(m, false, derive_seed(master_seed, 2 * i)),
                            run(m, true, derive_seed(master_seed, 2 * i + 1))};
        res.points.push_back(cp);
        ms.push_back(m);
        fd.push_back(cp.down_hz);
        fu.push_back(cp.up_hz);
    }
    if (std::set<double>(ms.begin(), ms.end()).size() >= 2) {
        res.down_slope = slope(ms, fd);
        res.up_slope = -slope(ms, fu);
    }
    return res;
}

}  // namespace squeeze
