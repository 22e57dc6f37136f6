// Acceptance checks. One PASS/FAIL line per criterion; `--criterion k` runs a
// single one (that is how ctest invokes it). Tolerances live here, not in config.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "squeezesim/config.hpp"
#include "squeezesim/experiments.hpp"
#include "squeezesim/noise_budget.hpp"
#include "squeezesim/physics.hpp"
#include "squeezesim/sequence.hpp"
#include "squeezesim/spin_state.hpp"

using namespace squeeze;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

struct Verdict {
    bool ok;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

SimParams calibrated_params() {
    SimParams p;
    p.model.excess_dephasing = calibrate_excess_dephasing(p, 10.5);
    return p;
}

// --- 1: QPN frequency anchor
Verdict criterion1() {
    const CavityParams cav;
    const auto t0 = Clock::now();
    const double q = qpn_frequency_fluctuation(4.8e5, cav) / kTwoPi;
    const double dt = seconds_since(t0);
    const double target = 144e3, tol = 0.06;
    return {std::abs(q / target - 1) <= tol && dt < 1e-3,
            fmt("qpn/2pi = %.1f Hz (target %.0f +-%.0f%%), %.2g s", q, target, tol * 100, dt)};
}

// --- 2: scattered photons per transmitted photon
Verdict criterion2() {
    const CavityParams cav;
    const auto t0 = Clock::now();
    const double r = scattered_ratio(2.4e5, cav);
    const double dt = seconds_since(t0);
    return {within(r, 0.9, 1.1) && dt < 1e-3, fmt("M_s/M_t = %.4f (1.0 +- 0.1), %.2g s", r, dt)};
}

// --- 3: analytic budget synthesis
Verdict criterion3() {
    const auto t0 = Clock::now();
    const SimParams p;
    const double mt = 4.1e4;
    const double r_inv = 1 / model_r(mt, p.noise);
    const auto rep = budget_report(p, mt);
    const double ext_q = rep.at("Photon Recoil R_ext,q");
    const double ext_c = rep.at("Photon Recoil R_ext,c");
    const double opto = 1 / opto_noise_term(mt, p.ensemble.n_effective, p.model);
    const double pop_q = rep.at("Population Diffusion R_pop,q");
    const double dt = seconds_since(t0);
    const bool ok = std::abs(r_inv - 16.7) <= 2 && within(ext_q, 4.3e5, 5.3e5) && within(ext_c, 4.0e3, 5.0e3) &&
                    std::abs(opto - 620) <= 1e-6 * 620 && within(pop_q, 1.1e3, 2.6e3) && dt < 1;
    return {ok, fmt("R^-1 = %.2f, R_ext,q = %.4g, R_ext,c = %.4g, R_o = %.1f, R_pop,q = %.4g, %.2g s", r_inv, ext_q,
                    ext_c, opto, pop_q, dt)};
}

// --- 4: Monte Carlo optimum
Verdict criterion4() {
    const auto t0 = Clock::now();
    const SimParams p = calibrated_params();
    const auto res = squeezing_sweep(p, log_grid(1e3, 1e5, 15), 2000, 20240401);
    size_t br = 0, bw = 0;
    for (size_t i = 0; i < res.rows.size(); ++i) {
        if (res.rows[i].r < res.rows[br].r) br = i;
        if (res.rows[i].w_inv > res.rows[bw].w_inv) bw = i;
    }
    const double r_inv = 1 / res.rows[br].r, mt_r = res.rows[br].m_t, w = res.rows[bw].w_inv;
    const double dt = seconds_since(t0);
    // "near 4e4": the maximum must sit within a factor 2 of it.
    const bool ok = std::abs(r_inv - 16) <= 3 && within(mt_r, 2e4, 8e4) && within(w, 9, 13.5) && dt < 300;
    return {ok, fmt("max R^-1 = %.2f at M_t = %.3g, max W^-1 = %.2f at M_t = %.3g (excess %.3g rad/photon), %.1f s",
                    r_inv, mt_r, w, res.rows[bw].m_t, p.model.excess_dephasing, dt)};
}

// --- 5: single-shot phase detection
Verdict criterion5() {
    const auto t0 = Clock::now();
    SimParams p = calibrated_params();
    p.ensemble.set_n(4.3e5);
    const int trials = 10000;
    const auto css = phase_detection(p, 2.3e-3, false, trials, 11);
    const auto sq = phase_detection(p, 2.3e-3, true, trials, 12, 0, 7.5);
    const double dt = seconds_since(t0);
    const bool ok = within(css.error_rate, 0.20, 0.30) && within(sq.error_rate, 0.012, 0.032) && dt < 120;
    return {ok, fmt("error rate css %.4f [0.20,0.30], squeezed %.4f [0.012,0.032] at M_t = %.3g, %d trials each, %.1f s",
                    css.error_rate, sq.error_rate, sq.m_t, trials, dt)};
}

// --- 6: atom-number scaling
Verdict criterion6() {
    const auto t0 = Clock::now();
    const SimParams p = calibrated_params();
    const auto res = n_scaling(p, {6e4, 1.2e5, 2.4e5, 4.8e5}, 2000, 77);
    const double dt = seconds_since(t0);
    const bool ok = within(res.squeezed_slope, -2.2, -1.7) && std::abs(res.sql_slope + 0.5) <= 0.05 && dt < 900;
    return {ok, fmt("slope dtheta^2 = %.3f [-2.2,-1.7], SQL slope = %.3f (-0.5 +- 0.05), %.1f s", res.squeezed_slope,
                    res.sql_slope, dt)};
}

// --- 7: legacy transition probability
Verdict criterion7() {
    SimParams p;
    p.transition.p_ud = 0.6667;
    const double r_inv = budget_report(p, 4.1e4).at("Population Diffusion R_pop,q");
    return {std::abs(r_inv - 1.9) <= 0.4, fmt("diffusion-limited R^-1 = %.3f (1.9 +- 0.4)", r_inv)};
}

// --- 8: property suites
Verdict criterion8() {
    std::vector<std::string> failed;
    Rng rng(4242);
    SimParams sp;

    // Heisenberg bound and population conservation over random operation sequences.
    {
        bool heis = true, pops = true;
        for (int seq = 0; seq < 1000; ++seq) {
            const double n = 1e4 * std::pow(10, 2 * rng.uniform());
            EnsembleState s = rng.uniform() < 0.5 ? sample_realization(prepare_css(n, sp.ensemble), rng)
                                                  : optically_pump(n, SpinLevel::down, sp.ensemble, rng);
            ProbeContext ctx;
            for (int k = 0; k < 12; ++k) {
                const double u = rng.uniform();
                if (u < 0.35) {
                    s = rotate(s, kTwoPi * rng.uniform(), kTwoPi * rng.uniform());
                } else if (u < 0.6) {
                    s = conditional_update(s, s.jz_mean() + std::sqrt(n) * rng.normal(), n * rng.uniform() + 1);
                } else if (u < 0.8) {
                    s = apply_raman_diffusion(s, 1e4 * rng.uniform(), sp.transition, rng, rng.uniform() < 0.5);
                } else {
                    ProbeConfig pc = sp.probe;
                    pc.m_t = 1e3 + 1e5 * rng.uniform();
                    s = probe_measure(s, pc, sp, ctx, rng).state;
                }
                heis = heis && heisenberg_check(s);
                pops = pops && std::abs(s.pops.sum() - n) <= 1e-9 * n && (s.pops.array() >= 0).all();
            }
        }
        if (!heis) failed.push_back("heisenberg");
        if (!pops) failed.push_back("population");
    }

    // Kalman update against a 512-point grid posterior.
    {
        bool ok = true;
        for (int c = 0; c < 50; ++c) {
            const double n = 1e5, mu = 300 * rng.normal(), v = n / 4 * (0.05 + rng.uniform());
            const double sm2 = n / 4 * (0.01 + 2 * rng.uniform()), obs = mu + std::sqrt(v + sm2) * rng.normal();
            const auto post = conditional_update(make_state(n, mu, v, n / 4, 1), obs, sm2);
            const double sd = std::sqrt(v), lo = mu - 10 * sd, h = 20 * sd / 511;
            double w0 = 0, w1 = 0, w2 = 0;
            for (int i = 0; i < 512; ++i) {
                const double x = lo + h * i;
                const double w = std::exp(-0.5 * (x - mu) * (x - mu) / v - 0.5 * (obs - x) * (obs - x) / sm2);
                w0 += w, w1 += w * x, w2 += w * x * x;
            }
            const double gm = w1 / w0, gv = w2 / w0 - gm * gm;
            ok = ok && std::abs(post.jz_mean() - gm) <= 1e-3 * std::max(std::abs(gm), std::sqrt(gv)) &&
                 std::abs(post.jz_var() / gv - 1) <= 1e-3;
        }
        if (!ok) failed.push_back("bayes-grid");
    }

    // NNLS fit recovers noiseless coefficients.
    {
        const NoiseCoeffs truth{1300, 0.013, 2e-7, 8e-12};
        std::vector<RPoint> pts;
        for (double mt : log_grid(1e3, 1e5, 15)) pts.push_back({mt, model_r(mt, truth), 0});
        const auto f = fit_r_point(pts);
        const double rel = std::max({std::abs(f.r_psn / truth.r_psn - 1), std::abs(f.r_tf / truth.r_tf - 1),
                                     std::abs(f.r_q / truth.r_q - 1), std::abs(f.r_c / truth.r_c - 1)});
        if (!(rel < 1e-6)) failed.push_back(fmt("fit-recovery(%.2g)", rel));
    }

    // Thread-count invariance.
    {
        const auto proto = squeezing_protocol();
        const auto ref = run_trials(proto, sp, 64, 99, 1);
        for (int th : {2, 3, 8}) {
            const auto other = run_trials(proto, sp, 64, 99, th);
            if (other.trials != ref.trials) {
                failed.push_back(fmt("determinism(threads=%d)", th));
                break;
            }
        }
    }

    // Config echo fixed point, defaults and a perturbed config.
    {
        RunConfig c;
        c.sim.cavity.delta = kTwoPi * 187.3e6;
        c.sim.transition.p_ud = 0.6667;
        c.experiment.scaling_n = {5e4, 1e5};
        for (const RunConfig& cfg : {RunConfig{}, c}) {
            const std::string e1 = echo_config(cfg), e2 = echo_config(parse_config(e1));
            if (e1 != e2) failed.push_back("config-fixed-point");
        }
    }

    std::string detail = "heisenberg+population (1000 sequences), bayes grid, fit recovery, threads, config echo";
    if (!failed.empty()) {
        detail = "failed:";
        for (const auto& f : failed) detail += " " + f;
    }
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Verdict()>> all = {criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            which.push_back(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--criterion k]...\n");
            return 2;
        }
    }
    if (which.empty())
        for (int k = 1; k <= 8; ++k) which.push_back(k);

    int failures = 0;
    for (int k : which) {
        if (k < 1 || k > 8) {
            std::fprintf(stderr, "no criterion %d\n", k);
            return 2;
        }
        Verdict v{false, ""};
        try {
            v = all[k - 1]();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d: %s\n", v.ok ? "PASS" : "FAIL", k, v.detail.c_str());
        failures += !v.ok;
    }
    return failures ? 1 : 0;
}
