#include <cmath>
#include <vector>

#include "doctest.h"
#include "squeezesim/noise_budget.hpp"
#include "squeezesim/sequence.hpp"
#include "squeezesim/spin_state.hpp"

using namespace squeeze;

namespace {

// Probe with only photon shot noise plus the quantum diffusion channels.
SimParams ideal_probe() {
    SimParams p;
    p.noise.r_tf = 0;
    p.noise.r_c = 0;
    p.noise.r_q = 0;
    p.probe.ms_classical_frac = 0;
    p.probe.detuning_spread = 0;
    p.model.opto_r_inv = 1e300;
    return p;
}

double grid_moment(double mu, double v, double obs, double sm2, double* var) {
    const double sd = std::sqrt(v), lo = mu - 10 * sd, h = 20 * sd / 511;
    double w0 = 0, w1 = 0, w2 = 0;
    for (int i = 0; i < 512; ++i) {
        const double x = lo + h * i;
        const double w = std::exp(-0.5 * (x - mu) * (x - mu) / v - 0.5 * (obs - x) * (obs - x) / sm2);
        w0 += w, w1 += w * x, w2 += w * x * x;
    }
    *var = w2 / w0 - (w1 / w0) * (w1 / w0);
    return w1 / w0;
}

}  // namespace

TEST_CASE("coherent spin state moments") {
    EnsembleParams ens;
    const auto s = prepare_css(4.8e5, ens);
    CHECK(s.jz_var() == doctest::Approx(1.2e5));
    CHECK(s.contrast == doctest::Approx(0.97));
    CHECK(prepare_css(4, ens).jz_var() == doctest::Approx(1));
    CHECK(std::sqrt(prepare_css(4.3e5, ens).jz_var()) == doctest::Approx(327.9).epsilon(1e-4));
    CHECK_THROWS(prepare_css(0, ens));
}

TEST_CASE("pi rotation of a pumped state") {
    EnsembleParams ens;
    Rng rng(1);
    const double n = 1e5;
    auto s = optically_pump(n, SpinLevel::down, ens, rng);
    CHECK(s.pop_down() == n);
    s = rotate(s, M_PI, 0);
    CHECK(s.pop_up() == doctest::Approx(n * (1 + ens.initial_contrast) / 2).epsilon(1e-12));
    CHECK(s.pops.sum() == doctest::Approx(n));
}

TEST_CASE("small rotation moves the mean by C N psi / 2") {
    const double n = 4.3e5, psi = 2.3e-3, c = 0.8;
    const auto s = make_state(n, 0, n / 40, n / 4 * 10, c);
    // rotation about the axis perpendicular to the Bloch vector in the equator
    double best = 0;
    for (double phase : {0.0, M_PI / 2, M_PI, 3 * M_PI / 2}) {
        const auto r = rotate(s, psi, phase);
        best = std::max(best, std::abs(r.jz_mean() - s.jz_mean()));
    }
    CHECK(best == doctest::Approx(c * n / 2 * std::sin(psi)).epsilon(1e-9));
}

TEST_CASE("rotations preserve length and covariance invariants") {
    Rng rng(3);
    auto s = make_state(1e5, 120, 2e3, 4e5, 0.9);
    const double len = s.mean.norm();
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(s.cov).eigenvalues();
    for (int i = 0; i < 50; ++i) s = rotate(s, rng.uniform() * 7, rng.uniform() * 7);
    CHECK(s.mean.norm() == doctest::Approx(len).epsilon(1e-10));
    const Eigen::Vector3d ev2 = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(s.cov).eigenvalues();
    CHECK((ev2 - ev).norm() <= 1e-9 * ev.norm());
    CHECK(heisenberg_check(s));
}

TEST_CASE("Kalman update matches a 512-point grid posterior") {
    Rng rng(7);
    for (int c = 0; c < 200; ++c) {
        const double n = 4.8e5;
        const double mu = 500 * rng.normal(), v = n / 4 * (0.02 + rng.uniform());
        const double sm2 = n / 4 * (0.005 + 3 * rng.uniform());
        const double obs = mu + std::sqrt(v + sm2) * rng.normal();
        double gv = 0;
        const double gm = grid_moment(mu, v, obs, sm2, &gv);
        const auto post = conditional_update(make_state(n, mu, v, n / 4, 1), obs, sm2);
        CHECK(post.jz_mean() == doctest::Approx(gm).epsilon(1e-3).scale(std::sqrt(gv)));
        CHECK(post.jz_var() == doctest::Approx(gv).epsilon(1e-3));
        CHECK(heisenberg_check(post));
    }
}

TEST_CASE("uninformative measurement leaves the prior") {
    const auto s = make_state(1e5, 40, 2.5e4, 2.5e4, 1);
    const auto post = conditional_update(s, 1e4, 1e30);
    CHECK(post.jz_mean() == doctest::Approx(40).epsilon(1e-9));
    CHECK(post.jz_var() == doctest::Approx(2.5e4).epsilon(1e-9));
    CHECK_THROWS(conditional_update(s, 0, 0));
}

TEST_CASE("shot-noise read variance gives r_psn") {
    const SimParams p;
    const double n = p.ensemble.n_effective, mt = 4.1e4;
    // two independent windows: Var(Nf - Np) / (N/4)
    CHECK(2 * read_variance(mt, p) / (n / 4) == doctest::Approx(1.0 / 32).epsilon(1e-9));
    Rng rng(5);
    ProbeContext ctx;
    auto s = sample_realization(prepare_css(n, p.ensemble), rng);
    const auto r = probe_measure(s, p.probe, p, ctx, rng);
    const double sm2 = read_variance(mt, p);
    CHECK(r.state.jz_var() == doctest::Approx(1 / (1 / (n / 4) + 1 / sm2)).epsilon(0.02));
    CHECK(heisenberg_check(r.state));
}

TEST_CASE("vanishing probe leaves the observer state") {
    SimParams p = ideal_probe();
    p.model.raman = false;
    p.model.recoil = false;
    Rng rng(9);
    ProbeContext ctx;
    const auto s = sample_realization(prepare_css(4.8e5, p.ensemble), rng);
    ProbeConfig pc = p.probe;
    pc.m_t = 1;  // read variance ~ 600 x the projection noise
    const auto r = probe_measure(s, pc, p, ctx, rng);
    CHECK(r.state.jz_var() == doctest::Approx(s.jz_var()).epsilon(3e-3));
    pc.m_t = 0;
    CHECK_THROWS(probe_measure(s, pc, p, ctx, rng));
}

TEST_CASE("differenced measurements match the analytic variance") {
    const SimParams p = ideal_probe();
    const double n = p.ensemble.n_effective, mt = 4.1e4;
    const auto proto = parse_protocol("pump down / pulse 90 0 / probe Np / probe Nf");
    const auto rs = run_trials(proto, p, 100000, 2024);
    const double r = spin_noise_reduction(rs, "Nf", "Np");
    const auto ba = explicit_backaction(mt, n, p);
    const double expected = p.noise.r_psn / mt + ba.r_pop_q + ba.r_ext_q;
    CHECK(r == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("raman diffusion") {
    Rng rng(11);
    const double n = 4.8e5, ms = 4.1e4;
    const auto s = sample_realization(prepare_css(n, EnsembleParams{}), rng);
    const auto same = apply_raman_diffusion(s, ms, TransitionProbs::none(), rng);
    CHECK(same.pops == s.pops);
    CHECK(same.cov == s.cov);

    // single window, unweighted: Var(dN_up) = M_s (p_ud u + p_du d + p_u1 u) with u = d = 1
    const TransitionProbs tp;
    std::vector<double> d;
    for (int i = 0; i < 100000; ++i) d.push_back(apply_raman_diffusion(s, ms, tp, rng).pop_up() - s.pop_up());
    const double u = s.pop_up() / (n / 2), dn = s.pop_down() / (n / 2);
    const double var = ms * (tp.p_ud * u + tp.p_du * dn + tp.p_u1 * u);
    CHECK(sample_variance(d) == doctest::Approx(var).epsilon(0.03));

    for (int i = 0; i < 100; ++i) {
        const auto t = apply_raman_diffusion(s, ms, tp, rng, i % 2 == 0);
        CHECK(t.pops.sum() == doctest::Approx(n).epsilon(1e-12));
        CHECK((t.pops.array() >= 0).all());
    }
    CHECK_THROWS(apply_raman_diffusion(s, -1, tp, rng));
}

TEST_CASE("heisenberg check") {
    EnsembleParams unit;
    unit.initial_contrast = 1;
    auto css = prepare_css(1e4, unit);
    CHECK(heisenberg_check(css));
    css.cov(1, 1) *= 0.999;  // equality case: any squeeze without anti-squeeze violates
    CHECK_FALSE(heisenberg_check(css));
    CHECK_FALSE(heisenberg_check(make_state(1e4, 0, 2.5e3, 0, 1)));

    SimParams p;
    Rng rng(13);
    for (double mt : {1e2, 1e3, 4.1e4, 3e5}) {
        ProbeContext ctx;
        ProbeConfig pc = p.probe;
        pc.m_t = mt;
        const auto r = probe_measure(sample_realization(prepare_css(4.8e5, p.ensemble), rng), pc, p, ctx, rng);
        CHECK(heisenberg_check(r.state));
        CHECK(r.state.jy_var() >= r.state.jz_var());
    }
}

TEST_CASE("random operation sequences keep the invariants") {
    Rng rng(17);
    SimParams p;
    p.model.light_shift = 1e-6;
    for (int seq = 0; seq < 300; ++seq) {
        const double n = 1e3 * std::pow(10, 3 * rng.uniform());
        auto s = optically_pump(n, rng.uniform() < 0.5 ? SpinLevel::down : SpinLevel::up, p.ensemble, rng);
        ProbeContext ctx;
        for (int k = 0; k < 15; ++k) {
            const double u = rng.uniform();
            if (u < 0.4) {
                s = rotate(s, 7 * rng.uniform(), 7 * rng.uniform());
            } else if (u < 0.6) {
                s = apply_raman_diffusion(s, 2e4 * rng.uniform(), p.transition, rng);
            } else if (u < 0.75) {
                s = conditional_update(s, s.jz_mean() + rng.normal() * std::sqrt(n) / 2, n * rng.uniform() + 1);
            } else {
                ProbeConfig pc = p.probe;
                pc.m_t = 1e5 * rng.uniform() + 1;
                s = probe_measure(s, pc, p, ctx, rng).state;
            }
            REQUIRE(heisenberg_check(s));
            REQUIRE(s.pops.sum() == doctest::Approx(n).epsilon(1e-12));
            REQUIRE((s.pops.array() >= 0).all());
            REQUIRE(s.jz_var() >= 0);
        }
    }
}

TEST_CASE("pi pulse echoes reversible dephasing") {
    SimParams p = ideal_probe();
    p.model.raman = false;
    p.model.recoil = false;
    p.model.light_shift = 2e-5;
    Rng rng(19);
    ProbeContext ctx;
    auto s = rotate(optically_pump(1e5, SpinLevel::down, p.ensemble, rng), M_PI / 2, 0);
    s = probe_measure(s, p.probe, p, ctx, rng).state;
    CHECK(std::abs(s.dephasing) > 0.5);
    const double before = s.effective_contrast() / s.contrast;
    CHECK(before < 0.9);
    s = rotate(s, M_PI, 0);
    s = probe_measure(s, p.probe, p, ctx, rng).state;
    CHECK(std::abs(s.dephasing) < 1e-12);
    CHECK(s.effective_contrast() == doctest::Approx(s.contrast));

    // without the echo the second window doubles the spread
    auto t = rotate(optically_pump(1e5, SpinLevel::down, p.ensemble, rng), M_PI / 2, 0);
    t = probe_measure(t, p.probe, p, ctx, rng).state;
    t = probe_measure(t, p.probe, p, ctx, rng).state;
    CHECK(t.dephasing == doctest::Approx(2 * p.model.light_shift * p.probe.m_t));
}
