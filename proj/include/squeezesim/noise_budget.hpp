#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "squeezesim/params.hpp"

namespace squeeze {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-atom dressed-frequency shifts; only ratios to `up` matter below.
struct Alphas {
    double up = 0, down = 0, one = 0;
};
Alphas balanced_alphas(double n, const CavityParams& cav, double c1 = 2.0 / 3);

double model_r(double m_t, const NoiseCoeffs& c);
// Coefficients at ensemble size n, given they hold at reference_n with
// atom-unit noise variances fixed.
NoiseCoeffs scaled_coeffs(const NoiseCoeffs& c, double n, double reference_n);

double pop_noise_quantum(double m_s, double n, const TransitionProbs& tp, const Alphas& a,
                         double beta = 2.0 / 3);
double pop_noise_classical(double m_s, double frac, double n, const TransitionProbs& tp, const Alphas& a);
// (sum |terms|)^2 / (sum terms)^2 of the classical bracket.
double population_cancellation_factor(const TransitionProbs& tp, const Alphas& a);

struct RecoilTerms {
    double quantum = 0, classical = 0;
};
RecoilTerms recoil_noise(double m_s, double frac, double n, double eps_hz, double alpha_up_hz,
                         double beta = 2.0 / 3);

double opto_decay_time(double delta_p, const CavityParams& cav, double tau0, double asymmetry = 0.5);
Eigen::VectorXd opto_ringing_trace(double delta_p, const Eigen::VectorXd& t_grid, const CavityParams& cav,
                                   double amp, double tau0, double asymmetry = 0.5);
double opto_noise_term(double m_t, double n, const NoiseModel& m);

double spectroscopic_enhancement(double r, double contrast, double initial_contrast);

// R contributions of the channels the simulator models explicitly.
struct BackActionTerms {
    double r_o = 0, r_ext_c = 0, r_pop_c = 0, r_ext_q = 0, r_pop_q = 0;
};
BackActionTerms explicit_backaction(double m_t, double n, const SimParams& p);
// Parts of the fitted r_q / r_c left after the explicit channels, in R units
// at model.reference_n.
struct ResidualCoeffs {
    double r_q = 0, r_c = 0;
};
ResidualCoeffs residual_backaction(const SimParams& p);

struct BudgetRow {
    std::string term;
    double r_inv;
};
struct BudgetReport {
    double m_t = 0;
    double n = 0;
    std::vector<BudgetRow> rows;
    double at(const std::string& term) const;
    std::string to_table() const;
};
BudgetReport budget_report(const SimParams& p, double m_t);

// Nonnegative least squares (Lawson-Hanson).
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter = 200);

struct RPoint {
    double m_t = 0, r = 0, weight = 0;  // weight <= 0 selects the 1/R^2 default
};
struct FitResult {
    NoiseCoeffs coeffs;
    std::array<double, 4> lower{}, upper{};  // 95% bootstrap, order psn, tf, q, c
    int resamples = 0;
};
NoiseCoeffs fit_r_point(const std::vector<RPoint>& pts);
FitResult fit_r(const std::vector<RPoint>& pts, int bootstrap = 1000, std::uint64_t seed = 1);

}  // namespace squeeze
