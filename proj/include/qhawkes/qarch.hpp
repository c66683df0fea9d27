#pragma once

#include "qhawkes/qarch_model.hpp"
#include "qhawkes/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qhawkes {

struct VarianceResult {
    double variance{0.0};
    bool floored{false};
    bool padded{false};
};

// history[0] = r_{t-1}, history[1] = r_{t-2}, ... Shorter histories are
// zero-padded when allowed. Results below floor_eps * sigma_inf2 are floored.
[[nodiscard]] VarianceResult qarch_variance(const QarchModel& model, std::span<const double> history,
                                            double floor_eps = 1e-3, bool allow_padding = false);

struct FilterResult {
    std::vector<double> variance;  // sigma_t^2 for every t, zero-padded before t = q
    std::size_t floored{0};
};

[[nodiscard]] FilterResult qarch_filter(const QarchModel& model, const std::vector<double>& returns,
                                        double floor_eps = 1e-3);

struct ResidualLaw {
    // nu <= 0 selects Gaussian residuals; otherwise unit-variance Student-t (nu > 2).
    double nu{0.0};
};

struct QarchSimulation {
    std::vector<double> returns;
    std::size_t floored{0};
};

[[nodiscard]] QarchSimulation simulate_qarch(const QarchModel& model, std::size_t n, std::uint64_t seed,
                                             const ResidualLaw& residuals = {}, std::size_t burn_in = 5000,
                                             double floor_eps = 1e-3);

// Unit-variance standardized Student-t draw.
[[nodiscard]] double standardized_t(double nu, Philox4x32& rng);

struct GmmOptions {
    bool fit_leverage{false};
    // Solve with a ridge once the moment matrix condition number exceeds this.
    double max_condition{1e12};
    bool require_normalized{true};
};

struct GmmResult {
    QarchModel model;
    double sigma_inf2_stderr{0.0};
    Eigen::MatrixXd kmat_stderr;
    // Leverage estimate and standard error; zero unless fit_leverage.
    Eigen::VectorXd leverage_fit;
    Eigen::VectorXd leverage_stderr;
    double condition{0.0};
    double ridge{0.0};
    double moment_residual{0.0};  // max |moment| at the solution
    std::string warning;
};

// Linear moment system E[(r_t^2 - sigma_t^2) x_t] = 0 for x_t in {1, r r products,
// [r]}; exactly identified, so least squares on the moments is the normal
// equations. Standard errors are heteroskedasticity-robust (sandwich).
// Needs at least 50 q^2 returns.
[[nodiscard]] GmmResult gmm_estimate(const std::vector<double>& returns, std::size_t q, const GmmOptions& options = {});

struct MleOptions {
    double floor_eps{1e-3};
    int max_iterations{400};
    double nu_init{0.0};  // 0: from the kurtosis of the init model's residuals
    bool require_normalized{true};
};

struct MleResult {
    QarchModel model;
    double nu_dof{0.0};
    double loglik{0.0};       // mean per observation
    double loglik_init{0.0};
    bool converged{false};
    int iterations{0};
    std::size_t floored{0};
    std::string message;
};

// Maximizes the Student-t log-likelihood of r_t = sigma_t xi_t over
// (sigma_inf2, K upper triangle, [leverage], log(nu - 2)) with L-BFGS.
[[nodiscard]] MleResult mle_student(const std::vector<double>& returns, std::size_t q, const QarchModel& init,
                                    const MleOptions& options = {});

// Mean Student-t log-likelihood per observation with the given floor.
[[nodiscard]] double student_loglik(const QarchModel& model, double nu, const std::vector<double>& returns,
                                    double floor_eps = 1e-3);

struct KernelFit {
    Eigen::VectorXd phi;
    Eigen::VectorXd k;
    double g{0.0};
    double alpha{0.0};
    double k0{0.0};
    double omega{0.0};
    double r2_phi{0.0};
    double r2_k{0.0};
    std::size_t excluded_phi{0};
    std::size_t excluded_k{0};
    double frobenius_residual{0.0};
    std::vector<double> objective_history;  // best start, one entry per sweep
};

// min || K - diag(phi) - k k^T ||_F over phi >= 0 and k, by alternating
// minimization from 5 seeded starts. k is returned with a non-negative sum.
[[nodiscard]] KernelFit rank_one_diag_fit(const Eigen::MatrixXd& kmat, std::uint64_t seed = 1);

// Log-space least squares: phi(tau) = g tau^-alpha, k(tau) = k0 exp(-omega tau).
[[nodiscard]] KernelFit parametric_fit(const KernelFit& fit);

struct Endogeneity {
    double sum_phi{0.0};
    double sum_k2{0.0};
    double trace{0.0};
};

// Partial sums over tau = 1..q of the parametric forms.
[[nodiscard]] Endogeneity endogeneity(const KernelFit& fit, std::size_t q);
// Diagonal split through rank_one_diag_fit; trace is the exact kmat trace over 1..min(q, model q).
[[nodiscard]] Endogeneity endogeneity(const QarchModel& model, std::size_t q);

void write_model_csv(std::ostream& os, const QarchModel& model);
[[nodiscard]] QarchModel read_model_csv(std::istream& is);
void write_fit_csv(std::ostream& os, const KernelFit& fit);

} // namespace qhawkes
