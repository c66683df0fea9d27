#pragma once

#include "qhawkes/kernels.hpp"
#include "qhawkes/simulate.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace qhawkes {

// Values on the strict upper triangle 1 <= tau1 < tau2 <= q, read symmetrically.
class TriangleGrid {
public:
    TriangleGrid() = default;
    explicit TriangleGrid(std::size_t q) : q_(q), values_(q * (q - 1) / 2, 0.0) {}

    [[nodiscard]] std::size_t q() const { return q_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }
    // Packed index of the pair; throws DomainError on coincident or out-of-range lags.
    [[nodiscard]] std::size_t index(std::size_t tau1, std::size_t tau2) const;
    [[nodiscard]] double operator()(std::size_t tau1, std::size_t tau2) const { return values_[index(tau1, tau2)]; }
    double& at(std::size_t tau1, std::size_t tau2) { return values_[index(tau1, tau2)]; }
    [[nodiscard]] const std::vector<double>& packed() const { return values_; }
    std::vector<double>& packed() { return values_; }

private:
    std::size_t q_{0};
    std::vector<double> values_;
};

// Error bars come from delete-one-batch jackknife replicates over contiguous
// blocks of bins (batch means for linear statistics).
struct CorrelationEstimates {
    double delta{1.0};
    std::size_t q{0};
    double lambda_bar{0.0};
    double lambda_bar_stderr{0.0};
    std::vector<double> c_grid;   // lag tau at index tau - 1
    std::vector<double> c_stderr;
    TriangleGrid d_grid;
    TriangleGrid d_stderr;
    // Jackknife replicates, one row per deleted batch.
    Eigen::VectorXd lambda_replicates;
    Eigen::MatrixXd c_replicates;
    Eigen::MatrixXd d_replicates;

    [[nodiscard]] double c(std::size_t tau) const { return c_grid.at(tau - 1); }
    [[nodiscard]] double d(std::size_t tau1, std::size_t tau2) const { return d_grid(tau1, tau2); }
    [[nodiscard]] bool has_d() const { return !d_grid.empty(); }
};

struct BatchOptions {
    std::size_t batches{50};
};

// C(tau delta) = (<n_b n_{b+tau}> - <n>^2) / delta^2 for tau = 1..q, lambda_bar = <n>/delta.
// Needs at least 10 q bins.
[[nodiscard]] CorrelationEstimates estimate_C(const std::vector<double>& counts, double delta, std::size_t q,
                                              const BatchOptions& batch = {});

struct LagPair {
    std::size_t tau1;
    std::size_t tau2;
};

struct PairEstimate {
    LagPair lags;
    double value;
    double stderr_;
};

// D(tau1, tau2) = <n_b r_{b-tau1} r_{b-tau2}> / (psi^2 delta^3). Coincident lags are rejected.
[[nodiscard]] std::vector<PairEstimate> estimate_D(const std::vector<double>& counts, const std::vector<double>& returns,
                                                   double delta, double psi, const std::vector<LagPair>& pairs,
                                                   const BatchOptions& batch = {});

// Fills d_grid, d_stderr and d_replicates of `est` for every pair up to est.q.
void estimate_D_grid(CorrelationEstimates& est, const std::vector<double>& counts, const std::vector<double>& returns,
                     double psi, const BatchOptions& batch = {});

// Both estimators on a bin series.
[[nodiscard]] CorrelationEstimates estimate_correlations(const BinSeries& bins, std::size_t q, bool with_d = true,
                                                         const BatchOptions& batch = {});

struct AppendixResiduals {
    std::vector<double> res_c;        // lag tau at index tau - 1
    std::vector<double> res_c_stderr; // jackknife error of the residual
    std::vector<double> res_c_quad;   // quadrature error estimate (step doubling)
    TriangleGrid res_d;
    TriangleGrid res_d_stderr;
    TriangleGrid res_d_quad;
    bool coarse_grid{false}; // beta*delta or omega*delta above 1
    std::vector<std::string> warnings;
};

// Plugs the estimates into the exact two- and three-point equations
//   C(t)       = lam phi(t) + int_0^inf phi(v) C(t - v) dv + 2 int_0^inf du int_u^inf dr K(t+u, t+r) D(u, r)
//   D(t1, t2)  = 2 K(t1, t2) [C(a) + lam^2] + int_a^t2 phi(t2 - u) D(u - a, u) du
//                + 2 int_0^inf K(t1, t1 + w) D(a, w) dw,            a = t2 - t1,
// where phi(t) = K(t, t) is the full diagonal (Hawkes part plus k^2) and C is even.
// Trapezoid on the lag grid; the coincident values C(0) and D(a, a) are filled
// by continuity from neighbouring lags; integrals past q delta are closed with
// the exponential kernel forms. Residual = left side minus right side.
[[nodiscard]] AppendixResiduals appendix_a_residual(const KernelSpec& spec, const CorrelationEstimates& est);

struct HillResult {
    double nu_hill{0.0};
    double sigma_min{0.0};
    std::size_t n_tail{0};
};

// Tail = the floor(tail_fraction * n) largest values, sigma_min = the next one down.
// nu_hill = 1 + 1 / mean(log(sigma_i / sigma_min)) over the tail.
[[nodiscard]] HillResult hill_exponent(std::vector<double> values, double tail_fraction = 0.02);

// sqrt(ln(h/o) ln(h/c) + ln(l/o) ln(l/c)) for positive prices.
[[nodiscard]] double rs_vol(double o, double h, double l, double c);

struct TraReport {
    std::size_t q{0};
    std::vector<double> c_pos;  // C(tau), tau = 1..q
    std::vector<double> c_neg;  // C(-tau)
    std::vector<double> delta_ratio;
    std::vector<double> delta_stderr;
};

// Cross-correlation of sigma_t with |r_{t-tau}| using global means and
// standard deviations, and the asymmetry ratio
// Delta(tau) = sum_{1..tau} [C(t') - C(-t')] / (2 sum_{1..q} max(|C(t')|, |C(-t')|)).
[[nodiscard]] TraReport tra_curve(const std::vector<double>& sigma, const std::vector<double>& returns, std::size_t q,
                                  const BatchOptions& batch = {});
[[nodiscard]] TraReport tra_curve(const BinSeries& bins, std::size_t q, const BatchOptions& batch = {});

// 1 - sqrt(mean / variance) of the activity summed over windows of `window`
// bins, clamped to [0, 1]. Needs at least 100 windows.
[[nodiscard]] double apparent_branching(const std::vector<double>& activity, std::size_t window);
[[nodiscard]] double apparent_branching(const BinSeries& bins, std::size_t window);

// CSV writers: lag,value,stderr / lag1,lag2,value,stderr / tau,c_pos,c_neg,delta.
void write_c_csv(std::ostream& os, const CorrelationEstimates& est);
void write_d_csv(std::ostream& os, const CorrelationEstimates& est);
void write_tra_csv(std::ostream& os, const TraReport& rep);

} // namespace qhawkes
