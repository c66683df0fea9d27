#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace qhawkes {

// Discrete-time quadratic ARCH model on a grid of bin width `delta`:
// sigma_t^2 = sigma_inf2 + sum_tau L(tau) r_{t-tau} + sum_{tau,tau'} K(tau,tau') r_{t-tau} r_{t-tau'}.
// Lag tau = 1..q is stored at index tau-1.
struct QarchModel {
    double sigma_inf2{1.0};
    Eigen::VectorXd leverage;
    Eigen::MatrixXd kmat;
    double delta{1.0};

    [[nodiscard]] std::size_t q() const { return static_cast<std::size_t>(kmat.rows()); }
    [[nodiscard]] double trace() const { return kmat.trace(); }

    // Throws DomainError when kmat is not square and symmetric, a diagonal
    // entry is negative, or the leverage length does not match.
    void validate() const;
    [[nodiscard]] bool stationary_fit() const { return trace() < 1.0; }

    static QarchModel zero(std::size_t q, double sigma_inf2 = 1.0, double delta = 1.0);
};

} // namespace qhawkes
