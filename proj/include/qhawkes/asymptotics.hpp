#pragma once

#include "qhawkes/diffusion.hpp"
#include "qhawkes/kernels.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qhawkes {

enum class Regime { non_critical, critical };

// phi(t) ~ t^(-1-epsilon) on the diagonal, K ~ t^(-2 delta) off it.
struct PhaseQuery {
    double epsilon{0.5};
    double delta_exp{1.0};
    Regime regime{Regime::non_critical};
};

// Decay exponents of C(tau) ~ tau^-beta, D(tau, tau) ~ tau^-beta', D(1, tau) ~ tau^-rho.
struct PhaseResult {
    double beta{0.0};
    double beta_prime{0.0};
    double rho{0.0};
    int branch{0};          // 1..3 ordered by decreasing delta
    bool on_boundary{false};
    // The lowest non-critical branch uses 1/2 as its lower bound in delta.
    bool lower_bound_reinterpreted{false};
};

[[nodiscard]] PhaseResult phase_exponents(const PhaseQuery& query);

// Stationary density and CDF of V = psi^2 (lambda_inf + Z^2) when n_H = 0.
[[nodiscard]] double stationary_density_nohawkes(double v, double n_z, double lambda_inf, double psi);
[[nodiscard]] double stationary_cdf_nohawkes(double v, double n_z, double lambda_inf, double psi);

enum class AstarMethod { chi_zero_order0, chi_small_order1, chi_large, nz_small_quadratic, monte_carlo };

struct AstarResult {
    double a_star{0.0};
    double stderr_{0.0};         // monte_carlo only
    bool out_of_validity{false};
    std::string warning;
};

struct AstarOptions {
    double y_threshold_quantile{0.995};
    std::uint64_t seed{1};
    AstarMcOptions mc{};
};

// n_H in [0,1), n_Z in [0,1), n_H + n_Z < 1, chi > 0 (unused by chi_zero_order0;
// chi = 0 is accepted by chi_small_order1 and nz_small_quadratic).
// The Monte-Carlo route runs the limit diffusion with lambda_inf = 1 and the
// faster of the two rates set to 1.
[[nodiscard]] AstarResult astar(double n_h, double n_z, double chi, AstarMethod method,
                                const AstarOptions& options = {});

struct TailParams {
    double n_z{0.0};
    double a_star{0.0};
    double mu{0.0};
    double nu{0.0};
    double density_exponent{0.0};
};

// n_Z in (0, 1], a* >= 0.
[[nodiscard]] TailParams tail_exponents(double n_z, double a_star);

// z^2 coefficient of the scaling function in the n_Z -> 0 limit.
[[nodiscard]] double gaussian_scaling_coeff(double n_h, double chi, double a_star);

[[nodiscard]] std::string to_string(AstarMethod method);
[[nodiscard]] AstarMethod astar_method_from_string(const std::string& name);

// Key-value block: n_H, n_Z, chi, method, a_star, mu, nu, density_exponent, validity_flags.
[[nodiscard]] KeyValues asymptotics_report(double n_h, double n_z, double chi, AstarMethod method,
                                           const AstarOptions& options = {});

} // namespace qhawkes
