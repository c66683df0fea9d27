#pragma once

#include "qhawkes/qarch_model.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qhawkes {

struct ZeroKernel {};

// phi(t) = n_h * beta * exp(-beta t)
struct ExponentialHawkes {
    double n_h;
    double beta;
};

// phi(t) = g (1 + c t)^(-alpha), norm g / (c (alpha - 1))
struct PowerLawHawkes {
    double g;
    double c;
    double alpha;

    [[nodiscard]] static PowerLawHawkes from_norm(double n_h, double c, double alpha);
};

// k(t) = sqrt(2 n_z omega) exp(-omega t)
struct ExponentialZumbach {
    double n_z;
    double omega;

    [[nodiscard]] double amplitude() const;
};

using DiagonalKernel = std::variant<ZeroKernel, ExponentialHawkes, PowerLawHawkes>;
using ZumbachKernel = std::variant<ZeroKernel, ExponentialZumbach>;

enum class KernelPart { diagonal, zumbach };

// Diagonal Hawkes part plus rank-one Zumbach part. The leverage kernel exists
// only as a placeholder and is identically zero.
class KernelSpec {
public:
    KernelSpec() = default;
    // Validates parameters; alpha <= 1 or c <= 0 on a power law is rejected.
    explicit KernelSpec(DiagonalKernel diagonal, ZumbachKernel zumbach = ZeroKernel{});

    [[nodiscard]] const DiagonalKernel& diagonal() const { return diagonal_; }
    [[nodiscard]] const ZumbachKernel& zumbach() const { return zumbach_; }

    [[nodiscard]] double phi(double t) const;
    [[nodiscard]] double k(double t) const;
    [[nodiscard]] double leverage(double /*t*/) const { return 0.0; }

    [[nodiscard]] bool has_diagonal() const { return !std::holds_alternative<ZeroKernel>(diagonal_); }
    [[nodiscard]] bool has_zumbach() const { return !std::holds_alternative<ZeroKernel>(zumbach_); }
    // True when every nonzero part is exponential, so the state is (H, Z).
    [[nodiscard]] bool markovian() const;

private:
    DiagonalKernel diagonal_{ZeroKernel{}};
    ZumbachKernel zumbach_{ZeroKernel{}};
};

[[nodiscard]] double eval_kernel(const KernelSpec& spec, KernelPart which, double t);

struct KernelNorms {
    double n_h{0.0};
    double n_z{0.0};
    double trace{0.0};
};

[[nodiscard]] KernelNorms kernel_norms(const KernelSpec& spec);

// Rademacher jumps of size psi, so kappa = 1.
struct ModelParams {
    KernelSpec kernel;
    double lambda_inf{1.0};
    double psi{1.0};

    static constexpr double kappa = 1.0;

    void validate() const;
};

enum class Stationarity { stationary, critical, unstable };

struct StationarityReport {
    Stationarity status{Stationarity::unstable};
    std::optional<double> mean_intensity;
    double trace{0.0};
};

[[nodiscard]] StationarityReport stationarity_check(const ModelParams& params);
[[nodiscard]] std::string to_string(Stationarity s);

// Lag tau = 1..q sampled at tau * delta; the diagonal part contributes phi * delta
// on the diagonal and the rank-one part k k^T * delta everywhere.
[[nodiscard]] QarchModel discretize_qarch(const ModelParams& params, double delta, std::size_t q);

// Sum of exponentials sum_j w_j exp(-b_j t), used for O(1)-per-event
// evaluation of the power-law history.
struct ExponentialSum {
    std::vector<double> weights;
    std::vector<double> rates;

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] std::size_t size() const { return rates.size(); }
};

// Trapezoidal rule in x = log s applied to
// (1 + c t)^(-alpha) = Gamma(alpha)^-1 int_0^inf s^(alpha-1) e^-s e^(-s c t) ds.
// `t_max` bounds the range where the relative error is controlled by
// `rel_tol`; beyond it the approximation decays faster than the kernel.
[[nodiscard]] ExponentialSum approximate_power_law(const PowerLawHawkes& kernel, double t_max,
                                                   double rel_tol = 1e-9);

// Flat key=value text. Blank lines and lines starting with '#' are skipped.
using KeyValues = std::map<std::string, std::string>;

[[nodiscard]] KeyValues parse_key_values(std::string_view text);
[[nodiscard]] std::string format_key_values(const KeyValues& kv);

// Keys: diagonal.kind, diagonal.n_h, diagonal.beta, diagonal.g, diagonal.c,
// diagonal.alpha, zumbach.kind, zumbach.n_z, zumbach.omega, lambda_inf, psi.
// Kinds are "zero", "exponential" and "power_law". A power law may be given
// either by g or by diagonal.n_h.
[[nodiscard]] KeyValues to_key_values(const ModelParams& params);
[[nodiscard]] ModelParams model_params_from_key_values(const KeyValues& kv);

} // namespace qhawkes
