#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace qhawkes {

// Limit diffusion of the ZHawkes model in rescaled time:
//   dH = [-(1 - n_H) H + n_H (lambda_inf + Z^2)] beta dt
//   dZ = -omega Z dt + gamma sqrt(lambda_inf + H + Z^2) dW,  gamma = sqrt(2 n_Z omega).
struct DiffusionParams {
    double lambda_inf{1.0};
    double n_h{0.0};
    double n_z{0.0};
    double beta_bar{1.0};
    double omega_bar{1.0};
    double psi{1.0};

    [[nodiscard]] double gamma_bar() const;
    [[nodiscard]] double chi() const { return 2.0 * omega_bar / beta_bar; }
    // Slower of the two linear relaxation rates.
    [[nodiscard]] double relaxation_rate() const;
    [[nodiscard]] double default_dt() const;
    void validate() const;
};

struct DiffusionState {
    double h{0.0};
    double z{0.0};
};

struct IntegrateOptions {
    DiffusionState start{};
    // Keep every stride-th grid point (the first point is the start state).
    std::size_t record_stride{1};
};

struct DiffusionPath {
    double dt{0.0};          // spacing of the recorded grid
    std::vector<double> h;
    std::vector<double> z;
    std::vector<double> v;   // psi^2 (lambda_inf + h + z^2)

    [[nodiscard]] std::size_t size() const { return v.size(); }
    [[nodiscard]] double time(std::size_t i) const { return dt * static_cast<double>(i); }
};

// H by exact integration of its linear ODE over each step (Z^2 frozen at the
// step start), Z by Euler-Maruyama with the square-root argument clamped at
// lambda_inf. Requires dt * max(beta, omega) < 0.1.
[[nodiscard]] DiffusionPath integrate(const DiffusionParams& params, double dt, double horizon, std::uint64_t seed,
                                      const IntegrateOptions& options = {});

struct StationaryOptions {
    double dt{0.0};  // 0 selects DiffusionParams::default_dt
    DiffusionState start{};
};

// Draws of V spaced thinning_interval apart after a burn-in of at least
// 20 / relaxation_rate.
[[nodiscard]] std::vector<double> sample_stationary(const DiffusionParams& params, std::size_t n_samples,
                                                    double burn_in_time, double thinning_interval,
                                                    std::uint64_t seed, const StationaryOptions& options = {});

// Default spacing: 5 relaxation times; default burn-in: 50.
[[nodiscard]] std::vector<double> sample_stationary(const DiffusionParams& params, std::size_t n_samples,
                                                    std::uint64_t seed);

enum class AstarConditioning {
    tail_regression,  // slope of H on Y over the exceedances: E[H|Y] ~ b + a* Y
    ratio_mean,       // mean of H / Y over the exceedances
};

struct AstarMcOptions {
    double horizon{0.0};           // 0 picks 2e4 relaxation times
    double dt{0.0};                // 0 selects default_dt
    std::size_t record_stride{0};  // 0 picks ~ dt-independent 0.05 relaxation times
    std::size_t batches{20};
    std::size_t min_exceedances{200};
    AstarConditioning conditioning{AstarConditioning::tail_regression};
};

struct AstarEstimate {
    double a_star{0.0};
    double stderr_{0.0};
    double threshold{0.0};        // Z^2 level defining the conditioning set
    std::size_t n_exceed{0};
    AstarConditioning conditioning{AstarConditioning::tail_regression};
    // Both conditionings on the same exceedances, for sensitivity reporting.
    double slope{0.0};
    double ratio{0.0};
};

// a* from recorded points with Y = Z^2 above the given quantile of Y. The plain
// ratio H / Y carries the baseline offset of H divided by Y, which only dies out
// far beyond reachable quantiles, so the regression slope is the default.
// Standard error: delete-one-batch jackknife over contiguous time blocks.
[[nodiscard]] AstarEstimate estimate_astar_mc(const DiffusionParams& params, double y_threshold_quantile,
                                              std::uint64_t seed, const AstarMcOptions& options = {});

// Cumulative price on the path grid: independent increments sqrt(v dt) N(0,1).
[[nodiscard]] std::vector<double> price_path(const DiffusionPath& path, std::uint64_t seed);

void write_path_csv(std::ostream& os, const DiffusionPath& path, const std::vector<double>* price = nullptr);

} // namespace qhawkes
