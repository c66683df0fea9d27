#include "qhawkes/diffusion.hpp"

#include "numfmt.hpp"
#include "qhawkes/errors.hpp"
#include "qhawkes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace qhawkes {

double DiffusionParams::gamma_bar() const { return std::sqrt(2.0 * n_z * omega_bar); }

double DiffusionParams::relaxation_rate() const { return std::min(omega_bar, (1.0 - n_h) * beta_bar); }

double DiffusionParams::default_dt() const { return 0.01 / std::max(beta_bar, omega_bar); }

void DiffusionParams::validate() const {
    auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!positive(lambda_inf)) throw DomainError("diffusion: lambda_inf must be > 0");
    if (!positive(beta_bar) || !positive(omega_bar)) throw DomainError("diffusion: beta_bar and omega_bar must be > 0");
    if (!positive(psi)) throw DomainError("diffusion: psi must be > 0");
    if (!(n_h >= 0.0 && n_z >= 0.0)) throw DomainError("diffusion: norms must be >= 0");
    if (!(n_h + n_z < 1.0)) throw DomainError("diffusion: n_H + n_Z must be < 1");
}

namespace {

class Stepper {
public:
    Stepper(const DiffusionParams& p, double dt, std::uint64_t seed, DiffusionState start)
        : p_(p), rng_(seed, 7), state_(start), decay_(std::exp(-(1.0 - p.n_h) * p.beta_bar * dt)),
          noise_(p.gamma_bar() * std::sqrt(dt)), drift_(p.omega_bar * dt) {
        if (!(start.h >= 0.0 && std::isfinite(start.z))) throw DomainError("diffusion: start needs h >= 0, finite z");
    }

    void step() {
        const double y = state_.z * state_.z;
        const double arg = std::max(p_.lambda_inf, p_.lambda_inf + state_.h + y);
        const double z_next = state_.z - drift_ * state_.z + noise_ * std::sqrt(arg) * rng_.normal();
        const double h_star = p_.n_h * (p_.lambda_inf + y) / (1.0 - p_.n_h);
        state_.h = h_star + (state_.h - h_star) * decay_;
        if (!(state_.h >= 0.0)) throw NumericalError("diffusion: H became negative");
        state_.z = z_next;
    }

    [[nodiscard]] const DiffusionState& state() const { return state_; }
    [[nodiscard]] double v() const { return p_.psi * p_.psi * (p_.lambda_inf + state_.h + state_.z * state_.z); }

private:
    DiffusionParams p_;
    Philox4x32 rng_;
    DiffusionState state_;
    double decay_;
    double noise_;
    double drift_;
};

void check_step(const DiffusionParams& p, double dt) {
    if (!(std::isfinite(dt) && dt > 0.0)) throw DomainError("diffusion: dt must be > 0");
    if (!(dt * std::max(p.beta_bar, p.omega_bar) < 0.1))
        throw DomainError("diffusion: dt * max(beta, omega) must be < 0.1");
}

std::size_t steps_for(double span, double dt) {
    return static_cast<std::size_t>(std::llround(span / dt));
}

} // namespace

DiffusionPath integrate(const DiffusionParams& params, double dt, double horizon, std::uint64_t seed,
                        const IntegrateOptions& options) {
    params.validate();
    check_step(params, dt);
    if (!(std::isfinite(horizon) && horizon > 0.0)) throw DomainError("diffusion: horizon must be > 0");
    if (options.record_stride == 0) throw DomainError("diffusion: record_stride must be >= 1");

    Stepper st(params, dt, seed, options.start);
    const std::size_t n = steps_for(horizon, dt);
    DiffusionPath path;
    path.dt = dt * static_cast<double>(options.record_stride);
    const std::size_t kept = n / options.record_stride + 1;
    path.h.reserve(kept);
    path.z.reserve(kept);
    path.v.reserve(kept);
    auto record = [&] {
        path.h.push_back(st.state().h);
        path.z.push_back(st.state().z);
        path.v.push_back(st.v());
    };
    record();
    for (std::size_t i = 1; i <= n; ++i) {
        st.step();
        if (i % options.record_stride == 0) record();
    }
    return path;
}

std::vector<double> sample_stationary(const DiffusionParams& params, std::size_t n_samples, double burn_in_time,
                                      double thinning_interval, std::uint64_t seed, const StationaryOptions& options) {
    params.validate();
    const double dt = options.dt > 0.0 ? options.dt : params.default_dt();
    check_step(params, dt);
    if (!(burn_in_time >= 20.0 / params.relaxation_rate()))
        throw DomainError("diffusion: burn-in must be at least 20 relaxation times");
    if (!(thinning_interval > 0.0)) throw DomainError("diffusion: thinning interval must be > 0");

    Stepper st(params, dt, seed, options.start);
    for (std::size_t i = steps_for(burn_in_time, dt); i > 0; --i) st.step();
    const std::size_t gap = std::max<std::size_t>(1, steps_for(thinning_interval, dt));
    std::vector<double> out;
    out.reserve(n_samples);
    while (out.size() < n_samples) {
        for (std::size_t i = 0; i < gap; ++i) st.step();
        out.push_back(st.v());
    }
    return out;
}

std::vector<double> sample_stationary(const DiffusionParams& params, std::size_t n_samples, std::uint64_t seed) {
    params.validate();
    const double tau = 1.0 / params.relaxation_rate();
    return sample_stationary(params, n_samples, 50.0 * tau, 5.0 * tau, seed);
}

AstarEstimate estimate_astar_mc(const DiffusionParams& params, double y_threshold_quantile, std::uint64_t seed,
                                const AstarMcOptions& options) {
    params.validate();
    if (!(params.n_h > 0.0)) throw DomainError("estimate_astar_mc: needs n_H > 0");
    if (!(y_threshold_quantile >= 0.99 && y_threshold_quantile < 1.0))
        throw DomainError("estimate_astar_mc: threshold quantile must lie in [0.99, 1)");
    if (options.batches < 2) throw DomainError("estimate_astar_mc: needs at least 2 batches");

    const double tau = 1.0 / params.relaxation_rate();
    const double dt = options.dt > 0.0 ? options.dt : params.default_dt();
    const double horizon = options.horizon > 0.0 ? options.horizon : 2e4 * tau;
    const std::size_t stride =
        options.record_stride > 0 ? options.record_stride : std::max<std::size_t>(1, steps_for(0.05 * tau, dt));
    IntegrateOptions io;
    io.record_stride = stride;
    // Start from the mean levels to shorten the transient.
    const double tr = params.n_h + params.n_z;
    io.start.h = params.n_h * params.lambda_inf / (1.0 - tr);
    const auto path = integrate(params, dt, horizon, seed, io);

    const std::size_t skip = std::min(path.size() / 10, steps_for(50.0 * tau, path.dt));
    std::vector<double> y;
    y.reserve(path.size() - skip);
    for (std::size_t i = skip; i < path.size(); ++i) y.push_back(path.z[i] * path.z[i]);
    auto sorted = y;
    const auto k = static_cast<std::size_t>(y_threshold_quantile * static_cast<double>(sorted.size()));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    const double thr = sorted[k];

    AstarEstimate out;
    out.threshold = thr;
    out.conditioning = options.conditioning;
    // Per-batch sums for the slope (x = Y, y = H) and the ratio.
    struct Sums {
        double n{0}, x{0}, y{0}, xx{0}, xy{0}, r{0};
        void add(const Sums& o, double s) {
            n += s * o.n; x += s * o.x; y += s * o.y; xx += s * o.xx; xy += s * o.xy; r += s * o.r;
        }
        [[nodiscard]] double slope() const {
            const double mx = x / n, vx = xx / n - mx * mx;
            return vx > 0.0 ? (xy / n - mx * y / n) / vx : 0.0;
        }
        [[nodiscard]] double ratio() const { return r / n; }
    };
    std::vector<Sums> batch(options.batches);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] <= thr || y[i] <= 0.0) continue;
        const double h = path.h[skip + i];
        auto& s = batch[i * options.batches / y.size()];
        s.n += 1.0;
        s.x += y[i];
        s.y += h;
        s.xx += y[i] * y[i];
        s.xy += y[i] * h;
        s.r += h / y[i];
    }
    Sums total;
    for (const auto& s : batch) total.add(s, 1.0);
    out.n_exceed = static_cast<std::size_t>(total.n);
    if (out.n_exceed < options.min_exceedances)
        throw InsufficientData("estimate_astar_mc: only " + std::to_string(out.n_exceed) + " exceedances");
    out.slope = total.slope();
    out.ratio = total.ratio();
    const bool use_slope = options.conditioning == AstarConditioning::tail_regression;
    out.a_star = use_slope ? out.slope : out.ratio;

    const auto nb = static_cast<double>(options.batches);
    std::vector<double> reps;
    for (const auto& s : batch) {
        Sums rest = total;
        rest.add(s, -1.0);
        if (rest.n < 2.0) continue;
        reps.push_back(use_slope ? rest.slope() : rest.ratio());
    }
    double m = 0.0;
    for (double r : reps) m += r;
    m /= static_cast<double>(reps.size());
    double ss = 0.0;
    for (double r : reps) ss += (r - m) * (r - m);
    out.stderr_ = std::sqrt((nb - 1.0) / nb * ss);
    return out;
}

std::vector<double> price_path(const DiffusionPath& path, std::uint64_t seed) {
    if (path.v.empty() || !(path.dt > 0.0)) throw DomainError("price_path: empty path");
    Philox4x32 rng(seed, 11);
    std::vector<double> p(path.size(), 0.0);
    const double sdt = std::sqrt(path.dt);
    for (std::size_t i = 1; i < path.size(); ++i) p[i] = p[i - 1] + std::sqrt(path.v[i - 1]) * sdt * rng.normal();
    return p;
}

void write_path_csv(std::ostream& os, const DiffusionPath& path, const std::vector<double>* price) {
    if (price && price->size() != path.size()) throw DomainError("write_path_csv: price length mismatch");
    os << (price ? "t,h,z,v,p\n" : "t,h,z,v\n");
    for (std::size_t i = 0; i < path.size(); ++i) {
        os << detail::to_text(path.time(i)) << ',' << detail::to_text(path.h[i]) << ',' << detail::to_text(path.z[i])
           << ',' << detail::to_text(path.v[i]);
        if (price) os << ',' << detail::to_text((*price)[i]);
        os << '\n';
    }
}

} // namespace qhawkes
