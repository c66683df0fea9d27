#include "qhawkes/asymptotics.hpp"

#include "numfmt.hpp"
#include "qhawkes/errors.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cassert>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qhawkes {

namespace {

// Relative tolerance for placing delta on a branch boundary.
constexpr double kBoundaryTol = 1e-12;

bool near(double a, double b) { return std::abs(a - b) <= kBoundaryTol * std::max(1.0, std::abs(b)); }

[[noreturn]] void phase_error(const std::string& what) { throw DomainError("phase_exponents: " + what); }

} // namespace

PhaseResult phase_exponents(const PhaseQuery& query) {
    const double e = query.epsilon, d = query.delta_exp;
    if (!std::isfinite(e) || !std::isfinite(d)) phase_error("exponents must be finite");
    PhaseResult r;
    r.rho = d;
    if (query.regime == Regime::non_critical) {
        if (!(e > 0.0 && e < 1.0)) phase_error("requires 0 < epsilon < 1");
        if (!(d > 0.5)) phase_error("requires delta > 1/2");
        const double b1 = (3.0 + e) / 4.0, b2 = (2.0 + e) / 3.0;
        // Boundaries go to the lower (slower-decay) branch; the values agree there.
        if (d > b1 && !near(d, b1)) {
            r.branch = 1;
            r.beta = 1.0 + e;
            r.beta_prime = 1.0 + e;
        } else if (d > b2 && !near(d, b2)) {
            r.branch = 2;
            r.on_boundary = near(d, b1);
            r.beta = 4.0 * d - 2.0;
            r.beta_prime = 1.0 + e;
        } else {
            r.branch = 3;
            r.on_boundary = near(d, b2);
            r.lower_bound_reinterpreted = true;
            r.beta = 4.0 * d - 2.0;
            r.beta_prime = 3.0 * d - 1.0;
        }
        return r;
    }
    if (!(e > 0.0 && e < 0.5)) phase_error("critical regime requires 0 < epsilon < 1/2");
    if (!(d > (1.0 + e) / 2.0)) phase_error("critical regime requires delta > (1 + epsilon)/2");
    if (d > 0.75 && !near(d, 0.75)) {
        r.branch = 1;
        r.beta = 1.0 - 2.0 * e;
        r.beta_prime = 1.0 - e;
    } else if (d > 2.0 / 3.0 && !near(d, 2.0 / 3.0)) {
        r.branch = 2;
        r.on_boundary = near(d, 0.75);
        r.beta = 4.0 * d - 2.0 * e - 2.0;
        r.beta_prime = 1.0 - e;
    } else {
        r.branch = 3;
        r.on_boundary = near(d, 2.0 / 3.0);
        r.beta = 4.0 * d - 2.0 * e - 2.0;
        r.beta_prime = 3.0 * d - e - 1.0;
    }
    return r;
}

namespace {

void check_density_args(double n_z, double lambda_inf, double psi) {
    if (!(n_z > 0.0 && n_z < 1.0)) throw DomainError("stationary density: n_Z must lie in (0, 1)");
    if (!(lambda_inf > 0.0 && psi > 0.0)) throw DomainError("stationary density: lambda_inf and psi must be > 0");
}

} // namespace

double stationary_density_nohawkes(double v, double n_z, double lambda_inf, double psi) {
    check_density_args(n_z, lambda_inf, psi);
    if (v < 0.0) throw DomainError("stationary density: v must be >= 0");
    const double v_inf = lambda_inf * psi * psi;
    if (v <= v_inf) return 0.0;
    const double m = 1.0 / (2.0 * n_z);
    const double log_norm = std::lgamma(1.0 + m) - std::lgamma(0.5 + m) - 0.5 * std::log(std::numbers::pi);
    return std::exp(log_norm + (1.0 + m) * std::log(v_inf / v)) / std::sqrt(v_inf * (v - v_inf));
}

double stationary_cdf_nohawkes(double v, double n_z, double lambda_inf, double psi) {
    check_density_args(n_z, lambda_inf, psi);
    const double v_inf = lambda_inf * psi * psi;
    if (v <= v_inf) return 0.0;
    // With u = v_inf / v the density becomes a Beta(m + 1/2, 1/2) law in u.
    const double m = 1.0 / (2.0 * n_z);
    return boost::math::ibetac(m + 0.5, 0.5, v_inf / v);
}

namespace {

void check_astar_args(double n_h, double n_z, double chi, AstarMethod method) {
    if (!(n_h >= 0.0 && n_h < 1.0)) throw DomainError("astar: n_H must lie in [0, 1)");
    if (!(n_z >= 0.0 && n_z < 1.0)) throw DomainError("astar: n_Z must lie in [0, 1)");
    if (!(n_h + n_z < 1.0)) throw DomainError("astar: n_H + n_Z must be < 1");
    // The order-chi expansion and the quadratic are regular at chi = 0.
    const bool zero_ok = method == AstarMethod::chi_small_order1 || method == AstarMethod::nz_small_quadratic;
    if (method == AstarMethod::chi_zero_order0) return;
    if (!std::isfinite(chi) || chi < 0.0 || (chi == 0.0 && !zero_ok))
        throw DomainError(std::string("astar: chi must be ") + (zero_ok ? ">= 0" : "> 0"));
}

// Largest positive root of [g(g+2x)-x^2] a^2 + [g^2 - n(g+2x)] a - n g, g = 1 - n + x.
double quadratic_root(double n_h, double chi) {
    const double g = 1.0 - n_h + chi;
    const double qa = g * (g + 2.0 * chi) - chi * chi;
    const double qb = g * g - n_h * (g + 2.0 * chi);
    const double qc = -n_h * g;
    assert(qa > 0.0);
    const double disc = qb * qb - 4.0 * qa * qc;
    assert(disc >= 0.0);
    const double sq = std::sqrt(disc);
    // qc <= 0 and qa > 0, so the roots have opposite signs (or one is zero).
    const double root = qb >= 0.0 ? (qc == 0.0 ? 0.0 : 2.0 * qc / (-qb - sq)) : (-qb + sq) / (2.0 * qa);
    assert(root >= 0.0);
    return root;
}

} // namespace

AstarResult astar(double n_h, double n_z, double chi, AstarMethod method, const AstarOptions& options) {
    check_astar_args(n_h, n_z, chi, method);
    AstarResult r;
    const double a0 = n_h / (1.0 - n_h);
    switch (method) {
    case AstarMethod::chi_zero_order0:
        r.a_star = a0;
        break;
    case AstarMethod::chi_small_order1: {
        const double corr = chi * (1.0 - n_h - n_z) / ((1.0 - n_h) * (1.0 - n_h));
        r.a_star = a0 * (1.0 - corr);
        if (r.a_star < 0.0) {
            r.out_of_validity = true;
            r.warning = "order-chi expansion gives a negative a*";
        } else if (corr > 0.5) {
            r.out_of_validity = true;
            r.warning = "order-chi correction exceeds half of the leading term";
        }
        break;
    }
    case AstarMethod::chi_large:
        r.a_star = n_h / (chi * (1.0 - n_z));
        break;
    case AstarMethod::nz_small_quadratic:
        r.a_star = quadratic_root(n_h, chi);
        break;
    case AstarMethod::monte_carlo: {
        if (n_h == 0.0) break;
        DiffusionParams p;
        p.n_h = n_h;
        p.n_z = n_z;
        if (chi <= 2.0) {
            p.beta_bar = 1.0;
            p.omega_bar = chi / 2.0;
        } else {
            p.omega_bar = 1.0;
            p.beta_bar = 2.0 / chi;
        }
        const auto est = estimate_astar_mc(p, options.y_threshold_quantile, options.seed, options.mc);
        r.a_star = est.a_star;
        r.stderr_ = est.stderr_;
        break;
    }
    }
    return r;
}

TailParams tail_exponents(double n_z, double a_star) {
    if (!(n_z > 0.0 && n_z <= 1.0)) throw DomainError("tail_exponents: n_Z must lie in (0, 1]");
    if (!(a_star >= 0.0 && std::isfinite(a_star))) throw DomainError("tail_exponents: a* must be >= 0");
    TailParams t;
    t.n_z = n_z;
    t.a_star = a_star;
    const double inv = 1.0 / (n_z * (1.0 + a_star));
    t.mu = 0.5 + 0.5 * inv;
    t.nu = 1.0 + inv;
    t.density_exponent = 1.5 + 0.5 * inv;
    return t;
}

double gaussian_scaling_coeff(double n_h, double chi, double a_star) {
    if (!(chi > 0.0)) throw DomainError("gaussian_scaling_coeff: chi must be > 0");
    const double s = 1.0 + a_star;
    return s * s * ((1.0 - n_h + chi) * a_star - n_h) / chi;
}

std::string to_string(AstarMethod method) {
    switch (method) {
    case AstarMethod::chi_zero_order0: return "chi_zero_order0";
    case AstarMethod::chi_small_order1: return "chi_small_order1";
    case AstarMethod::chi_large: return "chi_large";
    case AstarMethod::nz_small_quadratic: return "nz_small_quadratic";
    case AstarMethod::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

AstarMethod astar_method_from_string(const std::string& name) {
    for (auto m : {AstarMethod::chi_zero_order0, AstarMethod::chi_small_order1, AstarMethod::chi_large,
                   AstarMethod::nz_small_quadratic, AstarMethod::monte_carlo})
        if (to_string(m) == name) return m;
    // Short aliases used on the command line.
    if (name == "chi_zero") return AstarMethod::chi_zero_order0;
    if (name == "chi_small") return AstarMethod::chi_small_order1;
    if (name == "quadratic") return AstarMethod::nz_small_quadratic;
    if (name == "mc") return AstarMethod::monte_carlo;
    throw DomainError("unknown a* method '" + name +
                      "' (chi_zero_order0, chi_small_order1, chi_large, nz_small_quadratic, monte_carlo)");
}

KeyValues asymptotics_report(double n_h, double n_z, double chi, AstarMethod method, const AstarOptions& options) {
    const auto a = astar(n_h, n_z, chi, method, options);
    KeyValues kv;
    kv["n_H"] = detail::to_text(n_h);
    kv["n_Z"] = detail::to_text(n_z);
    kv["chi"] = detail::to_text(chi);
    kv["method"] = to_string(method);
    kv["a_star"] = detail::to_text(a.a_star);
    if (method == AstarMethod::monte_carlo) kv["a_star_stderr"] = detail::to_text(a.stderr_);
    std::string flags = a.out_of_validity ? "out_of_validity" : "ok";
    if (n_z > 0.0 && a.a_star >= 0.0) {
        const auto t = tail_exponents(n_z, a.a_star);
        kv["mu"] = detail::to_text(t.mu);
        kv["nu"] = detail::to_text(t.nu);
        kv["density_exponent"] = detail::to_text(t.density_exponent);
    } else {
        kv["mu"] = kv["nu"] = kv["density_exponent"] = "inf";
        if (n_z > 0.0) flags = "out_of_validity";
    }
    kv["validity_flags"] = flags;
    if (!a.warning.empty()) kv["warning"] = a.warning;
    return kv;
}

} // namespace qhawkes
