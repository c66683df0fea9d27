// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [--only AC1,AC6,...] [--threads N]

#include "qhawkes/asymptotics.hpp"
#include "qhawkes/dataio.hpp"
#include "qhawkes/diffusion.hpp"
#include "qhawkes/errors.hpp"
#include "qhawkes/estimators.hpp"
#include "qhawkes/experiments.hpp"
#include "qhawkes/kernels.hpp"
#include "qhawkes/qarch.hpp"
#include "qhawkes/rng.hpp"
#include "qhawkes/simulate.hpp"

#include "panels.hpp"
#include "phase_oracle.hpp"
#include "stats.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace qhawkes;

namespace {

struct Outcome {
    bool pass{false};
    std::string detail;
};

class Stopwatch {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_{std::chrono::steady_clock::now()};
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

unsigned g_threads{1};

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const unsigned workers = std::max(1u, std::min<unsigned>(g_threads, static_cast<unsigned>(n)));
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    for (auto& t : pool) t.join();
}

ModelParams exp_model(double n_h, double beta, double n_z = 0.0, double omega = 1.0) {
    ModelParams p;
    p.kernel = n_z > 0.0 ? KernelSpec(ExponentialHawkes{n_h, beta}, ExponentialZumbach{n_z, omega})
                         : KernelSpec(ExponentialHawkes{n_h, beta});
    return p;
}

// ---------------------------------------------------------------- AC1

Outcome ac1() {
    const auto p = exp_model(0.4, 1.0, 0.2, 0.5);
    const double target = p.lambda_inf / (1.0 - kernel_norms(p.kernel).trace);
    Stopwatch sw;
    const double horizon = 1e5, burn = 1e4;
    const auto s = simulate_markovian(p, horizon + burn, 1).stream.trim_burn_in(burn / (horizon + burn));
    const double secs = sw.seconds();
    const double rate = static_cast<double>(s.size()) / s.horizon;
    const double rel = rate / target - 1.0;
    return {std::abs(rel) < 0.02 && secs < 30.0,
            fmt("rate %.4f vs %.4f (rel %+.4f, tol 0.02), %.1fs (limit 30s)", rate, target, rel, secs)};
}

// ---------------------------------------------------------------- AC2

Outcome ac2() {
    struct Triple {
        double n_h, beta, n_z, omega;
    };
    const std::array<Triple, 3> triples{{{0.5, 1.0, 0.0, 1.0}, {0.2, 2.0, 0.1, 1.0}, {0.3, 1.0, 0.15, 1.0}}};
    const std::size_t keep = 100'000, total = 110'000;
    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        const auto p = exp_model(t.n_h, t.beta, t.n_z, t.omega);
        ThinningOptions topt;
        topt.stop_after_events = total;
        MarkovianOptions mopt;
        mopt.stop_after_events = total;
        const double horizon = 10.0 * static_cast<double>(total);
        const auto a = simulate_thinning(p, horizon, 100 + i, topt);
        const auto b = simulate_markovian(p, horizon, 200 + i, mopt).stream;
        auto gaps = [&](const EventStream& s) {
            auto g = testsupport::inter_event_times(s.times);
            g.erase(g.begin(), g.end() - static_cast<std::ptrdiff_t>(std::min(keep, g.size())));
            return g;
        };
        const auto ga = gaps(a), gb = gaps(b);
        const double ks = testsupport::ks_two_sample(ga, gb);
        pass = pass && ks < 0.01 && ga.size() == keep && gb.size() == keep;
        detail += fmt("%sKS(%g,%g,%g,%g)=%.4f", i ? ", " : "", t.n_h, t.beta, t.n_z, t.omega, ks);
    }
    return {pass, detail + " (tol 0.01)"};
}

// ---------------------------------------------------------------- AC3

// Tail exponent b of q(v) ~ (v - v_inf)^(-1/2) v^(-b) by maximum likelihood on
// the samples above v0. With u = v_inf / v the normalization is an incomplete
// beta function, so the fit uses no histogram.
double tail_mle(const std::vector<double>& tail, double v_inf, double v0) {
    double sum_log_v = 0.0;
    for (double v : tail) sum_log_v += std::log(v);
    const auto n = static_cast<double>(tail.size());
    auto nll = [&](double b) {
        const double norm = std::pow(v_inf, 0.5 - b) * boost::math::beta(b - 0.5, 0.5, v_inf / v0);
        return b * sum_log_v + n * std::log(norm);
    };
    return boost::math::tools::brent_find_minima(nll, 0.6, 10.0, 50).first;
}

// Least-squares slope of the log-binned empirical density over [v0, v_max].
double histogram_slope(const std::vector<double>& sorted, double v0) {
    const double v_max = sorted.back();
    const int bins = 30;
    const double step = std::log(v_max / v0) / bins;
    std::vector<double> x, y;
    auto it = std::lower_bound(sorted.begin(), sorted.end(), v0);
    for (int k = 0; k < bins; ++k) {
        const double lo = v0 * std::exp(step * k), hi = v0 * std::exp(step * (k + 1));
        const auto end = std::lower_bound(it, sorted.end(), hi);
        const auto count = static_cast<double>(end - it);
        it = end;
        if (count < 20) continue;
        x.push_back(0.5 * (std::log(lo) + std::log(hi)));
        y.push_back(std::log(count / (static_cast<double>(sorted.size()) * (hi - lo))));
    }
    const double mx = testsupport::mean(x), my = testsupport::mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

Outcome ac3() {
    DiffusionParams p;
    p.n_h = 0.0;
    p.n_z = 0.5;
    Stopwatch sw;
    auto v = sample_stationary(p, 1'000'000, 3);
    const double secs = sw.seconds();
    const double ks =
        testsupport::ks_one_sample(v, [&](double x) { return stationary_cdf_nohawkes(x, p.n_z, p.lambda_inf, p.psi); });
    std::sort(v.begin(), v.end());
    const double v0 = v[v.size() * 9 / 10];
    const std::vector<double> tail(std::lower_bound(v.begin(), v.end(), v0), v.end());
    const double v_inf = p.lambda_inf * p.psi * p.psi;
    const double slope = -(tail_mle(tail, v_inf, v0) + 0.5);
    const double target = -(1.5 + 1.0 / (2.0 * p.n_z));
    const double rel = slope / target - 1.0;
    return {ks < 0.02 && std::abs(rel) < 0.01 && secs < 300.0,
            fmt("KS %.4f (tol 0.02), tail slope %.4f vs %.4f (rel %+.4f, tol 0.01; histogram %.3f), %.1fs (limit 300s)",
                ks, slope, target, rel, histogram_slope(v, v0), secs)};
}

// ---------------------------------------------------------------- AC4

Outcome ac4() {
    bool pass = true;
    std::string detail;
    for (double nh : {0.2, 0.5, 0.8}) {
        const double a = astar(nh, 0.1, 1e-8, AstarMethod::nz_small_quadratic).a_star;
        const double rel = a / (nh / (1.0 - nh)) - 1.0;
        pass = pass && std::abs(rel) < 1e-6;
        detail += fmt("quad(n_H=%.1f) rel %.1e, ", nh, rel);
    }
    // The tail regression is noisy at chi = 50 (few decorrelated exceedances per
    // slow relaxation time), so both runs get ten times the default length.
    auto mc = [](double n_h, double n_z, double chi) {
        DiffusionParams d;  // same rate convention as the astar Monte-Carlo route
        d.n_h = n_h;
        d.beta_bar = chi <= 2.0 ? 1.0 : 2.0 / chi;
        d.omega_bar = chi <= 2.0 ? chi / 2.0 : 1.0;
        AstarOptions opt;
        opt.seed = 4;
        opt.mc.horizon = 2e5 / d.relaxation_rate();
        return astar(n_h, n_z, chi, AstarMethod::monte_carlo, opt);
    };
    const auto slow = mc(0.5, 0.05, 0.01);
    const double rs = slow.a_star / 1.0 - 1.0;
    const double fast_target = 0.3 / (50.0 * 0.7);
    const auto fast = mc(0.3, 0.3, 50.0);
    const double rf = fast.a_star / fast_target - 1.0;
    pass = pass && std::abs(rs) < 0.15 && std::abs(rf) < 0.30;
    detail += fmt("MC chi=0.01 %.4f vs 1 (rel %+.3f, tol 0.15), MC chi=50 %.5f vs %.5f (rel %+.3f, tol 0.30)",
                  slow.a_star, rs, fast.a_star, fast_target, rf);
    return {pass, detail};
}

// ---------------------------------------------------------------- AC5

Outcome ac5() {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    bool pass = true;
    int exact = 0;
    auto same = [](const PhaseResult& r, const testsupport::PhaseTriple& t) {
        return r.beta == t.beta && r.beta_prime == t.beta_prime && r.rho == t.rho;
    };
    const double e = 0.4;
    const std::array<double, 3> nc{0.95, 0.82, 0.7};
    const double ec = 0.2;
    const std::array<double, 3> cr{0.9, 0.7, 0.63};
    for (int b = 0; b < 3; ++b) {
        const auto r = phase_exponents({e, nc[b], Regime::non_critical});
        const bool ok = r.branch == b + 1 && same(r, testsupport::kNonCritical[b](e, nc[b]));
        const auto rc = phase_exponents({ec, cr[b], Regime::critical});
        const bool okc = rc.branch == b + 1 && same(rc, testsupport::kCritical[b](ec, cr[b]));
        exact += ok + okc;
    }
    pass = exact == 6;

    // Library values just either side of each boundary.
    double worst = 0.0;
    auto jump = [&](double eps_exp, double d, Regime regime) {
        const auto lo = phase_exponents({eps_exp, std::nextafter(d, 0.0), regime});
        const auto hi = phase_exponents({eps_exp, std::nextafter(d, 2.0), regime});
        const auto at = phase_exponents({eps_exp, d, regime});
        for (const auto* r : {&lo, &at})
            worst = std::max({worst, std::abs(r->beta - hi.beta) / std::max(1.0, std::abs(hi.beta)),
                              std::abs(r->beta_prime - hi.beta_prime) / std::max(1.0, std::abs(hi.beta_prime)),
                              std::abs(r->rho - hi.rho) / std::max(1.0, std::abs(hi.rho))});
    };
    Philox4x32 rng(5);
    for (int i = 0; i < 500; ++i) {
        const double x = 0.01 + 0.98 * rng.uniform();
        jump(x, (3 + x) / 4, Regime::non_critical);
        jump(x, (2 + x) / 3, Regime::non_critical);
        const double xc = 0.01 + 0.3 * rng.uniform();
        jump(xc, 0.75, Regime::critical);
        if (2.0 / 3.0 > (1 + xc) / 2 + 1e-9) jump(xc, 2.0 / 3.0, Regime::critical);
    }
    // Slopes are at most 4 in delta, so a one-ulp step moves a branch by a few ulps.
    const bool continuous = worst <= 16 * eps;
    return {pass && continuous, fmt("%d/6 interior points exact, max boundary jump %.2e (tol %.2e)", exact, worst,
                                    16 * eps)};
}

// ---------------------------------------------------------------- AC6 / AC7

struct StreamSummary {
    double hill{0.0};
    std::vector<double> delta;
    std::size_t events{0};
};

struct PresetRuns {
    std::map<std::string, std::vector<StreamSummary>> by_preset;
    double seconds{0.0};
};

const PresetRuns& preset_runs() {
    static const PresetRuns runs = [] {
        const std::array<std::string, 2> names{"zhawkes-paper", "hawkes-benchmark"};
        const std::size_t seeds = 5;
        std::vector<StreamSummary> out(names.size() * seeds);
        Stopwatch sw;
        parallel_for(out.size(), [&](std::size_t i) {
            const auto params = preset_params(names[i / seeds]);
            RunLength run;
            run.events = 5'000'000;
            run.burn_in = 0.1;
            const auto stream = simulate_stream(params, run, 1 + i % seeds);
            const auto bins = bin_series(stream, 5.0);
            out[i].hill = hill_exponent(bins.rs_vol, 0.02).nu_hill;
            out[i].delta = tra_curve(bins, 36).delta_ratio;
            out[i].events = stream.size();
        });
        PresetRuns r;
        r.seconds = sw.seconds();
        for (std::size_t i = 0; i < out.size(); ++i) r.by_preset[names[i / seeds]].push_back(out[i]);
        return r;
    }();
    return runs;
}

double mean_hill(const std::vector<StreamSummary>& runs) {
    double s = 0.0;
    for (const auto& r : runs) s += r.hill;
    return s / static_cast<double>(runs.size());
}

std::vector<double> mean_delta(const std::vector<StreamSummary>& runs) {
    std::vector<double> d(runs.front().delta.size(), 0.0);
    for (const auto& r : runs)
        for (std::size_t t = 0; t < d.size(); ++t) d[t] += r.delta[t] / static_cast<double>(runs.size());
    return d;
}

Outcome ac6() {
    const auto& runs = preset_runs();
    const double z = mean_hill(runs.by_preset.at("zhawkes-paper"));
    const double h = mean_hill(runs.by_preset.at("hawkes-benchmark"));
    std::size_t fewest = std::numeric_limits<std::size_t>::max();
    for (const auto& [name, v] : runs.by_preset)
        for (const auto& r : v) fewest = std::min(fewest, r.events);
    return {z >= 4.0 && z <= 6.5 && h > 9.0 && runs.seconds < 900.0 && fewest >= 5'000'000,
            fmt("zhawkes nu_hill %.3f (want [4, 6.5]), hawkes nu_hill %.3f (want > 9), >= %zu events per stream, "
                "%.0fs (limit 900s)",
                z, h, fewest, runs.seconds)};
}

Outcome ac7() {
    const auto& runs = preset_runs();
    const auto dh = mean_delta(runs.by_preset.at("hawkes-benchmark"));
    const auto dz = mean_delta(runs.by_preset.at("zhawkes-paper"));
    double hawkes_max = 0.0;
    for (double d : dh) hawkes_max = std::max(hawkes_max, std::abs(d));
    bool positive = true;
    double z_min = std::numeric_limits<double>::infinity(), z_max = -z_min;
    for (std::size_t t = 5; t <= dz.size(); ++t) {
        positive = positive && dz[t - 1] > 0.0;
        z_min = std::min(z_min, dz[t - 1]);
    }
    for (double d : dz) z_max = std::max(z_max, d);
    return {hawkes_max < 1e-3 && positive && z_max > 1e-2,
            fmt("hawkes max|Delta| %.2e (want < 1e-3), zhawkes min Delta(tau>=5) %.4f (want > 0), max Delta %.4f "
                "(want > 1e-2)",
                hawkes_max, z_min, z_max)};
}

// ---------------------------------------------------------------- AC8

Outcome ac8() {
    const std::size_t q = 18;
    const double g = 0.09, alpha = 0.6, k0 = 0.14, omega = 0.15;
    QarchModel m = QarchModel::zero(q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            const double ki = k0 * std::exp(-omega * static_cast<double>(i + 1));
            const double kj = k0 * std::exp(-omega * static_cast<double>(j + 1));
            m.kmat(i, j) = ki * kj + (i == j ? g * std::pow(static_cast<double>(i + 1), -alpha) : 0.0);
        }
    m.sigma_inf2 = 1.0 - m.trace();
    const double truth = m.trace();

    const double noiseless = rank_one_diag_fit(m.kmat).frobenius_residual;

    auto r = simulate_qarch(m, 1'000'000, 8, ResidualLaw{8.0}).returns;
    const double mu = testsupport::mean(r);
    for (double& x : r) x -= mu;
    const double sd = std::sqrt(testsupport::variance(r));
    for (double& x : r) x /= sd;
    const auto gmm = gmm_estimate(r, q);
    const auto mle = mle_student(r, q, gmm.model);
    const double rg = gmm.model.trace() / truth - 1.0;
    const double rm = mle.model.trace() / truth - 1.0;
    return {std::abs(rg) < 0.05 && std::abs(rm) < 0.05 && std::abs(mle.nu_dof - 8.0) <= 1.5 && noiseless < 1e-10,
            fmt("trace %.4f: GMM %.4f (rel %+.3f), MLE %.4f (rel %+.3f), tol 0.05; nu %.2f (want 8 +- 1.5); "
                "noiseless residual %.2e (tol 1e-10)",
                truth, gmm.model.trace(), rg, mle.model.trace(), rm, mle.nu_dof, noiseless)};
}

// ---------------------------------------------------------------- AC9

Outcome ac9() {
    const auto p = exp_model(0.5, 1.0);
    RunLength run;
    run.events = 1'000'000;
    run.burn_in = 0.05;
    const auto bins = bin_series(simulate_stream(p, run, 9), 0.25);

    const auto est = estimate_correlations(bins, 24, true);
    const auto res = appendix_a_residual(p.kernel, est);
    double worst_c = 0.0;
    for (std::size_t t = 0; t < res.res_c.size(); ++t)
        worst_c = std::max(worst_c, std::abs(res.res_c[t]) / res.res_c_stderr[t]);

    const auto wide = estimate_correlations(bins, 40, true);
    std::size_t inside = 0, pairs = 0;
    for (std::size_t a = 1; a <= wide.q; ++a)
        for (std::size_t b = a + 1; b <= wide.q; ++b) {
            ++pairs;
            if (std::abs(wide.d(a, b)) <= 3.0 * wide.d_stderr(a, b)) ++inside;
        }
    const double frac = static_cast<double>(inside) / static_cast<double>(pairs);
    return {worst_c < 5.0 && frac >= 0.99,
            fmt("max |C residual|/SE %.2f over 24 lags (tol 5), D within 3 SE on %zu/%zu pairs = %.4f (want >= 0.99)",
                worst_c, inside, pairs, frac)};
}

// ---------------------------------------------------------------- AC10

Outcome ac10() {
    std::vector<std::string> failed;
    Philox4x32 rng(10);
    boost::math::quadrature::exp_sinh<double> integrator;
    auto half_line = [&](auto f) { return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-13); };

    double norm_err = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const double nh = 0.05 + 0.85 * rng.uniform(), nz = 0.05 + 0.85 * rng.uniform();
        const double beta = std::exp(4.0 * rng.uniform() - 2.0), omega = std::exp(4.0 * rng.uniform() - 2.0);
        const double c = std::exp(6.0 * rng.uniform() - 5.0), alpha = 1.1 + 2.0 * rng.uniform();
        KernelSpec ke(ExponentialHawkes{nh, beta}, ExponentialZumbach{nz, omega});
        const auto ne = kernel_norms(ke);
        norm_err = std::max(norm_err, std::abs(half_line([&](double t) { return ke.phi(t); }) / ne.n_h - 1.0));
        norm_err =
            std::max(norm_err, std::abs(half_line([&](double t) { return ke.k(t) * ke.k(t); }) / ne.n_z - 1.0));
        KernelSpec kp(PowerLawHawkes::from_norm(nh, c, alpha));
        const double qp =
            half_line([&](double u) { return u > 600.0 ? 0.0 : kp.phi(std::expm1(u) / c) * std::exp(u) / c; });
        norm_err = std::max(norm_err, std::abs(qp / kernel_norms(kp).n_h - 1.0));
    }
    if (!(norm_err < 1e-8)) failed.push_back("kernel norms");

    std::vector<double> heavy(200'000);
    for (auto& x : heavy) x = std::pow(rng.uniform(), -0.4) * (1.0 + rng.uniform());
    const double base = hill_exponent(heavy, 0.02).nu_hill;
    bool hill_exact = true;
    for (double c : {0x1p-30, 0.25, 2.0, 0x1p20}) {
        auto s = heavy;
        for (auto& x : s) x *= c;
        hill_exact = hill_exact && hill_exponent(s, 0.02).nu_hill == base;
    }
    if (!hill_exact) failed.push_back("Hill scale invariance");

    double delta_max = 0.0;
    const auto zb = bin_series(simulate_markovian(exp_model(0.3, 1.0, 0.4, 0.3), 2e4, 11).stream, 1.0);
    for (double d : tra_curve(zb, 30).delta_ratio) delta_max = std::max(delta_max, std::abs(d));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> sg(500), r(500);
        for (std::size_t i = 0; i < sg.size(); ++i) {
            sg[i] = std::exp(3.0 * rng.normal());
            r[i] = rng.normal() * std::exp(2.0 * rng.normal());
        }
        for (double d : tra_curve(sg, r, 40).delta_ratio) delta_max = std::max(delta_max, std::abs(d));
    }
    if (!(delta_max <= 1.0)) failed.push_back("Delta range");

    double h_min = std::numeric_limits<double>::infinity();
    for (auto [nh, nz, beta, omega] : std::vector<std::array<double, 4>>{
             {0.9, 0.09, 9.0, 0.5}, {0.0, 0.95, 1.0, 9.0}, {0.5, 0.45, 0.01, 0.01}, {0.7, 0.25, 3.0, 3.0}}) {
        DiffusionParams dp;
        dp.n_h = nh;
        dp.n_z = nz;
        dp.beta_bar = beta;
        dp.omega_bar = omega;
        const double dt = 0.099 / std::max(beta, omega);
        const auto path = integrate(dp, dt, 1e5 * dt, 12);
        h_min = std::min(h_min, *std::min_element(path.h.begin(), path.h.end()));
    }
    if (!(h_min >= 0.0)) failed.push_back("H >= 0");

    const auto once = normalize(testsupport::random_panel({.stocks = 6, .days = 60, .bins = 39, .seed = 3}));
    const auto twice = renormalize(once);
    double worst = 0.0;
    std::size_t newly_excluded = 0;
    const std::size_t nb = once.bin_ids.size();
    for (std::size_t ut = 0; ut < once.present.size(); ++ut) {
        if (!once.present[ut] || once.excluded[ut]) continue;
        if (twice.excluded[ut]) ++newly_excluded;
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t i = ut * nb + b;
            worst = std::max({worst, std::abs(twice.returns.values[i] - once.returns.values[i]),
                              std::abs(twice.rs_vol.values[i] - once.rs_vol.values[i])});
        }
    }
    if (!(worst <= 1e-9 && newly_excluded == 0)) failed.push_back("normalization idempotence");

    std::string bad;
    for (const auto& f : failed) bad += (bad.empty() ? "" : ", ") + f;
    return {failed.empty(), fmt("norm quadrature %.1e (tol 1e-8), Hill exact %s, max|Delta| %.6f, min H %.3g, "
                                "renormalize max change %.3g with %zu newly excluded (tol 1e-9)%s%s",
                                norm_err, hill_exact ? "yes" : "no", delta_max, h_min, worst, newly_excluded,
                                bad.empty() ? "" : "; failing: ", bad.c_str())};
}

} // namespace

int main(int argc, char** argv) {
    std::set<std::string> only;
    g_threads = std::max(1u, std::thread::hardware_concurrency());
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string id; std::getline(ss, id, ',');) only.insert(id);
        } else if (arg == "--threads" && i + 1 < argc) {
            g_threads = static_cast<unsigned>(std::max(1, std::stoi(argv[++i])));
        } else {
            std::cerr << "usage: acceptance [--only AC1,AC2,...] [--threads N]\n";
            return 2;
        }
    }

    const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
        {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10},
    };
    int failures = 0;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
