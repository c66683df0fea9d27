#include <doctest.h>

#include "qhawkes/errors.hpp"
#include "qhawkes/kernels.hpp"
#include "qhawkes/rng.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <vector>

using namespace qhawkes;

namespace {

double quad_half_line(const std::function<double(double)>& f) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

// Intensity straight from the definition, on the events with time < t.
double intensity_oracle(const KernelSpec& K, double lam_inf, const std::vector<double>& times,
                        const std::vector<int>& signs, double t) {
    double h = 0.0, z = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= t) continue;
        h += K.phi(t - times[i]);
        z += signs[i] * K.k(t - times[i]);
    }
    return lam_inf + h + z * z;
}

} // namespace

TEST_CASE("kernel evaluation") {
    KernelSpec e(ExponentialHawkes{0.8, 1.0});
    CHECK(eval_kernel(e, KernelPart::diagonal, 0.0) == doctest::Approx(0.8));
    KernelSpec p(PowerLawHawkes{0.0016, 0.01, 1.2});
    CHECK(eval_kernel(p, KernelPart::diagonal, 0.0) == doctest::Approx(0.0016));
    KernelSpec z(ZeroKernel{}, ExponentialZumbach{0.2, 0.5});
    CHECK(eval_kernel(z, KernelPart::zumbach, 0.0) == doctest::Approx(std::sqrt(0.2)));
    CHECK(eval_kernel(e, KernelPart::diagonal, 1e6) == 0.0);
    CHECK(eval_kernel(p, KernelPart::diagonal, 1e300) < 1e-300);
    CHECK(eval_kernel(z, KernelPart::zumbach, 1e6) == 0.0);
    CHECK_THROWS_AS((void)eval_kernel(e, KernelPart::diagonal, -1e-9), DomainError);
    CHECK(eval_kernel(KernelSpec{}, KernelPart::zumbach, 3.0) == 0.0);
}

TEST_CASE("construction rejects non-integrable power laws") {
    CHECK_THROWS_AS(KernelSpec(PowerLawHawkes{0.1, 0.01, 1.0}), DomainError);
    CHECK_THROWS_AS(KernelSpec(PowerLawHawkes{0.1, 0.0, 1.5}), DomainError);
    CHECK_THROWS_AS((void)PowerLawHawkes::from_norm(0.5, 0.01, 0.6), DomainError);
    CHECK_THROWS_AS(KernelSpec(ExponentialHawkes{-0.1, 1.0}), DomainError);
    CHECK_THROWS_AS(KernelSpec(ZeroKernel{}, ExponentialZumbach{0.1, 0.0}), DomainError);
}

TEST_CASE("kernel norms") {
    CHECK(kernel_norms(KernelSpec(ZeroKernel{}, ExponentialZumbach{0.2, 0.5})).n_z == doctest::Approx(0.2));
    CHECK(kernel_norms(KernelSpec(PowerLawHawkes{0.0016, 0.01, 1.2})).n_h == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(kernel_norms(KernelSpec{}).trace == 0.0);
    const auto pl = PowerLawHawkes::from_norm(0.99, 0.01, 1.3);
    CHECK(pl.g == doctest::Approx(0.00297));
}

TEST_CASE("property: closed-form norms agree with quadrature") {
    Philox4x32 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const double nh = 0.9 * rng.uniform();
        const double beta = std::exp(4.0 * rng.uniform() - 2.0);
        const double c = std::exp(6.0 * rng.uniform() - 5.0);
        const double alpha = 1.1 + 2.0 * rng.uniform();
        const double nz = 0.9 * rng.uniform();
        const double omega = std::exp(4.0 * rng.uniform() - 2.0);

        KernelSpec ke(ExponentialHawkes{nh, beta}, ExponentialZumbach{nz, omega});
        const auto ne = kernel_norms(ke);
        CHECK(std::abs(quad_half_line([&](double t) { return ke.phi(t); }) / ne.n_h - 1.0) < 1e-8);
        CHECK(std::abs(quad_half_line([&](double t) { return ke.k(t) * ke.k(t); }) / ne.n_z - 1.0) < 1e-8);
        CHECK(ne.trace == ne.n_h + ne.n_z);

        KernelSpec kp(PowerLawHawkes::from_norm(nh, c, alpha));
        const auto np = kernel_norms(kp);
        // Substitute t = (e^u - 1)/c so the slow power tail becomes exponential in u.
        const double q = quad_half_line(
            [&](double u) { return u > 600.0 ? 0.0 : kp.phi(std::expm1(u) / c) * std::exp(u) / c; });
        CHECK(std::abs(q / np.n_h - 1.0) < 1e-8);
        CHECK(np.trace == np.n_h + np.n_z);
    }
}

TEST_CASE("stationarity check") {
    ModelParams p;
    p.kernel = KernelSpec(ExponentialHawkes{0.6, 1.0}, ExponentialZumbach{0.3, 1.0});
    p.lambda_inf = 1.0;
    auto r = stationarity_check(p);
    CHECK(r.status == Stationarity::stationary);
    CHECK(*r.mean_intensity == doctest::Approx(10.0));

    p.lambda_inf = 0.0;
    p.kernel = KernelSpec(ExponentialHawkes{0.7, 1.0}, ExponentialZumbach{0.3, 1.0});
    r = stationarity_check(p);
    CHECK(r.status == Stationarity::critical);
    CHECK(!r.mean_intensity);

    p.lambda_inf = 1.0;
    p.kernel = KernelSpec(ExponentialHawkes{0.8, 1.0}, ExponentialZumbach{0.3, 1.0});
    CHECK(stationarity_check(p).status == Stationarity::unstable);
    p.lambda_inf = 0.0;
    CHECK(stationarity_check(p).status == Stationarity::unstable);
}

TEST_CASE("discretize_qarch") {
    ModelParams p;
    p.lambda_inf = 1.0;
    p.psi = 1.0;
    auto m = discretize_qarch(p, 0.1, 5);
    CHECK(m.sigma_inf2 == doctest::Approx(0.1));
    CHECK(m.kmat.isZero());
    CHECK(m.leverage.isZero());

    const double nz = 0.2, om = 0.5, d = 0.25;
    p.kernel = KernelSpec(ExponentialHawkes{0.3, 2.0}, ExponentialZumbach{nz, om});
    m = discretize_qarch(p, d, 12);
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            CHECK(m.kmat(i, j) == m.kmat(j, i));
            const double rank_one = 2.0 * nz * om * std::exp(-om * (i + 1 + j + 1) * d) * d;
            const double diag = i == j ? 0.3 * 2.0 * std::exp(-2.0 * (i + 1) * d) * d : 0.0;
            CHECK(m.kmat(i, j) == doctest::Approx(rank_one + diag).epsilon(1e-12));
        }
    }
    CHECK_NOTHROW(m.validate());
    CHECK_THROWS_AS((void)discretize_qarch(p, 0.0, 3), DomainError);
    CHECK_THROWS_AS((void)discretize_qarch(p, 0.1, 0), DomainError);
    CHECK_THROWS_AS((void)discretize_qarch(p, 1e308, 100), DomainError);
}

TEST_CASE("property: discretized trace converges to Tr K") {
    ModelParams p;
    p.kernel = KernelSpec(ExponentialHawkes{0.5, 1.0}, ExponentialZumbach{0.3, 0.5});
    double prev = 1.0;
    for (double d : {0.2, 0.05, 0.02}) {
        const auto q = static_cast<std::size_t>(40.0 / d);
        const double err = std::abs(discretize_qarch(p, d, q).trace() / 0.8 - 1.0);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.02);
}

TEST_CASE("sigma^2/delta of the discretized model approaches psi^2 lambda_t") {
    ModelParams p;
    p.kernel = KernelSpec(ExponentialHawkes{0.4, 1.0}, ExponentialZumbach{0.3, 0.8});
    p.lambda_inf = 0.7;
    p.psi = 0.5;
    const double window = 4.0;
    Philox4x32 rng(3);
    std::vector<double> times;
    std::vector<int> signs;
    for (double t = rng.exponential() * 0.3; t < window; t += rng.exponential() * 0.3) {
        times.push_back(t);
        signs.push_back(rng.sign());
    }
    const double lam = intensity_oracle(p.kernel, p.lambda_inf, times, signs, window);

    double prev = 1e300;
    for (double d : {0.1, 0.01, 0.001}) {
        const auto q = static_cast<std::size_t>(std::llround(window / d));
        const auto m = discretize_qarch(p, d, q);
        // r at lag tau is the price change over ((window - tau d), window - (tau-1) d].
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
        for (std::size_t i = 0; i < times.size(); ++i) {
            const auto tau = static_cast<Eigen::Index>(std::ceil((window - times[i]) / d));
            r(tau - 1) += p.psi * signs[i];
        }
        const double s2 = m.sigma_inf2 + r.dot(m.kmat * r);
        const double err = std::abs(s2 / d / (p.psi * p.psi * lam) - 1.0);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.01);
}

TEST_CASE("exponential-sum approximation of the power law") {
    const auto pl = PowerLawHawkes::from_norm(0.8, 0.01, 1.2);
    const double t_max = 1e6;
    const auto s = approximate_power_law(pl, t_max, 1e-9);
    CHECK(s.size() < 120);
    double worst = 0.0;
    for (double lt = -3.0; lt <= 6.0; lt += 0.01) {
        const double t = std::pow(10.0, lt);
        worst = std::max(worst, std::abs(s(t) / (pl.g * std::pow(1.0 + pl.c * t, -pl.alpha)) - 1.0));
    }
    CHECK(std::abs(s(0.0) / pl.g - 1.0) < 1e-9);
    CHECK(worst < 1e-9);
}

TEST_CASE("key-value round trip") {
    ModelParams p;
    p.kernel = KernelSpec(PowerLawHawkes::from_norm(0.8, 0.01, 1.2), ExponentialZumbach{0.1, 0.03});
    p.lambda_inf = 0.37;
    p.psi = 0.01;
    const auto text = format_key_values(to_key_values(p));
    const auto back = model_params_from_key_values(parse_key_values(text));
    CHECK(format_key_values(to_key_values(back)) == text);
    const auto& pl = std::get<PowerLawHawkes>(back.kernel.diagonal());
    CHECK(pl.g == std::get<PowerLawHawkes>(p.kernel.diagonal()).g);
    CHECK(back.psi == 0.01);

    const auto kv = parse_key_values("# comment\n diagonal.kind = power_law\ndiagonal.n_h=0.99\n"
                                     "diagonal.c=0.01\ndiagonal.alpha=1.3\n\nlambda_inf=2\n");
    const auto q = model_params_from_key_values(kv);
    CHECK(kernel_norms(q.kernel).n_h == doctest::Approx(0.99));
    CHECK(kernel_norms(q.kernel).n_z == 0.0);
    CHECK(q.lambda_inf == 2.0);

    CHECK_THROWS_AS((void)parse_key_values("novalue\n"), DomainError);
    CHECK_THROWS_AS((void)model_params_from_key_values(parse_key_values("diagonal.kind=cubic")), DomainError);
    CHECK_THROWS_AS((void)model_params_from_key_values(parse_key_values("diagonal.bta=1")), DomainError);
    CHECK_THROWS_AS((void)model_params_from_key_values(parse_key_values("diagonal.kind=exponential\ndiagonal.n_h=x")),
                    DomainError);
}
