#include "qhawkes/qarch.hpp"

#include "numfmt.hpp"
#include "qhawkes/errors.hpp"

#include <ceres/first_order_function.h>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace qhawkes {

namespace {

constexpr std::size_t kChunk = 4096;

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

void check_shape(const QarchModel& m) {
    require(m.kmat.rows() == m.kmat.cols(), "qarch: kmat must be square");
    require(m.leverage.size() == 0 || m.leverage.size() == m.kmat.rows(), "qarch: leverage length must equal q");
}

double leverage_at(const QarchModel& m, Eigen::Index i) { return m.leverage.size() ? m.leverage(i) : 0.0; }

void check_normalized(const std::vector<double>& r, const char* who) {
    double m = 0.0, m2 = 0.0;
    for (double x : r) {
        m += x;
        m2 += x * x;
    }
    m /= static_cast<double>(r.size());
    m2 /= static_cast<double>(r.size());
    if (std::abs(m2 - 1.0) > 0.01 || std::abs(m) > 0.01) {
        std::ostringstream os;
        os << who << ": input must be normalized (<r^2> = 1, <r> = 0 within 1%); got <r^2>=" << m2 << ", <r>=" << m;
        throw DomainError(os.str());
    }
}

// Rows t0..t0+m-1 of the lag matrix: H(row, j) = r[t - 1 - j].
void fill_lags(const std::vector<double>& r, std::size_t t0, std::size_t m, std::size_t q, Eigen::MatrixXd& h) {
    h.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(q));
    for (std::size_t row = 0; row < m; ++row)
        for (std::size_t j = 0; j < q; ++j)
            h(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = r[t0 + row - 1 - j];
}

// Parameter vector: sigma_inf2, K(i, j) for i <= j, then optional leverage.
struct Layout {
    std::size_t q;
    bool lev;

    [[nodiscard]] std::size_t pairs() const { return q * (q + 1) / 2; }
    [[nodiscard]] std::size_t size() const { return 1 + pairs() + (lev ? q : 0); }
    [[nodiscard]] std::size_t lev_offset() const { return 1 + pairs(); }

    template <class Fn>
    void for_pairs(Fn&& fn) const {
        std::size_t idx = 1;
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = i; j < q; ++j) fn(idx++, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    [[nodiscard]] QarchModel to_model(const double* x, double delta = 1.0) const {
        QarchModel m = QarchModel::zero(q, x[0], delta);
        for_pairs([&](std::size_t idx, Eigen::Index i, Eigen::Index j) { m.kmat(i, j) = m.kmat(j, i) = x[idx]; });
        if (lev)
            for (std::size_t i = 0; i < q; ++i) m.leverage(static_cast<Eigen::Index>(i)) = x[lev_offset() + i];
        return m;
    }

    [[nodiscard]] std::vector<double> from_model(const QarchModel& m) const {
        std::vector<double> x(size(), 0.0);
        x[0] = m.sigma_inf2;
        for_pairs([&](std::size_t idx, Eigen::Index i, Eigen::Index j) { x[idx] = 0.5 * (m.kmat(i, j) + m.kmat(j, i)); });
        if (lev)
            for (std::size_t i = 0; i < q; ++i) x[lev_offset() + i] = leverage_at(m, static_cast<Eigen::Index>(i));
        return x;
    }
};

} // namespace

VarianceResult qarch_variance(const QarchModel& model, std::span<const double> history, double floor_eps,
                              bool allow_padding) {
    check_shape(model);
    const auto q = static_cast<Eigen::Index>(model.q());
    VarianceResult out;
    if (static_cast<Eigen::Index>(history.size()) < q) {
        require(allow_padding, "qarch_variance: history shorter than q");
        out.padded = true;
    }
    const Eigen::Index n = std::min<Eigen::Index>(q, static_cast<Eigen::Index>(history.size()));
    double s = model.sigma_inf2;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ri = history[static_cast<std::size_t>(i)];
        s += leverage_at(model, i) * ri;
        double row = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) row += model.kmat(i, j) * history[static_cast<std::size_t>(j)];
        s += ri * row;
    }
    const double floor = floor_eps * model.sigma_inf2;
    if (s < floor) {
        s = floor;
        out.floored = true;
    }
    out.variance = s;
    return out;
}

FilterResult qarch_filter(const QarchModel& model, const std::vector<double>& returns, double floor_eps) {
    check_shape(model);
    const std::size_t q = model.q();
    FilterResult out;
    out.variance.resize(returns.size());
    std::vector<double> hist(q, 0.0);
    for (std::size_t t = 0; t < returns.size(); ++t) {
        const auto v = qarch_variance(model, hist, floor_eps);
        out.variance[t] = v.variance;
        out.floored += v.floored ? 1 : 0;
        if (q > 0) {
            std::copy_backward(hist.begin(), hist.end() - 1, hist.end());
            hist[0] = returns[t];
        }
    }
    return out;
}

double standardized_t(double nu, Philox4x32& rng) {
    require(nu > 2.0, "standardized_t: nu must be > 2");
    std::gamma_distribution<double> chi2(0.5 * nu, 2.0);
    const double z = rng.normal();
    return z * std::sqrt((nu - 2.0) / chi2(rng));
}

QarchSimulation simulate_qarch(const QarchModel& model, std::size_t n, std::uint64_t seed,
                               const ResidualLaw& residuals, std::size_t burn_in, double floor_eps) {
    check_shape(model);
    require(model.sigma_inf2 > 0.0, "simulate_qarch: sigma_inf2 must be > 0");
    require(residuals.nu <= 0.0 || residuals.nu > 2.0, "simulate_qarch: Student-t residuals need nu > 2");
    Philox4x32 rng(seed, 3);
    const std::size_t q = model.q();
    std::vector<double> hist(q, 0.0);
    QarchSimulation out;
    out.returns.reserve(n);
    for (std::size_t t = 0; t < n + burn_in; ++t) {
        const auto v = qarch_variance(model, hist, floor_eps);
        const double xi = residuals.nu > 0.0 ? standardized_t(residuals.nu, rng) : rng.normal();
        const double r = std::sqrt(v.variance) * xi;
        if (!std::isfinite(r)) throw NumericalError("simulate_qarch: variance diverged");
        if (t >= burn_in) {
            out.returns.push_back(r);
            out.floored += v.floored ? 1 : 0;
        }
        if (q > 0) {
            std::copy_backward(hist.begin(), hist.end() - 1, hist.end());
            hist[0] = r;
        }
    }
    return out;
}

GmmResult gmm_estimate(const std::vector<double>& returns, std::size_t q, const GmmOptions& options) {
    require(q >= 1, "gmm_estimate: q must be >= 1");
    if (returns.size() < 50 * q * q)
        throw InsufficientData("gmm_estimate: needs at least 50 q^2 = " + std::to_string(50 * q * q) + " returns");
    if (options.require_normalized) check_normalized(returns, "gmm_estimate");

    const Layout lay{q, options.fit_leverage};
    const auto p = static_cast<Eigen::Index>(lay.size());
    const std::size_t n = returns.size() - q;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd h, f;
    Eigen::VectorXd y;

    auto build = [&](std::size_t t0, std::size_t m) {
        fill_lags(returns, t0, m, q, h);
        f.resize(static_cast<Eigen::Index>(m), p);
        y.resize(static_cast<Eigen::Index>(m));
        f.col(0).setOnes();
        lay.for_pairs([&](std::size_t idx, Eigen::Index i, Eigen::Index j) {
            f.col(static_cast<Eigen::Index>(idx)) = (i == j ? 1.0 : 2.0) * h.col(i).cwiseProduct(h.col(j));
        });
        if (lay.lev) f.rightCols(static_cast<Eigen::Index>(q)) = h;
        for (std::size_t row = 0; row < m; ++row) {
            const double r = returns[t0 + row];
            y(static_cast<Eigen::Index>(row)) = r * r;
        }
    };

    for (std::size_t t0 = q; t0 < returns.size(); t0 += kChunk) {
        const std::size_t m = std::min(kChunk, returns.size() - t0);
        build(t0, m);
        a.selfadjointView<Eigen::Lower>().rankUpdate(f.transpose());
        b.noalias() += f.transpose() * y;
    }
    a = a.selfadjointView<Eigen::Lower>();
    a /= static_cast<double>(n);
    b /= static_cast<double>(n);

    GmmResult out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff(), lmin = eig.eigenvalues().minCoeff();
    out.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    Eigen::MatrixXd a_solve = a;
    if (!(out.condition <= options.max_condition)) {
        out.ridge = lmax / options.max_condition;
        a_solve.diagonal().array() += out.ridge;
        std::ostringstream os;
        os << "moment matrix ill-conditioned (condition " << out.condition << "); ridge " << out.ridge;
        out.warning = os.str();
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a_solve);
    const Eigen::VectorXd theta = ldlt.solve(b);
    out.moment_residual = (a * theta - b).cwiseAbs().maxCoeff();

    // Sandwich covariance A^-1 B A^-1 / n with B = E[f f^T u^2].
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t t0 = q; t0 < returns.size(); t0 += kChunk) {
        const std::size_t m = std::min(kChunk, returns.size() - t0);
        build(t0, m);
        const Eigen::VectorXd u = y - f * theta;
        const Eigen::MatrixXd fu = f.array().colwise() * u.array();
        meat.selfadjointView<Eigen::Lower>().rankUpdate(fu.transpose());
    }
    meat = meat.selfadjointView<Eigen::Lower>();
    meat /= static_cast<double>(n);
    const Eigen::MatrixXd ainv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::VectorXd se = ((ainv * meat * ainv).diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();

    out.model = lay.to_model(theta.data());
    out.sigma_inf2_stderr = se(0);
    out.kmat_stderr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    lay.for_pairs([&](std::size_t idx, Eigen::Index i, Eigen::Index j) {
        out.kmat_stderr(i, j) = out.kmat_stderr(j, i) = se(static_cast<Eigen::Index>(idx));
    });
    out.leverage_fit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    out.leverage_stderr = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    if (lay.lev) {
        out.leverage_fit = out.model.leverage;
        out.leverage_stderr = se.tail(static_cast<Eigen::Index>(q));
        // Reported only; the returned model keeps a zero leverage.
        out.model.leverage.setZero();
    }
    if ((out.model.kmat.diagonal().array() < 0.0).any()) {
        if (!out.warning.empty()) out.warning += "; ";
        out.warning += "negative diagonal kernel entries";
    }
    return out;
}

namespace {

struct StudentTerms {
    double ll;
    double d_var;  // d ll / d sigma^2
    double d_nu;   // d ll / d nu
};

StudentTerms student_terms(double r, double var, double nu, double log_norm, double dnorm_dnu) {
    const double s = nu - 2.0;
    const double z = r * r / (s * var);
    const double a = 1.0 + z;
    StudentTerms t;
    t.ll = log_norm - 0.5 * std::log(var) - 0.5 * (nu + 1.0) * std::log1p(z);
    t.d_var = -0.5 / var + 0.5 * (nu + 1.0) * z / (var * a);
    t.d_nu = dnorm_dnu - 0.5 * std::log1p(z) + 0.5 * (nu + 1.0) * z / (s * a);
    return t;
}

// log Gamma((nu+1)/2) - log Gamma(nu/2) - log(pi (nu-2)) / 2 and its nu-derivative.
double log_norm(double nu) {
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(std::numbers::pi * (nu - 2.0));
}
double dlog_norm(double nu) {
    return 0.5 * boost::math::digamma(0.5 * (nu + 1.0)) - 0.5 * boost::math::digamma(0.5 * nu) - 0.5 / (nu - 2.0);
}

class NegLogLik final : public ceres::FirstOrderFunction {
public:
    NegLogLik(const std::vector<double>& r, Layout lay, double floor_eps)
        : r_(r), lay_(lay), floor_eps_(floor_eps) {}

    bool Evaluate(const double* x, double* cost, double* gradient) const override {
        const double sig = x[0];
        if (!(sig > 0.0) || !std::isfinite(sig)) return false;
        const double theta = x[lay_.size()];
        const double nu = 2.0 + std::exp(theta);
        if (!std::isfinite(nu)) return false;
        const QarchModel m = lay_.to_model(x);
        const auto q = lay_.q;
        const double ln = log_norm(nu), dln = dlog_norm(nu);
        const double floor = floor_eps_ * sig;

        double ll = 0.0, g_sig = 0.0, g_nu = 0.0;
        Eigen::MatrixXd gk = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
        Eigen::VectorXd gl = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
        Eigen::MatrixXd h;
        floored_ = 0;
        for (std::size_t t0 = q; t0 < r_.size(); t0 += kChunk) {
            const std::size_t mrows = std::min(kChunk, r_.size() - t0);
            fill_lags(r_, t0, mrows, q, h);
            Eigen::VectorXd var = ((h * m.kmat).cwiseProduct(h)).rowwise().sum();
            var.array() += sig;
            if (lay_.lev) var.noalias() += h * m.leverage;
            Eigen::VectorXd w(static_cast<Eigen::Index>(mrows));
            for (std::size_t row = 0; row < mrows; ++row) {
                const auto e = static_cast<Eigen::Index>(row);
                const bool fl = var(e) < floor;
                const auto t = student_terms(r_[t0 + row], fl ? floor : var(e), nu, ln, dln);
                if (!std::isfinite(t.ll)) return false;
                ll += t.ll;
                g_nu += t.d_nu;
                if (fl) {
                    ++floored_;
                    g_sig += t.d_var * floor_eps_;
                    w(e) = 0.0;
                } else {
                    g_sig += t.d_var;
                    w(e) = t.d_var;
                }
            }
            if (gradient) {
                gk.noalias() += h.transpose() * (h.array().colwise() * w.array()).matrix();
                if (lay_.lev) gl.noalias() += h.transpose() * w;
            }
        }
        const double n = static_cast<double>(r_.size() - q);
        *cost = -ll / n;
        if (gradient) {
            gradient[0] = -g_sig / n;
            lay_.for_pairs([&](std::size_t idx, Eigen::Index i, Eigen::Index j) {
                gradient[idx] = -(i == j ? 1.0 : 2.0) * gk(i, j) / n;
            });
            if (lay_.lev)
                for (std::size_t i = 0; i < q; ++i) gradient[lay_.lev_offset() + i] = -gl(static_cast<Eigen::Index>(i)) / n;
            gradient[lay_.size()] = -g_nu * (nu - 2.0) / n;
        }
        return true;
    }

    int NumParameters() const override { return static_cast<int>(lay_.size() + 1); }

    [[nodiscard]] std::size_t floored() const { return floored_; }

private:
    const std::vector<double>& r_;
    Layout lay_;
    double floor_eps_;
    mutable std::size_t floored_{0};
};

double kurtosis_nu(const QarchModel& init, const std::vector<double>& r, double floor_eps) {
    const auto filt = qarch_filter(init, r, floor_eps);
    double m2 = 0.0, m4 = 0.0;
    const std::size_t q = init.q();
    for (std::size_t t = q; t < r.size(); ++t) {
        const double x = r[t] * r[t] / filt.variance[t];
        m2 += x;
        m4 += x * x;
    }
    const double n = static_cast<double>(r.size() - q);
    m2 /= n;
    m4 /= n;
    const double excess = m4 / (m2 * m2) - 3.0;
    return excess > 0.1 ? std::clamp(4.0 + 6.0 / excess, 4.2, 60.0) : 60.0;
}

} // namespace

double student_loglik(const QarchModel& model, double nu, const std::vector<double>& returns, double floor_eps) {
    check_shape(model);
    require(nu > 2.0, "student_loglik: nu must be > 2");
    require(returns.size() > model.q(), "student_loglik: series shorter than q");
    const Layout lay{model.q(), model.leverage.size() > 0};
    auto x = lay.from_model(model);
    x.push_back(std::log(nu - 2.0));
    NegLogLik f(returns, lay, floor_eps);
    double cost = 0.0;
    if (!f.Evaluate(x.data(), &cost, nullptr)) throw NumericalError("student_loglik: non-finite likelihood");
    return -cost;
}

MleResult mle_student(const std::vector<double>& returns, std::size_t q, const QarchModel& init,
                      const MleOptions& options) {
    check_shape(init);
    require(init.q() == q, "mle_student: init model has a different q");
    require(init.sigma_inf2 > 0.0, "mle_student: init sigma_inf2 must be > 0");
    require(returns.size() > 10 * q, "mle_student: series too short");
    if (options.require_normalized) check_normalized(returns, "mle_student");

    const bool lev = init.leverage.size() > 0 && init.leverage.cwiseAbs().maxCoeff() > 0.0;
    const Layout lay{q, lev};
    auto x = lay.from_model(init);
    const double nu0 = options.nu_init > 2.0 ? options.nu_init : kurtosis_nu(init, returns, options.floor_eps);
    x.push_back(std::log(nu0 - 2.0));
    const auto x_init = x;

    auto* fn = new NegLogLik(returns, lay, options.floor_eps);
    ceres::GradientProblem problem(fn);
    ceres::GradientProblemSolver::Options so;
    so.line_search_direction_type = ceres::LBFGS;
    so.max_num_iterations = options.max_iterations;
    so.function_tolerance = 1e-12;
    so.gradient_tolerance = 1e-9;
    so.parameter_tolerance = 1e-10;
    so.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    double init_cost = 0.0;
    if (!fn->Evaluate(x_init.data(), &init_cost, nullptr))
        throw NumericalError("mle_student: likelihood not finite at the initial model");
    ceres::Solve(so, problem, x.data(), &summary);

    MleResult out;
    out.loglik_init = -init_cost;
    out.iterations = static_cast<int>(summary.iterations.size());
    out.converged = summary.termination_type == ceres::CONVERGENCE;
    out.message = summary.message;
    double final_cost = 0.0;
    if (!summary.IsSolutionUsable() || !fn->Evaluate(x.data(), &final_cost, nullptr) || final_cost > init_cost) {
        // Best so far is the starting point.
        x = x_init;
        final_cost = init_cost;
        out.converged = false;
        out.message = "no improvement over the initial model: " + out.message;
        (void)fn->Evaluate(x.data(), &final_cost, nullptr);
    }
    out.loglik = -final_cost;
    out.floored = fn->floored();
    out.model = lay.to_model(x.data(), init.delta);
    if (!lev) out.model.leverage.setZero();
    out.nu_dof = 2.0 + std::exp(x[lay.size()]);
    return out;
}

namespace {

double objective(const Eigen::MatrixXd& kmat, const Eigen::VectorXd& phi, const Eigen::VectorXd& k) {
    Eigen::MatrixXd r = kmat - k * k.transpose();
    r.diagonal() -= phi;
    return r.squaredNorm();
}

struct Descent {
    Eigen::VectorXd phi, k;
    double obj;
    std::vector<double> history;
};

// Residuals of the objective with phi eliminated (phi_i = max(0, K_ii - k_i^2)):
// off-diagonal pairs weighted by sqrt(2), plus the diagonal where phi is clamped.
void residuals(const Eigen::MatrixXd& kmat, const Eigen::VectorXd& k, Eigen::VectorXd& res, Eigen::MatrixXd* jac) {
    const Eigen::Index q = k.size();
    const Eigen::Index m = q * (q - 1) / 2 + q;
    res.setZero(m);
    if (jac) jac->setZero(m, q);
    Eigen::Index row = 0;
    const double w = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = i + 1; j < q; ++j, ++row) {
            res(row) = w * (kmat(i, j) - k(i) * k(j));
            if (jac) {
                (*jac)(row, i) = -w * k(j);
                (*jac)(row, j) = -w * k(i);
            }
        }
    for (Eigen::Index i = 0; i < q; ++i, ++row) {
        if (kmat(i, i) - k(i) * k(i) >= 0.0) continue;
        res(row) = kmat(i, i) - k(i) * k(i);
        if (jac) (*jac)(row, i) = -2.0 * k(i);
    }
}

Descent alternate(const Eigen::MatrixXd& kmat, Eigen::VectorXd k) {
    const double scale = std::max(kmat.squaredNorm(), 1e-300);
    Descent d;
    double prev = std::numeric_limits<double>::infinity();
    auto record = [&](double obj) {
        if (obj > prev * (1.0 + 1e-9) + 1e-30 * scale)
            throw NumericalError("rank_one_diag_fit: objective increased during the descent");
        d.history.push_back(obj);
    };
    auto phi_of = [&](const Eigen::VectorXd& kk) { return Eigen::VectorXd((kmat.diagonal() - kk.cwiseAbs2()).cwiseMax(0.0)); };

    // Alternating sweeps: phi given k in closed form, then k as the best rank-one
    // approximation of K - diag(phi).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    for (int it = 0; it < 200; ++it) {
        d.phi = phi_of(k);
        Eigen::MatrixXd m = kmat;
        m.diagonal() -= d.phi;
        eig.compute(m);
        const Eigen::Index top = eig.eigenvalues().size() - 1;
        k = std::sqrt(std::max(0.0, eig.eigenvalues()(top))) * eig.eigenvectors().col(top);
        d.obj = objective(kmat, d.phi, k);
        record(d.obj);
        if (d.obj <= 1e-28 * scale || prev - d.obj <= 1e-10 * prev) break;
        prev = d.obj;
    }
    d.phi = phi_of(k);
    d.obj = objective(kmat, d.phi, k);
    prev = d.obj;

    // The sweeps converge linearly and slowly near zero residual; finish with
    // damped Gauss-Newton steps in k, accepted only when the objective drops.
    Eigen::VectorXd res;
    Eigen::MatrixXd jac;
    double mu = 1e-6;
    bool stalled = false;
    for (int it = 0; it < 500 && !stalled && d.obj > 1e-28 * scale; ++it) {
        residuals(kmat, k, res, &jac);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * res;
        stalled = true;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd sys = jtj;
            sys.diagonal().array() += mu * std::max(1e-300, jtj.diagonal().maxCoeff());
            const Eigen::VectorXd cand = k - sys.ldlt().solve(jtr);
            const auto cphi = phi_of(cand);
            const double obj = objective(kmat, cphi, cand);
            if (obj < d.obj) {
                stalled = d.obj - obj <= 1e-10 * d.obj;
                k = cand;
                d.phi = cphi;
                d.obj = obj;
                record(obj);
                prev = obj;
                mu = std::max(mu * 0.1, 1e-15);
                break;
            }
            mu *= 10.0;
        }
    }
    d.k = k;
    return d;
}

struct LogFit {
    double intercept{0.0}, slope{0.0}, r2{0.0};
    std::size_t excluded{0};
};

LogFit log_regression(const Eigen::VectorXd& v, bool log_x) {
    std::vector<double> xs, ys;
    LogFit out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v(i) > 0.0)) {
            ++out.excluded;
            continue;
        }
        const double tau = static_cast<double>(i + 1);
        xs.push_back(log_x ? std::log(tau) : tau);
        ys.push_back(std::log(v(i)));
    }
    require(xs.size() >= 2, "parametric_fit: needs at least two positive entries");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    out.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return out;
}

} // namespace

KernelFit rank_one_diag_fit(const Eigen::MatrixXd& kmat, std::uint64_t seed) {
    require(kmat.rows() == kmat.cols() && kmat.rows() > 0, "rank_one_diag_fit: kmat must be square and non-empty");
    const double scale = std::max(1.0, kmat.cwiseAbs().maxCoeff());
    require((kmat - kmat.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "rank_one_diag_fit: kmat not symmetric");
    const Eigen::Index q = kmat.rows();

    std::vector<Eigen::VectorXd> starts;
    {
        // Leading eigenvector of the off-diagonal part.
        Eigen::MatrixXd off = kmat;
        off.diagonal().setZero();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(off);
        starts.push_back(std::sqrt(std::max(0.0, eig.eigenvalues()(q - 1))) * eig.eigenvectors().col(q - 1));
    }
    double off_level = 0.0;
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j)
            if (i != j) off_level += std::abs(kmat(i, j));
    off_level = q > 1 ? std::sqrt(off_level / static_cast<double>(q * (q - 1))) : 0.0;
    Philox4x32 rng(seed, 5);
    for (int s = 1; s < 5; ++s) {
        Eigen::VectorXd k(q);
        for (Eigen::Index i = 0; i < q; ++i) k(i) = off_level * 2.0 * rng.uniform();
        starts.push_back(k);
    }

    Descent best;
    best.obj = std::numeric_limits<double>::infinity();
    for (const auto& k0 : starts) {
        auto d = alternate(kmat, k0);
        if (d.obj < best.obj) best = std::move(d);
    }
    KernelFit fit;
    fit.phi = best.phi;
    fit.k = best.k.sum() < 0.0 ? Eigen::VectorXd(-best.k) : best.k;
    fit.frobenius_residual = std::sqrt(best.obj);
    fit.objective_history = std::move(best.history);
    return fit;
}

KernelFit parametric_fit(const KernelFit& fit) {
    KernelFit out = fit;
    const auto p = log_regression(fit.phi, true);
    out.g = std::exp(p.intercept);
    out.alpha = -p.slope;
    out.r2_phi = p.r2;
    out.excluded_phi = p.excluded;
    const auto k = log_regression(fit.k, false);
    out.k0 = std::exp(k.intercept);
    out.omega = -k.slope;
    out.r2_k = k.r2;
    out.excluded_k = k.excluded;
    return out;
}

Endogeneity endogeneity(const KernelFit& fit, std::size_t q) {
    require(q >= 1, "endogeneity: q must be >= 1");
    Endogeneity e;
    for (std::size_t t = 1; t <= q; ++t) {
        const double tau = static_cast<double>(t);
        e.sum_phi += fit.g * std::pow(tau, -fit.alpha);
        e.sum_k2 += fit.k0 * fit.k0 * std::exp(-2.0 * fit.omega * tau);
    }
    e.trace = e.sum_phi + e.sum_k2;
    return e;
}

Endogeneity endogeneity(const QarchModel& model, std::size_t q) {
    require(q >= 1, "endogeneity: q must be >= 1");
    check_shape(model);
    Endogeneity e;
    const auto n = static_cast<Eigen::Index>(std::min(q, model.q()));
    if (n == 0) return e;
    const auto fit = rank_one_diag_fit(model.kmat);
    e.sum_phi = fit.phi.head(n).sum();
    e.sum_k2 = fit.k.head(n).squaredNorm();
    e.trace = model.kmat.diagonal().head(n).sum();
    return e;
}

void write_model_csv(std::ostream& os, const QarchModel& model) {
    check_shape(model);
    const auto q = static_cast<Eigen::Index>(model.q());
    os << "sigma_inf2," << detail::to_text(model.sigma_inf2) << '\n';
    os << "delta," << detail::to_text(model.delta) << '\n';
    os << "q," << q << '\n';
    os << "leverage";
    for (Eigen::Index i = 0; i < q; ++i) os << ',' << detail::to_text(leverage_at(model, i));
    os << '\n';
    for (Eigen::Index i = 0; i < q; ++i) {
        os << "kmat";
        for (Eigen::Index j = 0; j < q; ++j) os << ',' << detail::to_text(model.kmat(i, j));
        os << '\n';
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    return out;
}

double parse_number(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw DomainError("read_model_csv: bad number '" + s + "'");
    return v;
}

} // namespace

QarchModel read_model_csv(std::istream& is) {
    QarchModel m;
    std::vector<std::vector<double>> rows;
    std::vector<double> lev;
    long q = -1;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        std::vector<double> vals;
        for (std::size_t i = 1; i < cells.size(); ++i) vals.push_back(parse_number(cells[i]));
        const auto& tag = cells[0];
        if (tag == "sigma_inf2" && vals.size() == 1) m.sigma_inf2 = vals[0];
        else if (tag == "delta" && vals.size() == 1) m.delta = vals[0];
        else if (tag == "q" && vals.size() == 1) q = std::lround(vals[0]);
        else if (tag == "leverage") lev = vals;
        else if (tag == "kmat") rows.push_back(vals);
        else throw DomainError("read_model_csv: unexpected line '" + line + "'");
    }
    if (q < 0 || static_cast<long>(rows.size()) != q) throw DomainError("read_model_csv: kmat rows do not match q");
    m.kmat.resize(q, q);
    for (long i = 0; i < q; ++i) {
        if (static_cast<long>(rows[static_cast<std::size_t>(i)].size()) != q)
            throw DomainError("read_model_csv: kmat row length does not match q");
        for (long j = 0; j < q; ++j) m.kmat(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    m.leverage = Eigen::VectorXd::Zero(q);
    if (!lev.empty()) {
        if (static_cast<long>(lev.size()) != q) throw DomainError("read_model_csv: leverage length does not match q");
        for (long i = 0; i < q; ++i) m.leverage(i) = lev[static_cast<std::size_t>(i)];
    }
    m.validate();
    return m;
}

void write_fit_csv(std::ostream& os, const KernelFit& fit) {
    os << "# g=" << detail::to_text(fit.g) << " alpha=" << detail::to_text(fit.alpha)
       << " k0=" << detail::to_text(fit.k0) << " omega=" << detail::to_text(fit.omega)
       << " r2_phi=" << detail::to_text(fit.r2_phi) << " r2_k=" << detail::to_text(fit.r2_k)
       << " frobenius_residual=" << detail::to_text(fit.frobenius_residual) << '\n';
    os << "tau,phi,k\n";
    for (Eigen::Index i = 0; i < fit.phi.size(); ++i)
        os << (i + 1) << ',' << detail::to_text(fit.phi(i)) << ',' << detail::to_text(fit.k(i)) << '\n';
}

} // namespace qhawkes
