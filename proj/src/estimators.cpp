#include "qhawkes/estimators.hpp"

#include "numfmt.hpp"
#include "qhawkes/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

namespace qhawkes {

namespace {

std::size_t batch_count(std::size_t n, const BatchOptions& batch) {
    if (batch.batches < 2) throw DomainError("batches must be >= 2");
    return std::min(batch.batches, n);
}

// Contiguous blocks: bin i belongs to batch i * B / n.
std::size_t batch_of(std::size_t i, std::size_t n, std::size_t b) { return i * b / n; }

double jackknife_se(const Eigen::VectorXd& reps) {
    const auto b = static_cast<double>(reps.size());
    const double m = reps.mean();
    return std::sqrt((b - 1.0) / b * (reps.array() - m).square().sum());
}

} // namespace

std::size_t TriangleGrid::index(std::size_t tau1, std::size_t tau2) const {
    if (tau1 == tau2) throw DomainError("TriangleGrid: coincident lags");
    if (tau1 > tau2) std::swap(tau1, tau2);
    if (tau1 < 1 || tau2 > q_) throw DomainError("TriangleGrid: lag out of range");
    // Row tau1 holds tau2 = tau1+1..q; rows before it hold sum_{r<tau1} (q - r) entries.
    const std::size_t before = (tau1 - 1) * q_ - (tau1 - 1) * tau1 / 2;
    return before + (tau2 - tau1 - 1);
}

CorrelationEstimates estimate_C(const std::vector<double>& counts, double delta, std::size_t q,
                                const BatchOptions& batch) {
    if (!(delta > 0.0)) throw DomainError("estimate_C: delta must be > 0");
    if (q < 1) throw DomainError("estimate_C: q must be >= 1");
    const std::size_t n = counts.size();
    if (n < 10 * q) throw InsufficientData("estimate_C: need at least 10 q bins");
    const std::size_t nb = batch_count(n, batch);
    const auto qi = static_cast<Eigen::Index>(q);
    const auto bi = static_cast<Eigen::Index>(nb);

    Eigen::VectorXd sum_n = Eigen::VectorXd::Zero(bi), len = Eigen::VectorXd::Zero(bi);
    Eigen::MatrixXd prod = Eigen::MatrixXd::Zero(qi, bi), pairs = Eigen::MatrixXd::Zero(qi, bi);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = static_cast<Eigen::Index>(batch_of(i, n, nb));
        const double x = counts[i];
        sum_n(b) += x;
        len(b) += 1.0;
        const std::size_t top = std::min(q, n - 1 - i);
        double* col = prod.col(b).data();
        double* cnt = pairs.col(b).data();
        for (std::size_t tau = 1; tau <= top; ++tau) {
            col[tau - 1] += x * counts[i + tau];
            cnt[tau - 1] += 1.0;
        }
    }

    const double d2 = delta * delta;
    auto evaluate = [&](double sn, double ln, const Eigen::VectorXd& pr, const Eigen::VectorXd& pc,
                        Eigen::Ref<Eigen::VectorXd> c_out) {
        const double m = sn / ln;
        c_out = ((pr.array() / pc.array()) - m * m) / d2;
        return m / delta;
    };

    CorrelationEstimates est;
    est.delta = delta;
    est.q = q;
    Eigen::VectorXd c_full(qi);
    const Eigen::VectorXd prod_tot = prod.rowwise().sum(), pairs_tot = pairs.rowwise().sum();
    est.lambda_bar = evaluate(sum_n.sum(), len.sum(), prod_tot, pairs_tot, c_full);
    est.c_replicates.resize(bi, qi);
    est.lambda_replicates.resize(bi);
    for (Eigen::Index b = 0; b < bi; ++b) {
        Eigen::VectorXd rep(qi);
        est.lambda_replicates(b) = evaluate(sum_n.sum() - sum_n(b), len.sum() - len(b), prod_tot - prod.col(b),
                                            pairs_tot - pairs.col(b), rep);
        est.c_replicates.row(b) = rep.transpose();
    }
    est.c_grid.assign(c_full.data(), c_full.data() + qi);
    est.c_stderr.resize(q);
    for (Eigen::Index t = 0; t < qi; ++t) est.c_stderr[static_cast<std::size_t>(t)] = jackknife_se(est.c_replicates.col(t));
    est.lambda_bar_stderr = jackknife_se(est.lambda_replicates);
    return est;
}

std::vector<PairEstimate> estimate_D(const std::vector<double>& counts, const std::vector<double>& returns,
                                     double delta, double psi, const std::vector<LagPair>& lag_pairs,
                                     const BatchOptions& batch) {
    if (counts.size() != returns.size()) throw DomainError("estimate_D: counts and returns differ in length");
    if (!(delta > 0.0) || !(psi > 0.0)) throw DomainError("estimate_D: delta and psi must be > 0");
    const std::size_t n = counts.size();
    const std::size_t nb = batch_count(n, batch);
    const double scale = psi * psi * delta * delta * delta;
    std::vector<PairEstimate> out;
    out.reserve(lag_pairs.size());
    for (const auto& lp : lag_pairs) {
        if (lp.tau1 == lp.tau2) throw DomainError("estimate_D: coincident lags are not allowed");
        if (lp.tau1 < 1 || lp.tau2 < 1) throw DomainError("estimate_D: lags must be >= 1");
        const std::size_t top = std::max(lp.tau1, lp.tau2);
        if (n < 10 * top) throw InsufficientData("estimate_D: need at least 10 max(tau1, tau2) bins");
        Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
        Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
        for (std::size_t i = top; i < n; ++i) {
            const auto b = static_cast<Eigen::Index>(batch_of(i, n, nb));
            s(b) += counts[i] * returns[i - lp.tau1] * returns[i - lp.tau2];
            m(b) += 1.0;
        }
        Eigen::VectorXd reps(s.size());
        for (Eigen::Index b = 0; b < s.size(); ++b) reps(b) = (s.sum() - s(b)) / (m.sum() - m(b)) / scale;
        out.push_back({lp, s.sum() / m.sum() / scale, jackknife_se(reps)});
    }
    return out;
}

void estimate_D_grid(CorrelationEstimates& est, const std::vector<double>& counts, const std::vector<double>& returns,
                     double psi, const BatchOptions& batch) {
    if (counts.size() != returns.size()) throw DomainError("estimate_D: counts and returns differ in length");
    if (!(psi > 0.0)) throw DomainError("estimate_D: psi must be > 0");
    const std::size_t q = est.q;
    const std::size_t n = counts.size();
    if (q < 2) throw DomainError("estimate_D: q must be >= 2");
    if (n < 10 * q) throw InsufficientData("estimate_D: need at least 10 q bins");
    const std::size_t nb = batch_count(n, batch);
    TriangleGrid grid(q);
    const std::size_t npairs = grid.size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(npairs), static_cast<Eigen::Index>(nb));
    Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
    std::vector<double> lagged(q + 1);
    for (std::size_t i = q; i < n; ++i) {
        const auto b = static_cast<Eigen::Index>(batch_of(i, n, nb));
        m(b) += 1.0;
        if (counts[i] == 0.0) continue;
        for (std::size_t tau = 1; tau <= q; ++tau) lagged[tau] = returns[i - tau];
        double* col = acc.col(b).data();
        std::size_t k = 0;
        for (std::size_t t1 = 1; t1 < q; ++t1) {
            const double a = counts[i] * lagged[t1];
            if (a == 0.0) {
                k += q - t1;
                continue;
            }
            for (std::size_t t2 = t1 + 1; t2 <= q; ++t2) col[k++] += a * lagged[t2];
        }
    }
    const double scale = psi * psi * est.delta * est.delta * est.delta;
    const Eigen::VectorXd tot = acc.rowwise().sum();
    const double mt = m.sum();
    est.d_grid = TriangleGrid(q);
    est.d_stderr = TriangleGrid(q);
    est.d_replicates.resize(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(npairs));
    for (std::size_t k = 0; k < npairs; ++k) est.d_grid.packed()[k] = tot(static_cast<Eigen::Index>(k)) / mt / scale;
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(nb); ++b)
        est.d_replicates.row(b) = ((tot - acc.col(b)) / (mt - m(b)) / scale).transpose();
    for (std::size_t k = 0; k < npairs; ++k)
        est.d_stderr.packed()[k] = jackknife_se(est.d_replicates.col(static_cast<Eigen::Index>(k)));
}

CorrelationEstimates estimate_correlations(const BinSeries& bins, std::size_t q, bool with_d, const BatchOptions& batch) {
    std::vector<double> counts(bins.count.begin(), bins.count.end());
    auto est = estimate_C(counts, bins.delta, q, batch);
    if (with_d) estimate_D_grid(est, counts, bins.ret, bins.psi, batch);
    return est;
}

namespace {

struct ExpKernels {
    double nh{0.0}, beta{1.0}, nz{0.0}, omega{1.0};

    [[nodiscard]] double k(double t) const { return nz > 0.0 ? std::sqrt(2.0 * nz * omega) * std::exp(-omega * t) : 0.0; }
    // Full diagonal K(t, t) = phi_H(t) + k(t)^2.
    [[nodiscard]] double diag(double t) const {
        const double kt = k(t);
        return (nh > 0.0 ? nh * beta * std::exp(-beta * t) : 0.0) + kt * kt;
    }
    [[nodiscard]] double diag_tail(double t) const {
        return (nh > 0.0 ? nh * std::exp(-beta * t) : 0.0) + (nz > 0.0 ? nz * std::exp(-2.0 * omega * t) : 0.0);
    }
};

// One evaluation of the residual equations on a grid of step `delta`.
struct GridInput {
    double delta;
    std::size_t q;
    double lam;
    std::function<double(std::size_t)> c;                   // lag 1..q
    std::function<double(std::size_t, std::size_t)> d;      // 1 <= a < b <= q, may be empty
};

struct GridOutput {
    std::vector<double> res_c;
    std::vector<double> res_d; // packed triangle
};

GridOutput residuals_on_grid(const ExpKernels& K, const GridInput& in) {
    const std::size_t q = in.q;
    const double h = in.delta;
    const double Q = static_cast<double>(q) * h;
    const bool with_d = static_cast<bool>(in.d);

    std::vector<double> c_ext(q + 1);
    for (std::size_t j = 1; j <= q; ++j) c_ext[j] = in.c(j);
    c_ext[0] = q >= 2 ? 2.0 * c_ext[1] - c_ext[2] : c_ext[1];

    // D on 0..q x 0..q with the coincident and zero-lag points filled by continuity.
    std::vector<double> d_ext;
    auto D = [&](std::size_t a, std::size_t b) { return d_ext[a * (q + 1) + b]; };
    if (with_d && q >= 2) {
        d_ext.assign((q + 1) * (q + 1), 0.0);
        auto set = [&](std::size_t a, std::size_t b, double v) {
            d_ext[a * (q + 1) + b] = v;
            d_ext[b * (q + 1) + a] = v;
        };
        for (std::size_t a = 1; a <= q; ++a)
            for (std::size_t b = a + 1; b <= q; ++b) set(a, b, in.d(a, b));
        for (std::size_t b = 2; b <= q; ++b) set(0, b, D(1, b));
        set(0, 1, D(1, 2));
        for (std::size_t a = 1; a <= q; ++a) set(a, a, a < q ? 0.5 * (D(a - 1, a) + D(a, a + 1)) : D(a - 1, a));
        set(0, 0, D(0, 1));
    }
    auto w = [&](std::size_t m, std::size_t lo, std::size_t hi) { return (m == lo || m == hi) ? 0.5 * h : h; };

    GridOutput out;
    out.res_c.resize(q);
    for (std::size_t j = 1; j <= q; ++j) {
        const double tau = static_cast<double>(j) * h;
        double rhs = in.lam * K.diag(tau);
        for (std::size_t m = 0; m <= q; ++m) {
            const std::size_t lag = j > m ? j - m : m - j;
            rhs += w(m, 0, q) * K.diag(static_cast<double>(m) * h) * c_ext[lag];
        }
        rhs += K.diag_tail(Q) * c_ext[q - j];
        if (with_d && K.nz > 0.0 && q >= 2) {
            double sq = 0.0, strip = 0.0;
            for (std::size_t a = 0; a <= q; ++a) {
                const double ka = K.k(tau + static_cast<double>(a) * h);
                double row = 0.0;
                for (std::size_t b = 0; b <= q; ++b) row += w(b, 0, q) * K.k(tau + static_cast<double>(b) * h) * D(a, b);
                sq += w(a, 0, q) * ka * row;
                strip += w(a, 0, q) * ka * D(a, q);
            }
            rhs += sq + 2.0 * strip * K.k(tau + Q) / (2.0 * K.omega);
        }
        out.res_c[j - 1] = c_ext[j] - rhs;
    }

    if (with_d && q >= 2) {
        TriangleGrid tri(q);
        out.res_d.assign(tri.size(), 0.0);
        for (std::size_t i = 1; i < q; ++i) {
            for (std::size_t j = i + 1; j <= q; ++j) {
                const std::size_t a = j - i;
                const double t1 = static_cast<double>(i) * h;
                const double t2 = static_cast<double>(j) * h;
                double rhs = 2.0 * K.k(t1) * K.k(t2) * (c_ext[a] + in.lam * in.lam);
                for (std::size_t m = a; m <= j; ++m)
                    rhs += w(m, a, j) * K.diag(static_cast<double>(j - m) * h) * D(m - a, m);
                if (K.nz > 0.0) {
                    double s = 0.0;
                    for (std::size_t m = 0; m <= q; ++m) s += w(m, 0, q) * K.k(t1 + static_cast<double>(m) * h) * D(a, m);
                    s += D(a, q) * K.k(t1 + Q) / (2.0 * K.omega);
                    rhs += 2.0 * K.k(t1) * s;
                }
                out.res_d[tri.index(i, j)] = in.d(i, j) - rhs;
            }
        }
    }
    return out;
}

} // namespace

AppendixResiduals appendix_a_residual(const KernelSpec& spec, const CorrelationEstimates& est) {
    if (!spec.markovian())
        throw UnsupportedKernel("appendix_a_residual: exponential (or zero) kernels only");
    if (est.q < 2 || est.c_grid.size() != est.q) throw DomainError("appendix_a_residual: malformed estimates");

    ExpKernels K;
    if (const auto* e = std::get_if<ExponentialHawkes>(&spec.diagonal())) {
        K.nh = e->n_h;
        K.beta = e->beta;
    }
    if (const auto* z = std::get_if<ExponentialZumbach>(&spec.zumbach())) {
        K.nz = z->n_z;
        K.omega = z->omega;
    }

    AppendixResiduals out;
    if ((K.nh > 0.0 && K.beta * est.delta > 1.0) || (K.nz > 0.0 && K.omega * est.delta > 1.0)) {
        out.coarse_grid = true;
        out.warnings.push_back("grid too coarse: beta*delta or omega*delta exceeds 1");
    }
    const bool with_d = est.has_d();
    if (!with_d && K.nz > 0.0) out.warnings.push_back("no D estimates: three-point terms omitted");

    const std::size_t q = est.q;
    auto make_input = [&](std::size_t stride, double lam, const std::function<double(std::size_t)>& c,
                          const std::function<double(std::size_t, std::size_t)>& d) {
        GridInput in{est.delta * static_cast<double>(stride), q / stride, lam,
                     [c, stride](std::size_t j) { return c(j * stride); }, {}};
        if (with_d) in.d = [d, stride](std::size_t a, std::size_t b) { return d(a * stride, b * stride); };
        return in;
    };
    auto c_full = [&](std::size_t j) { return est.c_grid[j - 1]; };
    auto d_full = [&](std::size_t a, std::size_t b) { return est.d_grid(a, b); };

    const auto full = residuals_on_grid(K, make_input(1, est.lambda_bar, c_full, d_full));
    out.res_c = full.res_c;

    // Jackknife over the stored replicates.
    const auto nb = est.c_replicates.rows();
    Eigen::MatrixXd rc(nb, static_cast<Eigen::Index>(q));
    Eigen::MatrixXd rd;
    if (with_d) rd.resize(nb, static_cast<Eigen::Index>(full.res_d.size()));
    for (Eigen::Index b = 0; b < nb; ++b) {
        auto c_rep = [&](std::size_t j) { return est.c_replicates(b, static_cast<Eigen::Index>(j - 1)); };
        auto d_rep = [&](std::size_t a, std::size_t bb) {
            return est.d_replicates(b, static_cast<Eigen::Index>(est.d_grid.index(a, bb)));
        };
        const auto r = residuals_on_grid(K, make_input(1, est.lambda_replicates(b), c_rep, d_rep));
        for (std::size_t j = 0; j < q; ++j) rc(b, static_cast<Eigen::Index>(j)) = r.res_c[j];
        if (with_d)
            for (std::size_t k = 0; k < r.res_d.size(); ++k) rd(b, static_cast<Eigen::Index>(k)) = r.res_d[k];
    }
    out.res_c_stderr.resize(q);
    for (std::size_t j = 0; j < q; ++j) out.res_c_stderr[j] = nb > 1 ? jackknife_se(rc.col(static_cast<Eigen::Index>(j))) : 0.0;

    // Step doubling: the same equations on every second lag.
    out.res_c_quad.assign(q, 0.0);
    const bool can_double = q >= 4;
    GridOutput coarse;
    if (can_double) coarse = residuals_on_grid(K, make_input(2, est.lambda_bar, c_full, d_full));
    if (can_double) {
        for (std::size_t j = 2; j <= q; j += 2) out.res_c_quad[j - 1] = std::abs(full.res_c[j - 1] - coarse.res_c[j / 2 - 1]) / 3.0;
        for (std::size_t j = 1; j <= q; j += 2) {
            const double lo = j > 1 ? out.res_c_quad[j - 2] : 0.0;
            const double hi = j < q ? out.res_c_quad[j] : 0.0;
            out.res_c_quad[j - 1] = std::max(lo, hi);
        }
    }

    if (with_d) {
        out.res_d = TriangleGrid(q);
        out.res_d_stderr = TriangleGrid(q);
        out.res_d_quad = TriangleGrid(q);
        out.res_d.packed() = full.res_d;
        for (std::size_t k = 0; k < full.res_d.size(); ++k)
            out.res_d_stderr.packed()[k] = nb > 1 ? jackknife_se(rd.col(static_cast<Eigen::Index>(k))) : 0.0;
        if (can_double) {
            TriangleGrid half(q / 2);
            for (std::size_t i = 1; i < q; ++i) {
                for (std::size_t j = i + 1; j <= q; ++j) {
                    // Nearest even pair on the coarse grid.
                    std::size_t ci = std::max<std::size_t>(1, (i + 1) / 2), cj = std::max<std::size_t>(1, (j + 1) / 2);
                    cj = std::min(cj, q / 2);
                    if (ci >= cj) ci = cj - 1;
                    if (ci < 1) continue;
                    const double fine = full.res_d[TriangleGrid(q).index(2 * ci, 2 * cj)];
                    out.res_d_quad.at(i, j) = std::abs(fine - coarse.res_d[half.index(ci, cj)]) / 3.0;
                }
            }
        }
    }
    return out;
}

HillResult hill_exponent(std::vector<double> values, double tail_fraction) {
    if (values.empty()) throw DomainError("hill_exponent: no values");
    if (!(tail_fraction > 0.0 && tail_fraction <= 0.2)) throw DomainError("hill_exponent: tail_fraction must be in (0, 0.2]");
    const std::size_t n = values.size();
    const auto k = static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(n)));
    if (k < 50) throw InsufficientData("hill_exponent: fewer than 50 tail points");
    // After the partition the k largest values occupy [n-k, n) and the cutoff sits at n-k-1.
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n - k - 1), values.end());
    const double sigma_min = values[n - k - 1];
    if (!(sigma_min > 0.0)) throw DomainError("hill_exponent: values must be positive above the cutoff");
    std::sort(values.begin() + static_cast<std::ptrdiff_t>(n - k), values.end());
    double s = 0.0;
    for (std::size_t i = n - k; i < n; ++i) s += std::log(values[i] / sigma_min);
    const double mean_log = s / static_cast<double>(k);
    if (!(mean_log > 0.0)) throw NumericalError("hill_exponent: degenerate tail (all values equal the cutoff)");
    return {1.0 + 1.0 / mean_log, sigma_min, k};
}

double rs_vol(double o, double h, double l, double c) {
    if (!(o > 0.0 && h > 0.0 && l > 0.0 && c > 0.0)) throw DomainError("rs_vol: prices must be positive");
    if (h < std::max(o, c) || l > std::min(o, c)) throw DomainError("rs_vol: need h >= max(o, c) and l <= min(o, c)");
    const double v = std::log(h / o) * std::log(h / c) + std::log(l / o) * std::log(l / c);
    return std::sqrt(std::max(0.0, v));
}

TraReport tra_curve(const std::vector<double>& sigma, const std::vector<double>& returns, std::size_t q,
                    const BatchOptions& batch) {
    if (sigma.size() != returns.size()) throw DomainError("tra_curve: series differ in length");
    if (q < 1) throw DomainError("tra_curve: q must be >= 1");
    const std::size_t n = sigma.size();
    if (n < 10 * q) throw InsufficientData("tra_curve: need at least 10 q bins");
    const std::size_t nb = batch_count(n, batch);
    const auto bi = static_cast<Eigen::Index>(nb);
    const auto qi = static_cast<Eigen::Index>(q);

    // Per batch: sums of s, s^2, |r|, r^2, and of the lagged products (pair owned by the batch of t).
    Eigen::MatrixXd mom = Eigen::MatrixXd::Zero(5, bi);
    Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(qi, bi), neg = Eigen::MatrixXd::Zero(qi, bi);
    Eigen::MatrixXd npos = Eigen::MatrixXd::Zero(qi, bi), nneg = Eigen::MatrixXd::Zero(qi, bi);
    for (std::size_t t = 0; t < n; ++t) {
        const auto b = static_cast<Eigen::Index>(batch_of(t, n, nb));
        const double s = sigma[t], a = std::abs(returns[t]);
        mom(0, b) += s;
        mom(1, b) += s * s;
        mom(2, b) += a;
        mom(3, b) += returns[t] * returns[t];
        mom(4, b) += 1.0;
        for (std::size_t tau = 1; tau <= q; ++tau) {
            const auto ti = static_cast<Eigen::Index>(tau - 1);
            if (t >= tau) {
                pos(ti, b) += s * std::abs(returns[t - tau]);
                npos(ti, b) += 1.0;
            }
            if (t + tau < n) {
                neg(ti, b) += s * std::abs(returns[t + tau]);
                nneg(ti, b) += 1.0;
            }
        }
    }

    struct Curve {
        std::vector<double> cp, cn, delta;
    };
    auto evaluate = [&](const Eigen::VectorXd& m, const Eigen::VectorXd& p, const Eigen::VectorXd& np,
                        const Eigen::VectorXd& ng, const Eigen::VectorXd& nn) {
        const double cnt = m(4);
        const double ms = m(0) / cnt, ma = m(2) / cnt;
        const double vs = m(1) / cnt - ms * ms, va = m(3) / cnt - ma * ma;
        if (!(vs > 0.0) || !(va > 0.0)) throw NumericalError("tra_curve: zero-variance series");
        const double norm = std::sqrt(vs) * std::sqrt(va);
        Curve c;
        c.cp.resize(q);
        c.cn.resize(q);
        c.delta.resize(q);
        double denom = 0.0;
        for (std::size_t tau = 0; tau < q; ++tau) {
            const auto ti = static_cast<Eigen::Index>(tau);
            c.cp[tau] = (p(ti) / np(ti) - ms * ma) / norm;
            c.cn[tau] = (ng(ti) / nn(ti) - ms * ma) / norm;
            denom += std::max(std::abs(c.cp[tau]), std::abs(c.cn[tau]));
        }
        double run = 0.0;
        for (std::size_t tau = 0; tau < q; ++tau) {
            run += c.cp[tau] - c.cn[tau];
            c.delta[tau] = denom > 0.0 ? run / (2.0 * denom) : 0.0;
        }
        return c;
    };

    const Eigen::VectorXd mt = mom.rowwise().sum(), pt = pos.rowwise().sum(), npt = npos.rowwise().sum();
    const Eigen::VectorXd gt = neg.rowwise().sum(), ngt = nneg.rowwise().sum();
    const Curve full = evaluate(mt, pt, npt, gt, ngt);
    TraReport rep;
    rep.q = q;
    rep.c_pos = full.cp;
    rep.c_neg = full.cn;
    rep.delta_ratio = full.delta;
    Eigen::MatrixXd reps(bi, qi);
    for (Eigen::Index b = 0; b < bi; ++b) {
        const Curve c = evaluate(mt - mom.col(b), pt - pos.col(b), npt - npos.col(b), gt - neg.col(b), ngt - nneg.col(b));
        for (std::size_t tau = 0; tau < q; ++tau) reps(b, static_cast<Eigen::Index>(tau)) = c.delta[tau];
    }
    rep.delta_stderr.resize(q);
    for (std::size_t tau = 0; tau < q; ++tau) rep.delta_stderr[tau] = jackknife_se(reps.col(static_cast<Eigen::Index>(tau)));
    return rep;
}

TraReport tra_curve(const BinSeries& bins, std::size_t q, const BatchOptions& batch) {
    return tra_curve(bins.rs_vol, bins.ret, q, batch);
}

double apparent_branching(const std::vector<double>& activity, std::size_t window) {
    if (window < 2) throw DomainError("apparent_branching: window must be >= 2");
    const std::size_t nw = activity.size() / window;
    if (nw < 100) throw InsufficientData("apparent_branching: need at least 100 windows");
    std::vector<double> v(nw, 0.0);
    for (std::size_t i = 0; i < nw * window; ++i) v[i / window] += activity[i];
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(nw);
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(nw - 1);
    if (!(var > 0.0)) throw NumericalError("apparent_branching: zero variance, ratio undefined");
    return std::clamp(1.0 - std::sqrt(m / var), 0.0, 1.0);
}

double apparent_branching(const BinSeries& bins, std::size_t window) {
    return apparent_branching(std::vector<double>(bins.count.begin(), bins.count.end()), window);
}

void write_c_csv(std::ostream& os, const CorrelationEstimates& est) {
    os << "lag,value,stderr\n";
    for (std::size_t t = 1; t <= est.q; ++t)
        os << t << ',' << detail::to_text(est.c_grid[t - 1]) << ',' << detail::to_text(est.c_stderr[t - 1]) << '\n';
}

void write_d_csv(std::ostream& os, const CorrelationEstimates& est) {
    os << "lag1,lag2,value,stderr\n";
    if (!est.has_d()) return;
    for (std::size_t a = 1; a < est.q; ++a)
        for (std::size_t b = a + 1; b <= est.q; ++b)
            os << a << ',' << b << ',' << detail::to_text(est.d_grid(a, b)) << ','
               << detail::to_text(est.d_stderr(a, b)) << '\n';
}

void write_tra_csv(std::ostream& os, const TraReport& rep) {
    os << "tau,c_pos,c_neg,delta\n";
    for (std::size_t t = 1; t <= rep.q; ++t)
        os << t << ',' << detail::to_text(rep.c_pos[t - 1]) << ',' << detail::to_text(rep.c_neg[t - 1]) << ','
           << detail::to_text(rep.delta_ratio[t - 1]) << '\n';
}

} // namespace qhawkes
