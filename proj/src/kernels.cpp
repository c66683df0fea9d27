#include "qhawkes/kernels.hpp"

#include "qhawkes/errors.hpp"
#include "numfmt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace qhawkes {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

double parse_double(const std::string& key, const std::string& text) {
    double out = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last)
        throw DomainError("key '" + key + "': not a number: '" + text + "'");
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

PowerLawHawkes PowerLawHawkes::from_norm(double n_h, double c, double alpha) {
    require(std::isfinite(n_h) && n_h >= 0.0, "power law: n_h must be >= 0");
    require(finite_positive(c), "power law: c must be > 0");
    require(std::isfinite(alpha) && alpha > 1.0, "power law: alpha must be > 1 (non-integrable otherwise)");
    return {n_h * c * (alpha - 1.0), c, alpha};
}

double ExponentialZumbach::amplitude() const { return std::sqrt(2.0 * n_z * omega); }

KernelSpec::KernelSpec(DiagonalKernel diagonal, ZumbachKernel zumbach)
    : diagonal_(diagonal), zumbach_(zumbach) {
    std::visit(overloaded{
                   [](const ZeroKernel&) {},
                   [](const ExponentialHawkes& e) {
                       require(std::isfinite(e.n_h) && e.n_h >= 0.0, "exponential Hawkes: n_h must be >= 0");
                       require(finite_positive(e.beta), "exponential Hawkes: beta must be > 0");
                   },
                   [](const PowerLawHawkes& p) {
                       require(std::isfinite(p.g) && p.g >= 0.0, "power law: g must be >= 0");
                       require(finite_positive(p.c), "power law: c must be > 0");
                       require(std::isfinite(p.alpha) && p.alpha > 1.0,
                               "power law: alpha must be > 1 (non-integrable otherwise)");
                   },
               },
               diagonal_);
    std::visit(overloaded{
                   [](const ZeroKernel&) {},
                   [](const ExponentialZumbach& z) {
                       require(std::isfinite(z.n_z) && z.n_z >= 0.0, "exponential Zumbach: n_z must be >= 0");
                       require(finite_positive(z.omega), "exponential Zumbach: omega must be > 0");
                   },
               },
               zumbach_);
}

double KernelSpec::phi(double t) const {
    return std::visit(overloaded{
                          [](const ZeroKernel&) { return 0.0; },
                          [t](const ExponentialHawkes& e) { return e.n_h * e.beta * std::exp(-e.beta * t); },
                          [t](const PowerLawHawkes& p) { return p.g * std::pow(1.0 + p.c * t, -p.alpha); },
                      },
                      diagonal_);
}

double KernelSpec::k(double t) const {
    return std::visit(overloaded{
                          [](const ZeroKernel&) { return 0.0; },
                          [t](const ExponentialZumbach& z) { return z.amplitude() * std::exp(-z.omega * t); },
                      },
                      zumbach_);
}

bool KernelSpec::markovian() const { return !std::holds_alternative<PowerLawHawkes>(diagonal_); }

double eval_kernel(const KernelSpec& spec, KernelPart which, double t) {
    if (!(t >= 0.0)) throw DomainError("eval_kernel: t must be >= 0");
    return which == KernelPart::diagonal ? spec.phi(t) : spec.k(t);
}

KernelNorms kernel_norms(const KernelSpec& spec) {
    KernelNorms out;
    out.n_h = std::visit(overloaded{
                             [](const ZeroKernel&) { return 0.0; },
                             [](const ExponentialHawkes& e) { return e.n_h; },
                             [](const PowerLawHawkes& p) {
                                 if (!(p.alpha > 1.0)) throw DomainError("power law: non-integrable (alpha <= 1)");
                                 return p.g / (p.c * (p.alpha - 1.0));
                             },
                         },
                         spec.diagonal());
    out.n_z = std::visit(overloaded{
                             [](const ZeroKernel&) { return 0.0; },
                             [](const ExponentialZumbach& z) { return z.n_z; },
                         },
                         spec.zumbach());
    out.trace = out.n_h + out.n_z;
    return out;
}

void ModelParams::validate() const {
    require(std::isfinite(lambda_inf) && lambda_inf >= 0.0, "lambda_inf must be >= 0");
    require(finite_positive(psi), "psi must be > 0");
}

StationarityReport stationarity_check(const ModelParams& params) {
    params.validate();
    StationarityReport rep;
    rep.trace = kernel_norms(params.kernel).trace;
    if (params.lambda_inf > 0.0 && rep.trace < 1.0) {
        rep.status = Stationarity::stationary;
        rep.mean_intensity = params.lambda_inf / (1.0 - rep.trace);
    } else if (params.lambda_inf == 0.0 && std::abs(rep.trace - 1.0) <= 1e-12) {
        rep.status = Stationarity::critical;
    } else {
        rep.status = Stationarity::unstable;
    }
    return rep;
}

std::string to_string(Stationarity s) {
    switch (s) {
    case Stationarity::stationary: return "stationary";
    case Stationarity::critical: return "critical";
    case Stationarity::unstable: return "unstable";
    }
    return "unknown";
}

void QarchModel::validate() const {
    require(kmat.rows() == kmat.cols(), "QarchModel: kmat must be square");
    require(leverage.size() == kmat.rows(), "QarchModel: leverage length must equal q");
    require(std::isfinite(sigma_inf2) && sigma_inf2 >= 0.0, "QarchModel: sigma_inf2 must be >= 0");
    const double scale = std::max(1.0, kmat.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < kmat.rows(); ++i) {
        require(kmat(i, i) >= 0.0, "QarchModel: negative diagonal entry at lag " + std::to_string(i + 1));
        for (Eigen::Index j = 0; j < i; ++j)
            require(std::abs(kmat(i, j) - kmat(j, i)) <= 1e-12 * scale, "QarchModel: kmat not symmetric");
    }
}

QarchModel QarchModel::zero(std::size_t q, double sigma_inf2, double delta) {
    QarchModel m;
    m.sigma_inf2 = sigma_inf2;
    m.leverage = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    m.kmat = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    m.delta = delta;
    return m;
}

QarchModel discretize_qarch(const ModelParams& params, double delta, std::size_t q) {
    params.validate();
    require(finite_positive(delta), "discretize_qarch: delta must be > 0");
    require(q >= 1, "discretize_qarch: q must be >= 1");
    require(q <= 16384, "discretize_qarch: q too large for a dense q x q matrix");
    const double span = static_cast<double>(q) * delta;
    require(std::isfinite(span), "discretize_qarch: q * delta is not finite");

    QarchModel m = QarchModel::zero(q, params.psi * params.psi * params.lambda_inf * delta, delta);
    const auto n = static_cast<Eigen::Index>(q);
    Eigen::VectorXd kv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i + 1) * delta;
        kv(i) = params.kernel.k(t);
        m.kmat(i, i) = params.kernel.phi(t) * delta;
    }
    m.kmat.noalias() += delta * kv * kv.transpose();
    return m;
}

double ExponentialSum::operator()(double t) const {
    double s = 0.0;
    for (std::size_t j = 0; j < rates.size(); ++j) s += weights[j] * std::exp(-rates[j] * t);
    return s;
}

ExponentialSum approximate_power_law(const PowerLawHawkes& kernel, double t_max, double rel_tol) {
    require(kernel.alpha > 1.0 && kernel.c > 0.0, "approximate_power_law: invalid power law");
    require(finite_positive(t_max), "approximate_power_law: t_max must be > 0");
    require(rel_tol > 0.0 && rel_tol < 1e-2, "approximate_power_law: rel_tol must be in (0, 1e-2)");
    const double a = kernel.alpha;
    const double gamma_a = std::tgamma(a);

    // Discretization error of the trapezoid rule is about
    // 2 |Gamma(a + 2 pi i / h)| / Gamma(a); use Stirling for the modulus.
    auto disc_err = [&](double h) {
        const double k = 2.0 * M_PI / h;
        return 2.0 * std::sqrt(2.0 * M_PI) * std::pow(k, a - 0.5) * std::exp(-M_PI * k / 2.0) / gamma_a;
    };
    double h = 1.0;
    while (disc_err(h) > 0.25 * rel_tol) h *= 0.95;

    // Left tail, worst at t_max: int_{-inf}^{y0} e^{a y} dy = e^{a y0} / a.
    const double y0 = std::log(0.25 * rel_tol * a * gamma_a) / a;
    const double x_min = y0 - std::log1p(kernel.c * t_max);
    // Right tail, worst at t = 0.
    double x_max = std::log(a) + 1.0;
    while (std::exp(a * x_max - std::exp(x_max)) / (std::exp(x_max) - a) > 0.25 * rel_tol * gamma_a) x_max += h;

    ExponentialSum out;
    const auto n = static_cast<std::size_t>(std::ceil((x_max - x_min) / h)) + 1;
    out.weights.reserve(n);
    out.rates.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = x_max - static_cast<double>(j) * h;
        out.weights.push_back(kernel.g * h * std::exp(a * x - std::exp(x)) / gamma_a);
        out.rates.push_back(kernel.c * std::exp(x));
    }
    return out;
}

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw DomainError("line " + std::to_string(line_no) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw DomainError("line " + std::to_string(line_no) + ": empty key");
        kv[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return kv;
}

std::string format_key_values(const KeyValues& kv) {
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
    return os.str();
}

KeyValues to_key_values(const ModelParams& params) {
    KeyValues kv;
    std::visit(overloaded{
                   [&](const ZeroKernel&) { kv["diagonal.kind"] = "zero"; },
                   [&](const ExponentialHawkes& e) {
                       kv["diagonal.kind"] = "exponential";
                       kv["diagonal.n_h"] = detail::to_text(e.n_h);
                       kv["diagonal.beta"] = detail::to_text(e.beta);
                   },
                   [&](const PowerLawHawkes& p) {
                       kv["diagonal.kind"] = "power_law";
                       kv["diagonal.g"] = detail::to_text(p.g);
                       kv["diagonal.c"] = detail::to_text(p.c);
                       kv["diagonal.alpha"] = detail::to_text(p.alpha);
                   },
               },
               params.kernel.diagonal());
    std::visit(overloaded{
                   [&](const ZeroKernel&) { kv["zumbach.kind"] = "zero"; },
                   [&](const ExponentialZumbach& z) {
                       kv["zumbach.kind"] = "exponential";
                       kv["zumbach.n_z"] = detail::to_text(z.n_z);
                       kv["zumbach.omega"] = detail::to_text(z.omega);
                   },
               },
               params.kernel.zumbach());
    kv["lambda_inf"] = detail::to_text(params.lambda_inf);
    kv["psi"] = detail::to_text(params.psi);
    return kv;
}

ModelParams model_params_from_key_values(const KeyValues& kv) {
    static const char* known[] = {"diagonal.kind", "diagonal.n_h", "diagonal.beta", "diagonal.g",
                                  "diagonal.c", "diagonal.alpha", "zumbach.kind", "zumbach.n_z",
                                  "zumbach.omega"};
    for (const auto& [k, v] : kv) {
        if (k.rfind("diagonal.", 0) != 0 && k.rfind("zumbach.", 0) != 0) continue;
        if (std::find_if(std::begin(known), std::end(known), [&](const char* s) { return k == s; }) ==
            std::end(known))
            throw DomainError("unknown kernel key '" + k + "'");
    }
    auto get = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw DomainError("missing key '" + key + "'");
        return parse_double(key, it->second);
    };
    auto kind = [&](const std::string& key) {
        auto it = kv.find(key);
        return it == kv.end() ? std::string("zero") : it->second;
    };

    DiagonalKernel diag = ZeroKernel{};
    const std::string dk = kind("diagonal.kind");
    if (dk == "exponential") {
        diag = ExponentialHawkes{get("diagonal.n_h"), get("diagonal.beta")};
    } else if (dk == "power_law") {
        const bool has_g = kv.count("diagonal.g") > 0;
        const bool has_n = kv.count("diagonal.n_h") > 0;
        if (has_g == has_n) throw DomainError("power_law: give exactly one of diagonal.g or diagonal.n_h");
        if (has_g)
            diag = PowerLawHawkes{get("diagonal.g"), get("diagonal.c"), get("diagonal.alpha")};
        else
            diag = PowerLawHawkes::from_norm(get("diagonal.n_h"), get("diagonal.c"), get("diagonal.alpha"));
    } else if (dk != "zero") {
        throw DomainError("diagonal.kind must be zero, exponential or power_law, got '" + dk + "'");
    }

    ZumbachKernel zum = ZeroKernel{};
    const std::string zk = kind("zumbach.kind");
    if (zk == "exponential") {
        zum = ExponentialZumbach{get("zumbach.n_z"), get("zumbach.omega")};
    } else if (zk != "zero") {
        throw DomainError("zumbach.kind must be zero or exponential, got '" + zk + "'");
    }

    ModelParams p;
    p.kernel = KernelSpec(diag, zum);
    p.lambda_inf = kv.count("lambda_inf") ? get("lambda_inf") : 1.0;
    p.psi = kv.count("psi") ? get("psi") : 1.0;
    p.validate();
    return p;
}

} // namespace qhawkes
