#include "qhawkes/asymptotics.hpp"
#include "qhawkes/dataio.hpp"
#include "qhawkes/diffusion.hpp"
#include "qhawkes/errors.hpp"
#include "qhawkes/estimators.hpp"
#include "qhawkes/experiments.hpp"
#include "qhawkes/kernels.hpp"
#include "qhawkes/qarch.hpp"
#include "qhawkes/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

namespace py = pybind11;
using namespace qhawkes;

namespace {

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<double> cube_array(const Cube& c) {
    py::array_t<double> out({c.n_stocks, c.n_days, c.n_bins});
    std::copy(c.values.begin(), c.values.end(), out.mutable_data());
    return out;
}

QarchModel make_model(const Eigen::MatrixXd& kmat, double sigma_inf2, double delta) {
    QarchModel m = QarchModel::zero(static_cast<std::size_t>(kmat.rows()), sigma_inf2, delta);
    m.kmat = kmat;
    m.validate();
    return m;
}

py::dict model_dict(const QarchModel& m) {
    py::dict d;
    d["sigma_inf2"] = m.sigma_inf2;
    d["kmat"] = m.kmat;
    d["trace"] = m.trace();
    return d;
}

EventStream make_stream(std::vector<double> times, std::vector<std::int8_t> signs, double horizon, double psi) {
    if (times.size() != signs.size()) throw DomainError("times and signs must have the same length");
    EventStream s;
    s.times = std::move(times);
    s.signs = std::move(signs);
    s.psi = psi;
    s.horizon = horizon > 0.0 ? horizon : (s.times.empty() ? 0.0 : s.times.back());
    s.validate();
    return s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Quadratic Hawkes simulation, estimation and calibration.";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    // ------------------------------------------------------------ models

    m.def("presets", [] {
        py::dict out;
        for (const auto& p : presets()) out[py::str(p.name)] = p.keys;
        return out;
    });

    m.def(
        "kernel_norms",
        [](const KeyValues& model) {
            const auto n = kernel_norms(model_params_from_key_values(model).kernel);
            py::dict d;
            d["n_h"] = n.n_h;
            d["n_z"] = n.n_z;
            d["trace"] = n.trace;
            return d;
        },
        py::arg("model"));

    m.def(
        "stationarity",
        [](const KeyValues& model) {
            const auto r = stationarity_check(model_params_from_key_values(model));
            py::dict d;
            d["status"] = to_string(r.status);
            d["trace"] = r.trace;
            d["mean_intensity"] = r.mean_intensity ? py::cast(*r.mean_intensity) : py::none();
            return d;
        },
        py::arg("model"));

    // ------------------------------------------------------------ streams

    py::class_<BinSeries>(m, "BinSeries")
        .def_readonly("delta", &BinSeries::delta)
        .def_readonly("psi", &BinSeries::psi)
        .def_property_readonly("open", [](const BinSeries& b) { return to_array(b.open); })
        .def_property_readonly("high", [](const BinSeries& b) { return to_array(b.high); })
        .def_property_readonly("low", [](const BinSeries& b) { return to_array(b.low); })
        .def_property_readonly("close", [](const BinSeries& b) { return to_array(b.close); })
        .def_property_readonly("ret", [](const BinSeries& b) { return to_array(b.ret); })
        .def_property_readonly("rs_vol", [](const BinSeries& b) { return to_array(b.rs_vol); })
        .def_property_readonly("count", [](const BinSeries& b) { return to_array(b.count); })
        .def("__len__", &BinSeries::size);

    py::class_<EventStream>(m, "EventStream")
        .def(py::init(&make_stream), py::arg("times"), py::arg("signs"), py::arg("horizon") = 0.0,
             py::arg("psi") = 1.0)
        .def_property_readonly("times", [](const EventStream& s) { return to_array(s.times); })
        .def_property_readonly("signs", [](const EventStream& s) { return to_array(s.signs); })
        .def_readonly("horizon", &EventStream::horizon)
        .def_readonly("psi", &EventStream::psi)
        .def_readonly("seed", &EventStream::seed)
        .def("__len__", &EventStream::size)
        .def("price_at", &EventStream::price_at, py::arg("t"))
        .def("trim_burn_in", &EventStream::trim_burn_in, py::arg("fraction"))
        .def("time_reversed", &EventStream::time_reversed)
        .def("bins", [](const EventStream& s, double delta) { return bin_series(s, delta); }, py::arg("delta"));

    m.def(
        "simulate",
        [](const KeyValues& model, std::size_t events, double horizon, double burn_in, std::uint64_t seed) {
            RunLength run;
            run.events = events;
            run.horizon = horizon;
            run.burn_in = burn_in;
            const auto params = model_params_from_key_values(model);
            py::gil_scoped_release release;
            return simulate_stream(params, run, seed);
        },
        py::arg("model"), py::arg("events") = 0, py::arg("horizon") = 0.0, py::arg("burn_in") = 0.1,
        py::arg("seed") = 1, "Simulate a stream; Markovian when all kernels are exponential, thinning otherwise.");

    // ------------------------------------------------------------ estimators

    m.def(
        "hill_exponent",
        [](std::vector<double> values, double tail_fraction) {
            const auto h = hill_exponent(std::move(values), tail_fraction);
            py::dict d;
            d["nu_hill"] = h.nu_hill;
            d["sigma_min"] = h.sigma_min;
            d["n_tail"] = h.n_tail;
            return d;
        },
        py::arg("values"), py::arg("tail_fraction") = 0.02);

    m.def("rs_vol", &rs_vol, py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"));

    m.def(
        "tra_curve",
        [](const std::vector<double>& sigma, const std::vector<double>& returns, std::size_t q, std::size_t batches) {
            const auto r = tra_curve(sigma, returns, q, BatchOptions{batches});
            py::dict d;
            d["c_pos"] = to_array(r.c_pos);
            d["c_neg"] = to_array(r.c_neg);
            d["delta"] = to_array(r.delta_ratio);
            d["stderr"] = to_array(r.delta_stderr);
            return d;
        },
        py::arg("sigma"), py::arg("returns"), py::arg("q"), py::arg("batches") = 50);

    m.def(
        "estimate_c",
        [](const std::vector<double>& counts, double delta, std::size_t q, std::size_t batches) {
            const auto e = estimate_C(counts, delta, q, BatchOptions{batches});
            py::dict d;
            d["lambda_bar"] = e.lambda_bar;
            d["lambda_bar_stderr"] = e.lambda_bar_stderr;
            d["c"] = to_array(e.c_grid);
            d["stderr"] = to_array(e.c_stderr);
            return d;
        },
        py::arg("counts"), py::arg("delta"), py::arg("q"), py::arg("batches") = 50);

    m.def("apparent_branching", py::overload_cast<const std::vector<double>&, std::size_t>(&apparent_branching),
          py::arg("activity"), py::arg("window"));

    // ------------------------------------------------------------ asymptotics

    m.def(
        "phase_exponents",
        [](double epsilon, double delta_exp, bool critical) {
            const auto r = phase_exponents({epsilon, delta_exp, critical ? Regime::critical : Regime::non_critical});
            py::dict d;
            d["beta"] = r.beta;
            d["beta_prime"] = r.beta_prime;
            d["rho"] = r.rho;
            d["branch"] = r.branch;
            d["on_boundary"] = r.on_boundary;
            return d;
        },
        py::arg("epsilon"), py::arg("delta_exp"), py::arg("critical") = false);

    m.def(
        "astar",
        [](double n_h, double n_z, double chi, const std::string& method, std::uint64_t seed, double quantile) {
            AstarOptions opt;
            opt.seed = seed;
            opt.y_threshold_quantile = quantile;
            const auto method_id = astar_method_from_string(method);
            py::gil_scoped_release release;
            const auto r = astar(n_h, n_z, chi, method_id, opt);
            py::gil_scoped_acquire acquire;
            py::dict d;
            d["a_star"] = r.a_star;
            d["stderr"] = r.stderr_;
            d["out_of_validity"] = r.out_of_validity;
            d["warning"] = r.warning;
            return d;
        },
        py::arg("n_h"), py::arg("n_z"), py::arg("chi"), py::arg("method") = "nz_small_quadratic", py::arg("seed") = 1,
        py::arg("quantile") = 0.995);

    m.def(
        "tail_exponents",
        [](double n_z, double a_star) {
            const auto t = tail_exponents(n_z, a_star);
            py::dict d;
            d["mu"] = t.mu;
            d["nu"] = t.nu;
            d["density_exponent"] = t.density_exponent;
            return d;
        },
        py::arg("n_z"), py::arg("a_star"));

    m.def("stationary_cdf_nohawkes", &stationary_cdf_nohawkes, py::arg("v"), py::arg("n_z"),
          py::arg("lambda_inf") = 1.0, py::arg("psi") = 1.0);
    m.def("stationary_density_nohawkes", &stationary_density_nohawkes, py::arg("v"), py::arg("n_z"),
          py::arg("lambda_inf") = 1.0, py::arg("psi") = 1.0);

    // ------------------------------------------------------------ diffusion

    m.def(
        "sample_stationary",
        [](double n_h, double n_z, double beta_bar, double omega_bar, std::size_t n, std::uint64_t seed,
           double lambda_inf, double psi) {
            DiffusionParams p;
            p.n_h = n_h;
            p.n_z = n_z;
            p.beta_bar = beta_bar;
            p.omega_bar = omega_bar;
            p.lambda_inf = lambda_inf;
            p.psi = psi;
            std::vector<double> v;
            {
                py::gil_scoped_release release;
                v = sample_stationary(p, n, seed);
            }
            return to_array(v);
        },
        py::arg("n_h"), py::arg("n_z"), py::arg("beta_bar") = 1.0, py::arg("omega_bar") = 1.0,
        py::arg("n") = 10000, py::arg("seed") = 1, py::arg("lambda_inf") = 1.0, py::arg("psi") = 1.0);

    // ------------------------------------------------------------ QARCH

    m.def(
        "simulate_qarch",
        [](const Eigen::MatrixXd& kmat, double sigma_inf2, std::size_t n, std::uint64_t seed, double nu) {
            const auto model = make_model(kmat, sigma_inf2, 1.0);
            std::vector<double> r;
            {
                py::gil_scoped_release release;
                r = simulate_qarch(model, n, seed, ResidualLaw{nu}).returns;
            }
            return to_array(r);
        },
        py::arg("kmat"), py::arg("sigma_inf2"), py::arg("n"), py::arg("seed") = 1, py::arg("nu") = 0.0,
        "QARCH returns; nu <= 0 gives Gaussian residuals, otherwise unit-variance Student-t.");

    m.def(
        "gmm_estimate",
        [](const std::vector<double>& returns, std::size_t q) {
            const auto g = gmm_estimate(returns, q);
            auto d = model_dict(g.model);
            d["kmat_stderr"] = g.kmat_stderr;
            d["condition"] = g.condition;
            d["warning"] = g.warning;
            return d;
        },
        py::arg("returns"), py::arg("q"));

    m.def(
        "mle_student",
        [](const std::vector<double>& returns, const Eigen::MatrixXd& kmat, double sigma_inf2) {
            const auto init = make_model(kmat, sigma_inf2, 1.0);
            const auto r = mle_student(returns, init.q(), init);
            auto d = model_dict(r.model);
            d["nu"] = r.nu_dof;
            d["loglik"] = r.loglik;
            d["converged"] = r.converged;
            d["iterations"] = r.iterations;
            return d;
        },
        py::arg("returns"), py::arg("kmat"), py::arg("sigma_inf2"), "Student-t MLE started from (kmat, sigma_inf2).");

    m.def(
        "rank_one_diag_fit",
        [](const Eigen::MatrixXd& kmat, std::uint64_t seed) {
            const auto f = parametric_fit(rank_one_diag_fit(kmat, seed));
            py::dict d;
            d["phi"] = f.phi;
            d["k"] = f.k;
            d["g"] = f.g;
            d["alpha"] = f.alpha;
            d["k0"] = f.k0;
            d["omega"] = f.omega;
            d["residual"] = f.frobenius_residual;
            return d;
        },
        py::arg("kmat"), py::arg("seed") = 1);

    // ------------------------------------------------------------ data

    m.def(
        "normalize_panel",
        [](const std::string& path, double ewma_decay, double exclusion_sigmas) {
            const auto loaded = load_csv(path);
            const auto n = normalize(loaded.panel, NormalizeConfig{ewma_decay, exclusion_sigmas});
            py::array_t<bool> kept({n.stocks.size(), n.days.size()});
            for (std::size_t u = 0; u < n.stocks.size(); ++u)
                for (std::size_t t = 0; t < n.days.size(); ++t) kept.mutable_at(u, t) = n.kept(u, t);
            py::dict d;
            d["stocks"] = n.stocks;
            d["days"] = n.days;
            d["bins"] = n.bin_ids;
            d["returns"] = cube_array(n.returns);
            d["rs_vol"] = cube_array(n.rs_vol);
            d["kept"] = kept;
            d["exclusion_rate"] = n.audit.exclusion_rate;
            d["rows_rejected"] = loaded.report.rows_rejected;
            return d;
        },
        py::arg("path"), py::arg("ewma_decay") = 0.94, py::arg("exclusion_sigmas") = 6.0);
}
