#include "cli.hpp"

#include "qhawkes/asymptotics.hpp"
#include "qhawkes/dataio.hpp"
#include "qhawkes/diffusion.hpp"
#include "qhawkes/errors.hpp"
#include "qhawkes/estimators.hpp"
#include "qhawkes/experiments.hpp"
#include "qhawkes/qarch.hpp"
#include "qhawkes/simulate.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace qhawkes::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalError("sha256 failed");
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
    return os.str();
}

namespace {

constexpr const char* kVersion = "0.1.0";

std::string text(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

// ---- typed access to the flat config ----

class Params {
public:
    Params(const KeyValues& kv, std::set<std::string> allowed) : kv_(kv), allowed_(std::move(allowed)) {}

    void check_unknown(const std::string& command) const {
        for (const auto& [k, v] : kv_) {
            if (allowed_.count(k) || k.rfind("diagonal.", 0) == 0 || k.rfind("zumbach.", 0) == 0) continue;
            throw DomainError(command + ": unknown config key '" + k + "'");
        }
    }
    [[nodiscard]] bool has(const std::string& k) const { return kv_.count(k) != 0; }
    [[nodiscard]] std::string str(const std::string& k, const std::string& def) const {
        auto it = kv_.find(k);
        return it == kv_.end() ? def : it->second;
    }
    [[nodiscard]] double num(const std::string& k, double def) const {
        auto it = kv_.find(k);
        if (it == kv_.end()) return def;
        double x = 0.0;
        const auto& s = it->second;
        auto res = std::from_chars(s.data(), s.data() + s.size(), x);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
            throw DomainError("config key '" + k + "': not a number: '" + s + "'");
        }
        return x;
    }
    [[nodiscard]] std::size_t count(const std::string& k, std::size_t def) const {
        const double x = num(k, static_cast<double>(def));
        if (!(x >= 0.0) || x != std::floor(x)) throw DomainError("config key '" + k + "': expected a count");
        return static_cast<std::size_t>(x);
    }
    [[nodiscard]] bool flag(const std::string& k, bool def) const {
        const std::string s = str(k, def ? "1" : "0");
        if (s == "1" || s == "true" || s == "yes") return true;
        if (s == "0" || s == "false" || s == "no") return false;
        throw DomainError("config key '" + k + "': expected a boolean");
    }
    [[nodiscard]] std::vector<std::string> list(const std::string& k, const std::string& def) const {
        std::vector<std::string> out;
        std::stringstream ss(str(k, def));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }
    [[nodiscard]] const KeyValues& raw() const { return kv_; }

private:
    const KeyValues& kv_;
    std::set<std::string> allowed_;
};

const std::set<std::string> kModelKeys{"preset", "lambda_inf", "psi"};

std::set<std::string> with_model(std::set<std::string> keys) {
    keys.insert(kModelKeys.begin(), kModelKeys.end());
    return keys;
}

bool has_model(const KeyValues& kv) {
    return std::any_of(kv.begin(), kv.end(), [](const auto& p) {
        return p.first.rfind("diagonal.", 0) == 0 || p.first.rfind("zumbach.", 0) == 0;
    });
}

// ---- artifacts and manifest ----

class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    // Renders in memory, writes to a temporary and renames it into place.
    void write(const std::string& name, const std::function<void(std::ostream&)>& render) {
        std::ostringstream os;
        render(os);
        const std::string data = os.str();
        const fs::path target = fs::path(dir_) / name;
        const fs::path tmp = fs::path(dir_) / (name + ".tmp");
        {
            std::ofstream f(tmp, std::ios::binary);
            if (!f) throw DomainError("cannot write " + tmp.string());
            f << data;
            if (!f) throw DomainError("write failed for " + tmp.string());
        }
        fs::rename(tmp, target);
        artifacts_.push_back({name, sha256_hex(data), data.size()});
    }

    void manifest(const RunConfig& cfg) {
        KeyValues kv = cfg.keys;
        kv["manifest.command"] = cfg.command;
        kv["manifest.version"] = kVersion;
        if (cfg.seed_generated) kv["manifest.seed_generated"] = "1";
        std::string seeds;
        for (auto s : cfg.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
        if (!seeds.empty()) kv["seeds"] = seeds;
        for (const auto& a : artifacts_) {
            kv["artifact." + a.name + ".sha256"] = a.sha256;
            kv["artifact." + a.name + ".bytes"] = std::to_string(a.bytes);
        }
        const std::string body = format_key_values(kv);
        write_raw("manifest.txt", body);
    }

    [[nodiscard]] const std::vector<Artifact>& artifacts() const { return artifacts_; }

private:
    void write_raw(const std::string& name, const std::string& data) {
        const fs::path tmp = fs::path(dir_) / (name + ".tmp");
        {
            std::ofstream f(tmp, std::ios::binary);
            f << data;
        }
        fs::rename(tmp, fs::path(dir_) / name);
    }

    std::string dir_;
    std::vector<Artifact> artifacts_;
};

void print_summary(std::ostream& out, const KeyValues& kv) { out << format_key_values(kv); }

// Runs f(i) for i in [0, n) on up to `threads` workers; results are indexed,
// so output does not depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ModelParams model_from(const Params& p) {
    if (!has_model(p.raw())) throw DomainError("no model: give preset=NAME or diagonal.*/zumbach.* keys");
    return model_params_from_key_values(p.raw());
}

RunLength run_length(const Params& p) {
    RunLength r;
    r.events = p.count("events", 0);
    r.horizon = p.num("horizon", 0.0);
    r.burn_in = p.num("burn_in", 0.1);
    if (r.events == 0 && r.horizon <= 0.0) throw DomainError("give events=N or horizon=T");
    return r;
}

std::string seed_suffix(const RunConfig& cfg, std::uint64_t seed) {
    return cfg.seeds.size() > 1 ? "_" + std::to_string(seed) : "";
}

// ---- commands ----

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, with_model({"events", "horizon", "burn_in", "delta", "write_events"}));
    p.check_unknown(cfg.command);
    const auto model = model_from(p);
    const auto run = run_length(p);
    const double delta = p.num("delta", 1.0);
    const bool write_events = p.flag("write_events", true);
    const auto norms = kernel_norms(model.kernel);
    const auto stat = stationarity_check(model);

    Outputs outputs(cfg.out_dir);
    KeyValues summary;
    summary["n_h"] = text(norms.n_h);
    summary["n_z"] = text(norms.n_z);
    summary["trace"] = text(norms.trace);
    summary["stationarity"] = to_string(stat.status);
    if (stat.mean_intensity) summary["lambda_bar_theory"] = text(*stat.mean_intensity);
    for (auto seed : cfg.seeds) {
        const auto stream = simulate_stream(model, run, seed);
        const auto bins = bin_series(stream, delta);
        const auto sfx = seed_suffix(cfg, seed);
        if (write_events) outputs.write("events" + sfx + ".csv", [&](std::ostream& os) { write_events_csv(os, stream); });
        outputs.write("bins" + sfx + ".csv", [&](std::ostream& os) { write_bins_csv(os, bins); });
        summary["events" + sfx] = std::to_string(stream.size());
        summary["horizon" + sfx] = text(stream.horizon);
        summary["rate" + sfx] = text(static_cast<double>(stream.size()) / stream.horizon);
        summary["bins" + sfx] = std::to_string(bins.size());
    }
    outputs.write("simulate.txt", [&](std::ostream& os) { print_summary(os, summary); });
    outputs.manifest(cfg);
    print_summary(out, summary);
    return 0;
}

EventStream load_or_simulate(const RunConfig& cfg, const Params& p, std::uint64_t seed) {
    if (p.has("events_file")) {
        std::ifstream in(p.str("events_file", ""));
        if (!in) throw DomainError("cannot open events_file " + p.str("events_file", ""));
        auto s = read_events_csv(in, p.num("psi", 1.0), p.num("horizon", -1.0));
        s.validate();
        return s;
    }
    (void)cfg;
    return simulate_stream(model_from(p), run_length(p), seed);
}

void write_residuals_csv(std::ostream& os, const AppendixResiduals& r) {
    os << "lag,res_c,res_c_stderr,res_c_quad\n";
    for (std::size_t i = 0; i < r.res_c.size(); ++i) {
        os << i + 1 << ',' << text(r.res_c[i]) << ',' << text(r.res_c_stderr[i]) << ',' << text(r.res_c_quad[i])
           << '\n';
    }
}

void write_residuals_d_csv(std::ostream& os, const AppendixResiduals& r) {
    os << "lag1,lag2,res_d,res_d_stderr,res_d_quad\n";
    const std::size_t q = r.res_d.q();
    for (std::size_t a = 1; a <= q; ++a)
        for (std::size_t b = a + 1; b <= q; ++b)
            os << a << ',' << b << ',' << text(r.res_d(a, b)) << ',' << text(r.res_d_stderr(a, b)) << ','
               << text(r.res_d_quad(a, b)) << '\n';
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, with_model({"events", "horizon", "burn_in", "delta", "q", "with_d", "batches", "events_file",
                                   "branching_window", "residuals"}));
    p.check_unknown(cfg.command);
    const double delta = p.num("delta", 1.0);
    const std::size_t q = p.count("q", 20);
    const bool with_d = p.flag("with_d", true);
    BatchOptions batch{p.count("batches", 50)};
    const std::size_t window = p.count("branching_window", 10);

    Outputs outputs(cfg.out_dir);
    KeyValues summary;
    const std::vector<std::uint64_t> seeds = p.has("events_file") ? std::vector<std::uint64_t>{0} : cfg.seeds;
    for (auto seed : seeds) {
        const auto stream = load_or_simulate(cfg, p, seed);
        const auto bins = bin_series(stream, delta);
        const auto est = estimate_correlations(bins, q, with_d, batch);
        const auto sfx = seed_suffix(cfg, seed);
        outputs.write("c" + sfx + ".csv", [&](std::ostream& os) { write_c_csv(os, est); });
        if (with_d) outputs.write("d" + sfx + ".csv", [&](std::ostream& os) { write_d_csv(os, est); });
        summary["events" + sfx] = std::to_string(stream.size());
        summary["lambda_bar" + sfx] = text(est.lambda_bar);
        summary["lambda_bar_stderr" + sfx] = text(est.lambda_bar_stderr);
        try {
            summary["apparent_branching" + sfx] = text(apparent_branching(bins, window));
        } catch (const DomainError& e) {
            summary["apparent_branching" + sfx] = std::string("n/a (") + e.what() + ")";
        }
        if (with_d && has_model(p.raw()) && p.flag("residuals", true)) {
            const auto model = model_from(p);
            try {
                const auto res = appendix_a_residual(model.kernel, est);
                outputs.write("residuals_c" + sfx + ".csv", [&](std::ostream& os) { write_residuals_csv(os, res); });
                outputs.write("residuals_d" + sfx + ".csv", [&](std::ostream& os) { write_residuals_d_csv(os, res); });
                double worst = 0.0;
                for (std::size_t i = 0; i < res.res_c.size(); ++i)
                    if (res.res_c_stderr[i] > 0) worst = std::max(worst, std::abs(res.res_c[i]) / res.res_c_stderr[i]);
                summary["residual_c_max_se" + sfx] = text(worst);
                summary["residual_coarse_grid" + sfx] = res.coarse_grid ? "1" : "0";
            } catch (const UnsupportedKernel& e) {
                summary["residuals" + sfx] = std::string("skipped: ") + e.what();
            }
        }
    }
    outputs.write("estimate.txt", [&](std::ostream& os) { print_summary(os, summary); });
    outputs.manifest(cfg);
    print_summary(out, summary);
    return 0;
}

QarchModel rank_one_diag(std::size_t q, double g, double alpha, double k0, double omega) {
    auto m = QarchModel::zero(q, 1.0);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            const double ki = k0 * std::exp(-omega * static_cast<double>(i + 1));
            const double kj = k0 * std::exp(-omega * static_cast<double>(j + 1));
            m.kmat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                ki * kj + (i == j ? g * std::pow(static_cast<double>(i + 1), -alpha) : 0.0);
        }
    m.sigma_inf2 = 1.0 - m.trace();
    return m;
}

std::vector<double> read_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comma = line.find(',');
        std::string field = line.substr(0, comma);
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        if (field.empty() || field[0] == '#') continue;
        double x = 0.0;
        auto res = std::from_chars(field.data(), field.data() + field.size(), x);
        if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
            if (line_no == 1) continue;  // header
            throw DomainError(path + ":" + std::to_string(line_no) + ": not a number");
        }
        out.push_back(x);
    }
    return out;
}

void standardize(std::vector<double>& r) {
    double m = 0.0;
    for (double x : r) m += x;
    m /= static_cast<double>(r.size());
    double s = 0.0;
    for (double& x : r) {
        x -= m;
        s += x * x;
    }
    s = std::sqrt(s / static_cast<double>(r.size()));
    if (!(s > 0.0)) throw NumericalError("calibrate: constant return series");
    for (double& x : r) x /= s;
}

int cmd_calibrate(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, {"source", "panel", "returns", "q", "g", "alpha", "k0", "omega", "nu", "bins", "ewma_decay",
                        "exclusion_sigmas", "max_iterations", "endogeneity_q"});
    p.check_unknown(cfg.command);
    const std::string source = p.str("source", p.has("panel") ? "panel" : (p.has("returns") ? "returns" : "synthetic"));
    const std::size_t q = p.count("q", 18);

    Outputs outputs(cfg.out_dir);
    KeyValues summary;
    summary["source"] = source;
    std::vector<double> returns;
    if (source == "panel") {
        const auto loaded = load_csv(p.str("panel", ""));
        summary["rows_read"] = std::to_string(loaded.report.rows_read);
        summary["rows_rejected"] = std::to_string(loaded.report.rows_rejected);
        NormalizeConfig nc{p.num("ewma_decay", 0.94), p.num("exclusion_sigmas", 6.0)};
        const auto norm = normalize(loaded.panel, nc);
        outputs.write("normalized.csv", [&](std::ostream& os) { write_normalized_csv(os, norm); });
        outputs.write("audit.txt", [&](std::ostream& os) { write_audit(os, norm); });
        summary["exclusion_rate"] = text(norm.audit.exclusion_rate);
        // Stocks are pooled by concatenating their kept series.
        for (std::size_t u = 0; u < norm.stocks.size(); ++u) {
            const auto s = norm.return_series(u);
            returns.insert(returns.end(), s.begin(), s.end());
        }
        // Pooling keeps each stock at unit variance; re-standardize the pool.
        standardize(returns);
    } else if (source == "returns") {
        returns = read_column(p.str("returns", ""));
        standardize(returns);
    } else if (source == "synthetic") {
        const auto truth = rank_one_diag(q, p.num("g", 0.09), p.num("alpha", 0.6), p.num("k0", 0.14),
                                         p.num("omega", 0.15));
        if (cfg.seeds.empty()) throw DomainError("calibrate: synthetic source needs a seed");
        returns = simulate_qarch(truth, p.count("bins", 1'000'000), cfg.seeds.front(), {p.num("nu", 8.0)}).returns;
        standardize(returns);
        summary["true_trace"] = text(truth.trace());
        outputs.write("model_true.csv", [&](std::ostream& os) { write_model_csv(os, truth); });
    } else {
        throw DomainError("calibrate: source must be panel, returns or synthetic");
    }
    summary["n_returns"] = std::to_string(returns.size());

    const auto gmm = gmm_estimate(returns, q);
    MleOptions mo;
    mo.max_iterations = static_cast<int>(p.count("max_iterations", 400));
    const auto mle = mle_student(returns, q, gmm.model, mo);
    const auto fit = parametric_fit(rank_one_diag_fit(mle.model.kmat));
    const auto endo = endogeneity(fit, p.count("endogeneity_q", q));

    outputs.write("model_gmm.csv", [&](std::ostream& os) { write_model_csv(os, gmm.model); });
    outputs.write("model_mle.csv", [&](std::ostream& os) { write_model_csv(os, mle.model); });
    outputs.write("kernel_fit.csv", [&](std::ostream& os) { write_fit_csv(os, fit); });
    summary["gmm_trace"] = text(gmm.model.trace());
    summary["gmm_condition"] = text(gmm.condition);
    if (!gmm.warning.empty()) summary["gmm_warning"] = gmm.warning;
    summary["mle_trace"] = text(mle.model.trace());
    summary["mle_nu"] = text(mle.nu_dof);
    summary["mle_loglik"] = text(mle.loglik);
    summary["mle_converged"] = mle.converged ? "1" : "0";
    summary["fit_g"] = text(fit.g);
    summary["fit_alpha"] = text(fit.alpha);
    summary["fit_k0"] = text(fit.k0);
    summary["fit_omega"] = text(fit.omega);
    summary["fit_frobenius_residual"] = text(fit.frobenius_residual);
    summary["endogeneity_sum_phi"] = text(endo.sum_phi);
    summary["endogeneity_sum_k2"] = text(endo.sum_k2);
    summary["endogeneity_trace"] = text(endo.trace);
    outputs.write("calibrate.txt", [&](std::ostream& os) { print_summary(os, summary); });
    outputs.manifest(cfg);
    print_summary(out, summary);
    return 0;
}

DiffusionParams diffusion_from(const Params& p) {
    DiffusionParams d;
    d.lambda_inf = p.num("lambda_inf", 1.0);
    d.n_h = p.num("n_h", 0.0);
    d.n_z = p.num("n_z", 0.0);
    d.beta_bar = p.num("beta_bar", 1.0);
    d.omega_bar = p.num("omega_bar", 1.0);
    d.psi = p.num("psi", 1.0);
    d.validate();
    return d;
}

int cmd_diffuse(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, {"lambda_inf", "n_h", "n_z", "beta_bar", "omega_bar", "psi", "mode", "samples", "dt",
                        "horizon", "record_stride", "tail_fraction", "price"});
    p.check_unknown(cfg.command);
    const auto d = diffusion_from(p);
    const std::string mode = p.str("mode", "stationary");
    const double fraction = p.num("tail_fraction", 0.02);

    Outputs outputs(cfg.out_dir);
    KeyValues summary;
    summary["mode"] = mode;
    summary["chi"] = text(d.chi());
    if (d.n_z > 0.0) summary["nu_theory_chi_large"] = text(tail_exponents(d.n_z, 0.0).nu);
    for (auto seed : cfg.seeds) {
        const auto sfx = seed_suffix(cfg, seed);
        std::vector<double> v;
        if (mode == "stationary") {
            v = sample_stationary(d, p.count("samples", 100000), seed);
            outputs.write("samples" + sfx + ".csv", [&](std::ostream& os) {
                os << "v\n";
                for (double x : v) os << text(x) << '\n';
            });
        } else if (mode == "path") {
            IntegrateOptions io;
            io.record_stride = p.count("record_stride", 1);
            const double dt = p.num("dt", d.default_dt());
            const auto path = integrate(d, dt, p.num("horizon", 1000.0), seed, io);
            const bool with_price = p.flag("price", true);
            std::vector<double> price;
            if (with_price) price = price_path(path, seed);
            outputs.write("path" + sfx + ".csv",
                          [&](std::ostream& os) { write_path_csv(os, path, with_price ? &price : nullptr); });
            v = path.v;
        } else {
            throw DomainError("diffuse: mode must be stationary or path");
        }
        std::vector<double> root(v.size());
        std::transform(v.begin(), v.end(), root.begin(), [](double x) { return std::sqrt(x); });
        const auto h = hill_exponent(root, fraction);
        summary["hill_nu_sqrt_v" + sfx] = text(h.nu_hill);
        summary["hill_tail_exponent_sqrt_v" + sfx] = text(h.nu_hill - 1.0);
        double mean = 0.0;
        for (double x : v) mean += x;
        summary["mean_v" + sfx] = text(mean / static_cast<double>(v.size()));
    }
    outputs.write("diffuse.txt", [&](std::ostream& os) { print_summary(os, summary); });
    outputs.manifest(cfg);
    print_summary(out, summary);
    return 0;
}

std::vector<double> tail_series(const BinSeries& bins, const std::string& series) {
    if (series == "rs_vol") return bins.rs_vol;
    if (series == "abs_ret") {
        std::vector<double> a(bins.ret.size());
        std::transform(bins.ret.begin(), bins.ret.end(), a.begin(), [](double x) { return std::abs(x); });
        return a;
    }
    throw DomainError("series must be rs_vol or abs_ret");
}

int cmd_tails(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, with_model({"events", "horizon", "burn_in", "delta", "series", "tail_fraction", "values",
                                   "events_file"}));
    p.check_unknown(cfg.command);
    const double fraction = p.num("tail_fraction", 0.02);
    const double delta = p.num("delta", 5.0);
    const std::string series = p.str("series", "rs_vol");

    Outputs outputs(cfg.out_dir);
    KeyValues summary;
    struct Row {
        std::string label;
        HillResult hill;
        std::size_t n{0};
    };
    std::vector<Row> rows;
    if (p.has("values")) {
        const auto values = read_column(p.str("values", ""));
        rows.push_back({"values", hill_exponent(values, fraction), values.size()});
    } else if (p.has("events_file")) {
        const auto stream = load_or_simulate(cfg, p, 0);
        const auto s = tail_series(bin_series(stream, delta), series);
        rows.push_back({"events_file", hill_exponent(s, fraction), s.size()});
    } else {
        const auto model = model_from(p);
        const auto run = run_length(p);
        rows.resize(cfg.seeds.size());
        parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
            const auto stream = simulate_stream(model, run, cfg.seeds[i]);
            const auto s = tail_series(bin_series(stream, delta), series);
            rows[i] = {std::to_string(cfg.seeds[i]), hill_exponent(s, fraction), s.size()};
        });
        const auto norms = kernel_norms(model.kernel);
        summary["n_h"] = text(norms.n_h);
        summary["n_z"] = text(norms.n_z);
        if (norms.n_z > 0.0 && norms.n_h + norms.n_z < 1.0) {
            // a* runs from n_H / (1 - n_H) (slow Hawkes memory) to 0 (fast).
            summary["nu_theory_chi_zero"] = text(tail_exponents(norms.n_z, norms.n_h / (1.0 - norms.n_h)).nu);
            summary["nu_theory_chi_large"] = text(tail_exponents(norms.n_z, 0.0).nu);
        }
    }
    double mean = 0.0;
    for (const auto& r : rows) mean += r.hill.nu_hill;
    mean /= static_cast<double>(rows.size());
    summary["series"] = series;
    summary["tail_fraction"] = text(fraction);
    summary["nu_hill_mean"] = text(mean);
    outputs.write("tails.csv", [&](std::ostream& os) {
        os << "label,n,nu_hill,sigma_min,n_tail\n";
        for (const auto& r : rows)
            os << r.label << ',' << r.n << ',' << text(r.hill.nu_hill) << ',' << text(r.hill.sigma_min) << ','
               << r.hill.n_tail << '\n';
    });
    outputs.write("tails.txt", [&](std::ostream& os) { print_summary(os, summary); });
    outputs.manifest(cfg);
    print_summary(out, summary);
    return 0;
}

int cmd_tra(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, with_model({"models", "events", "horizon", "burn_in", "delta", "q", "batches"}));
    p.check_unknown(cfg.command);
    const std::size_t q = p.count("q", 36);
    const double delta = p.num("delta", 5.0);
    BatchOptions batch{p.count("batches", 50)};

    std::vector<std::string> names;
    std::vector<ModelParams> models;
    if (has_model(p.raw())) {
        names.push_back(p.str("preset", "model"));
        models.push_back(model_from(p));
    } else {
        for (const auto& n : p.list("models", "zhawkes-paper,hawkes-benchmark")) {
            names.push_back(n);
            models.push_back(preset_params(n));
        }
    }
    RunLength run;
    run.events = p.count("events", 0);
    run.horizon = p.num("horizon", 0.0);
    run.burn_in = p.num("burn_in", 0.1);
    if (run.events == 0 && run.horizon <= 0.0) run.events = 5'000'000;

    const std::size_t ns = cfg.seeds.size();
    std::vector<TraReport> reports(models.size() * ns);
    parallel_for(reports.size(), cfg.threads, [&](std::size_t i) {
        const auto stream = simulate_stream(models[i / ns], run, cfg.seeds[i % ns]);
        reports[i] = tra_curve(bin_series(stream, delta), q, batch);
    });

    Outputs outputs(cfg.out_dir);
    KeyValues summary;
    std::vector<std::vector<double>> mean(models.size(), std::vector<double>(q, 0.0));
    std::vector<std::vector<double>> err(models.size(), std::vector<double>(q, 0.0));
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (std::size_t t = 0; t < q; ++t) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t k = 0; k < ns; ++k) {
                const double x = reports[m * ns + k].delta_ratio[t];
                s += x;
                s2 += reports[m * ns + k].delta_stderr[t] * reports[m * ns + k].delta_stderr[t];
            }
            mean[m][t] = s / static_cast<double>(ns);
            err[m][t] = std::sqrt(s2) / static_cast<double>(ns);
        }
        double mx = 0.0;
        for (double x : mean[m]) mx = std::max(mx, std::abs(x));
        summary["max_abs_delta." + names[m]] = text(mx);
    }
    outputs.write("tra.csv", [&](std::ostream& os) {
        os << "tau";
        for (const auto& n : names) os << ",delta_" << n << ",stderr_" << n;
        os << '\n';
        for (std::size_t t = 0; t < q; ++t) {
            os << t + 1;
            for (std::size_t m = 0; m < models.size(); ++m) os << ',' << text(mean[m][t]) << ',' << text(err[m][t]);
            os << '\n';
        }
    });
    outputs.write("tra.txt", [&](std::ostream& os) { print_summary(os, summary); });
    outputs.manifest(cfg);
    print_summary(out, summary);
    return 0;
}

int cmd_asymptotics(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, {"n_h", "n_z", "chi", "method", "quantile", "epsilon", "delta_exp", "regime"});
    p.check_unknown(cfg.command);
    AstarOptions opts;
    opts.y_threshold_quantile = p.num("quantile", 0.995);
    opts.seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    const auto method = astar_method_from_string(p.str("method", "nz_small_quadratic"));
    KeyValues report;
    if (p.has("n_z")) {
        report = asymptotics_report(p.num("n_h", 0.0), p.num("n_z", 0.0), p.num("chi", 1.0), method, opts);
    }
    if (p.has("epsilon") || p.has("delta_exp")) {
        PhaseQuery pq;
        pq.epsilon = p.num("epsilon", 0.5);
        pq.delta_exp = p.num("delta_exp", 1.0);
        const std::string regime = p.str("regime", "non_critical");
        if (regime == "critical") pq.regime = Regime::critical;
        else if (regime != "non_critical") throw DomainError("regime must be non_critical or critical");
        const auto ph = phase_exponents(pq);
        report["phase.beta"] = text(ph.beta);
        report["phase.beta_prime"] = text(ph.beta_prime);
        report["phase.rho"] = text(ph.rho);
        report["phase.branch"] = std::to_string(ph.branch);
        report["phase.on_boundary"] = ph.on_boundary ? "1" : "0";
    }
    if (report.empty()) throw DomainError("asymptotics: give n_z (tail analysis) and/or epsilon, delta_exp (phases)");
    Outputs outputs(cfg.out_dir);
    outputs.write("asymptotics.txt", [&](std::ostream& os) { print_summary(os, report); });
    outputs.manifest(cfg);
    print_summary(out, report);
    return 0;
}

// Verifies every manifest under the directory and lists the run summaries.
int cmd_report(const RunConfig& cfg, std::ostream& out) {
    Params p(cfg.keys, {"dir"});
    p.check_unknown(cfg.command);
    const fs::path root = p.str("dir", cfg.out_dir);
    if (!fs::exists(root)) throw DomainError("report: no such directory " + root.string());
    std::vector<fs::path> manifests;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().filename() == "manifest.txt") manifests.push_back(e.path());
    }
    std::sort(manifests.begin(), manifests.end());
    if (manifests.empty()) throw DomainError("report: no manifest.txt under " + root.string());

    std::ostringstream md;
    md << "# qhawkes run report\n";
    std::size_t bad = 0;
    for (const auto& m : manifests) {
        std::ifstream in(m);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto kv = parse_key_values(ss.str());
        const fs::path dir = m.parent_path();
        md << "\n## " << fs::relative(dir, root).string() << " (" << (kv.count("manifest.command") ? kv.at("manifest.command") : "?")
           << ")\n\n";
        for (const auto& [k, v] : kv) {
            const std::string pre = "artifact.";
            const std::string suf = ".sha256";
            if (k.rfind(pre, 0) != 0 || k.size() < pre.size() + suf.size() ||
                k.compare(k.size() - suf.size(), suf.size(), suf) != 0)
                continue;
            const std::string name = k.substr(pre.size(), k.size() - pre.size() - suf.size());
            std::ifstream f(dir / name, std::ios::binary);
            std::string status = "missing";
            if (f) {
                std::stringstream body;
                body << f.rdbuf();
                status = sha256_hex(body.str()) == v ? "ok" : "hash mismatch";
            }
            if (status != "ok") ++bad;
            md << "- " << name << ": " << status << "\n";
        }
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() != ".txt" || e.path().filename() == "manifest.txt" ||
                e.path().filename() == "audit.txt")
                continue;
            std::ifstream s(e.path());
            std::stringstream body;
            body << s.rdbuf();
            md << "\n" << e.path().filename().string() << ":\n\n```\n" << body.str() << "```\n";
        }
    }
    md << "\nruns: " << manifests.size() << ", artifact problems: " << bad << "\n";
    out << md.str();
    {
        std::ofstream f(root / "report.md");
        f << md.str();
    }
    return bad ? 3 : 0;
}

// ---- config resolution ----

KeyValues read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    KeyValues kv = parse_key_values(ss.str());
    // A manifest can be fed back as a config; its bookkeeping keys are dropped.
    for (auto it = kv.begin(); it != kv.end();) {
        if (it->first.rfind("manifest.", 0) == 0 || it->first.rfind("artifact.", 0) == 0) it = kv.erase(it);
        else ++it;
    }
    return kv;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::uint64_t x = 0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), x);
        if (item.empty() || res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
            throw DomainError("bad seed '" + item + "'");
        }
        out.push_back(x);
    }
    return out;
}

bool randomized(const std::string& command) {
    return command == "simulate" || command == "estimate" || command == "calibrate" || command == "diffuse" ||
           command == "tails" || command == "tra" || command == "asymptotics";
}

RunConfig resolve(const std::string& command, const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& out_dir, const std::string& seed_flag, unsigned threads) {
    RunConfig cfg;
    cfg.command = command;
    cfg.out_dir = out_dir;
    cfg.threads = std::max(1u, threads);
    KeyValues file = config_path.empty() ? KeyValues{} : read_config_file(config_path);
    KeyValues cli;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw DomainError("override must be key=value: '" + o + "'");
        cli[o.substr(0, eq)] = o.substr(eq + 1);
    }
    std::string preset;
    if (cli.count("preset")) preset = cli["preset"];
    else if (file.count("preset")) preset = file["preset"];
    if (!preset.empty()) {
        // Preset keys are the base. An explicit diagonal.* or zumbach.* key
        // replaces that whole part of the preset kernel.
        const auto overrides_part = [&](const std::string& prefix) {
            const auto hit = [&](const KeyValues& kv) {
                return std::any_of(kv.begin(), kv.end(), [&](const auto& e) { return e.first.rfind(prefix, 0) == 0; });
            };
            return hit(file) || hit(cli);
        };
        const bool own_diag = overrides_part("diagonal.");
        const bool own_zumbach = overrides_part("zumbach.");
        for (const auto& [k, v] : find_preset(preset).keys) {
            if ((own_diag && k.rfind("diagonal.", 0) == 0) || (own_zumbach && k.rfind("zumbach.", 0) == 0)) continue;
            cfg.keys[k] = v;
        }
    }
    for (const auto& src : {file, cli}) {
        for (const auto& [k, v] : src) cfg.keys[k] = v;
    }
    if (cfg.keys.count("seed")) {
        cfg.keys["seeds"] = cfg.keys["seed"];
        cfg.keys.erase("seed");
    }
    if (!seed_flag.empty()) cfg.keys["seeds"] = seed_flag;
    if (cfg.keys.count("seeds")) {
        cfg.seeds = parse_seeds(cfg.keys["seeds"]);
        cfg.keys.erase("seeds");
    } else if (randomized(command)) {
        std::random_device rd;
        cfg.seeds = {(static_cast<std::uint64_t>(rd()) << 32) ^ rd()};
        cfg.seed_generated = true;
    }
    return cfg;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"qhawkes: simulation, estimation and asymptotics for quadratic Hawkes price models"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = "out";
    std::string seed_flag;
    unsigned threads = 1;
    app.add_option("--config", config_path, "flat key=value config file (a manifest also works)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed_flag, "seed or comma-separated seed list");
    app.add_option("--threads", threads, "worker threads for multi-seed runs");

    using Handler = int (*)(const RunConfig&, std::ostream&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands{
        {"simulate", "simulate an event stream and its bins", cmd_simulate},
        {"estimate", "estimate C, D and the exact-equation residuals", cmd_estimate},
        {"calibrate", "fit QARCH (GMM then Student-t MLE) and the kernel decomposition", cmd_calibrate},
        {"diffuse", "integrate the limit diffusion or sample its stationary law", cmd_diffuse},
        {"tails", "Hill tail exponents per seed and theoretical bounds", cmd_tails},
        {"tra", "time-reversal asymmetry table per model", cmd_tra},
        {"asymptotics", "a*, tail exponents and phase exponents", cmd_asymptotics},
        {"report", "verify manifests and collect run summaries", cmd_report},
    };
    std::vector<std::string> overrides;
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, handler] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("overrides", overrides, "key=value overrides");
        // Global flags are also accepted after the subcommand.
        sub->add_option("--config", config_path);
        sub->add_option("--out", out_dir);
        sub->add_option("--seed", seed_flag);
        sub->add_option("--threads", threads);
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const auto& [name, help, handler] = commands[i];
            const auto cfg = resolve(name, config_path, overrides, out_dir, seed_flag, threads);
            return handler(cfg, out);
        }
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

} // namespace qhawkes::cli
