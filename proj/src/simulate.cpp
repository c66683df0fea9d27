#include "qhawkes/simulate.hpp"

#include "numfmt.hpp"
#include "qhawkes/errors.hpp"
#include "qhawkes/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace qhawkes {

namespace {

void require_stationary(const ModelParams& params, const char* who) {
    const auto rep = stationarity_check(params);
    if (rep.status != Stationarity::stationary) {
        std::ostringstream os;
        os << who << ": parameters are " << to_string(rep.status) << " (lambda_inf=" << params.lambda_inf
           << ", Tr K=" << rep.trace << ")";
        throw DomainError(os.str());
    }
}

void require_horizon(double horizon, const char* who) {
    if (!(std::isfinite(horizon) && horizon > 0.0)) throw DomainError(std::string(who) + ": horizon must be > 0");
}

[[noreturn]] void cap_exceeded(const char* who, std::size_t cap, double t, double horizon) {
    std::ostringstream os;
    os << who << ": event cap " << cap << " reached at t=" << t << " of horizon " << horizon;
    throw EventCapExceeded(os.str());
}

// Age beyond which a contribution of size f(age) stays below `floor`.
double cutoff_age(const DiagonalKernel& d, double floor) {
    if (const auto* e = std::get_if<ExponentialHawkes>(&d)) {
        const double a0 = e->n_h * e->beta;
        return a0 <= floor ? 0.0 : std::log(a0 / floor) / e->beta;
    }
    if (const auto* p = std::get_if<PowerLawHawkes>(&d)) {
        if (p->g <= floor) return 0.0;
        return (std::pow(p->g / floor, 1.0 / p->alpha) - 1.0) / p->c;
    }
    return 0.0;
}

double cutoff_age(const ZumbachKernel& z, double floor) {
    if (const auto* e = std::get_if<ExponentialZumbach>(&z)) {
        const double k0 = e->amplitude();
        return k0 <= floor ? 0.0 : std::log(k0 / floor) / e->omega;
    }
    return 0.0;
}

// H and Z at the current candidate time.
struct Components {
    double h{0.0};
    double z{0.0};
};

class DirectHistory {
public:
    DirectHistory(const ModelParams& p, const EventStream& events, double tol)
        : spec_(p.kernel), events_(events) {
        const double age_phi = cutoff_age(spec_.diagonal(), tol * p.lambda_inf);
        const double age_k = cutoff_age(spec_.zumbach(), tol * std::sqrt(p.lambda_inf));
        max_age_ = std::max(age_phi, age_k);
    }

    Components at(double t) {
        const auto& times = events_.times;
        while (first_ < times.size() && t - times[first_] > max_age_) ++first_;
        Components c;
        for (std::size_t i = first_; i < times.size(); ++i) {
            const double age = t - times[i];
            c.h += spec_.phi(age);
            c.z += events_.signs[i] * spec_.k(age);
        }
        return c;
    }

private:
    const KernelSpec& spec_;
    const EventStream& events_;
    double max_age_{0.0};
    std::size_t first_{0};
};

class ExpSumHistory {
public:
    ExpSumHistory(const ModelParams& p, double horizon, double rel_tol) {
        const auto& d = p.kernel.diagonal();
        if (const auto* e = std::get_if<ExponentialHawkes>(&d)) {
            sum_.weights = {e->n_h * e->beta};
            sum_.rates = {e->beta};
        } else if (const auto* pl = std::get_if<PowerLawHawkes>(&d)) {
            sum_ = approximate_power_law(*pl, horizon, rel_tol);
        }
        x_.assign(sum_.size(), 0.0);
        jump_h_ = 0.0;
        for (double w : sum_.weights) jump_h_ += w;
        if (const auto* z = std::get_if<ExponentialZumbach>(&p.kernel.zumbach())) omega_ = z->omega;
    }

    Components advance(double dt) {
        Components c;
        for (std::size_t j = 0; j < x_.size(); ++j) {
            x_[j] *= std::exp(-sum_.rates[j] * dt);
            c.h += sum_.weights[j] * x_[j];
        }
        z_ *= std::exp(-omega_ * dt);
        c.z = z_;
        return c;
    }

    void jump(double dz) {
        for (double& x : x_) x += 1.0;
        z_ += dz;
    }

    [[nodiscard]] double jump_h() const { return jump_h_; }

private:
    ExponentialSum sum_;
    std::vector<double> x_;
    double jump_h_{0.0};
    double omega_{0.0};
    double z_{0.0};
};

} // namespace

std::size_t EventStream::count_until(double t) const {
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

double EventStream::price_at(double t) const {
    const std::size_t n = count_until(t);
    long long s = 0;
    for (std::size_t i = 0; i < n; ++i) s += signs[i];
    return psi * static_cast<double>(s);
}

EventStream EventStream::trim_burn_in(double fraction) const {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw DomainError("burn-in fraction must be in [0, 1)");
    const double t0 = fraction * horizon;
    EventStream out;
    out.psi = psi;
    out.seed = seed;
    out.horizon = horizon - t0;
    const auto first = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t0) - times.begin());
    out.times.reserve(times.size() - first);
    for (std::size_t i = first; i < times.size(); ++i) out.times.push_back(times[i] - t0);
    out.signs.assign(signs.begin() + static_cast<std::ptrdiff_t>(first), signs.end());
    return out;
}

EventStream EventStream::sign_flipped() const {
    EventStream out = *this;
    for (auto& s : out.signs) s = static_cast<std::int8_t>(-s);
    return out;
}

EventStream EventStream::time_reversed() const {
    EventStream out;
    out.psi = psi;
    out.seed = seed;
    out.horizon = horizon;
    out.times.reserve(times.size());
    out.signs.reserve(signs.size());
    for (std::size_t i = times.size(); i-- > 0;) {
        out.times.push_back(horizon - times[i]);
        out.signs.push_back(signs[i]);
    }
    return out;
}

void EventStream::validate() const {
    if (times.size() != signs.size()) throw DomainError("EventStream: times and signs differ in length");
    if (!(psi > 0.0)) throw DomainError("EventStream: psi must be > 0");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0 && times[i] <= horizon))
            throw DomainError("EventStream: time outside [0, horizon] at index " + std::to_string(i));
        if (i > 0 && !(times[i] > times[i - 1]))
            throw DomainError("EventStream: times not strictly increasing at index " + std::to_string(i));
        if (signs[i] != 1 && signs[i] != -1) throw DomainError("EventStream: sign must be +1 or -1");
    }
}

EventStream simulate_thinning(const ModelParams& params, double horizon, std::uint64_t seed,
                              const ThinningOptions& options) {
    require_stationary(params, "simulate_thinning");
    require_horizon(horizon, "simulate_thinning");
    if (!(options.truncation_tol >= 0.0)) throw DomainError("simulate_thinning: truncation_tol must be >= 0");

    EventStream out;
    out.psi = params.psi;
    out.seed = seed;
    out.horizon = horizon;

    Philox4x32 rng(seed);
    const double lam_inf = params.lambda_inf;
    const double phi0 = params.kernel.phi(0.0);
    const double k0 = params.kernel.k(0.0);

    const bool use_sum = options.history == HistoryMode::exponential_sum;
    DirectHistory direct(params, out, options.truncation_tol);
    ExpSumHistory expsum = use_sum ? ExpSumHistory(params, horizon, options.expsum_rel_tol)
                                   : ExpSumHistory(ModelParams{}, horizon, options.expsum_rel_tol);
    const double jump_h = use_sum ? expsum.jump_h() : phi0;

    double t = 0.0;
    double bound = lam_inf;
    while (true) {
        const double cand = t + rng.exponential() / bound;
        if (cand > horizon) break;
        const Components c = use_sum ? expsum.advance(cand - t) : direct.at(cand);
        t = cand;
        double lam = lam_inf + c.h + c.z * c.z;
        if (lam > bound * (1.0 + 1e-9)) {
            std::ostringstream os;
            os << "simulate_thinning: intensity " << lam << " exceeds thinning bound " << bound << " at t=" << t;
            throw NumericalError(os.str());
        }
        if (rng.uniform() * bound <= lam) {
            const int s = rng.sign();
            if (out.times.size() >= options.max_events) cap_exceeded("simulate_thinning", options.max_events, t, horizon);
            out.times.push_back(t);
            out.signs.push_back(static_cast<std::int8_t>(s));
            const double z = c.z + s * k0;
            if (use_sum) expsum.jump(s * k0);
            lam = lam_inf + c.h + jump_h + z * z;
            if (options.stop_after_events != 0 && out.times.size() == options.stop_after_events) {
                out.horizon = t;
                break;
            }
        }
        bound = lam;
    }
    return out;
}

MarkovState decay(const ModelParams& params, const MarkovState& state, double dt) {
    MarkovState out = state;
    out.t += dt;
    if (const auto* e = std::get_if<ExponentialHawkes>(&params.kernel.diagonal())) out.h *= std::exp(-e->beta * dt);
    if (const auto* z = std::get_if<ExponentialZumbach>(&params.kernel.zumbach())) out.z *= std::exp(-z->omega * dt);
    return out;
}

MarkovianRun simulate_markovian(const ModelParams& params, double horizon, std::uint64_t seed,
                                const MarkovianOptions& options) {
    if (!params.kernel.markovian())
        throw UnsupportedKernel("simulate_markovian: only exponential (or zero) kernels are supported");
    require_stationary(params, "simulate_markovian");
    require_horizon(horizon, "simulate_markovian");

    double beta = 0.0, jump_h = 0.0, omega = 0.0, k0 = 0.0;
    if (const auto* e = std::get_if<ExponentialHawkes>(&params.kernel.diagonal())) {
        beta = e->beta;
        jump_h = e->n_h * e->beta;
    }
    if (const auto* z = std::get_if<ExponentialZumbach>(&params.kernel.zumbach())) {
        omega = z->omega;
        k0 = z->amplitude();
    }
    const double lam_inf = params.lambda_inf;

    MarkovianRun run;
    run.stream.psi = params.psi;
    run.stream.seed = seed;
    run.stream.horizon = horizon;

    Philox4x32 rng(seed);
    double h = 0.0, z = 0.0, t = 0.0;
    while (true) {
        const double z2 = z * z;
        // Compensator over (t, t+s] and the intensity at t+s.
        auto comp = [&](double s) {
            double v = lam_inf * s;
            if (beta > 0.0) v -= h * std::expm1(-beta * s) / beta;
            if (omega > 0.0) v -= z2 * std::expm1(-2.0 * omega * s) / (2.0 * omega);
            return v;
        };
        auto rate = [&](double s) {
            double v = lam_inf;
            if (beta > 0.0) v += h * std::exp(-beta * s);
            if (omega > 0.0) v += z2 * std::exp(-2.0 * omega * s);
            return v;
        };
        const double target = rng.exponential();
        if (comp(horizon - t) < target) break;
        // The compensator is concave, so Newton from s = 0 stays left of the root.
        double s = 0.0;
        for (int it = 0;; ++it) {
            const double gap = target - comp(s);
            if (gap <= 1e-14 * target) break;
            const double step = gap / rate(s);
            s += step;
            if (step <= 1e-16 * s) break;
            if (it > 200) throw NumericalError("simulate_markovian: compensator inversion did not converge");
        }
        t += s;
        if (beta > 0.0) h *= std::exp(-beta * s);
        if (omega > 0.0) z *= std::exp(-omega * s);
        const int sign = rng.sign();
        if (run.stream.times.size() >= options.max_events)
            cap_exceeded("simulate_markovian", options.max_events, t, horizon);
        if (!run.stream.times.empty() && !(t > run.stream.times.back())) t = std::nextafter(run.stream.times.back(), horizon);
        run.stream.times.push_back(t);
        run.stream.signs.push_back(static_cast<std::int8_t>(sign));
        h += jump_h;
        z += sign * k0;
        if (options.record_path) run.path.push_back({h, z, t});
        if (options.stop_after_events != 0 && run.stream.times.size() == options.stop_after_events) {
            run.stream.horizon = t;
            break;
        }
    }
    return run;
}

double replay_intensity(const ModelParams& params, const EventStream& stream, double t) {
    double h = 0.0, z = 0.0;
    for (std::size_t i = 0; i < stream.times.size() && stream.times[i] < t; ++i) {
        const double age = t - stream.times[i];
        h += params.kernel.phi(age);
        z += stream.signs[i] * params.kernel.k(age);
    }
    return params.lambda_inf + h + z * z;
}

BinSeries bin_series(const EventStream& stream, double delta) {
    if (!(std::isfinite(delta) && delta > 0.0)) throw DomainError("bin_series: delta must be > 0");
    BinSeries out;
    out.delta = delta;
    out.psi = stream.psi;
    const auto n_bins = static_cast<std::size_t>(std::floor(stream.horizon / delta * (1.0 + 1e-12)));
    for (auto* v : {&out.open, &out.high, &out.low, &out.close, &out.ret, &out.rs_vol}) v->resize(n_bins);
    out.count.resize(n_bins);

    const double psi = stream.psi;
    std::size_t idx = 0;
    long long level = 0;
    // Events at or before time 0 belong to no bin but still move the level.
    while (idx < stream.size() && stream.times[idx] <= 0.0) level += stream.signs[idx++];
    for (std::size_t b = 0; b < n_bins; ++b) {
        const double end = static_cast<double>(b + 1) * delta;
        const long long open = level;
        long long hi = level, lo = level;
        std::uint32_t cnt = 0;
        while (idx < stream.size() && stream.times[idx] <= end) {
            level += stream.signs[idx++];
            hi = std::max(hi, level);
            lo = std::min(lo, level);
            ++cnt;
        }
        const double o = psi * static_cast<double>(open);
        const double h = psi * static_cast<double>(hi);
        const double l = psi * static_cast<double>(lo);
        const double c = psi * static_cast<double>(level);
        out.open[b] = o;
        out.high[b] = h;
        out.low[b] = l;
        out.close[b] = c;
        out.ret[b] = psi * static_cast<double>(level - open);
        out.rs_vol[b] = std::sqrt((h - o) * (h - c) + (l - o) * (l - c));
        out.count[b] = cnt;
    }
    return out;
}

void write_events_csv(std::ostream& os, const EventStream& stream) {
    os << "time,sign\n";
    for (std::size_t i = 0; i < stream.size(); ++i)
        os << detail::to_text(stream.times[i]) << ',' << static_cast<int>(stream.signs[i]) << '\n';
}

EventStream read_events_csv(std::istream& is, double psi, double horizon) {
    std::string line;
    if (!std::getline(is, line)) throw DomainError("events CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time,sign") throw DomainError("events CSV: expected header 'time,sign'");
    EventStream out;
    out.psi = psi;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        double t = 0.0;
        int s = 0;
        const char* b = line.data();
        const char* e = b + line.size();
        const bool ok = comma != std::string::npos && std::from_chars(b, b + comma, t).ptr == b + comma &&
                        std::from_chars(b + comma + 1, e, s).ptr == e;
        if (!ok) throw DomainError("events CSV: malformed line " + std::to_string(line_no));
        out.times.push_back(t);
        out.signs.push_back(static_cast<std::int8_t>(s));
    }
    out.horizon = horizon >= 0.0 ? horizon : (out.times.empty() ? 0.0 : out.times.back());
    out.validate();
    return out;
}

void write_bins_csv(std::ostream& os, const BinSeries& bins) {
    os << "bin_index,open,high,low,close,ret,rs_vol\n";
    for (std::size_t b = 0; b < bins.size(); ++b) {
        os << b << ',' << detail::to_text(bins.open[b]) << ',' << detail::to_text(bins.high[b]) << ','
           << detail::to_text(bins.low[b]) << ',' << detail::to_text(bins.close[b]) << ','
           << detail::to_text(bins.ret[b]) << ',' << detail::to_text(bins.rs_vol[b]) << '\n';
    }
}

} // namespace qhawkes
