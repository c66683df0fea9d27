#include "qhawkes/experiments.hpp"

#include "qhawkes/errors.hpp"

#include <cmath>

namespace qhawkes {

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all{
        {"zhawkes-paper",
         "power-law Hawkes (n_H 0.8, alpha 1.2, c 0.01) plus exponential Zumbach (n_Z 0.1, omega 0.03), minutes",
         {{"diagonal.kind", "power_law"},
          {"diagonal.n_h", "0.8"},
          {"diagonal.c", "0.01"},
          {"diagonal.alpha", "1.2"},
          {"zumbach.kind", "exponential"},
          {"zumbach.n_z", "0.1"},
          {"zumbach.omega", "0.03"},
          {"lambda_inf", "1"},
          {"psi", "1"},
          {"delta", "5"},
          {"events", "5000000"},
          {"burn_in", "0.1"}}},
        {"hawkes-benchmark",
         "power-law Hawkes (n_H 0.99, alpha 1.3, c 0.01) without Zumbach feedback, minutes",
         {{"diagonal.kind", "power_law"},
          {"diagonal.n_h", "0.99"},
          {"diagonal.c", "0.01"},
          {"diagonal.alpha", "1.3"},
          {"zumbach.kind", "zero"},
          {"lambda_inf", "1"},
          {"psi", "1"},
          {"delta", "5"},
          {"events", "5000000"},
          {"burn_in", "0.1"}}},
    };
    return all;
}

const Preset& find_preset(const std::string& name) {
    std::string known;
    for (const auto& p : presets()) {
        if (p.name == name) return p;
        known += (known.empty() ? "" : ", ") + p.name;
    }
    throw DomainError("unknown preset '" + name + "' (known presets: " + known + ")");
}

ModelParams preset_params(const std::string& name) {
    return model_params_from_key_values(find_preset(name).keys);
}

EventStream simulate_stream(const ModelParams& params, const RunLength& run, std::uint64_t seed) {
    params.validate();
    if (!(run.burn_in >= 0.0 && run.burn_in < 1.0)) throw DomainError("burn_in must be in [0, 1)");
    if (run.events == 0 && !(run.horizon > 0.0)) throw DomainError("need events > 0 or horizon > 0");

    // With an event target the run stops at events / (1 - burn_in) events, so
    // about `events` survive the trim. The intensity never drops below
    // lambda_inf, so twice the Poisson time is a safe ceiling on the horizon.
    const auto total =
        run.events ? static_cast<std::size_t>(std::ceil(static_cast<double>(run.events) / (1.0 - run.burn_in))) : 0;
    const double horizon = run.events ? (2.0 * static_cast<double>(total) + 1000.0) / params.lambda_inf : run.horizon;

    EventStream stream;
    if (params.kernel.markovian()) {
        MarkovianOptions opts;
        opts.stop_after_events = total;
        if (total) opts.max_events = total + 1;
        stream = simulate_markovian(params, horizon, seed, opts).stream;
    } else {
        ThinningOptions opts;
        opts.history = HistoryMode::exponential_sum;
        opts.stop_after_events = total;
        if (total) opts.max_events = total + 1;
        stream = simulate_thinning(params, horizon, seed, opts);
    }
    return run.burn_in > 0.0 ? stream.trim_burn_in(run.burn_in) : stream;
}

} // namespace qhawkes
