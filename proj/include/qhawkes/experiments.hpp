#pragma once

#include "qhawkes/kernels.hpp"
#include "qhawkes/simulate.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace qhawkes {

// Named model configurations. Keys are norms, never raw amplitudes, plus run
// defaults (delta, events, burn_in) in the same flat key=value form.
struct Preset {
    std::string name;
    std::string description;
    KeyValues keys;
};

[[nodiscard]] const std::vector<Preset>& presets();
// Throws DomainError naming the known presets.
[[nodiscard]] const Preset& find_preset(const std::string& name);
[[nodiscard]] ModelParams preset_params(const std::string& name);

struct RunLength {
    double horizon{0.0};     // used when events == 0
    std::size_t events{0};   // events kept after the burn-in
    double burn_in{0.1};     // fraction of the run dropped at the start
};

// Markovian simulator when every kernel part is exponential, thinning
// otherwise (power laws through the exponential-sum history).
[[nodiscard]] EventStream simulate_stream(const ModelParams& params, const RunLength& run, std::uint64_t seed);

} // namespace qhawkes
