#pragma once

#include "qhawkes/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace qhawkes {

struct EventStream {
    std::vector<double> times;
    std::vector<std::int8_t> signs;
    double psi{1.0};
    double horizon{0.0};
    std::uint64_t seed{0};

    [[nodiscard]] std::size_t size() const { return times.size(); }
    // N_t: number of events with time <= t.
    [[nodiscard]] std::size_t count_until(double t) const;
    // P_t = psi * (sum of signs of events with time <= t), starting from 0.
    [[nodiscard]] double price_at(double t) const;

    // Drops events before fraction * horizon and shifts the origin there.
    [[nodiscard]] EventStream trim_burn_in(double fraction) const;
    [[nodiscard]] EventStream sign_flipped() const;
    // t -> horizon - t with the order reversed.
    [[nodiscard]] EventStream time_reversed() const;

    // Throws DomainError on unsorted times, size mismatch, bad signs or
    // times outside [0, horizon].
    void validate() const;
};

struct MarkovState {
    double h{0.0};
    double z{0.0};
    double t{0.0};
};

enum class HistoryMode {
    direct,          // O(n) sum over the retained history
    exponential_sum, // power law replaced by a sum of exponentials, O(terms) per candidate
};

struct ThinningOptions {
    // Contributions with phi(t - t_i) < truncation_tol * lambda_inf are dropped
    // (and k(t - t_i) < truncation_tol * sqrt(lambda_inf) for the Zumbach part).
    double truncation_tol{1e-12};
    HistoryMode history{HistoryMode::direct};
    // Relative accuracy of the exponential-sum approximation over the horizon.
    double expsum_rel_tol{1e-8};
    std::size_t max_events{50'000'000};
    // When nonzero, stop at this many events and set horizon to the last time.
    std::size_t stop_after_events{0};
};

// Ogata thinning for lambda_t = lambda_inf + H_t + Z_t^2. Between events the
// intensity is non-increasing, so the intensity at the latest candidate bounds
// it until the next event.
[[nodiscard]] EventStream simulate_thinning(const ModelParams& params, double horizon, std::uint64_t seed,
                                            const ThinningOptions& options = {});

struct MarkovianOptions {
    bool record_path{false};
    std::size_t max_events{50'000'000};
    std::size_t stop_after_events{0};
};

struct MarkovianRun {
    EventStream stream;
    // State right after each event when record_path is set.
    std::vector<MarkovState> path;
};

// Exponential kernels only. Inter-event times come from inverting the
// compensator exactly, so each event costs O(1).
[[nodiscard]] MarkovianRun simulate_markovian(const ModelParams& params, double horizon, std::uint64_t seed,
                                              const MarkovianOptions& options = {});

// Deterministic flow of (h, z) over dt with no events.
[[nodiscard]] MarkovState decay(const ModelParams& params, const MarkovState& state, double dt);

// lambda_t from the events strictly before t, summed without truncation.
[[nodiscard]] double replay_intensity(const ModelParams& params, const EventStream& stream, double t);

// Bin b covers (b delta, (b+1) delta]; only complete bins are kept.
// Prices are levels, so ret = close - open and rs_vol uses the additive
// Rogers-Satchell form sqrt((H-O)(H-C) + (L-O)(L-C)).
struct BinSeries {
    double delta{1.0};
    double psi{1.0};
    std::vector<double> open, high, low, close, ret, rs_vol;
    std::vector<std::uint32_t> count;

    [[nodiscard]] std::size_t size() const { return ret.size(); }
};

[[nodiscard]] BinSeries bin_series(const EventStream& stream, double delta);

void write_events_csv(std::ostream& os, const EventStream& stream);
// Reads time,sign rows. Horizon defaults to the last event time when not given.
[[nodiscard]] EventStream read_events_csv(std::istream& is, double psi = 1.0, double horizon = -1.0);
void write_bins_csv(std::ostream& os, const BinSeries& bins);

} // namespace qhawkes
