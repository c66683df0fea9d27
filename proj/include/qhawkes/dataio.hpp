#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace qhawkes {

// Dense (stock, day, bin) cube of OHLC prices. A (stock, day) slot is either
// fully present or absent.
class OhlcPanel {
public:
    OhlcPanel() = default;
    OhlcPanel(std::vector<std::string> stocks, std::vector<std::string> days, std::vector<long> bin_ids);

    [[nodiscard]] std::size_t n_stocks() const { return stocks_.size(); }
    [[nodiscard]] std::size_t n_days() const { return days_.size(); }
    [[nodiscard]] std::size_t n_bins() const { return bin_ids_.size(); }
    [[nodiscard]] bool empty() const { return stocks_.empty(); }
    [[nodiscard]] const std::vector<std::string>& stocks() const { return stocks_; }
    [[nodiscard]] const std::vector<std::string>& days() const { return days_; }
    [[nodiscard]] const std::vector<long>& bin_ids() const { return bin_ids_; }

    [[nodiscard]] bool present(std::size_t u, std::size_t t) const { return present_[u * n_days() + t] != 0; }
    void set_present(std::size_t u, std::size_t t, bool on) { present_[u * n_days() + t] = on ? 1 : 0; }

    // Prices of one bin; h >= max(o, c), l <= min(o, c), all > 0.
    void set(std::size_t u, std::size_t t, std::size_t b, double o, double h, double l, double c);
    [[nodiscard]] double open(std::size_t u, std::size_t t, std::size_t b) const { return at(u, t, b)[0]; }
    [[nodiscard]] double high(std::size_t u, std::size_t t, std::size_t b) const { return at(u, t, b)[1]; }
    [[nodiscard]] double low(std::size_t u, std::size_t t, std::size_t b) const { return at(u, t, b)[2]; }
    [[nodiscard]] double close(std::size_t u, std::size_t t, std::size_t b) const { return at(u, t, b)[3]; }

private:
    [[nodiscard]] std::size_t slot(std::size_t u, std::size_t t, std::size_t b) const {
        return ((u * n_days() + t) * n_bins() + b) * 4;
    }
    [[nodiscard]] const double* at(std::size_t u, std::size_t t, std::size_t b) const { return &prices_[slot(u, t, b)]; }

    std::vector<std::string> stocks_;
    std::vector<std::string> days_;
    std::vector<long> bin_ids_;
    std::vector<double> prices_;
    std::vector<unsigned char> present_;
};

struct LoadReport {
    std::size_t rows_read{0};
    std::size_t rows_rejected{0};
    std::size_t stock_days_dropped{0};  // stock-days with a rejected row
    std::vector<std::string> errors;    // first 100 row-level messages
};

struct LoadResult {
    OhlcPanel panel;
    LoadReport report;
};

// Header: stock_id,date,bin,open,high,low,close. Malformed rows and OHLC
// ordering violations are rejected and their stock-day dropped; every
// remaining stock-day must carry the same set of bins.
[[nodiscard]] LoadResult load_csv(std::istream& is);
[[nodiscard]] LoadResult load_csv(const std::string& path);

struct NormalizeConfig {
    double ewma_decay{0.94};
    double exclusion_sigmas{6.0};
};

// Values on the (stock, day, bin) cube, row-major.
struct Cube {
    std::size_t n_stocks{0}, n_days{0}, n_bins{0};
    std::vector<double> values;

    Cube() = default;
    Cube(std::size_t s, std::size_t d, std::size_t b, double fill = 0.0)
        : n_stocks(s), n_days(d), n_bins(b), values(s * d * b, fill) {}
    double& operator()(std::size_t u, std::size_t t, std::size_t b) { return values[(u * n_days + t) * n_bins + b]; }
    double operator()(std::size_t u, std::size_t t, std::size_t b) const {
        return values[(u * n_days + t) * n_bins + b];
    }
};

struct NormalizationAudit {
    std::vector<double> daily_vol;   // sigma^D per (stock, day), row-major
    Cube pattern;                    // leave-one-out v_{u,t}(b)
    std::vector<double> ret_mean;    // per stock, subtracted before rescaling
    std::vector<double> ret_scale;   // per stock: sqrt(<r^2>) after demeaning
    std::vector<double> rs_scale;    // per stock: sqrt(<rs^2>)
    std::vector<double> abs_threshold;  // per stock: mean |r| + k std |r|
    std::size_t fallbacks{0};        // zero divisors replaced by 1
    std::vector<std::string> notes;
    double exclusion_rate{0.0};      // excluded / present stock-days
};

struct NormalizedPanel {
    std::vector<std::string> stocks;
    std::vector<std::string> days;
    std::vector<long> bin_ids;
    Cube returns;
    Cube rs_vol;
    std::vector<unsigned char> present;   // per (stock, day)
    std::vector<unsigned char> excluded;  // per (stock, day)
    NormalizationAudit audit;

    [[nodiscard]] bool kept(std::size_t u, std::size_t t) const {
        const std::size_t i = u * days.size() + t;
        return present[i] && !excluded[i];
    }
    // Kept returns (or RS vols) of one stock in time order.
    [[nodiscard]] std::vector<double> return_series(std::size_t u) const;
    [[nodiscard]] std::vector<double> rs_series(std::size_t u) const;
};

// Log returns ln(C/O) and log-form Rogers-Satchell vols, then: (1) divide by the
// EWMA daily volatility proxy; (2) divide by the leave-one-out cross-sectional
// pattern; (3) exclude stock-days with a bin |r| above mean + k std of the
// stock's |r|; (4-5) per stock, remove the mean return and rescale so that
// <r^2> = 1 and <rs^2> = 1 over kept stock-days. Needs at least 2 stocks.
[[nodiscard]] NormalizedPanel normalize(const OhlcPanel& panel, const NormalizeConfig& config = {});

// Stages 2-5 on an already normalized panel (kept stock-days only).
[[nodiscard]] NormalizedPanel renormalize(const NormalizedPanel& panel, const NormalizeConfig& config = {});

// Raw log returns rebuilt from a normalized panel and its audit (kept stock-days).
[[nodiscard]] Cube reconstruct_returns(const NormalizedPanel& panel);

void write_normalized_csv(std::ostream& os, const NormalizedPanel& panel);
void write_audit(std::ostream& os, const NormalizedPanel& panel);

} // namespace qhawkes
