#include "qhawkes/dataio.hpp"

#include "numfmt.hpp"
#include "qhawkes/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string_view>

namespace qhawkes {

OhlcPanel::OhlcPanel(std::vector<std::string> stocks, std::vector<std::string> days, std::vector<long> bin_ids)
    : stocks_(std::move(stocks)), days_(std::move(days)), bin_ids_(std::move(bin_ids)) {
    prices_.assign(n_stocks() * n_days() * n_bins() * 4, 0.0);
    present_.assign(n_stocks() * n_days(), 0);
}

void OhlcPanel::set(std::size_t u, std::size_t t, std::size_t b, double o, double h, double l, double c) {
    if (!(o > 0.0 && h > 0.0 && l > 0.0 && c > 0.0)) {
        throw DomainError("OhlcPanel: prices must be positive");
    }
    if (h < std::max(o, c) || l > std::min(o, c)) {
        throw DomainError("OhlcPanel: need high >= max(open, close) and low <= min(open, close)");
    }
    double* p = &prices_[slot(u, t, b)];
    p[0] = o;
    p[1] = h;
    p[2] = l;
    p[3] = c;
}

namespace {

constexpr std::size_t kMaxErrors = 100;

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

struct Row {
    long bin{0};
    double o{0}, h{0}, l{0}, c{0};
};

void note_error(LoadReport& report, std::size_t line_no, const std::string& what) {
    ++report.rows_rejected;
    if (report.errors.size() < kMaxErrors) {
        report.errors.push_back("line " + std::to_string(line_no) + ": " + what);
    }
}

} // namespace

LoadResult load_csv(std::istream& is) {
    LoadResult result;
    LoadReport& report = result.report;

    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw DomainError("load_csv: empty panel (no header and no rows)");
    {
        const auto fields = split(trim(line));
        static const char* const expected[] = {"stock_id", "date", "bin", "open", "high", "low", "close"};
        bool ok = fields.size() == 7;
        for (std::size_t i = 0; ok && i < 7; ++i) ok = trim(fields[i]) == expected[i];
        if (!ok) throw DomainError("load_csv: header must be stock_id,date,bin,open,high,low,close");
    }

    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::vector<Row>> groups;
    std::set<Key> bad;
    while (std::getline(is, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        ++report.rows_read;
        const auto f = split(text);
        if (f.size() != 7) {
            note_error(report, line_no, "expected 7 fields, got " + std::to_string(f.size()));
            continue;
        }
        Key key{std::string(trim(f[0])), std::string(trim(f[1]))};
        if (key.first.empty() || key.second.empty()) {
            note_error(report, line_no, "empty stock_id or date");
            continue;
        }
        Row row;
        if (!parse_number(f[2], row.bin) || !parse_number(f[3], row.o) || !parse_number(f[4], row.h) ||
            !parse_number(f[5], row.l) || !parse_number(f[6], row.c)) {
            note_error(report, line_no, "unparsable field");
            bad.insert(key);
            continue;
        }
        if (!(row.o > 0.0 && row.h > 0.0 && row.l > 0.0 && row.c > 0.0) || !std::isfinite(row.h)) {
            note_error(report, line_no, "non-positive or non-finite price");
            bad.insert(key);
            continue;
        }
        if (row.h < std::max(row.o, row.c) || row.l > std::min(row.o, row.c)) {
            note_error(report, line_no, "OHLC ordering violated");
            bad.insert(key);
            continue;
        }
        groups[key].push_back(row);
    }
    if (report.rows_read == 0) throw DomainError("load_csv: empty panel (no data rows)");

    std::set<std::string> stock_set;
    std::set<std::string> day_set;
    std::set<long> bin_set;
    for (auto& [key, rows] : groups) {
        if (bad.count(key)) continue;
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.bin < b.bin; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].bin == rows[i - 1].bin) {
                throw DomainError("load_csv: duplicate bin " + std::to_string(rows[i].bin) + " for " + key.first +
                                  " on " + key.second);
            }
        }
        stock_set.insert(key.first);
        day_set.insert(key.second);
        for (const auto& r : rows) bin_set.insert(r.bin);
    }
    report.stock_days_dropped = bad.size();
    if (stock_set.empty()) throw DomainError("load_csv: empty panel (every row rejected)");

    const std::vector<long> bins(bin_set.begin(), bin_set.end());
    for (const auto& [key, rows] : groups) {
        if (bad.count(key)) continue;
        bool same = rows.size() == bins.size();
        for (std::size_t i = 0; same && i < rows.size(); ++i) same = rows[i].bin == bins[i];
        if (!same) {
            throw DomainError("load_csv: inconsistent bins-per-day: " + key.first + " on " + key.second + " has " +
                              std::to_string(rows.size()) + " bins, panel has " + std::to_string(bins.size()));
        }
    }

    std::vector<std::string> stocks(stock_set.begin(), stock_set.end());
    std::vector<std::string> days(day_set.begin(), day_set.end());
    OhlcPanel panel(stocks, days, bins);
    for (const auto& [key, rows] : groups) {
        if (bad.count(key)) continue;
        const auto u = static_cast<std::size_t>(std::lower_bound(stocks.begin(), stocks.end(), key.first) - stocks.begin());
        const auto t = static_cast<std::size_t>(std::lower_bound(days.begin(), days.end(), key.second) - days.begin());
        for (std::size_t b = 0; b < rows.size(); ++b) panel.set(u, t, b, rows[b].o, rows[b].h, rows[b].l, rows[b].c);
        panel.set_present(u, t, true);
    }
    result.panel = std::move(panel);
    return result;
}

LoadResult load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("load_csv: cannot open " + path);
    return load_csv(in);
}

std::vector<double> NormalizedPanel::return_series(std::size_t u) const {
    std::vector<double> out;
    for (std::size_t t = 0; t < days.size(); ++t) {
        if (!kept(u, t)) continue;
        for (std::size_t b = 0; b < bin_ids.size(); ++b) out.push_back(returns(u, t, b));
    }
    return out;
}

std::vector<double> NormalizedPanel::rs_series(std::size_t u) const {
    std::vector<double> out;
    for (std::size_t t = 0; t < days.size(); ++t) {
        if (!kept(u, t)) continue;
        for (std::size_t b = 0; b < bin_ids.size(); ++b) out.push_back(rs_vol(u, t, b));
    }
    return out;
}

namespace {

// Relative slack on the exclusion threshold so that a flat panel, whose |r|
// agree only to rounding, is not split by roundoff.
constexpr double kThresholdSlack = 1e-12;

double guarded(double divisor, NormalizationAudit& audit, const std::string& where) {
    if (divisor > 0.0 && std::isfinite(divisor)) return divisor;
    ++audit.fallbacks;
    if (audit.notes.size() < kMaxErrors) audit.notes.push_back("zero divisor replaced by 1 at " + where);
    return 1.0;
}

// Stages 2-5 in place. `present` marks the stock-days taking part.
void cross_sectional_stages(NormalizedPanel& p, const NormalizeConfig& config) {
    const std::size_t ns = p.stocks.size();
    const std::size_t nd = p.days.size();
    const std::size_t nb = p.bin_ids.size();
    auto& audit = p.audit;
    const auto here = [&](std::size_t u, std::size_t t) { return p.stocks[u] + "/" + p.days[t]; };

    // (2) leave-one-out pattern from the stage-1 returns of the other stocks.
    audit.pattern = Cube(ns, nd, nb, 1.0);
    std::vector<double> total(nb);
    for (std::size_t t = 0; t < nd; ++t) {
        std::fill(total.begin(), total.end(), 0.0);
        std::size_t count = 0;
        for (std::size_t u = 0; u < ns; ++u) {
            if (!p.present[u * nd + t]) continue;
            ++count;
            for (std::size_t b = 0; b < nb; ++b) total[b] += p.returns(u, t, b) * p.returns(u, t, b);
        }
        for (std::size_t u = 0; u < ns; ++u) {
            if (!p.present[u * nd + t]) continue;
            for (std::size_t b = 0; b < nb; ++b) {
                double v = 0.0;
                if (count > 1) {
                    const double own = p.returns(u, t, b) * p.returns(u, t, b);
                    double s = total[b] - own;
                    if (own > 0.5 * total[b]) {
                        // total - own cancels badly when stock u dominates the bin.
                        s = 0.0;
                        for (std::size_t w = 0; w < ns; ++w) {
                            if (w == u || !p.present[w * nd + t]) continue;
                            s += p.returns(w, t, b) * p.returns(w, t, b);
                        }
                    }
                    v = std::sqrt(std::max(0.0, s) / static_cast<double>(count - 1));
                }
                v = guarded(v, audit, "pattern " + here(u, t) + " bin " + std::to_string(p.bin_ids[b]));
                audit.pattern(u, t, b) = v;
            }
        }
    }
    for (std::size_t u = 0; u < ns; ++u) {
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            for (std::size_t b = 0; b < nb; ++b) {
                p.returns(u, t, b) /= audit.pattern(u, t, b);
                p.rs_vol(u, t, b) /= audit.pattern(u, t, b);
            }
        }
    }

    // (3) exclusion on |r| over each stock's full post-stage-2 sample.
    audit.abs_threshold.assign(ns, 0.0);
    p.excluded.assign(ns * nd, 0);
    std::size_t n_present = 0;
    std::size_t n_excluded = 0;
    for (std::size_t u = 0; u < ns; ++u) {
        double s1 = 0.0;
        double s2 = 0.0;
        double n = 0.0;
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            for (std::size_t b = 0; b < nb; ++b) {
                const double a = std::abs(p.returns(u, t, b));
                s1 += a;
                s2 += a * a;
                n += 1.0;
            }
        }
        if (n == 0.0) continue;
        const double mean = s1 / n;
        const double sd = std::sqrt(std::max(0.0, s2 / n - mean * mean));
        const double threshold = (mean + config.exclusion_sigmas * sd) * (1.0 + kThresholdSlack);
        audit.abs_threshold[u] = threshold;
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            ++n_present;
            for (std::size_t b = 0; b < nb; ++b) {
                if (std::abs(p.returns(u, t, b)) > threshold) {
                    p.excluded[u * nd + t] = 1;
                    ++n_excluded;
                    break;
                }
            }
        }
    }
    audit.exclusion_rate = n_present ? static_cast<double>(n_excluded) / static_cast<double>(n_present) : 0.0;

    // (4-5) per-stock moments over kept stock-days. The mean comes off first so
    // that the rescaled series has both <r> = 0 and <r^2> = 1.
    audit.ret_mean.assign(ns, 0.0);
    audit.ret_scale.assign(ns, 1.0);
    audit.rs_scale.assign(ns, 1.0);
    for (std::size_t u = 0; u < ns; ++u) {
        double sr = 0.0;
        double n = 0.0;
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.kept(u, t)) continue;
            for (std::size_t b = 0; b < nb; ++b) sr += p.returns(u, t, b);
            n += static_cast<double>(nb);
        }
        if (n == 0.0) {
            audit.notes.push_back("stock " + p.stocks[u] + " has no kept days");
            continue;
        }
        const double mean = sr / n;
        double sr2 = 0.0;
        double srs2 = 0.0;
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.kept(u, t)) continue;
            for (std::size_t b = 0; b < nb; ++b) {
                const double x = p.returns(u, t, b) - mean;
                sr2 += x * x;
                srs2 += p.rs_vol(u, t, b) * p.rs_vol(u, t, b);
            }
        }
        const double scale = guarded(std::sqrt(sr2 / n), audit, "return scale " + p.stocks[u]);
        const double rs_scale = guarded(std::sqrt(srs2 / n), audit, "rs scale " + p.stocks[u]);
        audit.ret_mean[u] = mean;
        audit.ret_scale[u] = scale;
        audit.rs_scale[u] = rs_scale;
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            for (std::size_t b = 0; b < nb; ++b) {
                p.returns(u, t, b) = (p.returns(u, t, b) - mean) / scale;
                p.rs_vol(u, t, b) /= rs_scale;
            }
        }
    }
}

double rs_log(double o, double h, double l, double c) {
    const double v = std::log(h / o) * std::log(h / c) + std::log(l / o) * std::log(l / c);
    return std::sqrt(std::max(0.0, v));
}

} // namespace

NormalizedPanel normalize(const OhlcPanel& panel, const NormalizeConfig& config) {
    if (panel.n_stocks() < 2) throw DomainError("normalize: need at least 2 stocks for the leave-one-out pattern");
    if (!(config.ewma_decay >= 0.0 && config.ewma_decay < 1.0)) {
        throw DomainError("normalize: ewma_decay must lie in [0, 1)");
    }
    if (!(config.exclusion_sigmas > 0.0)) throw DomainError("normalize: exclusion_sigmas must be positive");

    const std::size_t ns = panel.n_stocks();
    const std::size_t nd = panel.n_days();
    const std::size_t nb = panel.n_bins();
    NormalizedPanel p;
    p.stocks = panel.stocks();
    p.days = panel.days();
    p.bin_ids = panel.bin_ids();
    p.returns = Cube(ns, nd, nb);
    p.rs_vol = Cube(ns, nd, nb);
    p.present.assign(ns * nd, 0);
    p.excluded.assign(ns * nd, 0);
    p.audit.daily_vol.assign(ns * nd, 1.0);

    for (std::size_t u = 0; u < ns; ++u) {
        for (std::size_t t = 0; t < nd; ++t) {
            if (!panel.present(u, t)) continue;
            p.present[u * nd + t] = 1;
            for (std::size_t b = 0; b < nb; ++b) {
                const double o = panel.open(u, t, b);
                const double c = panel.close(u, t, b);
                p.returns(u, t, b) = std::log(c / o);
                p.rs_vol(u, t, b) = rs_log(o, panel.high(u, t, b), panel.low(u, t, b), c);
            }
        }
    }

    // (1) EWMA of past realized open-to-close variance. The stock's first day
    // uses 1; the recursion is seeded by that first realized value.
    for (std::size_t u = 0; u < ns; ++u) {
        bool seen = false;
        double ewma = 0.0;
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            double sigma = 1.0;
            if (seen) {
                sigma = guarded(std::sqrt(ewma), p.audit, "daily vol " + p.stocks[u] + "/" + p.days[t]);
            }
            p.audit.daily_vol[u * nd + t] = sigma;
            double rv2 = 0.0;
            for (std::size_t b = 0; b < nb; ++b) rv2 += p.returns(u, t, b) * p.returns(u, t, b);
            ewma = seen ? config.ewma_decay * ewma + (1.0 - config.ewma_decay) * rv2 : rv2;
            seen = true;
            for (std::size_t b = 0; b < nb; ++b) {
                p.returns(u, t, b) /= sigma;
                p.rs_vol(u, t, b) /= sigma;
            }
        }
    }

    cross_sectional_stages(p, config);
    return p;
}

NormalizedPanel renormalize(const NormalizedPanel& panel, const NormalizeConfig& config) {
    if (panel.stocks.size() < 2) throw DomainError("renormalize: need at least 2 stocks");
    NormalizedPanel p;
    p.stocks = panel.stocks;
    p.days = panel.days;
    p.bin_ids = panel.bin_ids;
    p.returns = panel.returns;
    p.rs_vol = panel.rs_vol;
    const std::size_t nd = p.days.size();
    p.present.assign(p.stocks.size() * nd, 0);
    for (std::size_t u = 0; u < p.stocks.size(); ++u) {
        for (std::size_t t = 0; t < nd; ++t) p.present[u * nd + t] = panel.kept(u, t) ? 1 : 0;
    }
    p.audit.daily_vol.assign(p.stocks.size() * nd, 1.0);
    cross_sectional_stages(p, config);
    return p;
}

Cube reconstruct_returns(const NormalizedPanel& p) {
    const std::size_t ns = p.stocks.size();
    const std::size_t nd = p.days.size();
    const std::size_t nb = p.bin_ids.size();
    Cube raw(ns, nd, nb);
    for (std::size_t u = 0; u < ns; ++u) {
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.kept(u, t)) continue;
            const double sigma = p.audit.daily_vol[u * nd + t];
            for (std::size_t b = 0; b < nb; ++b) {
                const double stage2 = p.returns(u, t, b) * p.audit.ret_scale[u] + p.audit.ret_mean[u];
                raw(u, t, b) = stage2 * p.audit.pattern(u, t, b) * sigma;
            }
        }
    }
    return raw;
}

void write_normalized_csv(std::ostream& os, const NormalizedPanel& p) {
    using detail::to_text;
    const std::size_t nd = p.days.size();
    os << "stock_id,date,bin,ret_norm,rs_norm,excluded\n";
    for (std::size_t u = 0; u < p.stocks.size(); ++u) {
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            const int flag = p.excluded[u * nd + t] ? 1 : 0;
            for (std::size_t b = 0; b < p.bin_ids.size(); ++b) {
                os << p.stocks[u] << ',' << p.days[t] << ',' << p.bin_ids[b] << ',' << to_text(p.returns(u, t, b))
                   << ',' << to_text(p.rs_vol(u, t, b)) << ',' << flag << '\n';
            }
        }
    }
}

void write_audit(std::ostream& os, const NormalizedPanel& p) {
    using detail::to_text;
    const auto& a = p.audit;
    const std::size_t nd = p.days.size();
    os << "n_stocks=" << p.stocks.size() << "\n";
    os << "n_days=" << nd << "\n";
    os << "n_bins=" << p.bin_ids.size() << "\n";
    os << "exclusion_rate=" << to_text(a.exclusion_rate) << "\n";
    os << "fallbacks=" << a.fallbacks << "\n";
    for (std::size_t u = 0; u < p.stocks.size(); ++u) {
        const std::string& s = p.stocks[u];
        os << "stock." << s << ".ret_mean=" << to_text(a.ret_mean[u]) << "\n";
        os << "stock." << s << ".ret_scale=" << to_text(a.ret_scale[u]) << "\n";
        os << "stock." << s << ".rs_scale=" << to_text(a.rs_scale[u]) << "\n";
        os << "stock." << s << ".abs_threshold=" << to_text(a.abs_threshold[u]) << "\n";
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            os << "daily_vol." << s << "." << p.days[t] << "=" << to_text(a.daily_vol[u * nd + t]) << "\n";
            if (p.excluded[u * nd + t]) os << "excluded." << s << "." << p.days[t] << "=1\n";
        }
    }
    for (std::size_t u = 0; u < p.stocks.size(); ++u) {
        for (std::size_t t = 0; t < nd; ++t) {
            if (!p.present[u * nd + t]) continue;
            for (std::size_t b = 0; b < p.bin_ids.size(); ++b) {
                os << "pattern." << p.stocks[u] << "." << p.days[t] << "." << p.bin_ids[b] << "="
                   << to_text(a.pattern(u, t, b)) << "\n";
            }
        }
    }
    for (const auto& note : a.notes) os << "note=" << note << "\n";
}

} // namespace qhawkes
