#pragma once

// CSV ingestion and export, calendar alignment with forward-carried
// disclosures, and the synthetic dataset generator.
//
// Schemas (headers are matched exactly):
//   prices.csv    date,ticker,adjusted_close
//   emissions.csv ticker,fiscal_year,scope,tco2e,confidence
//   revenues.csv  ticker,quarter_end,revenue_usd
//   sectors.csv   ticker,sector

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include "eapo/backtest.hpp"
#include "eapo/estimation.hpp"
#include "eapo/types.hpp"

namespace eapo {

// ---------------------------------------------------------------------------
// Formatting and parsing helpers
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form of a double ("nan" for NaN).
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

} // namespace detail

using Date = std::chrono::sys_days;

/// Parses a strict ISO-8601 calendar date YYYY-MM-DD.
inline bool parse_date(const std::string& s, Date& out) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0, m = 0, d = 0;
    if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), m) ||
        !detail::parse_int(s.substr(8, 2), d))
        return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return false;
    out = Date{ymd};
    return true;
}

inline std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

inline Date fiscal_year_end(int fiscal_year) {
    return Date{std::chrono::year{fiscal_year} / std::chrono::December / std::chrono::day{31}};
}

// ---------------------------------------------------------------------------
// Raw records
// ---------------------------------------------------------------------------

struct PriceRecord {
    std::string date;
    std::string ticker;
    double adjusted_close = 0.0;
    bool operator==(const PriceRecord&) const = default;
};

struct EmissionRecord {
    std::string ticker;
    int fiscal_year = 0;
    int scope = 1;
    double tco2e = 0.0;
    std::string confidence; // optional grade, may be empty
    bool operator==(const EmissionRecord&) const = default;
};

struct RevenueRecord {
    std::string ticker;
    std::string quarter_end;
    double revenue_usd = 0.0;
    bool operator==(const RevenueRecord&) const = default;
};

struct SectorRecord {
    std::string ticker;
    std::string sector;
    bool operator==(const SectorRecord&) const = default;
};

struct RawRecords {
    std::vector<PriceRecord> prices;
    std::vector<EmissionRecord> emissions;
    std::vector<RevenueRecord> revenues;
    std::vector<SectorRecord> sectors;
    bool operator==(const RawRecords&) const = default;
};

namespace detail {

using Row = std::vector<std::string>;

/// Reads a CSV file with an exact header; returns rows with their 1-based line numbers.
inline std::vector<std::pair<int, Row>> read_csv(const std::filesystem::path& path, const Row& header) {
    std::ifstream in(path, std::ios::binary);
    const std::string file = path.filename().string();
    if (!in) throw DataError("cannot open file", path.string(), 0);
    using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
    std::vector<std::pair<int, Row>> rows;
    std::string line;
    int line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row fields;
        try {
            Tok tok(line);
            for (const auto& f : tok) fields.push_back(f);
        } catch (const boost::escaped_list_error& e) {
            throw DataError(std::string("malformed CSV line: ") + e.what(), file, line_no);
        }
        if (!seen_header) {
            if (fields != header) {
                std::string expected;
                for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
                throw DataError("header must be exactly '" + expected + "'", file, line_no);
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size())
            throw DataError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                            file, line_no);
        rows.emplace_back(line_no, std::move(fields));
    }
    if (!seen_header) throw DataError("missing header", file, 1);
    return rows;
}

inline double field_double(const std::string& s, const std::string& what, const std::string& file, int line) {
    double v = 0.0;
    if (!parse_double(s, v) || !std::isfinite(v)) throw DataError("invalid " + what + " '" + s + "'", file, line);
    return v;
}

inline void require_ticker(const std::string& t, const std::string& file, int line) {
    if (t.empty()) throw DataError("empty ticker", file, line);
}

inline void require_date(const std::string& s, const std::string& what, const std::string& file, int line) {
    Date d;
    if (!parse_date(s, d)) throw DataError("invalid " + what + " '" + s + "' (expected YYYY-MM-DD)", file, line);
}

} // namespace detail

inline RawRecords ingest(const std::filesystem::path& dir) {
    RawRecords raw;
    {
        const std::string file = "prices.csv";
        std::set<std::pair<std::string, std::string>> seen;
        for (auto& [line, f] : detail::read_csv(dir / file, {"date", "ticker", "adjusted_close"})) {
            detail::require_date(f[0], "date", file, line);
            detail::require_ticker(f[1], file, line);
            const double px = detail::field_double(f[2], "adjusted_close", file, line);
            if (!(px > 0.0)) throw DataError("adjusted_close must be > 0", file, line);
            if (!seen.emplace(f[0], f[1]).second)
                throw DataError("duplicate (date, ticker) = (" + f[0] + ", " + f[1] + ")", file, line);
            raw.prices.push_back({f[0], f[1], px});
        }
    }
    {
        const std::string file = "emissions.csv";
        std::set<std::tuple<std::string, int, int>> seen;
        for (auto& [line, f] : detail::read_csv(dir / file, {"ticker", "fiscal_year", "scope", "tco2e", "confidence"})) {
            detail::require_ticker(f[0], file, line);
            int fy = 0, scope = 0;
            if (!detail::parse_int(f[1], fy)) throw DataError("invalid fiscal_year '" + f[1] + "'", file, line);
            if (!detail::parse_int(f[2], scope) || scope < 1 || scope > 3)
                throw DataError("scope must be 1, 2 or 3, got '" + f[2] + "'", file, line);
            const double c = detail::field_double(f[3], "tco2e", file, line);
            if (c < 0.0) throw DataError("tco2e must be >= 0", file, line);
            if (!seen.emplace(f[0], fy, scope).second)
                throw DataError("duplicate (ticker, fiscal_year, scope) = (" + f[0] + ", " + f[1] + ", " + f[2] + ")",
                                file, line);
            raw.emissions.push_back({f[0], fy, scope, c, f[4]});
        }
    }
    {
        const std::string file = "revenues.csv";
        std::set<std::pair<std::string, std::string>> seen;
        for (auto& [line, f] : detail::read_csv(dir / file, {"ticker", "quarter_end", "revenue_usd"})) {
            detail::require_ticker(f[0], file, line);
            detail::require_date(f[1], "quarter_end", file, line);
            const double r = detail::field_double(f[2], "revenue_usd", file, line);
            if (!(r > 0.0)) throw DataError("revenue_usd must be > 0", file, line);
            if (!seen.emplace(f[0], f[1]).second)
                throw DataError("duplicate (ticker, quarter_end) = (" + f[0] + ", " + f[1] + ")", file, line);
            raw.revenues.push_back({f[0], f[1], r});
        }
    }
    {
        const std::string file = "sectors.csv";
        std::set<std::string> seen;
        for (auto& [line, f] : detail::read_csv(dir / file, {"ticker", "sector"})) {
            detail::require_ticker(f[0], file, line);
            if (f[1].empty()) throw DataError("empty sector", file, line);
            if (!seen.insert(f[0]).second) throw DataError("duplicate ticker '" + f[0] + "'", file, line);
            raw.sectors.push_back({f[0], f[1]});
        }
    }
    return raw;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\\\"";
        else out += c;
    }
    return out + "\"";
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file", path.string(), 0);
    return out;
}

} // namespace detail

/// Writes the four CSV files in record order.
inline void export_raw(const RawRecords& raw, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = detail::open_out(dir / "prices.csv");
        out << "date,ticker,adjusted_close\n";
        for (const auto& r : raw.prices)
            out << r.date << ',' << detail::csv_field(r.ticker) << ',' << format_double(r.adjusted_close) << '\n';
    }
    {
        auto out = detail::open_out(dir / "emissions.csv");
        out << "ticker,fiscal_year,scope,tco2e,confidence\n";
        for (const auto& r : raw.emissions)
            out << detail::csv_field(r.ticker) << ',' << r.fiscal_year << ',' << r.scope << ',' << format_double(r.tco2e)
                << ',' << detail::csv_field(r.confidence) << '\n';
    }
    {
        auto out = detail::open_out(dir / "revenues.csv");
        out << "ticker,quarter_end,revenue_usd\n";
        for (const auto& r : raw.revenues)
            out << detail::csv_field(r.ticker) << ',' << r.quarter_end << ',' << format_double(r.revenue_usd) << '\n';
    }
    {
        auto out = detail::open_out(dir / "sectors.csv");
        out << "ticker,sector\n";
        for (const auto& r : raw.sectors) out << detail::csv_field(r.ticker) << ',' << detail::csv_field(r.sector) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

enum class Provenance : int { observed = 0, observed_annualized = 1, imputed = 2, excluded = 3 };

struct AlignOptions {
    Scope scope = Scope::one;
    int disclosure_lag_days = 0; // disclosure usable strictly after fiscal year end + lag
    bool strict = false;         // exclude instead of imputing
    int impute_k = 8;
    std::uint64_t seed = 0;
};

struct AlignedDataset {
    std::vector<std::string> price_dates;
    std::vector<std::string> tickers;
    Matrix prices;                         // D x n
    std::vector<std::string> return_dates; // D - 1, date on which each return row is realized
    ReturnMatrix returns;                  // (D - 1) x n gross returns
    std::vector<Index> rebalance_rows;     // return rows on the last trading day of each month
    std::vector<std::string> rebalance_dates;
    Matrix intensity;          // R x n, observed or imputed; NaN when excluded
    Matrix observed_intensity; // R x n, NaN when not fully observed
    Matrix scope1_emissions;   // R x n forward-carried scope-1 emissions, NaN when undisclosed
    Eigen::MatrixXi provenance;
    std::vector<std::string> sectors;
    Scope scope = Scope::one;
    std::vector<std::string> warnings;

    BacktestInput backtest_input() const {
        BacktestInput in;
        in.dates = return_dates;
        in.tickers = tickers;
        in.returns = returns;
        in.rebalance_rows = rebalance_rows;
        in.intensity = intensity;
        in.emissions = scope1_emissions;
        in.sectors = sectors;
        return in;
    }
};

/// Return rows whose date is the last trading day of its calendar month.
inline std::vector<Index> month_end_rows(const std::vector<std::string>& dates) {
    std::vector<Index> rows;
    for (std::size_t t = 0; t < dates.size(); ++t) {
        const bool last = t + 1 == dates.size() || dates[t + 1].compare(0, 7, dates[t], 0, 7) != 0;
        if (last) rows.push_back(static_cast<Index>(t));
    }
    return rows;
}

namespace detail {

struct Ttm {
    double revenue = 0.0;
    bool annualized = false;
    bool found = false;
};

/// Sum of the 4 most recent quarters ending on or before `ref`; fewer quarters are annualized.
inline Ttm trailing_revenue(const std::vector<std::pair<Date, double>>& quarters, Date ref) {
    Ttm out;
    double sum = 0.0;
    int count = 0;
    for (auto it = quarters.rbegin(); it != quarters.rend() && count < 4; ++it) {
        if (it->first > ref) continue;
        sum += it->second;
        ++count;
    }
    if (count == 0) return out;
    out.found = true;
    out.annualized = count < 4;
    out.revenue = count < 4 ? sum * 4.0 / count : sum;
    return out;
}

} // namespace detail

/// Builds the return panel, month-end rebalance calendar and forward-carried
/// intensity panel. At rebalance date t asset i uses the latest fiscal year Y
/// with year-end + lag strictly before t; its intensity is C / (TTM revenue / 1e6)
/// with TTM revenue taken at the year-end. Missing intensities are imputed
/// (average of K draws) or, in strict mode, excluded.
inline AlignedDataset align_forward_carry(const RawRecords& raw, const AlignOptions& opt) {
    if (opt.impute_k < 1) throw ConfigError("align: imputation K must be >= 1");
    if (opt.disclosure_lag_days < 0) throw ConfigError("align: disclosure lag must be >= 0");
    AlignedDataset ds;
    ds.scope = opt.scope;

    // Price panel over the union calendar; partially covered tickers are dropped.
    std::set<std::string> date_set, ticker_set;
    for (const auto& p : raw.prices) {
        date_set.insert(p.date);
        ticker_set.insert(p.ticker);
    }
    ds.price_dates.assign(date_set.begin(), date_set.end());
    if (ds.price_dates.size() < 2) throw InsufficientData("align: need prices on at least 2 dates");
    std::map<std::string, Index> date_idx;
    for (std::size_t i = 0; i < ds.price_dates.size(); ++i) date_idx[ds.price_dates[i]] = static_cast<Index>(i);
    std::map<std::string, std::vector<double>> series;
    for (const auto& t : ticker_set) series[t].assign(ds.price_dates.size(), nan_value);
    for (const auto& p : raw.prices) series[p.ticker][static_cast<std::size_t>(date_idx[p.date])] = p.adjusted_close;
    for (const auto& [t, s] : series) {
        if (std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) ds.tickers.push_back(t);
        else ds.warnings.push_back("dropped " + t + ": partial price coverage");
    }
    if (ds.tickers.empty()) throw InsufficientData("align: no ticker has full price coverage");
    const auto n = static_cast<Index>(ds.tickers.size());
    const auto D = static_cast<Index>(ds.price_dates.size());
    ds.prices.resize(D, n);
    for (Index i = 0; i < n; ++i) {
        const auto& s = series[ds.tickers[static_cast<std::size_t>(i)]];
        for (Index d = 0; d < D; ++d) ds.prices(d, i) = s[static_cast<std::size_t>(d)];
    }
    ds.returns = ds.prices.bottomRows(D - 1).cwiseQuotient(ds.prices.topRows(D - 1));
    ds.return_dates.assign(ds.price_dates.begin() + 1, ds.price_dates.end());
    ds.rebalance_rows = month_end_rows(ds.return_dates);
    for (Index r : ds.rebalance_rows) ds.rebalance_dates.push_back(ds.return_dates[static_cast<std::size_t>(r)]);

    std::map<std::string, std::string> sector_of;
    for (const auto& s : raw.sectors) sector_of[s.ticker] = s.sector;
    for (const auto& t : ds.tickers) {
        auto it = sector_of.find(t);
        if (it == sector_of.end()) {
            ds.warnings.push_back("no sector for " + t + ": assigned UNKNOWN");
            sector_of[t] = "UNKNOWN";
        }
        ds.sectors.push_back(sector_of[t]);
    }

    std::map<std::string, std::vector<std::pair<Date, double>>> quarters;
    for (const auto& r : raw.revenues) {
        Date d;
        parse_date(r.quarter_end, d);
        quarters[r.ticker].emplace_back(d, r.revenue_usd);
    }
    for (auto& [t, q] : quarters) std::sort(q.begin(), q.end());
    // (ticker, scope) -> fiscal year -> tCO2e
    std::map<std::pair<std::string, int>, std::map<int, double>> disclosures;
    for (const auto& e : raw.emissions) disclosures[{e.ticker, e.scope}][e.fiscal_year] = e.tco2e;

    const auto R = static_cast<Index>(ds.rebalance_rows.size());
    ds.intensity = Matrix::Constant(R, n, nan_value);
    ds.observed_intensity = Matrix::Constant(R, n, nan_value);
    ds.scope1_emissions = Matrix::Constant(R, n, nan_value);
    ds.provenance = Eigen::MatrixXi::Constant(R, n, static_cast<int>(Provenance::excluded));
    const int scope = static_cast<int>(opt.scope);
    const std::vector<std::pair<Date, double>> no_quarters;

    for (Index k = 0; k < R; ++k) {
        Date t;
        parse_date(ds.rebalance_dates[static_cast<std::size_t>(k)], t);
        const Date cutoff = t - std::chrono::days{opt.disclosure_lag_days};
        // latest fiscal year whose end is strictly before the cutoff
        int ref_year = static_cast<int>(std::chrono::year_month_day{cutoff}.year());
        while (fiscal_year_end(ref_year) >= cutoff) --ref_year;

        auto latest = [&](const std::string& ticker, int sc) -> std::optional<std::pair<int, double>> {
            auto it = disclosures.find({ticker, sc});
            if (it == disclosures.end()) return std::nullopt;
            auto yr = it->second.upper_bound(ref_year);
            if (yr == it->second.begin()) return std::nullopt;
            --yr;
            return std::make_pair(yr->first, yr->second);
        };

        std::vector<FirmRecord> records(static_cast<std::size_t>(n));
        std::vector<bool> annualized(static_cast<std::size_t>(n), false);
        bool any_missing = false;
        for (Index i = 0; i < n; ++i) {
            const std::string& tick = ds.tickers[static_cast<std::size_t>(i)];
            auto qit = quarters.find(tick);
            const auto& q = qit == quarters.end() ? no_quarters : qit->second;
            FirmRecord& rec = records[static_cast<std::size_t>(i)];
            rec.ticker = tick;
            if (auto s1 = latest(tick, 1)) ds.scope1_emissions(k, i) = s1->second;
            const auto disc = latest(tick, scope);
            const int year = disc ? disc->first : ref_year;
            const detail::Ttm ttm = detail::trailing_revenue(q, fiscal_year_end(year));
            if (disc) rec.emissions = disc->second;
            if (ttm.found) rec.revenue_usd = ttm.revenue;
            annualized[static_cast<std::size_t>(i)] = ttm.annualized;
            if (rec.emissions && rec.revenue_usd) {
                const double lam = revenue_intensity(*rec.emissions, *rec.revenue_usd);
                ds.observed_intensity(k, i) = lam;
                ds.intensity(k, i) = lam;
                ds.provenance(k, i) = static_cast<int>(ttm.annualized ? Provenance::observed_annualized
                                                                      : Provenance::observed);
            } else {
                any_missing = true;
            }
        }
        if (!any_missing || opt.strict) continue;
        try {
            const ImputationDraws draws =
                impute_emissions(records, sector_of, opt.impute_k, opt.seed + 1009ULL * static_cast<std::uint64_t>(k));
            const Vector avg = average_imputations(draws);
            for (Index i = 0; i < n; ++i) {
                if (std::isfinite(ds.intensity(k, i))) continue; // observed values stay bit-exact
                ds.intensity(k, i) = avg[i];
                ds.provenance(k, i) = static_cast<int>(Provenance::imputed);
            }
        } catch (const InsufficientData& e) {
            ds.warnings.push_back("rebalance " + ds.rebalance_dates[static_cast<std::size_t>(k)] +
                                  ": imputation skipped (" + e.what() + ")");
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SynthSpec {
    int n_assets = 100;
    int n_days = 2500; // price dates (business days from 2010-01-04)
    int n_sectors = 10;
    double intensity_return_corr = 0.0;
    double missing_rate = 0.1;
    std::uint64_t seed = 42;

    void validate() const {
        if (n_assets < 1) throw ConfigError("synth: n_assets must be >= 1");
        if (n_days < 2) throw ConfigError("synth: n_days must be >= 2");
        if (n_sectors < 1) throw ConfigError("synth: n_sectors must be >= 1");
        if (!(intensity_return_corr >= -1.0 && intensity_return_corr <= 1.0))
            throw ConfigError("synth: intensity_return_corr must lie in [-1, 1]");
        if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigError("synth: missing_rate must lie in [0, 1)");
    }
};

/// Geometric random-walk prices with market and sector factors; log-normal,
/// sector-clustered intensities; quarterly revenues; annual disclosures for
/// scopes 1-3 with a fraction `missing_rate` withheld. Each asset's realized
/// mean daily return equals its drift, and the drifts are constructed to have
/// sample correlation `intensity_return_corr` with the base scope-1 intensity.
inline RawRecords synth_generate(const SynthSpec& spec) {
    spec.validate();
    using namespace std::chrono;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = spec.n_assets;
    const int S = spec.n_sectors;

    std::vector<std::string> tickers, sectors;
    const int width = std::max(3, static_cast<int>(std::to_string(n).size()));
    for (int i = 0; i < n; ++i) {
        std::string num = std::to_string(i + 1);
        tickers.push_back("A" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
        std::string sn = std::to_string(i % S + 1);
        sectors.push_back("S" + std::string(sn.size() < 2 ? 2 - sn.size() : 0, '0') + sn);
    }

    // Calendar
    std::vector<Date> dates;
    Date d = Date{year{2010} / January / day{4}};
    while (static_cast<int>(dates.size()) < spec.n_days) {
        const weekday wd{d};
        if (wd != Saturday && wd != Sunday) dates.push_back(d);
        d += days{1};
    }
    const int first_year = static_cast<int>(year_month_day{dates.front()}.year());
    const int last_year = static_cast<int>(year_month_day{dates.back()}.year());

    // Intensities: sector effect + firm effect on the log scale.
    std::vector<double> sector_effect(static_cast<std::size_t>(S));
    for (auto& e : sector_effect) e = 2.0 * gauss(rng);
    Vector base1(n), base2(n), base3(n);
    for (int i = 0; i < n; ++i) {
        const double log_l = std::log(40.0) + sector_effect[static_cast<std::size_t>(i % S)] + 1.0 * gauss(rng);
        base1[i] = std::exp(log_l);
        base2[i] = base1[i] * std::exp(-0.5 + 0.5 * gauss(rng));
        base3[i] = base1[i] * std::exp(1.5 + 0.7 * gauss(rng));
    }

    // Quarterly revenues from two years before the sample to its last quarter.
    RawRecords raw;
    std::vector<std::vector<std::pair<Date, double>>> quarters(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double annual = std::exp(std::log(5e9) + 1.0 * gauss(rng));
        int q = 0;
        for (int y = first_year - 2; y <= last_year; ++y) {
            for (unsigned m : {3u, 6u, 9u, 12u}) {
                const Date qe = Date{year{y} / month{m} / last};
                ++q;
                if (qe > dates.back()) continue;
                const double rev = annual / 4.0 * std::exp(0.04 * q / 4.0 + 0.05 * gauss(rng));
                quarters[static_cast<std::size_t>(i)].emplace_back(qe, rev);
            }
        }
    }
    for (int i = 0; i < n; ++i)
        for (const auto& [qe, rev] : quarters[static_cast<std::size_t>(i)])
            raw.revenues.push_back({tickers[static_cast<std::size_t>(i)], format_date(qe), rev});

    // Annual disclosures for fiscal years ending before the last date.
    const char* grades[] = {"A", "B", "C", ""};
    for (int i = 0; i < n; ++i) {
        for (int y = first_year - 1; y < last_year; ++y) {
            const detail::Ttm ttm = detail::trailing_revenue(quarters[static_cast<std::size_t>(i)], fiscal_year_end(y));
            for (int sc = 1; sc <= 3; ++sc) {
                const double base = sc == 1 ? base1[i] : sc == 2 ? base2[i] : base3[i];
                const double lam = base * std::exp(0.1 * gauss(rng));
                const bool missing = unif(rng) < spec.missing_rate;
                const int grade = static_cast<int>(unif(rng) * 4.0) % 4;
                if (missing || !ttm.found) continue;
                raw.emissions.push_back({tickers[static_cast<std::size_t>(i)], y, sc, lam * ttm.revenue / 1e6, grades[grade]});
            }
        }
    }

    // Drifts with exact sample correlation to the base scope-1 intensity.
    const Vector ones = Vector::Ones(n);
    auto standardize = [&](Vector v) {
        v.array() -= v.mean();
        const double sd = v.norm();
        if (sd > 0.0) v /= sd;
        return v;
    };
    const Vector z = standardize(base1);
    Vector u(n);
    for (int i = 0; i < n; ++i) u[i] = gauss(rng);
    u = standardize(u);
    u = standardize(Vector(u - u.dot(z) * z));
    const double rho = spec.intensity_return_corr;
    const double root_n = std::sqrt(static_cast<double>(n));
    Vector mu = Vector::Constant(n, 0.0004);
    if (n >= 3) mu += 0.0002 * root_n * (rho * z + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * u);

    // Factor returns with demeaned noise so realized means equal mu.
    const int T = spec.n_days - 1;
    Vector beta(n), idio(n);
    for (int i = 0; i < n; ++i) {
        beta[i] = 0.8 + 0.4 * unif(rng);
        idio[i] = 0.008 + 0.008 * unif(rng);
    }
    Matrix noise(T, n);
    for (int t = 0; t < T; ++t) {
        const double market = 0.008 * gauss(rng);
        std::vector<double> sector_f(static_cast<std::size_t>(S));
        for (auto& f : sector_f) f = 0.006 * gauss(rng);
        for (int i = 0; i < n; ++i)
            noise(t, i) = beta[i] * market + sector_f[static_cast<std::size_t>(i % S)] + idio[i] * gauss(rng);
    }
    if (T >= 1) noise.rowwise() -= noise.colwise().mean();

    Matrix px(spec.n_days, n);
    for (int i = 0; i < n; ++i) px(0, i) = 50.0 + 100.0 * unif(rng);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) px(t + 1, i) = px(t, i) * (1.0 + mu[i] + noise(t, i));

    raw.prices.reserve(static_cast<std::size_t>(spec.n_days) * static_cast<std::size_t>(n));
    for (int t = 0; t < spec.n_days; ++t) {
        const std::string ds = format_date(dates[static_cast<std::size_t>(t)]);
        for (int i = 0; i < n; ++i) raw.prices.push_back({ds, tickers[static_cast<std::size_t>(i)], px(t, i)});
    }
    for (int i = 0; i < n; ++i) raw.sectors.push_back({tickers[static_cast<std::size_t>(i)], sectors[static_cast<std::size_t>(i)]});
    return raw;
}

// ---------------------------------------------------------------------------
// Report export
// ---------------------------------------------------------------------------

/// Long-format weight panel: date,ticker,weight.
inline void write_weights_csv(const BacktestReport& rep, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "date,ticker,weight\n";
    for (Index k = 0; k < rep.weights.rows(); ++k)
        for (Index i = 0; i < rep.weights.cols(); ++i)
            out << rep.rebalance_dates[static_cast<std::size_t>(k)] << ',' << detail::csv_field(rep.tickers[static_cast<std::size_t>(i)])
                << ',' << format_double(rep.weights(k, i)) << '\n';
}

} // namespace eapo
