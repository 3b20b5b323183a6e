#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridfreq/stream.hpp"
#include "gridfreq/time.hpp"
#include "gridfreq/zcfreq.hpp"

namespace gridfreq::dataio {

class CsvError : public std::runtime_error {
  public:
    CsvError(std::size_t row, const std::string& what)
        : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const { return row_; }

  private:
    std::size_t row_;
};

struct LocationColumn {
    std::string name;
    int f_nom = 50;                      // 50 or 60, encoded as f50_/f60_ in the header
    std::vector<double> deviation_mhz;   // f - f_nom in millihertz
    std::vector<std::uint8_t> qi;
};

/// Regular one-second frequency-deviation series for one or more locations.
struct CampaignSeries {
    std::int64_t start_sec = 0;
    std::vector<LocationColumn> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns[0].deviation_mhz.size(); }
    std::int64_t end_sec() const { return start_sec + static_cast<std::int64_t>(rows()); }

    void validate() const {
        if (columns.empty()) throw std::invalid_argument("CampaignSeries: no columns");
        const std::size_t n = rows();
        for (const auto& c : columns) {
            if (c.deviation_mhz.size() != n || c.qi.size() != n)
                throw std::invalid_argument("CampaignSeries: ragged columns");
            if (c.f_nom != 50 && c.f_nom != 60)
                throw std::invalid_argument("CampaignSeries: f_nom must be 50 or 60");
            for (std::uint8_t q : c.qi)
                if (q > 2) throw std::invalid_argument("CampaignSeries: qi outside 0..2");
        }
    }
};

inline double restore_absolute_frequency(double deviation_mhz, double f_nom) {
    return deviation_mhz * 1e-3 + f_nom;
}

// ---------------------------------------------------------------------------
// Table-2 frequency CSV
// ---------------------------------------------------------------------------

inline void write_frequency_csv(const CampaignSeries& series, std::ostream& out) {
    series.validate();
    out << "Time";
    for (const auto& c : series.columns)
        out << ";f" << c.f_nom << "_" << c.name << ";QI_" << c.name;
    out << "\n";
    char num[32];
    const std::size_t n = series.rows();
    for (std::size_t i = 0; i < n; ++i) {
        out << format_utc(series.start_sec + static_cast<std::int64_t>(i));
        for (const auto& c : series.columns) {
            std::snprintf(num, sizeof(num), "%.3f", c.deviation_mhz[i]);
            out << ';' << num << ';' << static_cast<int>(c.qi[i]);
        }
        out << "\n";
    }
}

inline void write_frequency_csv(const CampaignSeries& series, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    write_frequency_csv(series, f);
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(delim, pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
}

inline bool parse_double_strict(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto res = std::from_chars(b, e, v);
    return res.ec == std::errc() && res.ptr == e;
}

inline bool parse_header_column(const std::string& head, std::string& name, int& f_nom) {
    if (head.rfind("f50_", 0) == 0) {
        f_nom = 50;
        name = head.substr(4);
        return !name.empty();
    }
    if (head.rfind("f60_", 0) == 0) {
        f_nom = 60;
        name = head.substr(4);
        return !name.empty();
    }
    return false;
}

}  // namespace detail

inline CampaignSeries read_frequency_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CsvError(1, "empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto heads = detail::split(line, ';');
    if (heads.size() < 3 || heads[0] != "Time" || heads.size() % 2 == 0)
        throw CsvError(1, "malformed header: expected Time;f50_LOC;QI_LOC[;...]");

    CampaignSeries series;
    for (std::size_t i = 1; i + 1 < heads.size(); i += 2) {
        LocationColumn col;
        if (!detail::parse_header_column(heads[i], col.name, col.f_nom))
            throw CsvError(1, "bad frequency column header '" + heads[i] + "'");
        if (heads[i + 1] != "QI_" + col.name)
            throw CsvError(1, "QI header '" + heads[i + 1] + "' does not match '" + heads[i] + "'");
        series.columns.push_back(std::move(col));
    }

    std::size_t row = 1;
    std::optional<std::int64_t> prev_sec;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split(line, ';');
        if (fields.size() != 1 + 2 * series.columns.size())
            throw CsvError(row, "expected " + std::to_string(1 + 2 * series.columns.size()) +
                                    " fields, got " + std::to_string(fields.size()));
        std::int64_t sec;
        if (!parse_utc(fields[0], sec)) throw CsvError(row, "bad timestamp '" + fields[0] + "'");
        if (prev_sec) {
            if (sec == *prev_sec) throw CsvError(row, "duplicate timestamp '" + fields[0] + "'");
            if (sec < *prev_sec) throw CsvError(row, "non-monotonic timestamp '" + fields[0] + "'");
            if (sec != *prev_sec + 1)
                throw CsvError(row, "timestamp gap before '" + fields[0] + "'");
        } else {
            series.start_sec = sec;
        }
        prev_sec = sec;
        for (std::size_t c = 0; c < series.columns.size(); ++c) {
            double v;
            if (!detail::parse_double_strict(fields[1 + 2 * c], v))
                throw CsvError(row, "malformed number '" + fields[1 + 2 * c] + "'");
            int qi;
            const std::string& qs = fields[2 + 2 * c];
            if (qs.size() != 1 || qs[0] < '0' || qs[0] > '9')
                throw CsvError(row, "malformed quality indicator '" + qs + "'");
            qi = qs[0] - '0';
            if (qi > 2) throw CsvError(row, "quality indicator " + qs + " outside 0..2");
            series.columns[c].deviation_mhz.push_back(v);
            series.columns[c].qi.push_back(static_cast<std::uint8_t>(qi));
        }
    }
    if (series.rows() == 0 && series.columns.empty()) throw CsvError(1, "no columns");
    return series;
}

inline CampaignSeries read_frequency_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    return read_frequency_csv(f);
}

// ---------------------------------------------------------------------------
// Gap interpolation, joins, statistics
// ---------------------------------------------------------------------------

/// Linear interpolation of every qi!=0 entry between the nearest valid
/// neighbours; leading/trailing gaps extend the nearest valid value. All
/// replaced entries get qi=2; valid entries are never altered.
inline CampaignSeries fill_gaps_linear(CampaignSeries series) {
    const std::size_t n = series.rows();
    for (auto& col : series.columns) {
        std::vector<std::size_t> valid;
        for (std::size_t i = 0; i < n; ++i)
            if (col.qi[i] == zcfreq::kQiOk) valid.push_back(i);
        if (valid.empty())
            throw std::invalid_argument("fill_gaps_linear: column '" + col.name +
                                        "' has no valid points");
        for (std::size_t i = 0; i < n; ++i) {
            if (col.qi[i] == zcfreq::kQiOk) continue;
            auto it = std::lower_bound(valid.begin(), valid.end(), i);
            double value;
            if (it == valid.begin()) {
                value = col.deviation_mhz[valid.front()];
            } else if (it == valid.end()) {
                value = col.deviation_mhz[valid.back()];
            } else {
                const std::size_t hi = *it, lo = *(it - 1);
                const double u = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
                value = col.deviation_mhz[lo] + u * (col.deviation_mhz[hi] - col.deviation_mhz[lo]);
            }
            col.deviation_mhz[i] = value;
            col.qi[i] = zcfreq::kQiInterpolated;
        }
    }
    return series;
}

struct CampaignStats {
    std::int64_t begin_sec = 0;
    std::int64_t end_sec = 0;  // time of the last row
    double duration_days = 0.0;
    double missing_percent = 0.0;
    double longest_contiguous_days = 0.0;
    std::int64_t contiguous_begin_sec = 0;
};

inline CampaignStats campaign_stats(const CampaignSeries& series, std::size_t column) {
    if (column >= series.columns.size())
        throw std::invalid_argument("campaign_stats: no such column");
    const auto& qi = series.columns[column].qi;
    const std::size_t n = qi.size();
    CampaignStats st;
    st.begin_sec = series.start_sec;
    st.end_sec = series.start_sec + static_cast<std::int64_t>(n) - 1;
    st.duration_days = static_cast<double>(n) / 86400.0;
    std::size_t bad = 0, best = 0, best_start = 0, run = 0, run_start = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (qi[i] != zcfreq::kQiOk) {
            ++bad;
            run = 0;
        } else {
            if (run == 0) run_start = i;
            ++run;
            if (run > best) {
                best = run;
                best_start = run_start;
            }
        }
    }
    st.missing_percent = n == 0 ? 0.0 : 100.0 * static_cast<double>(bad) / static_cast<double>(n);
    st.longest_contiguous_days = static_cast<double>(best) / 86400.0;
    st.contiguous_begin_sec = series.start_sec + static_cast<std::int64_t>(best_start);
    return st;
}

/// Union time range; columns absent in a range are zero-filled with qi=1.
inline CampaignSeries join_locations(const std::vector<CampaignSeries>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("join_locations: no inputs");
    std::int64_t begin = inputs[0].start_sec, end = inputs[0].end_sec();
    for (const auto& s : inputs) {
        s.validate();
        begin = std::min(begin, s.start_sec);
        end = std::max(end, s.end_sec());
    }
    CampaignSeries out;
    out.start_sec = begin;
    const auto n = static_cast<std::size_t>(end - begin);
    for (const auto& s : inputs) {
        const auto offset = static_cast<std::size_t>(s.start_sec - begin);
        for (const auto& col : s.columns) {
            LocationColumn joined;
            joined.name = col.name;
            joined.f_nom = col.f_nom;
            joined.deviation_mhz.assign(n, 0.0);
            joined.qi.assign(n, zcfreq::kQiInvalid);
            for (std::size_t i = 0; i < col.deviation_mhz.size(); ++i) {
                joined.deviation_mhz[offset + i] = col.deviation_mhz[i];
                joined.qi[offset + i] = col.qi[i];
            }
            out.columns.push_back(std::move(joined));
        }
    }
    return out;
}

/// Ten-second down-aggregation with center-aligned timestamps.
struct CoarseColumn {
    std::string name;
    int f_nom = 50;
    std::vector<double> value_mhz;
    std::vector<std::uint8_t> valid;
};

struct CoarseSeries {
    std::int64_t first_center_sec = 0;  // window start + 5 s
    int step_sec = 10;
    std::vector<CoarseColumn> columns;
};

inline CoarseSeries aggregate_10s_center(const CampaignSeries& series, bool strict = true) {
    series.validate();
    const std::int64_t w0 = ((series.start_sec + 9) / 10) * 10;
    CoarseSeries out;
    out.first_center_sec = w0 + 5;
    for (const auto& col : series.columns) {
        CoarseColumn cc;
        cc.name = col.name;
        cc.f_nom = col.f_nom;
        for (std::int64_t w = w0; w + 10 <= series.end_sec(); w += 10) {
            double acc = 0.0;
            std::size_t n_ok = 0;
            bool any_bad = false;
            for (int j = 0; j < 10; ++j) {
                const auto idx = static_cast<std::size_t>(w + j - series.start_sec);
                if (col.qi[idx] == zcfreq::kQiOk) {
                    acc += col.deviation_mhz[idx];
                    ++n_ok;
                } else {
                    any_bad = true;
                }
            }
            const bool ok = strict ? !any_bad : n_ok > 0;
            cc.value_mhz.push_back(ok ? acc / static_cast<double>(n_ok) : 0.0);
            cc.valid.push_back(ok ? 1 : 0);
        }
        out.columns.push_back(std::move(cc));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Waveform CSV (one voltage per line, start time in the file name)
// ---------------------------------------------------------------------------

inline std::string waveform_filename(const std::string& key, const UtcTime& t0) {
    return key + "_" + format_utc_compact(t0.sec) + ".csv";
}

inline bool parse_waveform_filename(const std::string& filename, std::string& key,
                                    std::int64_t& start_sec) {
    std::string stem = filename;
    if (auto pos = stem.rfind('.'); pos != std::string::npos) stem.resize(pos);
    const auto us = stem.rfind('_');
    if (us == std::string::npos) return false;
    key = stem.substr(0, us);
    return !key.empty() && parse_utc_compact(stem.substr(us + 1), start_sec);
}

inline void write_waveform_csv(const SampleStream& stream, std::ostream& out) {
    char buf[40];
    for (double v : stream.samples) {
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        *res.ptr = '\n';
        out.write(buf, res.ptr - buf + 1);
    }
}

inline std::filesystem::path write_waveform_csv(const SampleStream& stream,
                                                const std::filesystem::path& dir,
                                                const std::string& key) {
    const auto path = dir / waveform_filename(key, stream.t0);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    write_waveform_csv(stream, f);
    return path;
}

inline SampleStream read_waveform_csv(std::istream& in, double fs, UtcTime t0) {
    SampleStream s;
    s.fs = fs;
    s.t0 = t0;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v;
        if (!detail::parse_double_strict(line, v))
            throw CsvError(row, "malformed sample value '" + line + "'");
        s.samples.push_back(v);
    }
    return s;
}

inline SampleStream read_waveform_csv(const std::filesystem::path& path, double fs) {
    std::string key;
    std::int64_t start = 0;
    if (!parse_waveform_filename(path.filename().string(), key, start))
        throw std::runtime_error("waveform file name does not carry a timestamp: " +
                                 path.filename().string());
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    return read_waveform_csv(f, fs, UtcTime::from_seconds(start));
}

// ---------------------------------------------------------------------------
// Conversion from pipeline output
// ---------------------------------------------------------------------------

/// Packs contiguous second aggregates into a single-location series;
/// invalid seconds carry value zero per the zero-fill convention.
inline CampaignSeries series_from_aggregates(const std::vector<zcfreq::SecondAggregate>& aggs,
                                             const std::string& location, int f_nom) {
    if (aggs.empty()) throw std::invalid_argument("series_from_aggregates: empty input");
    CampaignSeries series;
    series.start_sec = aggs.front().k;
    LocationColumn col;
    col.name = location;
    col.f_nom = f_nom;
    for (std::size_t i = 0; i < aggs.size(); ++i) {
        const auto& a = aggs[i];
        if (a.k != series.start_sec + static_cast<std::int64_t>(i))
            throw std::invalid_argument("series_from_aggregates: aggregates not contiguous");
        const bool ok = a.qi == zcfreq::kQiOk && std::isfinite(a.f_hz);
        col.deviation_mhz.push_back(ok ? (a.f_hz - f_nom) * 1e3 : 0.0);
        col.qi.push_back(ok ? a.qi : zcfreq::kQiInvalid);
    }
    series.columns.push_back(std::move(col));
    return series;
}

}  // namespace gridfreq::dataio
