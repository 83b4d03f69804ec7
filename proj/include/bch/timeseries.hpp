#ifndef BCH_TIMESERIES_HPP
#define BCH_TIMESERIES_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "bch/error.hpp"
#include "bch/sample_matrix.hpp"

namespace bch {

/// A variable observed `lag` steps before the anchor time t (lag 0 is t itself).
struct LaggedNode {
    std::string variable;
    int lag = 0;

    auto operator<=>(const LaggedNode&) const = default;
};

using NodeSet = std::set<LaggedNode>;

inline std::string to_string(const LaggedNode& node)
{
    return node.variable + "@" + std::to_string(node.lag);
}

inline std::string to_string(const NodeSet& nodes)
{
    std::string out = "{";
    bool first = true;
    for (const auto& n : nodes) {
        if (!first) {
            out += ", ";
        }
        out += to_string(n);
        first = false;
    }
    return out + "}";
}

inline LaggedNode shifted(LaggedNode node, int by)
{
    node.lag += by;
    return node;
}

/**
 * Aligned multivariate series, one row per time step.
 *
 * Missing cells hold a quiet NaN; finite values are the only other content.
 * The object is immutable once built.
 */
class TimeSeriesSet {
public:
    TimeSeriesSet() = default;

    TimeSeriesSet(std::vector<std::string> names, std::size_t length, std::vector<double> values,
                  std::vector<std::string> timestamps = {}, std::string step_description = {})
        : m_names(std::move(names)),
          m_length(length),
          m_values(std::move(values)),
          m_timestamps(std::move(timestamps)),
          m_step_description(std::move(step_description))
    {
        std::unordered_set<std::string> seen;
        for (const auto& n : m_names) {
            if (n.empty()) {
                throw SchemaError("timeseries", "construct", "empty variable name");
            }
            if (!seen.insert(n).second) {
                throw SchemaError("timeseries", "construct", "duplicate variable name '" + n + "'");
            }
        }
        if (m_values.size() != m_length * m_names.size()) {
            throw SchemaError("timeseries", "construct", "value count does not match T x N");
        }
        if (!m_timestamps.empty() && m_timestamps.size() != m_length) {
            throw SchemaError("timeseries", "construct", "timestamp count does not match T");
        }
        for (double v : m_values) {
            if (std::isinf(v)) {
                throw SchemaError("timeseries", "construct", "infinite value");
            }
        }
    }

    static double missing() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

    const std::vector<std::string>& variable_names() const noexcept { return m_names; }
    std::size_t length() const noexcept { return m_length; }
    std::size_t width() const noexcept { return m_names.size(); }
    const std::vector<std::string>& timestamps() const noexcept { return m_timestamps; }
    const std::string& step_description() const noexcept { return m_step_description; }
    const std::vector<double>& values() const noexcept { return m_values; }

    double at(std::size_t t, std::size_t j) const { return m_values[t * width() + j]; }
    bool is_missing(std::size_t t, std::size_t j) const { return std::isnan(at(t, j)); }

    bool has_variable(std::string_view name) const
    {
        return std::find(m_names.begin(), m_names.end(), name) != m_names.end();
    }

    std::size_t index_of(std::string_view name) const
    {
        auto it = std::find(m_names.begin(), m_names.end(), name);
        if (it == m_names.end()) {
            throw LookupError("timeseries", "index_of", "unknown variable '" + std::string(name) + "'");
        }
        return static_cast<std::size_t>(it - m_names.begin());
    }

    std::vector<double> column(std::size_t j) const
    {
        std::vector<double> out(m_length);
        for (std::size_t t = 0; t < m_length; ++t) {
            out[t] = at(t, j);
        }
        return out;
    }

    std::size_t missing_count() const
    {
        return static_cast<std::size_t>(
            std::count_if(m_values.begin(), m_values.end(), [](double v) { return std::isnan(v); }));
    }

private:
    std::vector<std::string> m_names;
    std::size_t m_length = 0;
    std::vector<double> m_values;
    std::vector<std::string> m_timestamps;
    std::string m_step_description;
};

struct CsvOptions {
    std::string missing_token;
    /// Column holding timestamps. Empty means auto-detect a first column
    /// named time, timestamp, date or datetime.
    std::string timestamp_column;
    std::string step_description;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(first, last - first + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

inline bool is_timestamp_name(std::string name)
{
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return name == "time" || name == "timestamp" || name == "date" || name == "datetime";
}

inline std::optional<double> parse_double(std::string_view text)
{
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (begin != end && *begin == '+') {
        ++begin;
    }
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

} // namespace detail

/// Parses CSV text; the first row is the header, row order is time order.
inline TimeSeriesSet read_csv(std::istream& in, const CsvOptions& options = {})
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("timeseries", "load_csv", "empty input: missing header row");
    }
    const auto header = detail::split_csv_line(line);

    std::optional<std::size_t> ts_col;
    if (!options.timestamp_column.empty()) {
        auto it = std::find(header.begin(), header.end(), options.timestamp_column);
        if (it == header.end()) {
            throw SchemaError("timeseries", "load_csv",
                              "timestamp column '" + options.timestamp_column + "' not in header");
        }
        ts_col = static_cast<std::size_t>(it - header.begin());
    }
    else if (!header.empty() && detail::is_timestamp_name(header.front())) {
        ts_col = 0;
    }

    std::vector<std::string> names;
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (ts_col && c == *ts_col) {
            continue;
        }
        if (header[c].empty()) {
            throw SchemaError("timeseries", "load_csv", "empty name in header column " + std::to_string(c + 1));
        }
        if (!seen.insert(header[c]).second) {
            throw SchemaError("timeseries", "load_csv", "duplicate header name '" + header[c] + "'");
        }
        names.push_back(header[c]);
    }
    if (names.empty()) {
        throw SchemaError("timeseries", "load_csv", "no data columns in header");
    }

    std::vector<double> values;
    std::vector<std::string> timestamps;
    std::size_t row_number = 1;
    std::size_t length = 0;
    while (std::getline(in, line)) {
        ++row_number;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("timeseries", "load_csv",
                             "row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                                 " fields, header has " + std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (ts_col && c == *ts_col) {
                timestamps.push_back(cells[c]);
                continue;
            }
            const auto& cell = cells[c];
            if (cell.empty() || (!options.missing_token.empty() && cell == options.missing_token)) {
                values.push_back(TimeSeriesSet::missing());
                continue;
            }
            auto v = detail::parse_double(cell);
            if (!v) {
                throw ParseError("timeseries", "load_csv",
                                 "row " + std::to_string(row_number) + ", column '" + header[c] +
                                     "': cannot parse '" + cell + "' as a number",
                                 "set the missing token if this marks a gap");
            }
            values.push_back(*v);
        }
        ++length;
    }
    return TimeSeriesSet(std::move(names), length, std::move(values), std::move(timestamps),
                         options.step_description);
}

inline TimeSeriesSet load_csv(const std::string& path, const CsvOptions& options = {})
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("timeseries", "load_csv", "cannot open '" + path + "'", "check the data path");
    }
    return read_csv(in, options);
}

inline void write_csv(std::ostream& out, const TimeSeriesSet& ts)
{
    const bool with_time = !ts.timestamps().empty();
    if (with_time) {
        out << "time,";
    }
    for (std::size_t j = 0; j < ts.width(); ++j) {
        out << (j ? "," : "") << ts.variable_names()[j];
    }
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < ts.length(); ++t) {
        if (with_time) {
            out << ts.timestamps()[t] << ',';
        }
        for (std::size_t j = 0; j < ts.width(); ++j) {
            if (j) {
                out << ',';
            }
            if (!ts.is_missing(t, j)) {
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, ts.at(t, j));
                out.write(buf, ptr - buf);
            }
        }
        out << '\n';
    }
}

/// Rescales every column to zero mean and unit sample standard deviation
/// over its non-missing entries.
inline TimeSeriesSet standardize(const TimeSeriesSet& ts)
{
    std::vector<double> values = ts.values();
    const std::size_t n = ts.width();
    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < ts.length(); ++t) {
            if (!ts.is_missing(t, j)) {
                sum += ts.at(t, j);
                ++count;
            }
        }
        const auto& name = ts.variable_names()[j];
        if (count < 2) {
            throw DegenerateVariableError("timeseries", "standardize",
                                          "variable '" + name + "' has fewer than 2 observed values");
        }
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t t = 0; t < ts.length(); ++t) {
            if (!ts.is_missing(t, j)) {
                const double d = ts.at(t, j) - mean;
                ss += d * d;
            }
        }
        const double sd = std::sqrt(ss / static_cast<double>(count - 1));
        // Relative threshold: fixed-point trajectories jitter in the last ulp.
        if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) {
            throw DegenerateVariableError("timeseries", "standardize",
                                          "variable '" + name + "' is constant",
                                          "drop the variable or check the generator regime");
        }
        for (std::size_t t = 0; t < ts.length(); ++t) {
            double& v = values[t * n + j];
            if (!std::isnan(v)) {
                v = (v - mean) / sd;
            }
        }
    }
    return TimeSeriesSet(ts.variable_names(), ts.length(), std::move(values), ts.timestamps(),
                         ts.step_description());
}

/// Joint samples of a node list, one row per usable anchor time.
struct LaggedSamples {
    std::vector<LaggedNode> nodes;
    SampleMatrix samples;
    std::vector<std::size_t> anchors;
    std::size_t dropped = 0;

    std::size_t rows() const noexcept { return samples.rows(); }

    std::size_t column_of(const LaggedNode& node) const
    {
        auto it = std::find(nodes.begin(), nodes.end(), node);
        if (it == nodes.end()) {
            throw ContractViolation("timeseries", "column_of", "node " + to_string(node) + " not extracted");
        }
        return static_cast<std::size_t>(it - nodes.begin());
    }

    /// Columns for `subset`, in the subset's iteration order.
    template <class Range>
    SampleMatrix columns(const Range& subset) const
    {
        std::vector<std::size_t> idx;
        for (const auto& n : subset) {
            idx.push_back(column_of(n));
        }
        return samples.select_columns(idx);
    }
};

/**
 * Row i holds x_var(t_i - lag) for every requested node, anchor times
 * t_i in [max_lag, T). Anchors touching any missing cell are dropped.
 */
inline LaggedSamples extract_lagged_matrix(const TimeSeriesSet& ts, std::span<const LaggedNode> nodes)
{
    if (nodes.empty()) {
        throw PreconditionError("timeseries", "extract_lagged_matrix", "node list is empty");
    }
    std::vector<std::size_t> cols;
    int max_lag = 0;
    for (const auto& node : nodes) {
        if (node.lag < 0) {
            throw PreconditionError("timeseries", "extract_lagged_matrix",
                                    "negative lag in node " + to_string(node));
        }
        cols.push_back(ts.index_of(node.variable));
        max_lag = std::max(max_lag, node.lag);
    }
    const auto describe = [&] {
        std::string s;
        for (const auto& n : nodes) {
            s += (s.empty() ? "" : ", ") + to_string(n);
        }
        return "[" + s + "], max lag " + std::to_string(max_lag);
    };
    if (static_cast<std::size_t>(max_lag) >= ts.length()) {
        throw InsufficientDataError("timeseries", "extract_lagged_matrix",
                                    "series length " + std::to_string(ts.length()) +
                                        " does not exceed the max lag for nodes " + describe());
    }

    LaggedSamples out;
    out.nodes.assign(nodes.begin(), nodes.end());
    std::vector<double> data;
    data.reserve((ts.length() - static_cast<std::size_t>(max_lag)) * nodes.size());
    for (std::size_t t = static_cast<std::size_t>(max_lag); t < ts.length(); ++t) {
        bool complete = true;
        for (std::size_t c = 0; c < nodes.size(); ++c) {
            if (ts.is_missing(t - static_cast<std::size_t>(nodes[c].lag), cols[c])) {
                complete = false;
                break;
            }
        }
        if (!complete) {
            ++out.dropped;
            continue;
        }
        for (std::size_t c = 0; c < nodes.size(); ++c) {
            data.push_back(ts.at(t - static_cast<std::size_t>(nodes[c].lag), cols[c]));
        }
        out.anchors.push_back(t);
    }
    if (out.anchors.empty()) {
        throw InsufficientDataError("timeseries", "extract_lagged_matrix",
                                    "no complete rows for nodes " + describe(),
                                    "reduce the lag range or supply data with fewer gaps");
    }
    out.samples = SampleMatrix(out.anchors.size(), nodes.size(), std::move(data));
    return out;
}

inline LaggedSamples extract_lagged_matrix(const TimeSeriesSet& ts, const NodeSet& nodes)
{
    std::vector<LaggedNode> list(nodes.begin(), nodes.end());
    return extract_lagged_matrix(ts, std::span<const LaggedNode>(list));
}

} // namespace bch

#endif
