#ifndef BCH_BUNDLE_ANALYSIS_HPP
#define BCH_BUNDLE_ANALYSIS_HPP

#include <algorithm>
#include <charconv>
#include <exception>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "bch/error.hpp"
#include "bch/knn_info.hpp"
#include "bch/miwtr.hpp"
#include "bch/pid.hpp"
#include "bch/timeseries.hpp"
#include "bch/tsgraph.hpp"

namespace bch {

struct SweepConfig {
    std::vector<int> tau_values;
    std::vector<Order> orders{Order::order0, Order::order1};
    std::vector<int> k_values{5};
    bool use_miwtr = false;
    /// Also decompose T directly (rather than only as pid_J + pid_D).
    bool direct_total_pid = false;
    EstimatorConfig estimator;

    void validate() const
    {
        if (tau_values.empty()) {
            throw ConfigError("bundle_analysis", "sweep", "tau_values is empty");
        }
        for (std::size_t i = 0; i < tau_values.size(); ++i) {
            if (tau_values[i] < 1 || (i > 0 && tau_values[i] <= tau_values[i - 1])) {
                throw ConfigError("bundle_analysis", "sweep", "tau_values must be positive and strictly increasing");
            }
        }
        if (orders.empty() || k_values.empty()) {
            throw ConfigError("bundle_analysis", "sweep", "orders and k_values must be non-empty");
        }
        for (int k : k_values) {
            if (k < 1) {
                throw ConfigError("bundle_analysis", "sweep", "k values must be >= 1");
            }
        }
    }
};

struct AnalysisOptions {
    EstimatorConfig estimator;
    bool use_miwtr = false;
    bool direct_total_pid = false;
    /// Reused across calls sharing the same graph, data and estimator.
    MitCache* mit_cache = nullptr;
};

/// T/J/D and their decompositions at one (tau, order, k) cell.
struct HistoryDecomposition {
    int tau = 0;
    Order order = Order::order0;
    int k = 0;
    double total = 0.0;     // T = I(Z; V | F)
    double immediate = 0.0; // J = I(Z; V | F, W)
    double distant = 0.0;   // D = I(Z; W | F)
    PIDResult pid_j;
    PIDResult pid_d;
    PIDComponents pid_t;
    std::optional<PIDResult> pid_t_direct;
    std::size_t sample_count = 0;
    std::size_t v_size = 0;
    std::size_t w_size = 0;
    std::size_t f_size = 0;
    std::size_t w_size_before_reduction = 0;
    double chain_residual = 0.0;
    /// Empty on success; otherwise the error category of a failed cell.
    std::string error;
};

/**
 * Bundled causal-history information at partition lag tau. All estimates
 * share one complete-case row set drawn for {Z@0} u V u W u F.
 */
inline HistoryDecomposition analyze_at_lag(const TimeSeriesSet& ts, const StationaryGraph& g, const BundleSpec& b,
                                           int tau, Order order, const AnalysisOptions& opt)
{
    b.validate(g.variables());
    HistoryDecomposition out;
    out.tau = tau;
    out.order = order;
    out.k = opt.estimator.k;

    const NodeSet v = compute_V(g, b, tau);
    NodeSet w = compute_W(g, b, tau);
    out.w_size_before_reduction = w.size();
    if (opt.use_miwtr && !w.empty()) {
        w = reduce_W(g, b, tau, ts, opt.estimator, opt.mit_cache).reduced_w;
    }
    const NodeSet f = compute_F(g, b, order);
    out.v_size = v.size();
    out.w_size = w.size();
    out.f_size = f.size();
    out.pid_j = pid_zero();
    out.pid_d = pid_zero();
    if (v.empty() && w.empty()) {
        return out;
    }

    const LaggedNode target{b.target, 0};
    NodeSet all = v;
    all.insert(w.begin(), w.end());
    all.insert(f.begin(), f.end());
    all.insert(target);
    LaggedSamples samples;
    try {
        samples = extract_lagged_matrix(ts, all);
    }
    catch (const InsufficientDataError& ex) {
        throw InsufficientDataError("bundle_analysis", "analyze_at_lag",
                                    "tau " + std::to_string(tau) + ": " + ex.what(), ex.hint());
    }
    out.sample_count = samples.rows();

    NodeSet fw = f;
    fw.insert(w.begin(), w.end());
    const SampleMatrix z = samples.columns(NodeSet{target});
    const SampleMatrix fm = samples.columns(f);
    const SampleMatrix fwm = samples.columns(fw);
    const auto& cfg = opt.estimator;

    if (!v.empty()) {
        const SampleMatrix vm = samples.columns(v);
        out.total = fp_cmi(z, vm, fm, cfg).value;
        out.immediate = w.empty() ? out.total : fp_cmi(z, vm, fwm, cfg).value;
        const auto [vm_m, vm_n] = split_by_bundle(v, b);
        out.pid_j = pid_from_matrices(z, samples.columns(vm_m), samples.columns(vm_n), fwm, cfg, out.immediate);
        if (opt.direct_total_pid) {
            out.pid_t_direct = w.empty() ? out.pid_j
                                         : pid_from_matrices(z, samples.columns(vm_m), samples.columns(vm_n), fm,
                                                             cfg, out.total);
        }
    }
    if (!w.empty()) {
        out.distant = fp_cmi(z, samples.columns(w), fm, cfg).value;
        const auto [w_m, w_n] = split_by_bundle(w, b);
        out.pid_d = pid_from_matrices(z, samples.columns(w_m), samples.columns(w_n), fm, cfg, out.distant);
    }
    out.pid_t = out.pid_j;
    out.pid_t += out.pid_d;
    out.chain_residual = out.total - out.immediate - out.distant;
    return out;
}

inline HistoryDecomposition analyze_at_lag(const TimeSeriesSet& ts, const StationaryGraph& g, const BundleSpec& b,
                                           int tau, Order order, const EstimatorConfig& cfg)
{
    AnalysisOptions opt;
    opt.estimator = cfg;
    return analyze_at_lag(ts, g, b, tau, order, opt);
}

/**
 * Cartesian sweep over (order, k, tau). A failing cell becomes a gap record
 * carrying its error category; when every cell fails, the last error is
 * rethrown.
 */
inline std::vector<HistoryDecomposition> sweep(const TimeSeriesSet& ts, const StationaryGraph& g,
                                               const BundleSpec& b, const SweepConfig& sc,
                                               std::vector<std::string>* messages = nullptr)
{
    sc.validate();
    b.validate(g.variables());
    std::vector<HistoryDecomposition> out;
    std::size_t failures = 0;
    std::exception_ptr last_error;
    for (int k : sc.k_values) {
        AnalysisOptions opt;
        opt.estimator = sc.estimator;
        opt.estimator.k = k;
        opt.use_miwtr = sc.use_miwtr;
        opt.direct_total_pid = sc.direct_total_pid;
        MitCache cache;
        opt.mit_cache = &cache;
        for (Order order : sc.orders) {
            for (int tau : sc.tau_values) {
                try {
                    out.push_back(analyze_at_lag(ts, g, b, tau, order, opt));
                }
                catch (const Error& ex) {
                    HistoryDecomposition gap;
                    gap.tau = tau;
                    gap.order = order;
                    gap.k = k;
                    gap.error = to_string(ex.kind());
                    out.push_back(std::move(gap));
                    ++failures;
                    last_error = std::current_exception();
                    if (messages) {
                        messages->push_back(std::string(to_string(order)) + " k=" + std::to_string(k) +
                                            " tau=" + std::to_string(tau) + ": " + ex.what());
                    }
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const HistoryDecomposition& a, const HistoryDecomposition& c) {
        return std::tuple(a.order, a.k, a.tau) < std::tuple(c.order, c.k, c.tau);
    });
    if (!out.empty() && failures == out.size()) {
        std::rethrow_exception(last_error);
    }
    return out;
}

// Sweep CSV. The trailing `error` column is empty for successful cells.

inline const std::vector<std::string>& sweep_csv_header()
{
    static const std::vector<std::string> header{
        "order", "k",    "tau",  "sample_count", "v_size", "w_size", "f_size", "T",   "J",   "D",   "chain_residual",
        "R_J",   "S_J",  "Um_J", "Un_J",         "R_D",    "S_D",    "Um_D",   "Un_D", "R_T", "S_T", "Um_T",
        "Un_T",  "error"};
    return header;
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace detail

inline void write_sweep_csv(std::ostream& os, const std::vector<HistoryDecomposition>& rows)
{
    const auto& header = sweep_csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        os << (i ? "," : "") << header[i];
    }
    os << '\n';
    using detail::format_double;
    for (const auto& r : rows) {
        os << to_string(r.order) << ',' << r.k << ',' << r.tau << ',';
        if (!r.error.empty()) {
            for (std::size_t i = 3; i + 1 < header.size(); ++i) {
                os << ',';
            }
            os << r.error << '\n';
            continue;
        }
        os << r.sample_count << ',' << r.v_size << ',' << r.w_size << ',' << r.f_size;
        for (double v : {r.total, r.immediate, r.distant, r.chain_residual}) {
            os << ',' << format_double(v);
        }
        for (const PIDComponents* p : {static_cast<const PIDComponents*>(&r.pid_j),
                                       static_cast<const PIDComponents*>(&r.pid_d), &r.pid_t}) {
            for (double v : {p->redundant, p->synergistic, p->unique_m, p->unique_n}) {
                os << ',' << format_double(v);
            }
        }
        os << ",\n";
    }
}

/// A parsed sweep CSV row; `values` maps header columns 3..22 (empty when missing).
struct SweepRow {
    std::string order;
    int k = 0;
    int tau = 0;
    std::vector<std::optional<double>> values;
    std::string error;

    std::optional<double> get(const std::string& column) const
    {
        const auto& h = sweep_csv_header();
        const auto it = std::find(h.begin(), h.end(), column);
        const auto idx = static_cast<std::size_t>(it - h.begin());
        if (it == h.end() || idx < 3 || idx - 3 >= values.size()) {
            return std::nullopt;
        }
        return values[idx - 3];
    }
};

inline std::vector<SweepRow> read_sweep_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("bundle_analysis", "read_sweep_csv", "missing header row");
    }
    const auto& expected = sweep_csv_header();
    const auto header = detail::split_csv_line(line);
    if (header != expected) {
        throw ParseError("bundle_analysis", "read_sweep_csv", "row 1: header does not match the sweep schema");
    }
    std::vector<SweepRow> rows;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        const auto where = "row " + std::to_string(row_number);
        if (cells.size() != expected.size()) {
            throw ParseError("bundle_analysis", "read_sweep_csv", where + ": wrong number of fields");
        }
        SweepRow r;
        r.order = cells[0];
        const auto k = detail::parse_double(cells[1]);
        const auto tau = detail::parse_double(cells[2]);
        if (!k || !tau) {
            throw ParseError("bundle_analysis", "read_sweep_csv", where + ": k and tau must be numeric");
        }
        r.k = static_cast<int>(*k);
        r.tau = static_cast<int>(*tau);
        for (std::size_t i = 3; i + 1 < cells.size(); ++i) {
            if (cells[i].empty()) {
                r.values.emplace_back();
                continue;
            }
            const auto v = detail::parse_double(cells[i]);
            if (!v) {
                throw ParseError("bundle_analysis", "read_sweep_csv",
                                 where + ": column '" + expected[i] + "' is not numeric");
            }
            r.values.push_back(v);
        }
        r.error = cells.back();
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace bch

#endif
