#ifndef BCH_DISCOVERY_HPP
#define BCH_DISCOVERY_HPP

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "bch/error.hpp"
#include "bch/knn_info.hpp"
#include "bch/timeseries.hpp"
#include "bch/tsgraph.hpp"

namespace bch {

struct DiscoveryConfig {
    int max_lag = 3;
    double alpha = 0.05;
    int n_perm = 99;
    int max_condition_size = 3;
    int max_sweeps = 10;
    EstimatorConfig estimator;
};

struct IndependenceTest {
    int stage = 1;
    int sweep = 0;
    LaggedEdge edge;
    NodeSet condition;
    double value = 0.0;
    double p_value = 1.0;
    bool kept = false;
};

struct DiscoveryResult {
    StationaryGraph graph;
    StationaryGraph stage1;
    std::vector<IndependenceTest> tests;
    int sweeps = 0;
    bool converged = true;
};

namespace detail {

inline void check_discovery_config(const DiscoveryConfig& cfg)
{
    if (cfg.max_lag < 1) {
        throw ConfigError("discovery", "discover_graph", "max_lag must be >= 1");
    }
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
        throw ConfigError("discovery", "discover_graph", "alpha must lie in (0, 1)");
    }
    if (cfg.max_condition_size < 0) {
        throw ConfigError("discovery", "discover_graph", "max_condition_size must be >= 0");
    }
}

// Per-test seed so results do not depend on test order.
inline EstimatorConfig test_config(const EstimatorConfig& base, std::size_t test_index)
{
    EstimatorConfig cfg = base;
    cfg.seed = splitmix64(base.seed + 0x51ED27A1ULL * (test_index + 1));
    return cfg;
}

// Parents of `node` in `g` ranked by weight (descending, ties by node order).
inline std::vector<LaggedNode> ranked_parents(const StationaryGraph& g, const LaggedNode& node)
{
    std::vector<std::pair<double, LaggedNode>> ranked;
    for (const auto* e : g.incoming(node.variable)) {
        ranked.emplace_back(e->weight.value_or(0.0), LaggedNode{e->src, node.lag + e->lag});
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second < b.second;
    });
    std::vector<LaggedNode> out;
    for (auto& r : ranked) {
        out.push_back(std::move(r.second));
    }
    return out;
}

} // namespace detail

/// Stage 1: keep src@lag -> dst when the MI permutation test rejects independence.
inline DiscoveryResult discover_stage1(const TimeSeriesSet& ts, const DiscoveryConfig& cfg)
{
    detail::check_discovery_config(cfg);
    DiscoveryResult out;
    out.stage1 = StationaryGraph(ts.variable_names());
    std::size_t index = 0;
    for (const auto& src : ts.variable_names()) {
        for (const auto& dst : ts.variable_names()) {
            for (int lag = 1; lag <= cfg.max_lag; ++lag, ++index) {
                const LaggedNode s{src, lag};
                const LaggedNode d{dst, 0};
                const auto samples = extract_lagged_matrix(ts, NodeSet{s, d});
                const auto x = samples.columns(NodeSet{s});
                const auto y = samples.columns(NodeSet{d});
                const auto ecfg = detail::test_config(cfg.estimator, index);
                const auto none = SampleMatrix::empty_with_rows(samples.rows());
                const double mi = ksg_mi(x, y, ecfg).value;
                const double p = permutation_pvalue(KsgMiEstimator{}, x, y, none, ecfg, cfg.n_perm);
                IndependenceTest t{1, 0, {src, lag, dst, std::max(0.0, mi)}, {}, mi, p, p < cfg.alpha};
                if (t.kept) {
                    out.stage1.add_edge(t.edge);
                }
                out.tests.push_back(std::move(t));
            }
        }
    }
    return out;
}

/**
 * Two-stage discovery: MI screening, then rounds of CMI tests conditioned on
 * the strongest current parents of both endpoints. Each round reads the
 * graph as it stood at the round's start; removals apply between rounds.
 */
inline DiscoveryResult discover_graph(const TimeSeriesSet& ts, const DiscoveryConfig& cfg)
{
    DiscoveryResult out = discover_stage1(ts, cfg);
    StationaryGraph current = out.stage1;
    const auto cap = static_cast<std::size_t>(cfg.max_condition_size);
    out.converged = false;
    std::size_t index = 1u << 20;
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        out.sweeps = sweep;
        StationaryGraph next(ts.variable_names());
        bool removed_any = false;
        for (const auto& e : current.edges()) {
            ++index;
            const LaggedNode s{e.src, e.lag};
            const LaggedNode d{e.dst, 0};
            std::vector<LaggedNode> candidates = detail::ranked_parents(current, d);
            const auto src_parents = detail::ranked_parents(current, s);
            candidates.insert(candidates.end(), src_parents.begin(), src_parents.end());
            NodeSet cond;
            for (const auto& c : candidates) {
                if (cond.size() >= cap) {
                    break;
                }
                if (c != s && c != d) {
                    cond.insert(c);
                }
            }
            NodeSet all = cond;
            all.insert(s);
            all.insert(d);
            const auto samples = extract_lagged_matrix(ts, all);
            const auto x = samples.columns(NodeSet{s});
            const auto y = samples.columns(NodeSet{d});
            const auto z = samples.columns(cond);
            const auto ecfg = detail::test_config(cfg.estimator, index);
            const double cmi = fp_cmi(x, y, z, ecfg).value;
            const double p = permutation_pvalue(FpCmiEstimator{}, x, y, z, ecfg, cfg.n_perm);
            IndependenceTest t{2, sweep, {e.src, e.lag, e.dst, std::max(0.0, cmi)}, cond, cmi, p, p < cfg.alpha};
            if (t.kept) {
                next.add_edge(t.edge);
            }
            else {
                removed_any = true;
            }
            out.tests.push_back(std::move(t));
        }
        current = std::move(next);
        if (!removed_any) {
            out.converged = true;
            break;
        }
    }
    out.graph = std::move(current);
    return out;
}

inline void write_discovery_report(std::ostream& os, const DiscoveryResult& r)
{
    os << "# stage-1 edges: " << r.stage1.edges().size() << ", final edges: " << r.graph.edges().size()
       << ", stage-2 sweeps: " << r.sweeps << (r.converged ? "" : " (not converged)") << '\n';
    os << "stage,sweep,src,lag,dst,condition,value,p_value,decision\n";
    for (const auto& t : r.tests) {
        os << t.stage << ',' << t.sweep << ',' << t.edge.src << ',' << t.edge.lag << ',' << t.edge.dst << ',';
        bool first = true;
        for (const auto& c : t.condition) {
            os << (first ? "" : " ") << to_string(c);
            first = false;
        }
        os << ',' << t.value << ',' << t.p_value << ',' << (t.kept ? "keep" : (t.stage == 1 ? "reject" : "remove"))
           << '\n';
    }
}

} // namespace bch

#endif
