#ifndef BCH_MIWTR_HPP
#define BCH_MIWTR_HPP

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include "bch/error.hpp"
#include "bch/knn_info.hpp"
#include "bch/timeseries.hpp"
#include "bch/tsgraph.hpp"

namespace bch {

struct WeightedEdge {
    LaggedNode src;
    LaggedNode dst;
    double weight = 0.0;
};

/// Finite window of the unrolled DAG; every edge points forward in time.
class WeightedUnrolledGraph {
public:
    void add_node(const LaggedNode& n) { m_nodes.insert(n); }

    void add_edge(const LaggedNode& src, const LaggedNode& dst, double weight)
    {
        if (src.lag <= dst.lag) {
            throw ContractViolation("miwtr", "add_edge",
                                    "edge " + to_string(src) + "->" + to_string(dst) + " does not advance time");
        }
        if (!(weight >= 0.0)) {
            throw ContractViolation("miwtr", "add_edge", "edge weights must be non-negative");
        }
        m_nodes.insert(src);
        m_nodes.insert(dst);
        m_edges[{src, dst}] = weight;
    }

    bool remove_edge(const LaggedNode& src, const LaggedNode& dst) { return m_edges.erase({src, dst}) > 0; }

    bool has_edge(const LaggedNode& src, const LaggedNode& dst) const { return m_edges.contains({src, dst}); }

    std::optional<double> weight(const LaggedNode& src, const LaggedNode& dst) const
    {
        auto it = m_edges.find({src, dst});
        if (it == m_edges.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    const NodeSet& nodes() const noexcept { return m_nodes; }
    std::size_t edge_count() const noexcept { return m_edges.size(); }

    std::vector<WeightedEdge> edges() const
    {
        std::vector<WeightedEdge> out;
        out.reserve(m_edges.size());
        for (const auto& [key, w] : m_edges) {
            out.push_back({key.first, key.second, w});
        }
        return out;
    }

    std::vector<std::pair<LaggedNode, double>> successors(const LaggedNode& n) const
    {
        std::vector<std::pair<LaggedNode, double>> out;
        auto it = m_edges.lower_bound({n, LaggedNode{std::string{}, std::numeric_limits<int>::min()}});
        for (; it != m_edges.end() && it->first.first == n; ++it) {
            out.emplace_back(it->first.second, it->second);
        }
        return out;
    }

    friend bool operator==(const WeightedUnrolledGraph& a, const WeightedUnrolledGraph& b)
    {
        return a.m_nodes == b.m_nodes && a.m_edges == b.m_edges;
    }

private:
    NodeSet m_nodes;
    std::map<std::pair<LaggedNode, LaggedNode>, double> m_edges;
};

struct WidestPath {
    double bottleneck = -std::numeric_limits<double>::infinity();
    std::vector<LaggedNode> path; // empty when no indirect path exists
};

/**
 * Max-bottleneck path from `from` to `to` that avoids the direct edge
 * between them. Widest-path variant of Dijkstra (max-min relaxation).
 */
inline WidestPath widest_indirect_path(const WeightedUnrolledGraph& g, const LaggedNode& from, const LaggedNode& to)
{
    constexpr double none = -std::numeric_limits<double>::infinity();
    std::map<LaggedNode, double> best;
    std::map<LaggedNode, LaggedNode> prev;
    using Item = std::pair<double, LaggedNode>;
    auto cmp = [](const Item& a, const Item& b) {
        if (a.first != b.first) {
            return a.first < b.first;
        }
        return b.second < a.second;
    };
    std::priority_queue<Item, std::vector<Item>, decltype(cmp)> queue(cmp);
    best[from] = std::numeric_limits<double>::infinity();
    queue.push({best[from], from});
    NodeSet done;
    while (!queue.empty()) {
        auto [width, node] = queue.top();
        queue.pop();
        if (done.contains(node)) {
            continue;
        }
        done.insert(node);
        if (node == to) {
            break;
        }
        for (const auto& [next, w] : g.successors(node)) {
            if (node == from && next == to) {
                continue;
            }
            const double cand = std::min(width, w);
            auto it = best.find(next);
            if (it == best.end() || cand > it->second) {
                best[next] = cand;
                prev[next] = node;
                queue.push({cand, next});
            }
        }
    }
    WidestPath out;
    auto it = best.find(to);
    if (it == best.end() || it->second == none) {
        return out;
    }
    out.bottleneck = it->second;
    for (LaggedNode n = to;; n = prev.at(n)) {
        out.path.push_back(n);
        if (n == from) {
            break;
        }
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

/// One examined edge of a transitive reduction.
struct ReductionRecord {
    LaggedNode src;
    LaggedNode dst;
    double weight = 0.0;
    std::optional<double> bottleneck; // absent when no indirect path exists
    std::vector<LaggedNode> path;
    bool removed = false;
};

/**
 * Weighted transitive reduction: an edge is removed iff some indirect path
 * in the current graph has a bottleneck strictly larger than its weight.
 * Edges are examined by ascending weight, ties by (src, dst); removals take
 * effect immediately.
 */
inline WeightedUnrolledGraph weighted_transitive_reduction(const WeightedUnrolledGraph& input,
                                                           std::vector<ReductionRecord>* records = nullptr)
{
    WeightedUnrolledGraph g = input;
    auto order = g.edges();
    std::sort(order.begin(), order.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
        return std::tie(a.weight, a.src, a.dst) < std::tie(b.weight, b.src, b.dst);
    });
    for (const auto& e : order) {
        const WidestPath wp = widest_indirect_path(g, e.src, e.dst);
        ReductionRecord rec{e.src, e.dst, e.weight, std::nullopt, wp.path, false};
        if (!wp.path.empty()) {
            rec.bottleneck = wp.bottleneck;
            if (wp.bottleneck > e.weight) {
                g.remove_edge(e.src, e.dst);
                rec.removed = true;
            }
        }
        if (records) {
            records->push_back(std::move(rec));
        }
    }
    return g;
}

/// Caches momentary information transfer per stationary edge (src, lag, dst).
using MitCache = std::map<std::tuple<std::string, int, std::string>, double>;

/**
 * Momentary information transfer of a stationary edge src@lag -> dst@0:
 * I(src@lag; dst@0 | P(dst@0) \ {src@lag}, P(src@lag)), clamped at zero.
 */
inline double mit_weight(const StationaryGraph& g, const LaggedEdge& e, const TimeSeriesSet& ts,
                         const EstimatorConfig& cfg)
{
    if (!g.find_edge(e.src, e.lag, e.dst)) {
        throw PreconditionError("miwtr", "mit_weight", "edge is not part of the graph");
    }
    const LaggedNode source{e.src, e.lag};
    const LaggedNode dest{e.dst, 0};
    NodeSet cond = g.parents_of(dest);
    cond.erase(source);
    for (const auto& p : g.parents_of(source)) {
        cond.insert(p);
    }
    cond.erase(dest);
    NodeSet all = cond;
    all.insert(source);
    all.insert(dest);
    const LaggedSamples s = extract_lagged_matrix(ts, all);
    const double v = fp_cmi(s.columns(NodeSet{source}), s.columns(NodeSet{dest}), s.columns(cond), cfg).value;
    return std::max(0.0, v);
}

struct MiwtrResult {
    NodeSet original_w;
    NodeSet reduced_w;
    WeightedUnrolledGraph before;
    WeightedUnrolledGraph after;
    std::vector<ReductionRecord> records;

    std::vector<ReductionRecord> removed_edges() const
    {
        std::vector<ReductionRecord> out;
        for (const auto& r : records) {
            if (r.removed) {
                out.push_back(r);
            }
        }
        return out;
    }
};

/**
 * Unrolls the window [0, tau + max_lag], keeps edges touching W or the
 * immediate bundled history, weights them by MIT, reduces, and keeps W members that still feed the immediate history
 * directly. Members that are themselves target parents are always kept.
 */
inline MiwtrResult reduce_W(const StationaryGraph& g, const BundleSpec& b, int tau, const TimeSeriesSet& ts,
                            const EstimatorConfig& cfg, MitCache* cache = nullptr)
{
    MiwtrResult out;
    out.original_w = compute_W(g, b, tau);
    if (out.original_w.empty()) {
        throw PreconditionError("miwtr", "reduce_W", "W is empty at tau = " + std::to_string(tau));
    }
    const NodeSet immediate = immediate_history(b, tau);
    NodeSet scope = out.original_w;
    scope.insert(immediate.begin(), immediate.end());
    const int horizon = tau + g.max_lag();

    MitCache local;
    MitCache& weights = cache ? *cache : local;
    for (const auto& n : scope) {
        out.before.add_node(n);
    }
    // Edges of the window [0, horizon] with at least one endpoint in scope.
    for (const auto& var : g.variables()) {
        for (int lag = 0; lag <= horizon; ++lag) {
            const LaggedNode dst{var, lag};
            for (const auto* e : g.incoming(var)) {
                const LaggedNode src{e->src, lag + e->lag};
                if (src.lag > horizon || (!scope.contains(src) && !scope.contains(dst))) {
                    continue;
                }
                const auto key = std::make_tuple(e->src, e->lag, e->dst);
                auto it = weights.find(key);
                if (it == weights.end()) {
                    it = weights.emplace(key, mit_weight(g, *e, ts, cfg)).first;
                }
                out.before.add_edge(src, dst, it->second);
            }
        }
    }
    out.after = weighted_transitive_reduction(out.before, &out.records);

    const NodeSet target_parents = g.parents_of({b.target, 0});
    for (const auto& w : out.original_w) {
        bool keep = target_parents.contains(w);
        for (const auto& [next, weight] : out.after.successors(w)) {
            keep = keep || immediate.contains(next);
        }
        if (keep) {
            out.reduced_w.insert(w);
        }
    }
    return out;
}

inline void write_reduction_report(std::ostream& os, const MiwtrResult& r, int tau)
{
    os << "# tau " << tau << ": |W| " << r.original_w.size() << " -> " << r.reduced_w.size() << '\n';
    os << "# W before: " << to_string(r.original_w) << '\n';
    os << "# W after:  " << to_string(r.reduced_w) << '\n';
    os << "src,dst,weight,bottleneck,removed,path\n";
    for (const auto& rec : r.records) {
        os << to_string(rec.src) << ',' << to_string(rec.dst) << ',' << rec.weight << ',';
        if (rec.bottleneck) {
            os << *rec.bottleneck;
        }
        os << ',' << (rec.removed ? 1 : 0) << ',';
        for (std::size_t i = 0; i < rec.path.size(); ++i) {
            os << (i ? " > " : "") << to_string(rec.path[i]);
        }
        os << '\n';
    }
}

} // namespace bch

#endif
