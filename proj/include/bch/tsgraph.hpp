#ifndef BCH_TSGRAPH_HPP
#define BCH_TSGRAPH_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "bch/error.hpp"
#include "bch/timeseries.hpp"

namespace bch {

/// src observed `lag` steps earlier drives dst; weight in nats when known.
struct LaggedEdge {
    std::string src;
    int lag = 1;
    std::string dst;
    std::optional<double> weight;

    auto key() const { return std::tie(src, lag, dst); }
    LaggedNode source_node() const { return {src, lag}; }
};

/**
 * Time-invariant lagged edge set. Every edge advances time by at least one
 * step, so the unrolled graph is acyclic.
 */
class StationaryGraph {
public:
    StationaryGraph() = default;

    explicit StationaryGraph(std::vector<std::string> variables)
        : m_variables(std::move(variables))
    {
        std::set<std::string> seen;
        for (const auto& v : m_variables) {
            if (v.empty() || !seen.insert(v).second) {
                throw SchemaError("tsgraph", "construct", "variable names must be unique and non-empty");
            }
        }
    }

    const std::vector<std::string>& variables() const noexcept { return m_variables; }
    const std::vector<LaggedEdge>& edges() const noexcept { return m_edges; }

    bool has_variable(const std::string& v) const
    {
        return std::find(m_variables.begin(), m_variables.end(), v) != m_variables.end();
    }

    void require_variable(const std::string& v, const char* operation) const
    {
        if (!has_variable(v)) {
            throw LookupError("tsgraph", operation, "unknown variable '" + v + "'");
        }
    }

    void add_edge(LaggedEdge e)
    {
        require_variable(e.src, "add_edge");
        require_variable(e.dst, "add_edge");
        if (e.lag < 1) {
            throw SchemaError("tsgraph", "add_edge",
                              "edge " + e.src + "->" + e.dst + " has lag " + std::to_string(e.lag) +
                                  "; contemporaneous or negative lags are not allowed");
        }
        if (e.weight && !(*e.weight >= 0.0)) {
            throw SchemaError("tsgraph", "add_edge", "edge weight must be non-negative");
        }
        auto pos = std::lower_bound(m_edges.begin(), m_edges.end(), e,
                                    [](const LaggedEdge& a, const LaggedEdge& b) { return a.key() < b.key(); });
        if (pos != m_edges.end() && pos->key() == e.key()) {
            throw SchemaError("tsgraph", "add_edge",
                              "duplicate edge " + e.src + "@" + std::to_string(e.lag) + "->" + e.dst);
        }
        m_edges.insert(pos, std::move(e));
    }

    bool remove_edge(const std::string& src, int lag, const std::string& dst)
    {
        auto it = std::find_if(m_edges.begin(), m_edges.end(),
                               [&](const LaggedEdge& e) { return e.src == src && e.lag == lag && e.dst == dst; });
        if (it == m_edges.end()) {
            return false;
        }
        m_edges.erase(it);
        return true;
    }

    const LaggedEdge* find_edge(const std::string& src, int lag, const std::string& dst) const
    {
        for (const auto& e : m_edges) {
            if (e.src == src && e.lag == lag && e.dst == dst) {
                return &e;
            }
        }
        return nullptr;
    }

    std::vector<const LaggedEdge*> incoming(const std::string& dst) const
    {
        std::vector<const LaggedEdge*> out;
        for (const auto& e : m_edges) {
            if (e.dst == dst) {
                out.push_back(&e);
            }
        }
        return out;
    }

    int max_lag() const
    {
        int m = 0;
        for (const auto& e : m_edges) {
            m = std::max(m, e.lag);
        }
        return m;
    }

    /// Parents of `node` in the unrolled graph: shifted by the node's own lag.
    NodeSet parents_of(const LaggedNode& node) const
    {
        require_variable(node.variable, "parents_of");
        NodeSet out;
        for (const auto& e : m_edges) {
            if (e.dst == node.variable) {
                out.insert({e.src, node.lag + e.lag});
            }
        }
        return out;
    }

    friend bool operator==(const StationaryGraph& a, const StationaryGraph& b)
    {
        if (a.m_variables != b.m_variables || a.m_edges.size() != b.m_edges.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.m_edges.size(); ++i) {
            if (a.m_edges[i].key() != b.m_edges[i].key() || a.m_edges[i].weight != b.m_edges[i].weight) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<std::string> m_variables;
    std::vector<LaggedEdge> m_edges; // sorted by (src, lag, dst)
};

inline NodeSet parents_of(const StationaryGraph& g, const LaggedNode& node) { return g.parents_of(node); }

/// Target variable plus two disjoint, non-empty bundles of source variables.
struct BundleSpec {
    std::string target;
    std::set<std::string> bundle_m;
    std::set<std::string> bundle_n;

    bool bundled(const std::string& v) const { return bundle_m.contains(v) || bundle_n.contains(v); }

    std::set<std::string> bundled_variables() const
    {
        auto out = bundle_m;
        out.insert(bundle_n.begin(), bundle_n.end());
        return out;
    }

    void validate(const std::vector<std::string>& known) const
    {
        if (bundle_m.empty() || bundle_n.empty()) {
            throw ConfigError("tsgraph", "bundle_spec", "both bundles must be non-empty");
        }
        for (const auto& v : bundle_m) {
            if (bundle_n.contains(v)) {
                throw ConfigError("tsgraph", "bundle_spec", "variable '" + v + "' is in both bundles");
            }
        }
        auto check = [&](const std::string& v) {
            if (std::find(known.begin(), known.end(), v) == known.end()) {
                throw LookupError("tsgraph", "bundle_spec", "unknown variable '" + v + "'",
                                  "names must match the data header");
            }
        };
        check(target);
        for (const auto& v : bundle_m) {
            check(v);
        }
        for (const auto& v : bundle_n) {
            check(v);
        }
    }
};

enum class Order { order0, order1 };

inline const char* to_string(Order o) { return o == Order::order0 ? "Order0" : "Order1"; }

inline Order parse_order(const std::string& s)
{
    if (s == "Order0" || s == "order0" || s == "0") {
        return Order::order0;
    }
    if (s == "Order1" || s == "order1" || s == "1") {
        return Order::order1;
    }
    throw ConfigError("tsgraph", "parse_order", "unknown order '" + s + "'", "use Order0 or Order1");
}

/// Bundled nodes with lag in [1, tau]: the immediate bundled history.
inline NodeSet immediate_history(const BundleSpec& b, int tau)
{
    NodeSet out;
    for (const auto& v : b.bundled_variables()) {
        for (int lag = 1; lag <= tau; ++lag) {
            out.insert({v, lag});
        }
    }
    return out;
}

/// Target parents inside the immediate bundled history.
inline NodeSet compute_V(const StationaryGraph& g, const BundleSpec& b, int tau)
{
    if (tau < 1) {
        throw PreconditionError("tsgraph", "compute_V", "tau must be >= 1");
    }
    NodeSet out;
    for (const auto& p : g.parents_of({b.target, 0})) {
        if (b.bundled(p.variable) && p.lag >= 1 && p.lag <= tau) {
            out.insert(p);
        }
    }
    return out;
}

/**
 * Distant bundled nodes that feed the immediate bundled history, extended
 * with the target's own bundled parents beyond tau so that V and W together
 * cover every bundled parent of the target.
 */
inline NodeSet compute_W(const StationaryGraph& g, const BundleSpec& b, int tau)
{
    if (tau < 1) {
        throw PreconditionError("tsgraph", "compute_W", "tau must be >= 1");
    }
    NodeSet candidates = g.parents_of({b.target, 0});
    for (const auto& v : b.bundled_variables()) {
        g.require_variable(v, "compute_W");
        for (const auto* e : g.incoming(v)) {
            for (int lag = 1; lag <= tau; ++lag) {
                candidates.insert({e->src, lag + e->lag});
            }
        }
    }
    NodeSet out;
    for (const auto& c : candidates) {
        if (b.bundled(c.variable) && c.lag > tau) {
            out.insert(c);
        }
    }
    return out;
}

inline NodeSet compute_F(const StationaryGraph& g, const BundleSpec& b, Order order)
{
    if (order == Order::order0) {
        return {};
    }
    NodeSet out;
    for (const auto& p : g.parents_of({b.target, 0})) {
        if (!b.bundled(p.variable)) {
            out.insert(p);
        }
    }
    return out;
}

inline std::pair<NodeSet, NodeSet> split_by_bundle(const NodeSet& nodes, const BundleSpec& b)
{
    NodeSet m;
    NodeSet n;
    for (const auto& node : nodes) {
        if (b.bundle_m.contains(node.variable)) {
            m.insert(node);
        }
        else if (b.bundle_n.contains(node.variable)) {
            n.insert(node);
        }
        else {
            throw ContractViolation("tsgraph", "split_by_bundle",
                                    "node " + to_string(node) + " is outside both bundles");
        }
    }
    return {std::move(m), std::move(n)};
}

struct AnalysisNodeSets {
    NodeSet v_nodes;
    NodeSet w_nodes;
    NodeSet f_nodes;
    int tau = 1;
    Order order = Order::order0;
};

inline AnalysisNodeSets compute_node_sets(const StationaryGraph& g, const BundleSpec& b, int tau, Order order)
{
    return {compute_V(g, b, tau), compute_W(g, b, tau), compute_F(g, b, order), tau, order};
}

// JSON: {"variables": [...], "edges": [{"src","lag","dst","weight"}]}

inline nlohmann::json graph_to_json(const StationaryGraph& g)
{
    nlohmann::json j;
    j["variables"] = g.variables();
    j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges()) {
        nlohmann::json je{{"src", e.src}, {"lag", e.lag}, {"dst", e.dst}};
        je["weight"] = e.weight ? nlohmann::json(*e.weight) : nlohmann::json(nullptr);
        j["edges"].push_back(std::move(je));
    }
    return j;
}

inline StationaryGraph graph_from_json(const nlohmann::json& j)
{
    try {
        StationaryGraph g(j.at("variables").get<std::vector<std::string>>());
        for (const auto& je : j.at("edges")) {
            LaggedEdge e;
            e.src = je.at("src").get<std::string>();
            e.lag = je.at("lag").get<int>();
            e.dst = je.at("dst").get<std::string>();
            if (je.contains("weight") && !je.at("weight").is_null()) {
                e.weight = je.at("weight").get<double>();
            }
            g.add_edge(std::move(e));
        }
        return g;
    }
    catch (const nlohmann::json::exception& ex) {
        throw ParseError("tsgraph", "load_graph", std::string("malformed graph JSON: ") + ex.what());
    }
}

inline StationaryGraph load_graph(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("tsgraph", "load_graph", "cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    }
    catch (const nlohmann::json::exception& ex) {
        throw ParseError("tsgraph", "load_graph", std::string("invalid JSON: ") + ex.what());
    }
    return graph_from_json(j);
}

inline void save_graph(const StationaryGraph& g, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("tsgraph", "save_graph", "cannot write '" + path + "'");
    }
    out << graph_to_json(g).dump(2) << '\n';
}

} // namespace bch

#endif
