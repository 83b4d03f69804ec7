#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "bch/bundle_analysis.hpp"
#include "bch/synthgen.hpp"

using namespace bch;

namespace {

const BundleSpec bundle{"Z", {"M"}, {"N"}};

StationaryGraph graph(std::initializer_list<LaggedEdge> edges)
{
    StationaryGraph g({"M", "N", "Z"});
    for (const auto& e : edges) {
        g.add_edge(e);
    }
    return g;
}

SyntheticSystem system(std::vector<VarCoefficient> coefs, std::size_t n, std::uint64_t seed)
{
    LinearVARSpec s;
    s.variables = {"M", "N", "Z"};
    s.coefficients = std::move(coefs);
    s.noise_sd = {1, 1, 1};
    s.length = n;
    s.seed = seed;
    return gen_linear_var(s);
}

void expect_pid_bookkeeping(const HistoryDecomposition& h)
{
    EXPECT_NEAR(h.pid_j.total, h.immediate, 1e-9);
    EXPECT_NEAR(h.pid_d.total, h.distant, 1e-9);
    EXPECT_DOUBLE_EQ(h.pid_t.redundant, h.pid_j.redundant + h.pid_d.redundant);
    EXPECT_DOUBLE_EQ(h.pid_t.synergistic, h.pid_j.synergistic + h.pid_d.synergistic);
    EXPECT_DOUBLE_EQ(h.pid_t.unique_m, h.pid_j.unique_m + h.pid_d.unique_m);
    EXPECT_DOUBLE_EQ(h.pid_t.unique_n, h.pid_j.unique_n + h.pid_d.unique_n);
    EXPECT_DOUBLE_EQ(h.chain_residual, h.total - h.immediate - h.distant);
}

} // namespace

TEST(AnalyzeAtLag, IndependentBundlesCarryNothing)
{
    // The graph claims M and N drive Z, but the data are independent.
    const auto sys = system({{"M", 1, "M", 0.5}, {"N", 1, "N", 0.5}}, 4000, 1);
    const auto g = graph({{"M", 1, "M"}, {"N", 1, "N"}, {"M", 1, "Z"}, {"N", 2, "Z"}});
    for (Order o : {Order::order0, Order::order1}) {
        const auto h = analyze_at_lag(sys.data, g, bundle, 1, o, EstimatorConfig{});
        EXPECT_GT(h.v_size, 0u);
        EXPECT_GT(h.w_size, 0u);
        EXPECT_NEAR(h.total, 0.0, 0.05);
        EXPECT_NEAR(h.immediate, 0.0, 0.05);
        EXPECT_NEAR(h.distant, 0.0, 0.05);
        expect_pid_bookkeeping(h);
    }
}

TEST(AnalyzeAtLag, EmptyDistantHistoryIsExact)
{
    const auto sys = system({{"M", 1, "Z", 0.6}, {"N", 2, "Z", 0.4}}, 2000, 2);
    const auto g = graph({{"M", 1, "Z"}, {"N", 2, "Z"}});
    const auto h = analyze_at_lag(sys.data, g, bundle, 3, Order::order0, EstimatorConfig{});
    EXPECT_EQ(h.w_size, 0u);
    EXPECT_EQ(h.v_size, 2u);
    EXPECT_EQ(h.distant, 0.0);
    EXPECT_EQ(h.total, h.immediate);
    EXPECT_EQ(h.chain_residual, 0.0);
    EXPECT_GT(h.total, 0.2);
    EXPECT_EQ(h.pid_d.sum(), 0.0);
    expect_pid_bookkeeping(h);
}

TEST(AnalyzeAtLag, EmptyImmediateHistory)
{
    // Z's only bundled parent is three steps back, so V is empty at tau = 2.
    const auto sys = system({{"M", 3, "Z", 0.6}}, 2000, 3);
    const auto g = graph({{"M", 3, "Z"}});
    const auto h = analyze_at_lag(sys.data, g, bundle, 2, Order::order0, EstimatorConfig{});
    EXPECT_EQ(h.v_size, 0u);
    EXPECT_EQ(h.total, 0.0);
    EXPECT_EQ(h.immediate, 0.0);
    EXPECT_GT(h.distant, 0.1);
    EXPECT_DOUBLE_EQ(h.chain_residual, -h.distant);
    expect_pid_bookkeeping(h);
}

TEST(AnalyzeAtLag, NoBundledParents)
{
    const auto sys = system({}, 300, 4);
    const auto h = analyze_at_lag(sys.data, graph({}), bundle, 2, Order::order1, EstimatorConfig{});
    EXPECT_EQ(h.total, 0.0);
    EXPECT_EQ(h.distant, 0.0);
    EXPECT_EQ(h.sample_count, 0u);
}

TEST(AnalyzeAtLag, ChainRuleWhenNodeSetsAreComplete)
{
    // Order-1 with tau at the target's largest lag: V and F hold every parent.
    const std::vector<VarCoefficient> coefs{{"M", 1, "M", 0.6}, {"N", 1, "N", 0.5}, {"M", 1, "Z", 0.5},
                                            {"N", 2, "Z", 0.4}, {"Z", 1, "Z", 0.3}};
    const auto sys = system(coefs, 4000, 5);
    const auto h = analyze_at_lag(sys.data, sys.graph, bundle, 2, Order::order1, EstimatorConfig{});
    EXPECT_GT(h.w_size, 0u);
    EXPECT_EQ(h.f_size, 1u);
    EXPECT_LE(std::abs(h.chain_residual), 0.05);
    expect_pid_bookkeeping(h);
}

TEST(AnalyzeAtLag, DirectTotalDecomposition)
{
    const std::vector<VarCoefficient> coefs{{"M", 1, "M", 0.6}, {"M", 1, "Z", 0.5}, {"N", 1, "Z", 0.4}};
    const auto sys = system(coefs, 2000, 6);
    AnalysisOptions opt;
    opt.direct_total_pid = true;
    const auto h = analyze_at_lag(sys.data, sys.graph, bundle, 1, Order::order0, opt);
    ASSERT_TRUE(h.pid_t_direct.has_value());
    EXPECT_DOUBLE_EQ(h.pid_t_direct->total, h.total);
}

TEST(AnalyzeAtLag, ReducedDistantHistory)
{
    const std::vector<VarCoefficient> coefs{{"M", 1, "M", 0.7}, {"M", 2, "M", 0.05}, {"M", 1, "Z", 0.6}};
    const auto sys = system(coefs, 3000, 7);
    AnalysisOptions opt;
    opt.use_miwtr = true;
    const auto h = analyze_at_lag(sys.data, sys.graph, bundle, 1, Order::order0, opt);
    EXPECT_EQ(h.w_size_before_reduction, 2u);
    EXPECT_LT(h.w_size, h.w_size_before_reduction);
    expect_pid_bookkeeping(h);
}

namespace {

TimeSeriesSet gappy(TimeSeriesSet ts, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto values = ts.values();
    for (auto& v : values) {
        if (rng() % 53 == 0) {
            v = std::nan("");
        }
    }
    return TimeSeriesSet(ts.variable_names(), ts.length(), std::move(values));
}

std::size_t complete_rows(const TimeSeriesSet& ts, const StationaryGraph& g, int tau, Order order)
{
    NodeSet nodes = compute_V(g, bundle, tau);
    for (const auto& n : compute_W(g, bundle, tau)) {
        nodes.insert(n);
    }
    for (const auto& n : compute_F(g, bundle, order)) {
        nodes.insert(n);
    }
    nodes.insert({"Z", 0});
    int max_lag = 0;
    for (const auto& n : nodes) {
        max_lag = std::max(max_lag, n.lag);
    }
    std::size_t count = 0;
    for (std::size_t t = static_cast<std::size_t>(max_lag); t < ts.length(); ++t) {
        bool ok = true;
        for (const auto& n : nodes) {
            ok = ok && !std::isnan(ts.at(t - static_cast<std::size_t>(n.lag), ts.index_of(n.variable)));
        }
        count += ok ? 1 : 0;
    }
    return count;
}

} // namespace

TEST(Sweep, BookkeepingOnGappyData)
{
    const std::vector<VarCoefficient> coefs{{"M", 1, "M", 0.6}, {"N", 1, "N", 0.6}, {"M", 1, "Z", 0.5},
                                            {"N", 1, "Z", 0.4}};
    const auto sys = system(coefs, 1500, 8);
    const auto ts = gappy(sys.data, 8);
    SweepConfig sc;
    sc.tau_values = {1, 2, 4, 8};
    sc.k_values = {5, 8};
    const auto rows = sweep(ts, sys.graph, bundle, sc);
    ASSERT_EQ(rows.size(), 16u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i - 1];
        const auto& b = rows[i];
        EXPECT_LE(std::tuple(a.order, a.k, a.tau), std::tuple(b.order, b.k, b.tau));
    }
    for (const auto& r : rows) {
        EXPECT_EQ(r.sample_count, complete_rows(ts, sys.graph, r.tau, r.order));
    }
    EXPECT_GT(rows.front().sample_count, rows[3].sample_count);
    EXPECT_EQ(rows.front().k, 5);
    EXPECT_EQ(rows.back().k, 8);
    for (const auto& r : rows) {
        EXPECT_TRUE(r.error.empty());
        expect_pid_bookkeeping(r);
    }
}

TEST(Sweep, SingleCell)
{
    const auto sys = system({{"M", 1, "Z", 0.5}}, 500, 9);
    SweepConfig sc;
    sc.tau_values = {2};
    sc.orders = {Order::order1};
    EXPECT_EQ(sweep(sys.data, sys.graph, bundle, sc).size(), 1u);
}

TEST(Sweep, FailedCellsBecomeGapRows)
{
    const auto sys = system({{"M", 1, "M", 0.5}, {"M", 1, "Z", 0.5}}, 60, 10);
    SweepConfig sc;
    sc.tau_values = {1, 20, 70};
    sc.orders = {Order::order0};
    std::vector<std::string> messages;
    const auto rows = sweep(sys.data, sys.graph, bundle, sc, &messages);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(rows[0].error.empty());
    EXPECT_EQ(rows[2].error, "data");
    ASSERT_FALSE(messages.empty());
    EXPECT_NE(messages.back().find("tau=70"), std::string::npos);

    sc.tau_values = {70, 80};
    EXPECT_THROW(sweep(sys.data, sys.graph, bundle, sc), InsufficientDataError);
}

TEST(Sweep, ConfigValidation)
{
    const auto sys = system({}, 100, 1);
    SweepConfig sc;
    EXPECT_THROW(sweep(sys.data, sys.graph, bundle, sc), ConfigError);
    sc.tau_values = {3, 2};
    EXPECT_THROW(sweep(sys.data, sys.graph, bundle, sc), ConfigError);
    sc.tau_values = {1};
    sc.k_values = {0};
    EXPECT_THROW(sweep(sys.data, sys.graph, bundle, sc), ConfigError);
    sc.k_values = {5};
    EXPECT_THROW(sweep(sys.data, sys.graph, BundleSpec{"Z", {"M"}, {"M"}}, sc), ConfigError);
}

TEST(SweepCsv, RoundTripAndDeterminism)
{
    const std::vector<VarCoefficient> coefs{{"M", 1, "M", 0.6}, {"M", 1, "Z", 0.5}, {"N", 2, "Z", 0.3}};
    const auto sys = system(coefs, 120, 11);
    SweepConfig sc;
    sc.tau_values = {1, 3, 200};
    auto first = sweep(sys.data, sys.graph, bundle, sc);
    std::ostringstream a, b;
    write_sweep_csv(a, first);
    write_sweep_csv(b, sweep(sys.data, sys.graph, bundle, sc));
    EXPECT_EQ(a.str(), b.str());

    std::istringstream in(a.str());
    const auto rows = read_sweep_csv(in);
    ASSERT_EQ(rows.size(), first.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].tau, first[i].tau);
        EXPECT_EQ(rows[i].order, to_string(first[i].order));
        EXPECT_EQ(rows[i].error, first[i].error);
        if (first[i].error.empty()) {
            EXPECT_EQ(*rows[i].get("T"), first[i].total);
            EXPECT_EQ(*rows[i].get("Um_J"), first[i].pid_j.unique_m);
            EXPECT_EQ(*rows[i].get("sample_count"), static_cast<double>(first[i].sample_count));
        }
        else {
            EXPECT_FALSE(rows[i].get("T").has_value());
        }
    }
    EXPECT_EQ(rows.back().error, "data");
}

TEST(SweepCsv, MalformedInput)
{
    std::istringstream bad_header("order,k\n");
    EXPECT_THROW(read_sweep_csv(bad_header), ParseError);
    std::ostringstream os;
    write_sweep_csv(os, {});
    std::istringstream short_row(os.str() + "Order0,5,1,2\n");
    try {
        read_sweep_csv(short_row);
        FAIL();
    }
    catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    }
}
