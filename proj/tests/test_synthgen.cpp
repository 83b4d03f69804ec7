#include <cmath>

#include <gtest/gtest.h>

#include "bch/knn_info.hpp"
#include "bch/synthgen.hpp"
#include "test_support.hpp"

using namespace bch;

namespace {

double sample_cov(const TimeSeriesSet& ts, const LaggedNode& a, const LaggedNode& b)
{
    const auto s = extract_lagged_matrix(ts, NodeSet{a, b});
    const auto x = s.columns(NodeSet{a});
    const auto y = s.columns(NodeSet{b});
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
        mx += x(i, 0);
        my += y(i, 0);
    }
    mx /= static_cast<double>(s.rows());
    my /= static_cast<double>(s.rows());
    double c = 0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
        c += (x(i, 0) - mx) * (y(i, 0) - my);
    }
    return c / static_cast<double>(s.rows() - 1);
}

LinearVARSpec chain_spec(std::size_t length, std::uint64_t seed)
{
    LinearVARSpec s;
    s.variables = {"X", "Y", "Z"};
    s.coefficients = {{"X", 1, "X", 0.5}, {"X", 1, "Y", 0.7}, {"Y", 1, "Z", 0.7}, {"Z", 2, "Z", 0.3}};
    s.noise_sd = {1.0, 1.0, 1.0};
    s.length = length;
    s.seed = seed;
    return s;
}

// Independent route to Gamma(0): fixed-point iteration of S = C S C' + Q.
Eigen::MatrixXd iterated_gamma0(const LinearVARSpec& spec)
{
    const auto c = detail::companion(spec);
    const auto m = c.rows();
    const auto n = static_cast<Eigen::Index>(spec.variables.size());
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        q(i, i) = spec.noise_sd[static_cast<std::size_t>(i)] * spec.noise_sd[static_cast<std::size_t>(i)];
    }
    Eigen::MatrixXd s = q;
    for (int it = 0; it < 5000; ++it) {
        s = c * s * c.transpose() + q;
    }
    return s.topLeftCorner(n, n);
}

} // namespace

TEST(LinearVar, ArOneAutocorrelation)
{
    LinearVARSpec s;
    s.variables = {"A"};
    s.coefficients = {{"A", 1, "A", 0.8}};
    s.noise_sd = {1.0};
    s.length = 20000;
    s.seed = 11;
    const auto sys = gen_linear_var(s);
    const double r = sample_cov(sys.data, {"A", 0}, {"A", 1}) / sample_cov(sys.data, {"A", 0}, {"A", 0});
    EXPECT_NEAR(r, 0.8, 0.03);
    EXPECT_EQ(sys.data.length(), 20000u);
    ASSERT_EQ(sys.graph.edges().size(), 1u);
    EXPECT_EQ(sys.graph.edges()[0].lag, 1);
}

TEST(LinearVar, NonStationaryRejected)
{
    LinearVARSpec s;
    s.variables = {"A"};
    s.coefficients = {{"A", 1, "A", 1.2}};
    s.noise_sd = {1.0};
    try {
        gen_linear_var(s);
        FAIL();
    }
    catch (const StationarityError& e) {
        EXPECT_NE(std::string(e.what()).find("1.2"), std::string::npos);
    }
}

TEST(LinearVar, Deterministic)
{
    const auto a = gen_linear_var(chain_spec(500, 3));
    const auto b = gen_linear_var(chain_spec(500, 3));
    const auto c = gen_linear_var(chain_spec(500, 4));
    EXPECT_EQ(a.data.values(), b.data.values());
    EXPECT_NE(a.data.values(), c.data.values());
    EXPECT_EQ(a.graph, b.graph);
}

TEST(LinearVar, JsonRoundTrip)
{
    const auto s = chain_spec(700, 9);
    const auto back = linear_var_from_json(linear_var_to_json(s));
    EXPECT_EQ(back.variables, s.variables);
    EXPECT_EQ(back.coefficients.size(), s.coefficients.size());
    EXPECT_EQ(back.length, 700u);
    EXPECT_EQ(gen_linear_var(back).data.values(), gen_linear_var(s).data.values());
}

TEST(Autocovariance, ClosedFormAndLyapunov)
{
    LinearVARSpec s;
    s.variables = {"A"};
    s.coefficients = {{"A", 1, "A", 0.8}};
    s.noise_sd = {1.0};
    const VarAutocovariance acov(s);
    const double v = 1.0 / (1.0 - 0.64);
    EXPECT_NEAR(acov.gamma(0)(0, 0), v, 1e-12);
    EXPECT_NEAR(acov.gamma(3)(0, 0), v * 0.512, 1e-12);
    EXPECT_LE(acov.residual(), 1e-12);

    const auto spec = chain_spec(100, 0);
    const VarAutocovariance chain(spec);
    EXPECT_LE(chain.residual(), 1e-12);
    EXPECT_LE((chain.gamma(0) - iterated_gamma0(spec)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Autocovariance, MatchesLongSample)
{
    const auto spec = chain_spec(20000, 21);
    const VarAutocovariance acov(spec);
    const auto ts = gen_linear_var(spec).data;
    const std::vector<std::pair<LaggedNode, LaggedNode>> pairs = {
        {{"X", 0}, {"X", 0}}, {{"Z", 0}, {"Z", 0}}, {{"Y", 0}, {"X", 1}}, {{"Z", 0}, {"X", 2}}, {{"Z", 0}, {"Z", 2}}};
    for (const auto& [a, b] : pairs) {
        const double want = acov.covariance(a, b);
        EXPECT_NEAR(sample_cov(ts, a, b), want, 0.05 * std::abs(want) + 0.02) << to_string(a) << "," << to_string(b);
    }
}

TEST(GaussianOracle, ReferenceValues)
{
    LinearVARSpec s;
    s.variables = {"X", "Y"};
    s.coefficients = {{"X", 1, "Y", 0.6}};
    s.noise_sd = {1.0, 0.8};
    EXPECT_NEAR(gaussian_info_oracle(s, {{"X", 1}}, {{"Y", 0}}, {}), -0.5 * std::log(1 - 0.36), 1e-6);
    EXPECT_NEAR(gaussian_info_oracle(s, {{"X", 0}}, {{"Y", 0}}, {}), 0.0, 1e-12);
    EXPECT_NEAR(gaussian_info_oracle(s, {{"Y", 1}}, {{"Y", 0}}, {}), 0.0, 1e-12);

    const auto chain = chain_spec(100, 0);
    // Z@0 depends on X@2 only through Y@1 and its own past.
    EXPECT_NEAR(gaussian_info_oracle(chain, {{"X", 2}}, {{"Z", 0}}, {{"Y", 1}, {"Z", 2}}), 0.0, 1e-10);
    EXPECT_GT(gaussian_info_oracle(chain, {{"X", 2}}, {{"Z", 0}}, {}), 0.05);
    EXPECT_THROW(gaussian_info_oracle(chain, {}, {{"Z", 0}}, {}), PreconditionError);
}

TEST(GaussianOracle, KnnEstimatesAgree)
{
    const auto spec = chain_spec(8000, 5);
    const VarAutocovariance acov(spec);
    const auto ts = gen_linear_var(spec).data;
    struct Query {
        NodeSet x, y, z;
    };
    const std::vector<Query> queries = {
        {{{"X", 1}}, {{"Y", 0}}, {}},
        {{{"Y", 1}}, {{"Z", 0}}, {{"Z", 2}}},
        {{{"X", 2}}, {{"Z", 0}}, {}},
        {{{"X", 1}}, {{"X", 0}}, {{"Y", 1}}},
        {{{"X", 2}}, {{"Z", 0}}, {{"Y", 1}}},
    };
    std::vector<double> err;
    for (const auto& q : queries) {
        NodeSet all = q.x;
        all.insert(q.y.begin(), q.y.end());
        all.insert(q.z.begin(), q.z.end());
        const auto s = extract_lagged_matrix(ts, all);
        const double est = fp_cmi(s.columns(q.x), s.columns(q.y), s.columns(q.z), EstimatorConfig{}).value;
        err.push_back(std::abs(est - gaussian_info_oracle(acov, q.x, q.y, q.z)));
    }
    EXPECT_LE(test::median(err), 0.03);
}

TEST(Logistic, UncoupledMapsAreIndependent)
{
    LogisticNetworkSpec s;
    s.variables = {"A", "B"};
    s.self_weight = {1.0, 1.0};
    const auto sys = gen_logistic_network(s, 4000, 8);
    const auto ts = standardize(sys.data);
    const auto m = extract_lagged_matrix(ts, NodeSet{{"A", 1}, {"B", 0}});
    const double mi = ksg_mi(m.columns(NodeSet{{"A", 1}}), m.columns(NodeSet{{"B", 0}}), EstimatorConfig{}).value;
    EXPECT_NEAR(mi, 0.0, 0.02);
    EXPECT_EQ(sys.graph.edges().size(), 2u);
}

TEST(Logistic, CouplingCarriesInformation)
{
    LogisticNetworkSpec s;
    s.variables = {"A", "B"};
    s.self_weight = {1.0, 0.6};
    s.couplings = {{"A", 1, "B", 0.4}};
    const auto sys = gen_logistic_network(s, 4000, 8);
    EXPECT_TRUE(sys.graph.find_edge("A", 1, "B"));
    const auto ts = standardize(sys.data);
    const auto m = extract_lagged_matrix(ts, NodeSet{{"A", 1}, {"B", 0}});
    const double mi = ksg_mi(m.columns(NodeSet{{"A", 1}}), m.columns(NodeSet{{"B", 0}}), EstimatorConfig{}).value;
    EXPECT_GT(mi, 0.1);
}

TEST(Logistic, FixedPointRegimeIsDegenerate)
{
    LogisticNetworkSpec s;
    s.variables = {"A"};
    s.self_weight = {1.0};
    s.r = 2.5;
    s.burn_in = 2000;
    const auto sys = gen_logistic_network(s, 500, 1);
    EXPECT_THROW(standardize(sys.data), DegenerateVariableError);
}

TEST(Logistic, BadWeightsRejected)
{
    LogisticNetworkSpec s;
    s.variables = {"A", "B"};
    s.self_weight = {1.0, 0.8};
    s.couplings = {{"A", 1, "B", 0.4}};
    EXPECT_THROW(gen_logistic_network(s, 100, 1), ConfigError);
}
