#ifndef BCH_SYNTHGEN_HPP
#define BCH_SYNTHGEN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "bch/error.hpp"
#include "bch/timeseries.hpp"
#include "bch/tsgraph.hpp"

namespace bch {

struct VarCoefficient {
    std::string src;
    int lag = 1;
    std::string dst;
    double coefficient = 0.0;
};

/// Linear Gaussian VAR: X_t = sum_l A_l X_{t-l} + diag(noise_sd) e_t.
struct LinearVARSpec {
    std::vector<std::string> variables;
    std::vector<VarCoefficient> coefficients;
    std::vector<double> noise_sd;
    std::size_t length = 1000;
    std::uint64_t seed = 0;
    std::size_t burn_in = 500;

    std::size_t index_of(const std::string& v) const
    {
        auto it = std::find(variables.begin(), variables.end(), v);
        if (it == variables.end()) {
            throw LookupError("synthgen", "linear_var", "unknown variable '" + v + "'");
        }
        return static_cast<std::size_t>(it - variables.begin());
    }

    int order() const
    {
        int p = 1;
        for (const auto& c : coefficients) {
            p = std::max(p, c.lag);
        }
        return p;
    }
};

struct SyntheticSystem {
    TimeSeriesSet data;
    StationaryGraph graph;
};

namespace detail {

inline void validate_spec(const LinearVARSpec& spec)
{
    if (spec.variables.empty()) {
        throw ConfigError("synthgen", "linear_var", "no variables");
    }
    if (spec.noise_sd.size() != spec.variables.size()) {
        throw ConfigError("synthgen", "linear_var", "noise_sd needs one entry per variable");
    }
    for (double s : spec.noise_sd) {
        if (!(s > 0.0)) {
            throw ConfigError("synthgen", "linear_var", "noise_sd entries must be positive");
        }
    }
    for (const auto& c : spec.coefficients) {
        spec.index_of(c.src);
        spec.index_of(c.dst);
        if (c.lag < 1) {
            throw ConfigError("synthgen", "linear_var", "coefficient lags must be >= 1");
        }
    }
}

/// Lag matrices A_1..A_p, with A_l(dst, src) = coefficient.
inline std::vector<Eigen::MatrixXd> lag_matrices(const LinearVARSpec& spec)
{
    const auto n = static_cast<Eigen::Index>(spec.variables.size());
    std::vector<Eigen::MatrixXd> a(static_cast<std::size_t>(spec.order()), Eigen::MatrixXd::Zero(n, n));
    for (const auto& c : spec.coefficients) {
        a[static_cast<std::size_t>(c.lag - 1)](static_cast<Eigen::Index>(spec.index_of(c.dst)),
                                               static_cast<Eigen::Index>(spec.index_of(c.src))) += c.coefficient;
    }
    return a;
}

inline Eigen::MatrixXd companion(const LinearVARSpec& spec)
{
    const auto a = lag_matrices(spec);
    const auto n = static_cast<Eigen::Index>(spec.variables.size());
    const auto p = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n * p, n * p);
    for (Eigen::Index l = 0; l < p; ++l) {
        c.block(0, l * n, n, n) = a[static_cast<std::size_t>(l)];
    }
    if (p > 1) {
        c.block(n, 0, n * (p - 1), n * (p - 1)).setIdentity();
    }
    return c;
}

} // namespace detail

inline double spectral_radius(const LinearVARSpec& spec)
{
    detail::validate_spec(spec);
    const Eigen::MatrixXd c = detail::companion(spec);
    Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline void require_stationary(const LinearVARSpec& spec)
{
    const double rho = spectral_radius(spec);
    if (!(rho < 1.0)) {
        throw StationarityError("synthgen", "gen_linear_var",
                                "companion spectral radius " + std::to_string(rho) + " is not below 1",
                                "shrink the coefficients");
    }
}

/// The graph whose edges are the non-zero coefficients.
inline StationaryGraph true_graph(const LinearVARSpec& spec)
{
    StationaryGraph g(spec.variables);
    std::map<std::tuple<std::string, int, std::string>, double> merged;
    for (const auto& c : spec.coefficients) {
        merged[{c.src, c.lag, c.dst}] += c.coefficient;
    }
    for (const auto& [key, coef] : merged) {
        if (coef != 0.0) {
            g.add_edge({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::nullopt});
        }
    }
    return g;
}

inline SyntheticSystem gen_linear_var(const LinearVARSpec& spec)
{
    require_stationary(spec);
    const std::size_t n = spec.variables.size();
    const auto a = detail::lag_matrices(spec);
    const std::size_t p = a.size();
    const std::size_t total = spec.length + spec.burn_in;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x((total + p) * n, 0.0);
    for (std::size_t t = p; t < total + p; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = spec.noise_sd[i] * normal(rng);
            for (std::size_t l = 0; l < p; ++l) {
                for (std::size_t j = 0; j < n; ++j) {
                    v += a[l](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[(t - l - 1) * n + j];
                }
            }
            x[t * n + i] = v;
        }
    }
    std::vector<double> kept(x.begin() + static_cast<std::ptrdiff_t>((p + spec.burn_in) * n), x.end());
    return {TimeSeriesSet(spec.variables, spec.length, std::move(kept)), true_graph(spec)};
}

/**
 * Stationary autocovariances of a LinearVARSpec.
 *
 * Gamma(h) = Cov(X_t, X_{t-h}); lags up to order-1 come from the companion
 * Lyapunov equation S = C S C' + Q, larger lags from the Yule-Walker recursion.
 */
class VarAutocovariance {
public:
    explicit VarAutocovariance(const LinearVARSpec& spec)
        : m_spec(spec), m_lags(detail::lag_matrices(spec))
    {
        require_stationary(spec);
        const auto n = static_cast<Eigen::Index>(spec.variables.size());
        const auto p = static_cast<Eigen::Index>(m_lags.size());
        const Eigen::Index m = n * p;
        const Eigen::MatrixXd c = detail::companion(spec);
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < n; ++i) {
            q(i, i) = spec.noise_sd[static_cast<std::size_t>(i)] * spec.noise_sd[static_cast<std::size_t>(i)];
        }
        // vec(S) = (I - C (x) C)^{-1} vec(Q)
        Eigen::MatrixXd kron(m * m, m * m);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                kron.block(i * m, j * m, m, m) = c(i, j) * c;
            }
        }
        const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(m * m, m * m) - kron;
        const Eigen::VectorXd vq = Eigen::Map<const Eigen::VectorXd>(q.data(), m * m);
        const Eigen::VectorXd vs = lhs.partialPivLu().solve(vq);
        Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(vs.data(), m, m);
        s = 0.5 * (s + s.transpose());
        m_residual = (s - c * s * c.transpose() - q).cwiseAbs().maxCoeff();
        for (Eigen::Index h = 0; h < p; ++h) {
            m_gamma.push_back(s.block(0, h * n, n, n));
        }
    }

    /// Max-abs residual of the Lyapunov equation.
    double residual() const noexcept { return m_residual; }

    Eigen::MatrixXd gamma(std::size_t h) const
    {
        while (m_gamma.size() <= h) {
            const std::size_t next = m_gamma.size();
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m_gamma[0].rows(), m_gamma[0].cols());
            for (std::size_t l = 0; l < m_lags.size(); ++l) {
                g += m_lags[l] * m_gamma[next - l - 1];
            }
            m_gamma.push_back(std::move(g));
        }
        return m_gamma[h];
    }

    /// Cov(x_a(t - lag_a), x_b(t - lag_b)).
    double covariance(const LaggedNode& a, const LaggedNode& b) const
    {
        const auto i = static_cast<Eigen::Index>(m_spec.index_of(a.variable));
        const auto j = static_cast<Eigen::Index>(m_spec.index_of(b.variable));
        if (b.lag >= a.lag) {
            return gamma(static_cast<std::size_t>(b.lag - a.lag))(i, j);
        }
        return gamma(static_cast<std::size_t>(a.lag - b.lag))(j, i);
    }

    Eigen::MatrixXd covariance(const std::vector<LaggedNode>& nodes) const
    {
        const auto d = static_cast<Eigen::Index>(nodes.size());
        Eigen::MatrixXd out(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                out(r, c) = covariance(nodes[static_cast<std::size_t>(r)], nodes[static_cast<std::size_t>(c)]);
            }
        }
        return out;
    }

private:
    LinearVARSpec m_spec;
    std::vector<Eigen::MatrixXd> m_lags;
    mutable std::vector<Eigen::MatrixXd> m_gamma;
    double m_residual = 0.0;
};

/**
 * Exact Gaussian I(X;Y|Z) in nats for lagged node sets of a stationary VAR:
 *   0.5 ln( det S_XZ det S_YZ / (det S_Z det S_XYZ) ).
 */
inline double gaussian_info_oracle(const VarAutocovariance& acov, const NodeSet& x, const NodeSet& y,
                                   const NodeSet& z)
{
    if (x.empty() || y.empty()) {
        throw PreconditionError("synthgen", "gaussian_info_oracle", "X and Y must be non-empty");
    }
    auto logdet = [&](std::vector<LaggedNode> nodes) {
        if (nodes.empty()) {
            return 0.0;
        }
        const Eigen::MatrixXd s = acov.covariance(nodes);
        Eigen::LLT<Eigen::MatrixXd> llt(s);
        if (llt.info() != Eigen::Success) {
            throw OracleDegenerateError("synthgen", "gaussian_info_oracle", "covariance is singular");
        }
        const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
        double ld = 0.0;
        for (Eigen::Index i = 0; i < diag.size(); ++i) {
            if (!(diag(i) > 1e-12)) {
                throw OracleDegenerateError("synthgen", "gaussian_info_oracle", "covariance is singular");
            }
            ld += 2.0 * std::log(diag(i));
        }
        return ld;
    };
    auto join = [](std::initializer_list<const NodeSet*> sets) {
        std::vector<LaggedNode> out;
        for (const auto* s : sets) {
            out.insert(out.end(), s->begin(), s->end());
        }
        return out;
    };
    return 0.5 * (logdet(join({&x, &z})) + logdet(join({&y, &z})) - logdet(join({&z})) - logdet(join({&x, &y, &z})));
}

inline double gaussian_info_oracle(const LinearVARSpec& spec, const NodeSet& x, const NodeSet& y, const NodeSet& z)
{
    return gaussian_info_oracle(VarAutocovariance(spec), x, y, z);
}

struct LogisticCoupling {
    std::string src;
    int lag = 1;
    std::string dst;
    double coupling = 0.0;
};

/**
 * Coupled logistic maps
 *   x_i(t) = f(a_i x_i(t-1) + sum_j c_ji x_j(t-lag)),  f(u) = r u (1 - u).
 * The argument stays in [0, 1] when a_i plus incoming couplings sum to at most 1.
 */
struct LogisticNetworkSpec {
    std::vector<std::string> variables;
    std::vector<double> self_weight;
    std::vector<LogisticCoupling> couplings;
    double r = 4.0;
    std::size_t burn_in = 200;
};

inline SyntheticSystem gen_logistic_network(const LogisticNetworkSpec& spec, std::size_t length, std::uint64_t seed)
{
    const std::size_t n = spec.variables.size();
    if (n == 0 || spec.self_weight.size() != n) {
        throw ConfigError("synthgen", "gen_logistic_network", "need one self weight per variable");
    }
    if (!(spec.r > 0.0 && spec.r <= 4.0)) {
        throw ConfigError("synthgen", "gen_logistic_network", "logistic parameter must lie in (0, 4]");
    }
    StationaryGraph g(spec.variables);
    auto index = [&](const std::string& v) {
        auto it = std::find(spec.variables.begin(), spec.variables.end(), v);
        if (it == spec.variables.end()) {
            throw LookupError("synthgen", "gen_logistic_network", "unknown variable '" + v + "'");
        }
        return static_cast<std::size_t>(it - spec.variables.begin());
    };
    std::vector<double> weight_sum(spec.self_weight);
    int max_lag = 1;
    for (const auto& c : spec.couplings) {
        if (c.lag < 1 || c.coupling < 0.0) {
            throw ConfigError("synthgen", "gen_logistic_network", "couplings need lag >= 1 and weight >= 0");
        }
        weight_sum[index(c.dst)] += c.coupling;
        max_lag = std::max(max_lag, c.lag);
        if (c.coupling > 0.0) {
            g.add_edge({c.src, c.lag, c.dst, std::nullopt});
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (spec.self_weight[i] < 0.0 || weight_sum[i] > 1.0 + 1e-12) {
            throw ConfigError("synthgen", "gen_logistic_network",
                              "weights into '" + spec.variables[i] + "' must be non-negative and sum to <= 1");
        }
        if (spec.self_weight[i] > 0.0) {
            g.add_edge({spec.variables[i], 1, spec.variables[i], std::nullopt});
        }
    }

    const std::size_t total = length + spec.burn_in;
    const auto offset = static_cast<std::size_t>(max_lag);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> init(0.05, 0.95);
    std::vector<double> x((total + offset) * n);
    for (std::size_t t = 0; t < offset; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            x[t * n + i] = init(rng);
        }
    }
    for (std::size_t t = offset; t < total + offset; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double u = spec.self_weight[i] * x[(t - 1) * n + i];
            for (const auto& c : spec.couplings) {
                if (index(c.dst) == i) {
                    u += c.coupling * x[(t - static_cast<std::size_t>(c.lag)) * n + index(c.src)];
                }
            }
            const double v = spec.r * u * (1.0 - u);
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                throw InstabilityError("synthgen", "gen_logistic_network",
                                       "trajectory left [0, 1] at step " + std::to_string(t - offset));
            }
            x[t * n + i] = v;
        }
    }
    std::vector<double> kept(x.begin() + static_cast<std::ptrdiff_t>((offset + spec.burn_in) * n), x.end());
    return {TimeSeriesSet(spec.variables, length, std::move(kept)), std::move(g)};
}

// Spec files: the graph JSON family plus "coefficients" and generation fields.

inline LinearVARSpec linear_var_from_json(const nlohmann::json& j)
{
    try {
        LinearVARSpec s;
        s.variables = j.at("variables").get<std::vector<std::string>>();
        for (const auto& c : j.at("coefficients")) {
            s.coefficients.push_back({c.at("src").get<std::string>(), c.at("lag").get<int>(),
                                      c.at("dst").get<std::string>(), c.at("coefficient").get<double>()});
        }
        const auto& sd = j.contains("noise_sd") ? j.at("noise_sd") : nlohmann::json(1.0);
        if (sd.is_array()) {
            s.noise_sd = sd.get<std::vector<double>>();
        }
        else {
            s.noise_sd.assign(s.variables.size(), sd.get<double>());
        }
        s.length = j.value("length", std::size_t{1000});
        s.seed = j.value("seed", std::uint64_t{0});
        s.burn_in = j.value("burn_in", std::size_t{500});
        detail::validate_spec(s);
        return s;
    }
    catch (const nlohmann::json::exception& ex) {
        throw ParseError("synthgen", "load_spec", std::string("malformed VAR spec: ") + ex.what());
    }
}

inline nlohmann::json linear_var_to_json(const LinearVARSpec& s)
{
    nlohmann::json j;
    j["model"] = "linear_var";
    j["variables"] = s.variables;
    j["coefficients"] = nlohmann::json::array();
    for (const auto& c : s.coefficients) {
        j["coefficients"].push_back({{"src", c.src}, {"lag", c.lag}, {"dst", c.dst}, {"coefficient", c.coefficient}});
    }
    j["noise_sd"] = s.noise_sd;
    j["length"] = s.length;
    j["seed"] = s.seed;
    j["burn_in"] = s.burn_in;
    return j;
}

inline LogisticNetworkSpec logistic_from_json(const nlohmann::json& j)
{
    try {
        LogisticNetworkSpec s;
        s.variables = j.at("variables").get<std::vector<std::string>>();
        const auto& sw = j.at("self_weight");
        if (sw.is_array()) {
            s.self_weight = sw.get<std::vector<double>>();
        }
        else {
            s.self_weight.assign(s.variables.size(), sw.get<double>());
        }
        for (const auto& c : j.value("couplings", nlohmann::json::array())) {
            s.couplings.push_back({c.at("src").get<std::string>(), c.at("lag").get<int>(),
                                   c.at("dst").get<std::string>(), c.at("coupling").get<double>()});
        }
        s.r = j.value("r", 4.0);
        s.burn_in = j.value("burn_in", std::size_t{200});
        return s;
    }
    catch (const nlohmann::json::exception& ex) {
        throw ParseError("synthgen", "load_spec", std::string("malformed logistic spec: ") + ex.what());
    }
}

} // namespace bch

#endif
