#ifndef BCH_KNN_INFO_HPP
#define BCH_KNN_INFO_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "bch/detail/kdtree.hpp"
#include "bch/error.hpp"
#include "bch/sample_matrix.hpp"

namespace bch {

/// k-nearest-neighbour estimator settings. The metric is always the max norm.
struct EstimatorConfig {
    int k = 5;
    /// Half-width of the uniform tie-breaking jitter, in standardized units.
    double noise_amplitude = 1e-10;
    std::uint64_t seed = 0;
};

/// An information value in nats. Raw kNN estimates may be negative.
struct InfoEstimate {
    double value = 0.0;
    std::size_t sample_count = 0;
    int k = 0;
    bool clamped = false;

    InfoEstimate clamp() const
    {
        InfoEstimate out = *this;
        if (out.value < 0.0) {
            out.value = 0.0;
            out.clamped = true;
        }
        return out;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_column(const SampleMatrix& m, std::size_t c, std::uint64_t seed)
{
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC908ULL);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::uint64_t bits = 0;
        const double v = m(r, c);
        std::memcpy(&bits, &v, sizeof bits);
        h = splitmix64(h ^ bits);
    }
    return h;
}

/**
 * Adds seeded uniform jitter in [-a, a). The stream for each column is keyed
 * on the column's contents, so a variable receives the same jitter wherever
 * it appears and estimates do not depend on argument order.
 */
inline SampleMatrix jittered(const SampleMatrix& m, const EstimatorConfig& cfg)
{
    if (cfg.noise_amplitude <= 0.0 || !m.has_columns()) {
        return m;
    }
    SampleMatrix out = m;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        std::mt19937_64 rng(hash_column(m, c, cfg.seed));
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            out(r, c) += cfg.noise_amplitude * (2.0 * u - 1.0);
        }
    }
    return out;
}

/// digamma at a positive integer, memoized per thread.
inline double digamma(std::size_t n)
{
    thread_local std::vector<double> table{0.0};
    while (table.size() <= n) {
        table.push_back(boost::math::digamma(static_cast<double>(table.size())));
    }
    return table[n];
}

inline void check_config(const EstimatorConfig& cfg, std::size_t rows, std::size_t min_extra, const char* op)
{
    if (cfg.k < 1) {
        throw PreconditionError("knn_info", op, "k must be >= 1");
    }
    if (!(cfg.noise_amplitude >= 0.0)) {
        throw PreconditionError("knn_info", op, "noise amplitude must be >= 0");
    }
    if (rows < static_cast<std::size_t>(cfg.k) + min_extra) {
        throw InsufficientDataError("knn_info", op,
                                    std::to_string(rows) + " samples is too few for k = " + std::to_string(cfg.k));
    }
}

inline void check_radius(double eps, const char* op)
{
    if (!(eps > 0.0)) {
        throw DegenerateGeometryError("knn_info", op, "duplicate sample points give a zero neighbour distance",
                                      "enable tie-breaking jitter (noise_amplitude > 0)");
    }
}

} // namespace detail

/// Kozachenko-Leonenko differential entropy in nats.
inline InfoEstimate kl_entropy(const SampleMatrix& x, const EstimatorConfig& cfg)
{
    detail::check_config(cfg, x.rows(), 1, "kl_entropy");
    if (!x.has_columns()) {
        throw PreconditionError("knn_info", "kl_entropy", "sample matrix has no columns");
    }
    const SampleMatrix pts = detail::jittered(x, cfg);
    const detail::KdTree tree(pts);
    const std::size_t n = pts.rows();
    const auto k = static_cast<std::size_t>(cfg.k);
    double sum_log = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double eps = tree.kth_neighbor_distance(i, k);
        detail::check_radius(eps, "kl_entropy");
        sum_log += std::log(2.0 * eps);
    }
    const double d = static_cast<double>(pts.cols());
    const double h = detail::digamma(n) - detail::digamma(k) + d * sum_log / static_cast<double>(n);
    return {h, n, cfg.k, false};
}

/// Kraskov-Stoegbauer-Grassberger (algorithm 1) mutual information in nats.
inline InfoEstimate ksg_mi(const SampleMatrix& x, const SampleMatrix& y, const EstimatorConfig& cfg)
{
    if (x.rows() != y.rows()) {
        throw PreconditionError("knn_info", "ksg_mi", "row counts differ");
    }
    if (!x.has_columns() || !y.has_columns()) {
        throw PreconditionError("knn_info", "ksg_mi", "both arguments need at least one column");
    }
    detail::check_config(cfg, x.rows(), 2, "ksg_mi");
    const SampleMatrix jx = detail::jittered(x, cfg);
    const SampleMatrix jy = detail::jittered(y, cfg);
    const SampleMatrix joint = hconcat({&jx, &jy});
    const detail::KdTree joint_tree(joint);
    const detail::KdTree x_tree(jx);
    const detail::KdTree y_tree(jy);
    const std::size_t n = joint.rows();
    const auto k = static_cast<std::size_t>(cfg.k);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double eps = joint_tree.kth_neighbor_distance(i, k);
        detail::check_radius(eps, "ksg_mi");
        sum += detail::digamma(x_tree.count_within(i, eps) + 1) + detail::digamma(y_tree.count_within(i, eps) + 1);
    }
    const double mi = detail::digamma(k) + detail::digamma(n) - sum / static_cast<double>(n);
    return {mi, n, cfg.k, false};
}

/**
 * Frenzel-Pompe conditional mutual information I(X;Y|Z) in nats. An empty
 * condition (zero columns) reduces to ksg_mi exactly.
 */
inline InfoEstimate fp_cmi(const SampleMatrix& x, const SampleMatrix& y, const SampleMatrix& z,
                           const EstimatorConfig& cfg)
{
    if (!z.has_columns()) {
        return ksg_mi(x, y, cfg);
    }
    if (x.rows() != y.rows() || x.rows() != z.rows()) {
        throw PreconditionError("knn_info", "fp_cmi", "row counts differ");
    }
    if (!x.has_columns() || !y.has_columns()) {
        throw PreconditionError("knn_info", "fp_cmi", "X and Y need at least one column");
    }
    detail::check_config(cfg, x.rows(), 2, "fp_cmi");
    const SampleMatrix jx = detail::jittered(x, cfg);
    const SampleMatrix jy = detail::jittered(y, cfg);
    const SampleMatrix jz = detail::jittered(z, cfg);
    const SampleMatrix joint = hconcat({&jx, &jy, &jz});
    const SampleMatrix xz = hconcat({&jx, &jz});
    const SampleMatrix yz = hconcat({&jy, &jz});
    const detail::KdTree joint_tree(joint);
    const detail::KdTree xz_tree(xz);
    const detail::KdTree yz_tree(yz);
    const detail::KdTree z_tree(jz);
    const std::size_t n = joint.rows();
    const auto k = static_cast<std::size_t>(cfg.k);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double eps = joint_tree.kth_neighbor_distance(i, k);
        detail::check_radius(eps, "fp_cmi");
        sum += (detail::digamma(xz_tree.count_within(i, eps) + 1) + detail::digamma(yz_tree.count_within(i, eps) + 1)) -
               detail::digamma(z_tree.count_within(i, eps) + 1);
    }
    const double cmi = detail::digamma(k) - sum / static_cast<double>(n);
    return {cmi, n, cfg.k, false};
}

/// Callable adapters so permutation tests can take either estimator.
struct FpCmiEstimator {
    InfoEstimate operator()(const SampleMatrix& x, const SampleMatrix& y, const SampleMatrix& z,
                            const EstimatorConfig& cfg) const
    {
        return fp_cmi(x, y, z, cfg);
    }
};

struct KsgMiEstimator {
    InfoEstimate operator()(const SampleMatrix& x, const SampleMatrix& y, const SampleMatrix&,
                            const EstimatorConfig& cfg) const
    {
        return ksg_mi(x, y, cfg);
    }
};

/**
 * Permutation p-value (1 + #{permuted >= observed}) / (n_perm + 1), shuffling
 * the rows of X only. Each replicate draws from its own pre-generated seed.
 */
template <class Estimator>
double permutation_pvalue(Estimator&& estimate, const SampleMatrix& x, const SampleMatrix& y,
                          const SampleMatrix& z, const EstimatorConfig& cfg, int n_perm)
{
    if (n_perm < 19) {
        throw PreconditionError("knn_info", "permutation_pvalue", "n_perm must be >= 19");
    }
    const double observed = estimate(x, y, z, cfg).value;
    std::mt19937_64 seeder(detail::splitmix64(cfg.seed ^ 0xA5A5A5A55A5A5A5AULL));
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_perm));
    for (auto& s : seeds) {
        s = seeder();
    }
    std::vector<std::size_t> perm(x.rows());
    int exceed = 0;
    for (const auto s : seeds) {
        for (std::size_t i = 0; i < perm.size(); ++i) {
            perm[i] = i;
        }
        std::mt19937_64 rng(s);
        // Fisher-Yates with a fixed draw rule, independent of the library's shuffle.
        for (std::size_t i = perm.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(perm[i - 1], perm[j]);
        }
        const SampleMatrix shuffled = x.select_rows(perm);
        if (estimate(shuffled, y, z, cfg).value >= observed) {
            ++exceed;
        }
    }
    return static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
}

} // namespace bch

#endif
