#ifndef BCH_DETAIL_KDTREE_HPP
#define BCH_DETAIL_KDTREE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "bch/sample_matrix.hpp"

namespace bch::detail {

inline double max_norm(const double* a, const double* b, std::size_t dim)
{
    double d = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

/**
 * Exact kd-tree under the max norm.
 *
 * Box bounds are compared with the same floating-point differences used for
 * point distances, so counts agree with brute force bit for bit.
 */
class KdTree {
public:
    explicit KdTree(const SampleMatrix& points, std::size_t leaf_size = 12)
        : m_dim(points.cols()), m_n(points.rows()), m_leaf_size(std::max<std::size_t>(leaf_size, 1))
    {
        m_order.resize(m_n);
        std::iota(m_order.begin(), m_order.end(), std::size_t{0});
        m_source = &points;
        m_nodes.reserve(2 * (m_n / m_leaf_size + 1));
        if (m_dim == 1) {
            std::stable_sort(m_order.begin(), m_order.end(),
                             [&](std::size_t a, std::size_t b) { return points(a, 0) < points(b, 0); });
        }
        else if (m_n > 0) {
            build(0, m_n);
        }
        m_points.resize(m_n * m_dim);
        m_position.resize(m_n);
        m_leaf_of.assign(m_n, 0);
        for (std::size_t id = 0; id < m_nodes.size(); ++id) {
            if (m_nodes[id].leaf()) {
                for (std::size_t p = m_nodes[id].begin; p < m_nodes[id].end; ++p) {
                    m_leaf_of[p] = id;
                }
            }
        }
        for (std::size_t p = 0; p < m_n; ++p) {
            const auto r = points.row(m_order[p]);
            std::copy(r.begin(), r.end(), m_points.begin() + static_cast<std::ptrdiff_t>(p * m_dim));
            m_position[m_order[p]] = p;
        }
        m_source = nullptr;
    }

    std::size_t size() const noexcept { return m_n; }
    std::size_t dim() const noexcept { return m_dim; }

    /// Distance from point i to its k-th nearest other point.
    double kth_neighbor_distance(std::size_t i, std::size_t k) const
    {
        if (m_dim == 1) {
            return kth_on_line(m_position[i], k);
        }
        const std::size_t self = m_position[i];
        const double* q = point(self);
        std::vector<double> best(k, std::numeric_limits<double>::infinity());
        // Scan the query's own leaf first for a tight starting bound.
        const std::size_t home = m_leaf_of[self];
        scan_leaf(m_nodes[home], q, self, best);
        knn(0, q, self, home, best);
        return best.back();
    }

    /// Number of other points strictly closer than r to point i.
    std::size_t count_within(std::size_t i, double r) const
    {
        if (!(r > 0.0)) {
            return 0;
        }
        if (m_dim == 1) {
            return count_on_line(m_position[i], r);
        }
        const double* q = point(m_position[i]);
        // The query point itself is at distance 0 < r.
        return count(0, q, r) - 1;
    }

private:
    struct Node {
        std::size_t begin;
        std::size_t end;
        std::size_t left = 0;
        std::size_t right = 0;
        bool leaf() const { return left == 0; }
    };

    const double* lo(const Node& node) const { return m_lo.data() + static_cast<std::size_t>(&node - m_nodes.data()) * m_dim; }
    const double* hi(const Node& node) const { return m_hi.data() + static_cast<std::size_t>(&node - m_nodes.data()) * m_dim; }

    const double* point(std::size_t pos) const { return m_points.data() + pos * m_dim; }

    // One dimension: m_points is sorted, and fl(q - v) is monotone in v, so
    // both queries reduce to scans and binary searches with unchanged results.
    double kth_on_line(std::size_t pos, std::size_t k) const
    {
        const double q = m_points[pos];
        std::size_t left = pos;
        std::size_t right = pos + 1;
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t taken = 0; taken < k; ++taken) {
            const double dl = left > 0 ? q - m_points[left - 1] : std::numeric_limits<double>::infinity();
            const double dr = right < m_n ? m_points[right] - q : std::numeric_limits<double>::infinity();
            if (dl <= dr) {
                d = dl;
                --left;
            }
            else {
                d = dr;
                ++right;
            }
        }
        return d;
    }

    std::size_t count_on_line(std::size_t pos, double r) const
    {
        const double q = m_points[pos];
        const auto first = std::partition_point(m_points.begin(), m_points.end(),
                                                [&](double v) { return v < q && !(q - v < r); });
        const auto last =
            std::partition_point(first, m_points.end(), [&](double v) { return v <= q || v - q < r; });
        return static_cast<std::size_t>(last - first) - 1;
    }

    std::size_t build(std::size_t begin, std::size_t end)
    {
        const std::size_t id = m_nodes.size();
        m_nodes.push_back(Node{begin, end, 0, 0});
        std::vector<double> lo(m_dim, std::numeric_limits<double>::infinity());
        std::vector<double> hi(m_dim, -std::numeric_limits<double>::infinity());
        for (std::size_t p = begin; p < end; ++p) {
            const auto r = m_source->row(m_order[p]);
            for (std::size_t d = 0; d < m_dim; ++d) {
                lo[d] = std::min(lo[d], r[d]);
                hi[d] = std::max(hi[d], r[d]);
            }
        }
        if (end - begin > m_leaf_size && m_dim > 0) {
            std::size_t split = 0;
            double spread = -1.0;
            for (std::size_t d = 0; d < m_dim; ++d) {
                if (hi[d] - lo[d] > spread) {
                    spread = hi[d] - lo[d];
                    split = d;
                }
            }
            if (spread > 0.0) {
                const std::size_t mid = begin + (end - begin) / 2;
                std::nth_element(m_order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 m_order.begin() + static_cast<std::ptrdiff_t>(mid),
                                 m_order.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::size_t a, std::size_t b) {
                                     return (*m_source)(a, split) < (*m_source)(b, split);
                                 });
                const std::size_t l = build(begin, mid);
                const std::size_t r = build(mid, end);
                m_nodes[id].left = l;
                m_nodes[id].right = r;
            }
        }
        if (m_lo.size() < (id + 1) * m_dim) {
            m_lo.resize((id + 1) * m_dim);
            m_hi.resize((id + 1) * m_dim);
        }
        std::copy(lo.begin(), lo.end(), m_lo.begin() + static_cast<std::ptrdiff_t>(id * m_dim));
        std::copy(hi.begin(), hi.end(), m_hi.begin() + static_cast<std::ptrdiff_t>(id * m_dim));
        return id;
    }

    double min_box_distance(const Node& node, const double* q) const
    {
        const double* l = lo(node);
        const double* h = hi(node);
        double d = 0.0;
        for (std::size_t i = 0; i < m_dim; ++i) {
            if (q[i] < l[i]) {
                d = std::max(d, l[i] - q[i]);
            }
            else if (q[i] > h[i]) {
                d = std::max(d, q[i] - h[i]);
            }
        }
        return d;
    }

    double max_box_distance(const Node& node, const double* q) const
    {
        const double* l = lo(node);
        const double* h = hi(node);
        double d = 0.0;
        for (std::size_t i = 0; i < m_dim; ++i) {
            d = std::max({d, std::abs(q[i] - l[i]), std::abs(q[i] - h[i])});
        }
        return d;
    }

    void scan_leaf(const Node& node, const double* q, std::size_t self, std::vector<double>& best) const
    {
        for (std::size_t p = node.begin; p < node.end; ++p) {
            if (p == self) {
                continue;
            }
            const double d = max_norm(q, point(p), m_dim);
            if (d < best.back()) {
                auto pos = std::upper_bound(best.begin(), best.end(), d);
                std::copy_backward(pos, best.end() - 1, best.end());
                *pos = d;
            }
        }
    }

    // `best` holds the k smallest distances seen so far, ascending.
    void knn(std::size_t id, const double* q, std::size_t self, std::size_t skip, std::vector<double>& best) const
    {
        const Node& node = m_nodes[id];
        if (node.leaf()) {
            if (id != skip) {
                scan_leaf(node, q, self, best);
            }
            return;
        }
        const double dl = min_box_distance(m_nodes[node.left], q);
        const double dr = min_box_distance(m_nodes[node.right], q);
        const std::size_t near = dl <= dr ? node.left : node.right;
        const std::size_t far = dl <= dr ? node.right : node.left;
        if (std::min(dl, dr) < best.back()) {
            knn(near, q, self, skip, best);
        }
        if (std::max(dl, dr) < best.back()) {
            knn(far, q, self, skip, best);
        }
    }

    std::size_t count(std::size_t id, const double* q, double r) const
    {
        const Node& node = m_nodes[id];
        if (min_box_distance(node, q) >= r) {
            return 0;
        }
        if (max_box_distance(node, q) < r) {
            return node.end - node.begin;
        }
        if (node.leaf()) {
            std::size_t c = 0;
            for (std::size_t p = node.begin; p < node.end; ++p) {
                if (max_norm(q, point(p), m_dim) < r) {
                    ++c;
                }
            }
            return c;
        }
        return count(node.left, q, r) + count(node.right, q, r);
    }

    std::size_t m_dim;
    std::size_t m_n;
    std::size_t m_leaf_size;
    const SampleMatrix* m_source = nullptr;
    std::vector<std::size_t> m_order;
    std::vector<std::size_t> m_position;
    std::vector<std::size_t> m_leaf_of;
    std::vector<double> m_points;
    std::vector<Node> m_nodes;
    std::vector<double> m_lo;
    std::vector<double> m_hi;
};

} // namespace bch::detail

#endif
