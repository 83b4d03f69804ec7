#ifndef BCH_SAMPLE_MATRIX_HPP
#define BCH_SAMPLE_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "bch/error.hpp"

namespace bch {

/// Dense row-major block of joint samples: one row per observation.
class SampleMatrix {
public:
    SampleMatrix() = default;

    SampleMatrix(std::size_t rows, std::size_t cols)
        : m_rows(rows), m_cols(cols), m_data(rows * cols, 0.0)
    {
    }

    SampleMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : m_rows(rows), m_cols(cols), m_data(std::move(data))
    {
        if (m_data.size() != rows * cols) {
            throw ContractViolation("sample_matrix", "construct", "data size does not match shape");
        }
    }

    /// Builds a matrix from column vectors of equal length.
    static SampleMatrix from_columns(const std::vector<std::vector<double>>& columns)
    {
        if (columns.empty()) {
            return {};
        }
        const std::size_t rows = columns.front().size();
        SampleMatrix out(rows, columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (columns[c].size() != rows) {
                throw ContractViolation("sample_matrix", "from_columns", "ragged columns");
            }
            for (std::size_t r = 0; r < rows; ++r) {
                out(r, c) = columns[c][r];
            }
        }
        return out;
    }

    /// A matrix with `rows` rows and no columns; used for empty condition sets.
    static SampleMatrix empty_with_rows(std::size_t rows)
    {
        SampleMatrix m;
        m.m_rows = rows;
        return m;
    }

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    bool has_columns() const noexcept { return m_cols > 0; }

    double& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<const double> row(std::size_t r) const
    {
        return {m_data.data() + r * m_cols, m_cols};
    }

    const std::vector<double>& data() const noexcept { return m_data; }

    std::vector<double> column(std::size_t c) const
    {
        std::vector<double> out(m_rows);
        for (std::size_t r = 0; r < m_rows; ++r) {
            out[r] = (*this)(r, c);
        }
        return out;
    }

    SampleMatrix select_columns(std::span<const std::size_t> indices) const
    {
        SampleMatrix out = empty_with_rows(m_rows);
        out.m_cols = indices.size();
        out.m_data.resize(m_rows * indices.size());
        for (std::size_t r = 0; r < m_rows; ++r) {
            for (std::size_t c = 0; c < indices.size(); ++c) {
                out(r, c) = (*this)(r, indices[c]);
            }
        }
        return out;
    }

    SampleMatrix select_rows(std::span<const std::size_t> indices) const
    {
        SampleMatrix out(indices.size(), m_cols);
        for (std::size_t r = 0; r < indices.size(); ++r) {
            for (std::size_t c = 0; c < m_cols; ++c) {
                out(r, c) = (*this)(indices[r], c);
            }
        }
        return out;
    }

    friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

/// Horizontal concatenation; all blocks must share the row count.
inline SampleMatrix hconcat(std::initializer_list<const SampleMatrix*> blocks)
{
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool first = true;
    for (const auto* b : blocks) {
        if (first) {
            rows = b->rows();
            first = false;
        }
        else if (b->rows() != rows) {
            throw ContractViolation("sample_matrix", "hconcat", "row counts differ");
        }
        cols += b->cols();
    }
    SampleMatrix out = SampleMatrix::empty_with_rows(rows);
    if (cols == 0) {
        return out;
    }
    out = SampleMatrix(rows, cols);
    std::size_t offset = 0;
    for (const auto* b : blocks) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < b->cols(); ++c) {
                out(r, offset + c) = (*b)(r, c);
            }
        }
        offset += b->cols();
    }
    return out;
}

} // namespace bch

#endif
