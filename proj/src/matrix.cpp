#include "ocsvdd/matrix.hpp"

#include <cmath>
#include <string>

namespace ocsvdd {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw NumericError("Matrix: non-finite fill value");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    require_finite(*this, "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double value) {
    for (double& x : data_) x = value;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) shape_error("operator+=", *this, other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

void require_finite(const Matrix& m, const char* what) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m.data()[i])) {
            throw NumericError(std::string(what) + ": non-finite entry at row " +
                               std::to_string(i / (m.cols() ? m.cols() : 1)) + ", col " +
                               std::to_string(m.cols() ? i % m.cols() : 0));
        }
    }
}

// Loops are ordered for locality; every output element still accumulates its
// products in ascending inner index starting from 0.0.
Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a(i, k);
            const auto src = b.row(k);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
        }
    }
    require_finite(out, "matmul");
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols(), b.cols());
    add_matmul_tn(a, b, out);
    return out;
}

void add_matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
    if (out.rows() != a.cols() || out.cols() != b.cols()) shape_error("add_matmul_tn", a, out);
    const std::size_t inner = a.rows();
    for (std::size_t k = 0; k < inner; ++k) {
        const auto ak = a.row(k);
        const auto bk = b.row(k);
        for (std::size_t i = 0; i < ak.size(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            auto dst = out.row(i);
            for (std::size_t j = 0; j < bk.size(); ++j) dst[j] += aki * bk[j];
        }
    }
    require_finite(out, "matmul_tn");
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto br = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += ar[k] * br[k];
            out(i, j) = acc;
        }
    }
    require_finite(out, "matmul_nt");
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void add_row(Matrix& m, const Matrix& row_vector) {
    if (row_vector.rows() != 1 || row_vector.cols() != m.cols()) shape_error("add_row", m, row_vector);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += row_vector(0, j);
}

Matrix column_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
    return out;
}

Matrix column_means(const Matrix& m) {
    if (m.rows() == 0) throw InputError("column_means: matrix has no rows");
    Matrix out = column_sums(m);
    out *= 1.0 / static_cast<double>(m.rows());
    return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows()) {
            throw DimensionError("gather_rows: index " + std::to_string(indices[i]) +
                                 " out of range for " + shape(m));
        }
        const auto src = m.row(indices[i]);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j];
    }
    return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols()) shape_error("vstack", a, b);
    std::vector<double> data(a.data().begin(), a.data().end());
    data.insert(data.end(), b.data().begin(), b.data().end());
    return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

std::vector<double> row_sq_distances(const Matrix& m, const Matrix& point) {
    if (point.rows() != 1 || point.cols() != m.cols()) shape_error("row_sq_distances", m, point);
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double d = m(i, j) - point(0, j);
            acc += d * d;
        }
        out[i] = acc;
    }
    return out;
}

}  // namespace ocsvdd
