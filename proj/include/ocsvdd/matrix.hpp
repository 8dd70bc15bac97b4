#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ocsvdd/error.hpp"

namespace ocsvdd {

// Dense row-major matrix of doubles. Row vectors are 1 x n.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    // Takes ownership of data; throws DimensionError if the size is wrong and
    // NumericError if any entry is non-finite.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    void fill(double value);
    Matrix& operator+=(const Matrix& other);
    Matrix& operator*=(double s);

    // Exact element-wise equality (bitwise for non-NaN values).
    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

// a * b. The inner dimension is reduced left to right.
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b, without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// out += a^T * b.
void add_matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
// a * b^T, without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Adds the 1 x cols row vector to every row of m.
void add_row(Matrix& m, const Matrix& row_vector);
// 1 x cols column sums.
Matrix column_sums(const Matrix& m);
// 1 x cols column means. Throws InputError on zero rows.
Matrix column_means(const Matrix& m);

// Rows of m selected by index, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
// Stacks a on top of b. Column counts must agree unless one side is empty.
Matrix vstack(const Matrix& a, const Matrix& b);

// Squared Euclidean distance of each row to the 1 x cols vector `point`.
std::vector<double> row_sq_distances(const Matrix& m, const Matrix& point);

}  // namespace ocsvdd
