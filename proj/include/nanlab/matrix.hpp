#pragma once

#include <cstddef>
#include <vector>

#include "nanlab/common.hpp"

namespace nanlab {

using Vector = std::vector<double>;

// Dense row-major double matrix. Kept deliberately small; every consumer
// works with explicit loops so the numeric order is pinned down.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // y = A x
    Vector matvec(const Vector& x) const {
        if (x.size() != cols_) throw InvalidParameter("matvec: dimension mismatch");
        Vector y(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = 0.0;
            const double* row = &data_[r * cols_];
            for (std::size_t c = 0; c < cols_; ++c) s += row[c] * x[c];
            y[r] = s;
        }
        return y;
    }

    // y = A^T x
    Vector tmatvec(const Vector& x) const {
        if (x.size() != rows_) throw InvalidParameter("tmatvec: dimension mismatch");
        Vector y(cols_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            const double xr = x[r];
            const double* row = &data_[r * cols_];
            for (std::size_t c = 0; c < cols_; ++c) y[c] += row[c] * xr;
        }
        return y;
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    // C = A B
    Matrix matmul(const Matrix& b) const {
        if (cols_ != b.rows_) throw InvalidParameter("matmul: dimension mismatch");
        Matrix c(rows_, b.cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t k = 0; k < cols_; ++k) {
                const double aik = (*this)(i, k);
                if (aik == 0.0) continue;
                const double* brow = &b.data_[k * b.cols_];
                double* crow = &c.data_[i * b.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
            }
        }
        return c;
    }

    // Scales column c in place.
    void scale_col(std::size_t c, double s) {
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) *= s;
    }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace nanlab
