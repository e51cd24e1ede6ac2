#pragma once

#include <cstddef>
#include <vector>

namespace mtbrw {

/// Dense row-major matrix sized for mean matrices (a handful of types).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix operator*(const Matrix& rhs) const {
        Matrix out(rows_, rhs.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
            }
        return out;
    }

    std::vector<double> operator*(const std::vector<double>& x) const {
        std::vector<double> y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) y[i] += (*this)(i, j) * x[j];
        return y;
    }

    double max_entry() const {
        double m = 0.0;
        for (double v : data_) m = v > m ? v : m;
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace mtbrw
