#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "afpnet/common.hpp"

namespace afpnet {

/// Dense row-major matrix. The numeric core of the library is templated on
/// the scalar type so the same code runs in float for training/inference and
/// in double for finite-difference gradient checks.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void fill(T value) { data_.assign(data_.size(), value); }

    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
    T acc{};
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

/// C = A * B
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimensions disagree");
    Matrix<T> c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            if (aik == T{}) continue;
            const T* brow = b.data() + k * b.cols();
            T* crow = c.data() + i * c.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

/// C = A * B^T
template <class T>
Matrix<T> matmul_abt(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.cols()) throw ConfigError("matmul_abt: inner dimensions disagree");
    Matrix<T> c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

/// C = A^T * B
template <class T>
Matrix<T> matmul_atb(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows() != b.rows()) throw ConfigError("matmul_atb: inner dimensions disagree");
    Matrix<T> c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const T* arow = a.data() + k * a.cols();
        const T* brow = b.data() + k * b.cols();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const T aki = arow[i];
            if (aki == T{}) continue;
            T* crow = c.data() + i * c.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

template <class T>
void add_row_broadcast(Matrix<T>& m, std::span<const T> bias) {
    if (bias.size() != m.cols()) throw ConfigError("add_row_broadcast: bias width disagrees");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        T* row = m.data() + i * m.cols();
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] += bias[j];
    }
}

template <class T>
bool all_finite(const Matrix<T>& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(static_cast<double>(m.data()[i]))) return false;
    return true;
}

}  // namespace afpnet
