#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "storagedp/errors.hpp"

namespace storagedp {

/// Dense row-major matrix. Rows are contiguous so kernels can stream them.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }

    void resize(std::size_t rows, std::size_t cols, T fill = T{}) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, fill);
    }

    bool same_shape(std::size_t rows, std::size_t cols) const noexcept {
        return rows_ == rows && cols_ == cols;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <class A, class B>
void require_same_shape(const Matrix<A>& a, const Matrix<B>& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ConfigError(std::string(what) + ": shape mismatch");
}

}  // namespace storagedp
