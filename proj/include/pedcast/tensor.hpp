#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pedcast/errors.hpp"

namespace pedcast {

/// Dense row-major array of 64-bit reals (last axis fastest).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string());
        }
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                                 shape_string());
        }
        return shape_[axis];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// View of the same data under a different shape (element count must match).
    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (count(shape) != data_.size()) {
            throw DimensionError("cannot reshape " + shape_string() + " (" +
                                 std::to_string(data_.size()) + " elements) to " +
                                 shape_string(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    std::string shape_string() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

    void require_finite(const std::string& context) const {
        for (double v : data_) {
            if (!std::isfinite(v)) {
                throw NumericError("non-finite value in " + context);
            }
        }
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& expected,
                          const std::string& what) {
    if (t.shape() != expected) {
        throw DimensionError(what + ": expected shape " + Tensor::shape_string(expected) +
                             ", got " + t.shape_string());
    }
}

inline void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
    if (t.rank() != rank) {
        throw DimensionError(what + ": expected rank " + std::to_string(rank) + ", got shape " +
                             t.shape_string());
    }
}

}  // namespace pedcast
