#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vcqe {

// Dense row-major tensor. Images are H x W x C, conv weights KH x KW x Cin x Cout.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> dims, T fill = T(0)) : dims_(std::move(dims)) {
        std::int64_t n = 1;
        for (int d : dims_) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        data_.assign(static_cast<std::size_t>(n), fill);
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.dims_); }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(dims_.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // 3D accessors (H x W x C)
    T& at3(int y, int x, int c) {
        return data_[idx3(y, x, c)];
    }
    const T& at3(int y, int x, int c) const {
        return data_[idx3(y, x, c)];
    }
    std::size_t idx3(int y, int x, int c) const {
        assert(ndim() == 3);
        return static_cast<std::size_t>((static_cast<std::int64_t>(y) * dims_[1] + x) * dims_[2] + c);
    }

    // 4D accessors (KH x KW x Cin x Cout)
    T& at4(int a, int b, int c, int d) { return data_[idx4(a, b, c, d)]; }
    const T& at4(int a, int b, int c, int d) const { return data_[idx4(a, b, c, d)]; }
    std::size_t idx4(int a, int b, int c, int d) const {
        assert(ndim() == 4);
        return static_cast<std::size_t>(
            ((static_cast<std::int64_t>(a) * dims_[1] + b) * dims_[2] + c) * dims_[3] + d);
    }

    void fill(T v) { data_.assign(data_.size(), v); }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(dims_);
        for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
        return out;
    }

    std::string dims_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    std::vector<int> dims_;
    std::vector<T> data_;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

}  // namespace vcqe
