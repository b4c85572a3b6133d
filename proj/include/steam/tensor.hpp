#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace steam {

// Error taxonomy shared by the whole library.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyNeighborhoodError : std::runtime_error {
    EmptyNeighborhoodError() : std::runtime_error("empty neighborhood") {}
};

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense n-dimensional array of doubles in row-major order. This is the
// universal value type; gradients live on the tape, not here.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        check_invariant();
    }

    static Tensor zeros(Shape s) {
        const auto n = shape_numel(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    }
    static Tensor full(Shape s, double v) {
        const auto n = shape_numel(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor vec(std::initializer_list<double> v) {
        return Tensor({static_cast<std::int64_t>(v.size())}, std::vector<double>(v));
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t ndim() const { return static_cast<std::int64_t>(shape.size()); }
    std::int64_t dim(std::int64_t i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // row-major offset of a multi-index
    std::int64_t offset(const std::vector<std::int64_t>& idx) const {
        std::int64_t off = 0;
        for (std::size_t ax = 0; ax < shape.size(); ++ax) off = off * shape[ax] + idx[ax];
        return off;
    }
    double& at(const std::vector<std::int64_t>& idx) { return data[static_cast<std::size_t>(offset(idx))]; }
    double at(const std::vector<std::int64_t>& idx) const { return data[static_cast<std::size_t>(offset(idx))]; }

    void check_invariant() const {
        for (auto d : shape)
            if (d < 1) throw DimensionError("tensor dimension must be >= 1, got shape " + shape_str(shape));
        if (shape_numel(shape) != numel())
            throw DimensionError("tensor data length " + std::to_string(numel()) +
                                 " does not match shape " + shape_str(shape));
    }
};

// Row-major strides of a shape.
inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> strides(s.size());
    std::int64_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
        strides[i] = acc;
        acc *= s[i];
    }
    return strides;
}

// Shape of broadcasting a against b with trailing-dimension alignment and
// size-1 expansion. Throws DimensionError on incompatibility.
Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace steam
