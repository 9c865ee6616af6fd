#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rafsnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Value type: copies are deep.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
    static Tensor scalar(double value) { return Tensor({1}, value); }
    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    double* raw() { return data_.data(); }
    const double* raw() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    // Single-element value; throws UsageError otherwise.
    double item() const;

    Tensor reshaped(Shape shape) const;
    void fill(double value);
    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double factor);

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);
double sum(const Tensor& t);

// Raw kernels. Autodiff wrappers live in tape.hpp.

// C[m×n] = op(A)·op(B) + beta·C, row-major.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c);

Tensor matmul(const Tensor& a, const Tensor& b);

struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

// input [C×H×W] or [B×C×H×W]; kernels [Co×Ci×kh×kw]; cross-correlation, no bias.
Tensor conv2d(const Tensor& input, const Tensor& kernels, ConvGeometry geom = {});
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernels, const Shape& input_shape,
                         ConvGeometry geom);
Tensor conv2d_grad_kernels(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape,
                           ConvGeometry geom);

// input [C×H×W] or [B×C×H×W]; floor semantics for partial windows.
Tensor avg_pool2d(const Tensor& input, std::size_t k, std::size_t stride);
Tensor avg_pool2d_grad(const Tensor& grad_out, const Shape& input_shape, std::size_t k,
                       std::size_t stride);

}  // namespace rafsnn
