#include "rafsnn/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rafsnn/errors.hpp"

namespace rafsnn {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (auto d : shape_)
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
        throw DimensionError("shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " elements");
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
        if (row.size() != n) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size())
        throw DimensionError("index rank " + std::to_string(index.size()) + " vs tensor " + shape_str(shape_));
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape_[axis]) throw DimensionError("index out of range for " + shape_str(shape_));
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

double Tensor::item() const {
    if (data_.size() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.shape_ != shape_)
        throw DimensionError("cannot add " + shape_str(other.shape_) + " into " + shape_str(shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double factor) {
    for (auto& x : data_) x *= factor;
    return *this;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double sum(const Tensor& t) { return std::accumulate(t.data().begin(), t.data().end(), 0.0); }

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c) {
    const auto lda = static_cast<blasint>(trans_a ? m : k);
    const auto ldb = static_cast<blasint>(trans_b ? k : n);
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                static_cast<blasint>(m), static_cast<blasint>(n), static_cast<blasint>(k), 1.0, a, lda, b,
                ldb, beta, c, static_cast<blasint>(n));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    Tensor c({a.dim(0), b.dim(1)});
    gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), 0.0, c.raw());
    return c;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw UsageError("stride must be positive");
    if (kernel > in + 2 * padding)
        throw DimensionError("kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                             std::to_string(in + 2 * padding));
    return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvDims {
    std::size_t batch, cin, h, w, cout, kh, kw, ho, wo;
    bool batched;
};

ConvDims conv_dims(const Shape& in, const Shape& kshape, ConvGeometry geom) {
    if (in.size() != 3 && in.size() != 4)
        throw DimensionError("conv2d: input must be [C×H×W] or [B×C×H×W], got " + shape_str(in));
    if (kshape.size() != 4) throw DimensionError("conv2d: kernels must be [Co×Ci×kh×kw], got " + shape_str(kshape));
    ConvDims d{};
    d.batched = in.size() == 4;
    const std::size_t o = d.batched ? 1 : 0;
    d.batch = d.batched ? in[0] : 1;
    d.cin = in[o];
    d.h = in[o + 1];
    d.w = in[o + 2];
    d.cout = kshape[0];
    d.kh = kshape[2];
    d.kw = kshape[3];
    if (kshape[1] != d.cin)
        throw DimensionError("conv2d: input " + shape_str(in) + " has " + std::to_string(d.cin) +
                             " channels but kernels " + shape_str(kshape) + " expect " + std::to_string(kshape[1]));
    if (d.kh > d.h + 2 * geom.padding || d.kw > d.w + 2 * geom.padding)
        throw DimensionError("conv2d: kernel " + shape_str(kshape) + " larger than input " + shape_str(in));
    d.ho = conv_output_extent(d.h, d.kh, geom.stride, geom.padding);
    d.wo = conv_output_extent(d.w, d.kw, geom.stride, geom.padding);
    return d;
}

// cols [(Ci·kh·kw) × (Ho·Wo)] for one sample.
// Patch matrix with one row per output pixel: rows[(oy·wo + ox) × patch].
void im2row(const double* img, const ConvDims& d, ConvGeometry g, double* rows) {
    const std::size_t patch = d.cin * d.kh * d.kw;
    for (std::size_t oy = 0; oy < d.ho; ++oy)
        for (std::size_t ox = 0; ox < d.wo; ++ox) {
            double* row = rows + (oy * d.wo + ox) * patch;
            for (std::size_t c = 0; c < d.cin; ++c)
                for (std::size_t ki = 0; ki < d.kh; ++ki) {
                    const auto iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
                    const bool row_inside = iy >= 0 && iy < static_cast<long>(d.h);
                    for (std::size_t kj = 0; kj < d.kw; ++kj) {
                        const auto ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
                        const bool inside = row_inside && ix >= 0 && ix < static_cast<long>(d.w);
                        *row++ = inside ? img[(c * d.h + iy) * d.w + ix] : 0.0;
                    }
                }
        }
}

void row2im(const double* rows, const ConvDims& d, ConvGeometry g, double* img) {
    const std::size_t patch = d.cin * d.kh * d.kw;
    for (std::size_t oy = 0; oy < d.ho; ++oy)
        for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const double* row = rows + (oy * d.wo + ox) * patch;
            for (std::size_t c = 0; c < d.cin; ++c)
                for (std::size_t ki = 0; ki < d.kh; ++ki) {
                    const auto iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
                    const bool row_inside = iy >= 0 && iy < static_cast<long>(d.h);
                    for (std::size_t kj = 0; kj < d.kw; ++kj, ++row) {
                        const auto ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
                        if (row_inside && ix >= 0 && ix < static_cast<long>(d.w))
                            img[(c * d.h + iy) * d.w + ix] += *row;
                    }
                }
        }
}

// [B × C × hw] <-> [(B·hw) × C]
void to_pixel_major(const double* src, std::size_t batch, std::size_t channels, std::size_t hw, double* dst) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < hw; ++p) dst[(b * hw + p) * channels + c] = src[(b * channels + c) * hw + p];
}

void to_channel_major(const double* src, std::size_t batch, std::size_t channels, std::size_t hw, double* dst) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < hw; ++p) dst[(b * channels + c) * hw + p] = src[(b * hw + p) * channels + c];
}

Shape conv_out_shape(const ConvDims& d) {
    return d.batched ? Shape{d.batch, d.cout, d.ho, d.wo} : Shape{d.cout, d.ho, d.wo};
}

// Spike maps are mostly zero; below this density the conv kernels scatter
// from nonzero inputs instead of building a patch matrix.
constexpr double kSparseDensity = 0.3;

double density(const Tensor& t) {
    std::size_t nz = 0;
    for (double x : t.data()) nz += x != 0.0;
    return static_cast<double>(nz) / static_cast<double>(t.size());
}

// Kernels reordered to [cin × kh × kw × cout] so the innermost loop runs over
// output channels.
std::vector<double> kernels_channel_last(const double* k, const ConvDims& d) {
    const std::size_t taps = d.cin * d.kh * d.kw;
    std::vector<double> out(taps * d.cout);
    for (std::size_t co = 0; co < d.cout; ++co)
        for (std::size_t t = 0; t < taps; ++t) out[t * d.cout + co] = k[co * taps + t];
    return out;
}

// Calls f(input offset within sample, output pixel, tap) for every nonzero
// input and every kernel tap that lands inside the output.
template <class F>
void for_each_sparse_tap(const double* img, const ConvDims& d, ConvGeometry g, F&& f) {
    for (std::size_t c = 0; c < d.cin; ++c)
        for (std::size_t iy = 0; iy < d.h; ++iy)
            for (std::size_t ix = 0; ix < d.w; ++ix) {
                const std::size_t at = (c * d.h + iy) * d.w + ix;
                if (img[at] == 0.0) continue;
                for (std::size_t ki = 0; ki < d.kh; ++ki) {
                    const long ny = static_cast<long>(iy + g.padding) - static_cast<long>(ki);
                    if (ny < 0 || ny % static_cast<long>(g.stride) != 0) continue;
                    const auto oy = static_cast<std::size_t>(ny) / g.stride;
                    if (oy >= d.ho) continue;
                    for (std::size_t kj = 0; kj < d.kw; ++kj) {
                        const long nx = static_cast<long>(ix + g.padding) - static_cast<long>(kj);
                        if (nx < 0 || nx % static_cast<long>(g.stride) != 0) continue;
                        const auto ox = static_cast<std::size_t>(nx) / g.stride;
                        if (ox >= d.wo) continue;
                        f(at, oy * d.wo + ox, (c * d.kh + ki) * d.kw + kj);
                    }
                }
            }
}

Tensor conv2d_sparse(const Tensor& input, const Tensor& kernels, const ConvDims& d, ConvGeometry geom) {
    const std::size_t hw = d.ho * d.wo;
    const auto kt = kernels_channel_last(kernels.raw(), d);
    std::vector<double> acc(hw * d.cout);
    Tensor out(conv_out_shape(d));
    for (std::size_t b = 0; b < d.batch; ++b) {
        const double* img = input.raw() + b * d.cin * d.h * d.w;
        std::fill(acc.begin(), acc.end(), 0.0);
        for_each_sparse_tap(img, d, geom, [&](std::size_t at, std::size_t pix, std::size_t tap) {
            const double x = img[at];
            double* dst = acc.data() + pix * d.cout;
            const double* w = kt.data() + tap * d.cout;
            for (std::size_t co = 0; co < d.cout; ++co) dst[co] += x * w[co];
        });
        to_channel_major(acc.data(), 1, d.cout, hw, out.raw() + b * d.cout * hw);
    }
    return out;
}

Tensor conv2d_grad_kernels_sparse(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape,
                                  const ConvDims& d, ConvGeometry geom) {
    const std::size_t hw = d.ho * d.wo;
    const std::size_t taps = d.cin * d.kh * d.kw;
    std::vector<double> g(hw * d.cout), acc(taps * d.cout);
    for (std::size_t b = 0; b < d.batch; ++b) {
        const double* img = input.raw() + b * d.cin * d.h * d.w;
        to_pixel_major(grad_out.raw() + b * d.cout * hw, 1, d.cout, hw, g.data());
        for_each_sparse_tap(img, d, geom, [&](std::size_t at, std::size_t pix, std::size_t tap) {
            const double x = img[at];
            const double* src = g.data() + pix * d.cout;
            double* dst = acc.data() + tap * d.cout;
            for (std::size_t co = 0; co < d.cout; ++co) dst[co] += x * src[co];
        });
    }
    Tensor grad_k(kernel_shape);
    for (std::size_t co = 0; co < d.cout; ++co)
        for (std::size_t t = 0; t < taps; ++t) grad_k[co * taps + t] = acc[t * d.cout + co];
    return grad_k;
}

}  // namespace

// All three conv kernels stack the batch into one patch matrix so each is a
// single large GEMM.
Tensor conv2d(const Tensor& input, const Tensor& kernels, ConvGeometry geom) {
    const auto d = conv_dims(input.shape(), kernels.shape(), geom);
    if (density(input) <= kSparseDensity) return conv2d_sparse(input, kernels, d, geom);
    const std::size_t patch = d.cin * d.kh * d.kw;
    const std::size_t hw = d.ho * d.wo;
    std::vector<double> rows(d.batch * hw * patch);
    for (std::size_t b = 0; b < d.batch; ++b)
        im2row(input.raw() + b * d.cin * d.h * d.w, d, geom, rows.data() + b * hw * patch);
    std::vector<double> pixel_major(d.batch * hw * d.cout);
    gemm(false, true, d.batch * hw, d.cout, patch, rows.data(), kernels.raw(), 0.0, pixel_major.data());
    Tensor out(conv_out_shape(d));
    to_channel_major(pixel_major.data(), d.batch, d.cout, hw, out.raw());
    return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernels, const Shape& input_shape,
                         ConvGeometry geom) {
    const auto d = conv_dims(input_shape, kernels.shape(), geom);
    if (grad_out.shape() != conv_out_shape(d))
        throw DimensionError("conv2d backward: gradient " + shape_str(grad_out.shape()) + " vs output " +
                             shape_str(conv_out_shape(d)));
    const std::size_t patch = d.cin * d.kh * d.kw;
    const std::size_t hw = d.ho * d.wo;
    std::vector<double> g(d.batch * hw * d.cout);
    to_pixel_major(grad_out.raw(), d.batch, d.cout, hw, g.data());
    std::vector<double> rows(d.batch * hw * patch);
    gemm(false, false, d.batch * hw, patch, d.cout, g.data(), kernels.raw(), 0.0, rows.data());
    Tensor grad_in(input_shape);
    for (std::size_t b = 0; b < d.batch; ++b)
        row2im(rows.data() + b * hw * patch, d, geom, grad_in.raw() + b * d.cin * d.h * d.w);
    return grad_in;
}

Tensor conv2d_grad_kernels(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape,
                           ConvGeometry geom) {
    const auto d = conv_dims(input.shape(), kernel_shape, geom);
    if (grad_out.shape() != conv_out_shape(d))
        throw DimensionError("conv2d backward: gradient " + shape_str(grad_out.shape()) + " vs output " +
                             shape_str(conv_out_shape(d)));
    if (density(input) <= kSparseDensity) return conv2d_grad_kernels_sparse(grad_out, input, kernel_shape, d, geom);
    const std::size_t patch = d.cin * d.kh * d.kw;
    const std::size_t hw = d.ho * d.wo;
    std::vector<double> rows(d.batch * hw * patch);
    for (std::size_t b = 0; b < d.batch; ++b)
        im2row(input.raw() + b * d.cin * d.h * d.w, d, geom, rows.data() + b * hw * patch);
    std::vector<double> g(d.batch * hw * d.cout);
    to_pixel_major(grad_out.raw(), d.batch, d.cout, hw, g.data());
    Tensor grad_k(kernel_shape);
    gemm(true, false, d.cout, patch, d.batch * hw, g.data(), rows.data(), 0.0, grad_k.raw());
    return grad_k;
}

namespace {

struct PoolDims {
    std::size_t planes, h, w, ho, wo;
    Shape out_shape;
};

PoolDims pool_dims(const Shape& in, std::size_t k, std::size_t stride) {
    if (in.size() != 3 && in.size() != 4)
        throw DimensionError("avg_pool2d: input must be [C×H×W] or [B×C×H×W], got " + shape_str(in));
    if (k == 0 || stride == 0) throw UsageError("avg_pool2d: window and stride must be positive");
    PoolDims d{};
    d.h = in[in.size() - 2];
    d.w = in[in.size() - 1];
    if (k > d.h || k > d.w)
        throw DimensionError("avg_pool2d: window " + std::to_string(k) + " larger than input " + shape_str(in));
    d.planes = shape_size(in) / (d.h * d.w);
    d.ho = (d.h - k) / stride + 1;
    d.wo = (d.w - k) / stride + 1;
    d.out_shape = in;
    d.out_shape[in.size() - 2] = d.ho;
    d.out_shape[in.size() - 1] = d.wo;
    return d;
}

}  // namespace

Tensor avg_pool2d(const Tensor& input, std::size_t k, std::size_t stride) {
    const auto d = pool_dims(input.shape(), k, stride);
    Tensor out(d.out_shape);
    const double inv = 1.0 / static_cast<double>(k * k);
    for (std::size_t p = 0; p < d.planes; ++p) {
        const double* src = input.raw() + p * d.h * d.w;
        double* dst = out.raw() + p * d.ho * d.wo;
        for (std::size_t oy = 0; oy < d.ho; ++oy)
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
                double acc = 0.0;
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) acc += src[(oy * stride + i) * d.w + ox * stride + j];
                dst[oy * d.wo + ox] = acc * inv;
            }
    }
    return out;
}

Tensor avg_pool2d_grad(const Tensor& grad_out, const Shape& input_shape, std::size_t k, std::size_t stride) {
    const auto d = pool_dims(input_shape, k, stride);
    if (grad_out.shape() != d.out_shape)
        throw DimensionError("avg_pool2d backward: gradient " + shape_str(grad_out.shape()) + " vs output " +
                             shape_str(d.out_shape));
    Tensor grad_in(input_shape);
    const double inv = 1.0 / static_cast<double>(k * k);
    for (std::size_t p = 0; p < d.planes; ++p) {
        const double* src = grad_out.raw() + p * d.ho * d.wo;
        double* dst = grad_in.raw() + p * d.h * d.w;
        for (std::size_t oy = 0; oy < d.ho; ++oy)
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
                const double g = src[oy * d.wo + ox] * inv;
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) dst[(oy * stride + i) * d.w + ox * stride + j] += g;
            }
    }
    return grad_in;
}

}  // namespace rafsnn
