#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rafsnn/tensor.hpp"

namespace rafsnn {

// A named learnable tensor. Networks own these; tapes refer to them by address.
struct Parameter {
    std::string name;
    Tensor value;
};

class Tape;

// Handle to a value recorded on a tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

enum class OpKind {
    Input,
    Leaf,
    Param,
    Add,
    Sub,
    Mul,
    Axpy,
    Scale,
    AddScalar,
    Square,
    MatMul,
    Linear,
    AddRowBias,
    Conv2d,
    AvgPool,
    Reshape,
    Relu,
    Sigmoid,
    Tanh,
    SliceCols,
    Sum,
    SoftmaxCrossEntropy,
    Custom,
};

const char* op_name(OpKind kind);

struct TapeNode;

// Accumulator handed to backward rules: one adjoint slot per node input.
class GradSink {
public:
    GradSink(Tape& tape, const TapeNode& node) : tape_(tape), node_(node) {}

    bool wants(std::size_t k) const;
    const Tensor& input(std::size_t k) const;
    Tensor& slot(std::size_t k);

private:
    Tape& tape_;
    const TapeNode& node_;
};

using BackwardFn = std::function<void(const TapeNode& node, const Tensor& grad_out, GradSink& sink)>;

struct TapeNode {
    OpKind kind = OpKind::Input;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<Tensor> saved;
    std::vector<double> attrs;
    Parameter* param = nullptr;
    // When set, replaces the default rule for `kind` entirely.
    BackwardFn custom_backward;
    std::string label;
    bool requires_grad = false;
};

class Gradients {
public:
    // Zero tensor shaped like the parameter when it was not reached.
    Tensor of(const Parameter& p) const;
    const Tensor* find(const Parameter& p) const;
    Tensor wrt(Var leaf) const;

    void accumulate(const Parameter& p, const Tensor& g);
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double factor);

    std::size_t size() const { return params_.size(); }

private:
    friend class Tape;
    std::unordered_map<const Parameter*, Tensor> params_;
    std::unordered_map<std::size_t, Tensor> leaves_;
};

// Append-only record of a forward computation. Confined to one thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var input(Tensor value);
    Var variable(Tensor value);
    // One node per parameter per tape; repeated calls return the same handle.
    Var param(Parameter& p);

    Var record(TapeNode node);
    Var custom(std::string label, std::vector<Var> inputs, Tensor value, BackwardFn backward);

    const TapeNode& node(std::size_t id) const { return nodes_.at(id); }
    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    std::size_t size() const { return nodes_.size(); }
    void clear();

    Gradients backward(Var loss);

private:
    friend class GradSink;
    void apply_default_rule(const TapeNode& node, const Tensor& grad_out, GradSink& sink);

    std::vector<TapeNode> nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_nodes_;
    std::vector<Tensor> adjoints_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// x + alpha·y
Var axpy(Var x, Var y, double alpha);
Var scale(Var x, double factor);
Var add_scalar(Var x, double c);
Var square(Var x);
Var matmul(Var a, Var b);
// x[B×in] · Wᵀ with W[out×in]
Var linear(Var x, Var weight);
// x[B×n] + b[n] broadcast over rows
Var add_row_bias(Var x, Var bias);
Var conv2d(Var x, Var kernels, ConvGeometry geom = {});
Var avg_pool2d(Var x, std::size_t k, std::size_t stride);
Var reshape(Var x, Shape shape);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var sum(Var x);
// Σ_i CE(softmax(logits_i), labels_i) / normalizer
Var softmax_cross_entropy(Var logits, std::span<const int> labels, double normalizer);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace rafsnn
