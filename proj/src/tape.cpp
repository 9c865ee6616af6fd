#include "rafsnn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "rafsnn/errors.hpp"

namespace rafsnn {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Leaf: return "leaf";
        case OpKind::Param: return "param";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Axpy: return "axpy";
        case OpKind::Scale: return "scale";
        case OpKind::AddScalar: return "add_scalar";
        case OpKind::Square: return "square";
        case OpKind::MatMul: return "matmul";
        case OpKind::Linear: return "linear";
        case OpKind::AddRowBias: return "add_row_bias";
        case OpKind::Conv2d: return "conv2d";
        case OpKind::AvgPool: return "avg_pool2d";
        case OpKind::Reshape: return "reshape";
        case OpKind::Relu: return "relu";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::SliceCols: return "slice_cols";
        case OpKind::Sum: return "sum";
        case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
        case OpKind::Custom: return "custom";
    }
    return "?";
}

const Tensor& Var::value() const { return tape_->value(id_); }

bool GradSink::wants(std::size_t k) const { return tape_.nodes_[node_.inputs.at(k)].requires_grad; }

const Tensor& GradSink::input(std::size_t k) const { return tape_.nodes_[node_.inputs.at(k)].value; }

Tensor& GradSink::slot(std::size_t k) {
    const std::size_t id = node_.inputs.at(k);
    Tensor& adj = tape_.adjoints_[id];
    if (adj.empty()) adj = Tensor::zeros(tape_.nodes_[id].value.shape());
    return adj;
}

Tensor Gradients::of(const Parameter& p) const {
    if (const auto* g = find(p)) return *g;
    return Tensor::zeros(p.value.shape());
}

const Tensor* Gradients::find(const Parameter& p) const {
    auto it = params_.find(&p);
    return it == params_.end() ? nullptr : &it->second;
}

Tensor Gradients::wrt(Var leaf) const {
    auto it = leaves_.find(leaf.id());
    if (it == leaves_.end()) return Tensor::zeros(leaf.shape());
    return it->second;
}

void Gradients::accumulate(const Parameter& p, const Tensor& g) {
    auto [it, inserted] = params_.try_emplace(&p, g);
    if (!inserted) it->second += g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    for (const auto& [p, g] : other.params_) accumulate(*p, g);
    return *this;
}

Gradients& Gradients::operator*=(double factor) {
    for (auto& [p, g] : params_) g *= factor;
    return *this;
}

Var Tape::input(Tensor value) {
    TapeNode n;
    n.kind = OpKind::Input;
    n.value = std::move(value);
    return record(std::move(n));
}

Var Tape::variable(Tensor value) {
    TapeNode n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    return record(std::move(n));
}

Var Tape::param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    TapeNode n;
    n.kind = OpKind::Param;
    n.value = p.value;
    n.param = &p;
    n.requires_grad = true;
    n.label = p.name;
    Var v = record(std::move(n));
    param_nodes_.emplace(&p, v.id());
    return v;
}

Var Tape::record(TapeNode node) {
    if (!node.value.all_finite()) {
        const std::string what = node.kind == OpKind::Custom ? node.label : op_name(node.kind);
        throw NumericalError("non-finite value produced by '" + what + "' (shape " +
                             shape_str(node.value.shape()) + ")");
    }
    for (auto id : node.inputs) {
        if (id >= nodes_.size()) throw UsageError("tape input refers to a node on another tape");
        node.requires_grad = node.requires_grad || nodes_[id].requires_grad;
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::custom(std::string label, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
    TapeNode n;
    n.kind = OpKind::Custom;
    n.label = std::move(label);
    n.value = std::move(value);
    n.custom_backward = std::move(backward);
    for (const auto& v : inputs) {
        if (&v.tape() != this) throw UsageError("custom op '" + n.label + "' mixes tapes");
        n.inputs.push_back(v.id());
    }
    return record(std::move(n));
}

void Tape::clear() {
    nodes_.clear();
    param_nodes_.clear();
    adjoints_.clear();
}

Gradients Tape::backward(Var loss) {
    if (&loss.tape() != this) throw UsageError("backward: loss belongs to another tape");
    if (loss.value().size() != 1)
        throw UsageError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));

    Gradients grads;
    adjoints_.assign(nodes_.size(), Tensor{});
    adjoints_[loss.id()] = Tensor::ones(loss.shape());

    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        const TapeNode& node = nodes_[i];
        if (adjoints_[i].empty() || !node.requires_grad) continue;
        const Tensor grad_out = std::move(adjoints_[i]);
        adjoints_[i] = Tensor{};
        switch (node.kind) {
            case OpKind::Param: grads.accumulate(*node.param, grad_out); break;
            case OpKind::Leaf: grads.leaves_[i] = grad_out; break;
            case OpKind::Input: break;
            default: {
                GradSink sink(*this, node);
                if (node.custom_backward)
                    node.custom_backward(node, grad_out, sink);
                else
                    apply_default_rule(node, grad_out, sink);
            }
        }
    }
    adjoints_.clear();
    return grads;
}

namespace {

void check_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

void add_scaled(Tensor& dst, const Tensor& src, double alpha) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * s[i];
}

TapeNode make_node(OpKind kind, std::initializer_list<Var> inputs, Tensor value) {
    TapeNode n;
    n.kind = kind;
    for (const auto& v : inputs) n.inputs.push_back(v.id());
    n.value = std::move(value);
    return n;
}

Tape& common_tape(const char* op, Var a, Var b) {
    if (!a.valid() || !b.valid() || &a.tape() != &b.tape())
        throw UsageError(std::string(op) + ": operands live on different tapes");
    return a.tape();
}

template <class F>
Tensor map_unary(const Tensor& x, F f) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

}  // namespace

void Tape::apply_default_rule(const TapeNode& node, const Tensor& g, GradSink& sink) {
    switch (node.kind) {
        case OpKind::Add:
            if (sink.wants(0)) sink.slot(0) += g;
            if (sink.wants(1)) sink.slot(1) += g;
            break;
        case OpKind::Sub:
            if (sink.wants(0)) sink.slot(0) += g;
            if (sink.wants(1)) add_scaled(sink.slot(1), g, -1.0);
            break;
        case OpKind::Mul: {
            const Tensor& a = sink.input(0);
            const Tensor& b = sink.input(1);
            if (sink.wants(0)) {
                Tensor& s = sink.slot(0);
                for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * b[i];
            }
            if (sink.wants(1)) {
                Tensor& s = sink.slot(1);
                for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * a[i];
            }
            break;
        }
        case OpKind::Axpy:
            if (sink.wants(0)) sink.slot(0) += g;
            if (sink.wants(1)) add_scaled(sink.slot(1), g, node.attrs[0]);
            break;
        case OpKind::Scale:
            if (sink.wants(0)) add_scaled(sink.slot(0), g, node.attrs[0]);
            break;
        case OpKind::AddScalar:
            if (sink.wants(0)) sink.slot(0) += g;
            break;
        case OpKind::Square: {
            const Tensor& x = sink.input(0);
            Tensor& s = sink.slot(0);
            for (std::size_t i = 0; i < g.size(); ++i) s[i] += 2.0 * x[i] * g[i];
            break;
        }
        case OpKind::MatMul: {
            const Tensor& a = sink.input(0);
            const Tensor& b = sink.input(1);
            const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
            if (sink.wants(0)) gemm(false, true, m, k, n, g.raw(), b.raw(), 1.0, sink.slot(0).raw());
            if (sink.wants(1)) gemm(true, false, k, n, m, a.raw(), g.raw(), 1.0, sink.slot(1).raw());
            break;
        }
        case OpKind::Linear: {
            const Tensor& x = sink.input(0);
            const Tensor& w = sink.input(1);
            const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
            if (sink.wants(0)) gemm(false, false, batch, in, out, g.raw(), w.raw(), 1.0, sink.slot(0).raw());
            if (sink.wants(1)) gemm(true, false, out, in, batch, g.raw(), x.raw(), 1.0, sink.slot(1).raw());
            break;
        }
        case OpKind::AddRowBias: {
            if (sink.wants(0)) sink.slot(0) += g;
            if (sink.wants(1)) {
                Tensor& s = sink.slot(1);
                const std::size_t n = s.size();
                for (std::size_t i = 0; i < g.size(); ++i) s[i % n] += g[i];
            }
            break;
        }
        case OpKind::Conv2d: {
            const ConvGeometry geom{static_cast<std::size_t>(node.attrs[0]), static_cast<std::size_t>(node.attrs[1])};
            const Tensor& x = sink.input(0);
            const Tensor& k = sink.input(1);
            if (sink.wants(0)) sink.slot(0) += conv2d_grad_input(g, k, x.shape(), geom);
            if (sink.wants(1)) sink.slot(1) += conv2d_grad_kernels(g, x, k.shape(), geom);
            break;
        }
        case OpKind::AvgPool:
            if (sink.wants(0))
                sink.slot(0) += avg_pool2d_grad(g, sink.input(0).shape(), static_cast<std::size_t>(node.attrs[0]),
                                                static_cast<std::size_t>(node.attrs[1]));
            break;
        case OpKind::Reshape:
            if (sink.wants(0)) sink.slot(0) += g.reshaped(sink.input(0).shape());
            break;
        case OpKind::Relu: {
            const Tensor& x = sink.input(0);
            Tensor& s = sink.slot(0);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) s[i] += g[i];
            break;
        }
        case OpKind::Sigmoid: {
            const Tensor& y = node.value;
            Tensor& s = sink.slot(0);
            for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
        }
        case OpKind::Tanh: {
            const Tensor& y = node.value;
            Tensor& s = sink.slot(0);
            for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
        }
        case OpKind::SliceCols: {
            Tensor& s = sink.slot(0);
            const std::size_t start = static_cast<std::size_t>(node.attrs[0]);
            const std::size_t rows = g.dim(0), count = g.dim(1), cols = s.dim(1);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < count; ++c) s[r * cols + start + c] += g[r * count + c];
            break;
        }
        case OpKind::Sum: {
            Tensor& s = sink.slot(0);
            const double g0 = g[0];
            for (auto& x : s.data()) x += g0;
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            // saved[0] holds (softmax − onehot) / normalizer
            if (sink.wants(0)) add_scaled(sink.slot(0), node.saved[0], g[0]);
            break;
        }
        case OpKind::Input:
        case OpKind::Leaf:
        case OpKind::Param:
        case OpKind::Custom:
            throw UsageError(std::string("no default backward rule for ") + op_name(node.kind));
    }
}

Var add(Var a, Var b) {
    Tape& t = common_tape("add", a, b);
    check_same("add", a.value(), b.value());
    return t.record(make_node(OpKind::Add, {a, b}, map_binary(a.value(), b.value(), std::plus<>())));
}

Var sub(Var a, Var b) {
    Tape& t = common_tape("sub", a, b);
    check_same("sub", a.value(), b.value());
    return t.record(make_node(OpKind::Sub, {a, b}, map_binary(a.value(), b.value(), std::minus<>())));
}

Var mul(Var a, Var b) {
    Tape& t = common_tape("mul", a, b);
    check_same("mul", a.value(), b.value());
    return t.record(make_node(OpKind::Mul, {a, b}, map_binary(a.value(), b.value(), std::multiplies<>())));
}

Var axpy(Var x, Var y, double alpha) {
    Tape& t = common_tape("axpy", x, y);
    check_same("axpy", x.value(), y.value());
    auto n = make_node(OpKind::Axpy, {x, y},
                       map_binary(x.value(), y.value(), [alpha](double a, double b) { return a + alpha * b; }));
    n.attrs = {alpha};
    return t.record(std::move(n));
}

Var scale(Var x, double factor) {
    auto n = make_node(OpKind::Scale, {x}, map_unary(x.value(), [factor](double a) { return a * factor; }));
    n.attrs = {factor};
    return x.tape().record(std::move(n));
}

Var add_scalar(Var x, double c) {
    auto n = make_node(OpKind::AddScalar, {x}, map_unary(x.value(), [c](double a) { return a + c; }));
    n.attrs = {c};
    return x.tape().record(std::move(n));
}

Var square(Var x) {
    return x.tape().record(make_node(OpKind::Square, {x}, map_unary(x.value(), [](double a) { return a * a; })));
}

Var matmul(Var a, Var b) {
    Tape& t = common_tape("matmul", a, b);
    return t.record(make_node(OpKind::MatMul, {a, b}, matmul(a.value(), b.value())));
}

Var linear(Var x, Var weight) {
    Tape& t = common_tape("linear", x, weight);
    const Tensor& xv = x.value();
    const Tensor& w = weight.value();
    if (xv.rank() != 2 || w.rank() != 2 || xv.dim(1) != w.dim(1))
        throw DimensionError("linear: input " + shape_str(xv.shape()) + " incompatible with weight " +
                             shape_str(w.shape()));
    Tensor out({xv.dim(0), w.dim(0)});
    gemm(false, true, xv.dim(0), w.dim(0), xv.dim(1), xv.raw(), w.raw(), 0.0, out.raw());
    return t.record(make_node(OpKind::Linear, {x, weight}, std::move(out)));
}

Var add_row_bias(Var x, Var bias) {
    Tape& t = common_tape("add_row_bias", x, bias);
    const Tensor& xv = x.value();
    const Tensor& b = bias.value();
    if (xv.rank() != 2 || b.size() != xv.dim(1))
        throw DimensionError("add_row_bias: input " + shape_str(xv.shape()) + " vs bias " + shape_str(b.shape()));
    Tensor out = xv;
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
    return t.record(make_node(OpKind::AddRowBias, {x, bias}, std::move(out)));
}

Var conv2d(Var x, Var kernels, ConvGeometry geom) {
    Tape& t = common_tape("conv2d", x, kernels);
    auto n = make_node(OpKind::Conv2d, {x, kernels}, conv2d(x.value(), kernels.value(), geom));
    n.attrs = {static_cast<double>(geom.stride), static_cast<double>(geom.padding)};
    return t.record(std::move(n));
}

Var avg_pool2d(Var x, std::size_t k, std::size_t stride) {
    auto n = make_node(OpKind::AvgPool, {x}, avg_pool2d(x.value(), k, stride));
    n.attrs = {static_cast<double>(k), static_cast<double>(stride)};
    return x.tape().record(std::move(n));
}

Var reshape(Var x, Shape shape) {
    return x.tape().record(make_node(OpKind::Reshape, {x}, x.value().reshaped(std::move(shape))));
}

Var relu(Var x) {
    return x.tape().record(
        make_node(OpKind::Relu, {x}, map_unary(x.value(), [](double a) { return a > 0.0 ? a : 0.0; })));
}

Var sigmoid(Var x) {
    return x.tape().record(make_node(OpKind::Sigmoid, {x}, map_unary(x.value(), [](double a) {
        return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
    })));
}

Var tanh(Var x) {
    return x.tape().record(make_node(OpKind::Tanh, {x}, map_unary(x.value(), [](double a) { return std::tanh(a); })));
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || count == 0 || start + count > xv.dim(1))
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                             ") out of range for " + shape_str(xv.shape()));
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor out({rows, count});
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(xv.raw() + r * cols + start, count, out.raw() + r * count);
    auto n = make_node(OpKind::SliceCols, {x}, std::move(out));
    n.attrs = {static_cast<double>(start)};
    return x.tape().record(std::move(n));
}

Var sum(Var x) { return x.tape().record(make_node(OpKind::Sum, {x}, Tensor::scalar(sum(x.value())))); }

Var softmax_cross_entropy(Var logits, std::span<const int> labels, double normalizer) {
    const Tensor& z = logits.value();
    if (z.rank() != 2 || z.dim(0) != labels.size())
        throw DimensionError("softmax_cross_entropy: logits " + shape_str(z.shape()) + " vs " +
                             std::to_string(labels.size()) + " labels");
    if (!(normalizer > 0.0)) throw UsageError("softmax_cross_entropy: normalizer must be positive");
    const std::size_t rows = z.dim(0), classes = z.dim(1);
    Tensor delta(z.shape());
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw UsageError("label " + std::to_string(label) + " out of range for " + std::to_string(classes) +
                             " classes");
        const double* row = z.raw() + r * classes;
        const double mx = *std::max_element(row, row + classes);
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
        const double log_denom = std::log(denom);
        total += log_denom + mx - row[label];
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(row[c] - mx - log_denom);
            delta[r * classes + c] = (p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) / normalizer;
        }
    }
    auto n = make_node(OpKind::SoftmaxCrossEntropy, {logits}, Tensor::scalar(total / normalizer));
    n.saved.push_back(std::move(delta));
    return logits.tape().record(std::move(n));
}

}  // namespace rafsnn
