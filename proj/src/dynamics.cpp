#include "rafsnn/dynamics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "rafsnn/errors.hpp"

namespace rafsnn {

bool check_euler_stability(const Tensor& omega, double dt, double limit) {
    double max_omega = 0.0;
    for (double w : omega.data()) max_omega = std::max(max_omega, std::abs(w));
    if (max_omega * dt > limit) {
        spdlog::warn("max(|omega|)*dt = {:.3f} exceeds {:.2f}; forward Euler may amplify oscillations",
                     max_omega * dt, limit);
        return false;
    }
    return true;
}

ChannelLayout channel_layout(const Shape& state, std::size_t channels) {
    const std::size_t total = shape_size(state);
    if (channels == 1) return {total, 1, 1};
    std::size_t axis = 0;
    switch (state.size()) {
        case 1:
        case 3: axis = 0; break;
        case 2:
        case 4: axis = 1; break;
        default:
            throw DimensionError("per-channel parameters cannot broadcast over state " + shape_str(state));
    }
    if (state[axis] != channels)
        throw DimensionError("state " + shape_str(state) + " has " + std::to_string(state[axis]) +
                             " units on axis " + std::to_string(axis) + " but parameters have " +
                             std::to_string(channels));
    ChannelLayout l;
    l.channels = channels;
    for (std::size_t i = 0; i < axis; ++i) l.outer *= state[i];
    for (std::size_t i = axis + 1; i < state.size(); ++i) l.inner *= state[i];
    return l;
}

RAFState zero_state(const Shape& shape) { return {Tensor::zeros(shape), Tensor::zeros(shape)}; }

namespace {

template <class F>
void for_each_channel(const ChannelLayout& l, F f) {
    std::size_t i = 0;
    for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t c = 0; c < l.channels; ++c)
            for (std::size_t k = 0; k < l.inner; ++k, ++i) f(i, c);
}

void check_param_pair(const Tensor& a, const Tensor& b, const char* what) {
    if (a.size() != b.size())
        throw DimensionError(std::string(what) + ": parameter shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
}

Tensor velocity_update(const Tensor& u, const Tensor& v, const Tensor& i_ext, const Tensor& omega,
                       const Tensor& xi, double dt) {
    if (u.shape() != v.shape() || i_ext.shape() != v.shape())
        throw DimensionError("raf_step: state " + shape_str(v.shape()) + "/" + shape_str(u.shape()) +
                             " vs input current " + shape_str(i_ext.shape()));
    check_param_pair(omega, xi, "raf_step");
    const auto layout = channel_layout(v.shape(), omega.size());
    Tensor out(u.shape());
    for_each_channel(layout, [&](std::size_t i, std::size_t c) {
        out[i] = u[i] + dt * (i_ext[i] - 2.0 * xi[c] * u[i] - omega[c] * omega[c] * v[i]);
    });
    return out;
}

}  // namespace

RAFState raf_step(const RAFState& state, const NeuronParams& params, const Tensor& i_ext, double dt) {
    RAFState next;
    next.u = velocity_update(state.u, state.v, i_ext, params.omega, params.xi, dt);
    next.v = state.v;
    for (std::size_t i = 0; i < next.v.size(); ++i) next.v[i] += dt * state.u[i];
    return next;
}

RAFStateVars raf_step(const RAFStateVars& state, Var omega, Var xi, Var i_ext, double dt) {
    Tensor u_next = velocity_update(state.u.value(), state.v.value(), i_ext.value(), omega.value(), xi.value(), dt);
    auto backward = [dt](const TapeNode&, const Tensor& g, GradSink& sink) {
        const Tensor& u = sink.input(0);
        const Tensor& v = sink.input(1);
        const Tensor& w = sink.input(3);
        const Tensor& z = sink.input(4);
        const auto layout = channel_layout(v.shape(), w.size());
        if (sink.wants(0)) {
            Tensor& s = sink.slot(0);
            for_each_channel(layout, [&](std::size_t i, std::size_t c) { s[i] += g[i] * (1.0 - 2.0 * dt * z[c]); });
        }
        if (sink.wants(1)) {
            Tensor& s = sink.slot(1);
            for_each_channel(layout, [&](std::size_t i, std::size_t c) { s[i] -= g[i] * dt * w[c] * w[c]; });
        }
        if (sink.wants(2)) {
            Tensor& s = sink.slot(2);
            for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * dt;
        }
        if (sink.wants(3)) {
            Tensor& s = sink.slot(3);
            for_each_channel(layout, [&](std::size_t i, std::size_t c) { s[c] -= g[i] * 2.0 * dt * w[c] * v[i]; });
        }
        if (sink.wants(4)) {
            Tensor& s = sink.slot(4);
            for_each_channel(layout, [&](std::size_t i, std::size_t c) { s[c] -= g[i] * 2.0 * dt * u[i]; });
        }
    };
    Tape& tape = state.v.tape();
    Var u_new = tape.custom("raf_velocity", {state.u, state.v, i_ext, omega, xi}, std::move(u_next), backward);
    Var v_new = axpy(state.v, state.u, dt);
    return {v_new, u_new};
}

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

Tensor heaviside_spike(const Tensor& v, const Tensor& theta) {
    const auto layout = channel_layout(v.shape(), theta.size());
    Tensor s(v.shape());
    for_each_channel(layout, [&](std::size_t i, std::size_t c) { s[i] = v[i] >= theta[c] ? 1.0 : 0.0; });
    return s;
}

Var hardsoft_spike(Var v, Var theta, Var beta, SpikeMode mode) {
    const Tensor& vv = v.value();
    const Tensor& th = theta.value();
    const Tensor& be = beta.value();
    check_param_pair(th, be, "hardsoft_spike");
    const auto layout = channel_layout(vv.shape(), th.size());
    Tensor out(vv.shape());
    if (mode == SpikeMode::Hard) {
        out = heaviside_spike(vv, th);
    } else {
        for_each_channel(layout, [&](std::size_t i, std::size_t c) { out[i] = sigmoid(be[c] * (vv[i] - th[c])); });
    }
    auto backward = [](const TapeNode&, const Tensor& g, GradSink& sink) {
        const Tensor& v = sink.input(0);
        const Tensor& th = sink.input(1);
        const Tensor& be = sink.input(2);
        const auto layout = channel_layout(v.shape(), th.size());
        Tensor* gv = sink.wants(0) ? &sink.slot(0) : nullptr;
        Tensor* gth = sink.wants(1) ? &sink.slot(1) : nullptr;
        Tensor* gbe = sink.wants(2) ? &sink.slot(2) : nullptr;
        for_each_channel(layout, [&](std::size_t i, std::size_t c) {
            const double x = v[i] - th[c];
            const double s = sigmoid(be[c] * x);
            const double ds = s * (1.0 - s);
            if (gv) (*gv)[i] += g[i] * be[c] * ds;
            if (gth) (*gth)[c] -= g[i] * be[c] * ds;
            if (gbe) (*gbe)[c] += g[i] * x * ds;
        });
    };
    return v.tape().custom(mode == SpikeMode::Hard ? "hardsoft_spike" : "soft_spike", {v, theta, beta},
                           std::move(out), backward);
}

double analytic_oscillator(double omega, double xi, double v0, double u0, double t) {
    const double w2 = omega * omega;
    const double disc = w2 - xi * xi;
    const double decay = std::exp(-xi * t);
    const double scale = std::max({w2, xi * xi, 1e-300});
    if (std::abs(disc) <= 1e-12 * scale) {
        return decay * (v0 + (u0 + xi * v0) * t);
    }
    if (disc > 0.0) {
        const double wd = std::sqrt(disc);
        return decay * (v0 * std::cos(wd * t) + ((u0 + xi * v0) / wd) * std::sin(wd * t));
    }
    const double r = std::sqrt(-disc);
    return decay * (v0 * std::cosh(r * t) + ((u0 + xi * v0) / r) * std::sinh(r * t));
}

}  // namespace rafsnn
