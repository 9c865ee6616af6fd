#pragma once

#include <cstddef>

#include "rafsnn/tape.hpp"
#include "rafsnn/tensor.hpp"

namespace rafsnn {

// Per-unit (dense) or per-output-channel (conv) neuron constants.
// omega enters the dynamics only through omega², so its sign is immaterial.
struct NeuronParams {
    Tensor omega;  // natural frequency, rad per time unit
    Tensor xi;     // damping, per time unit
    Tensor theta;  // firing threshold
    Tensor beta;   // surrogate steepness
};

struct RAFState {
    Tensor v;  // membrane potential
    Tensor u;  // dv/dt
};

// Taped counterpart of RAFState.
struct RAFStateVars {
    Var v;
    Var u;
};

struct IntegratorConfig {
    double dt = 0.01;
    bool reset_on_spike = false;
};

// Warns (and returns false) when max|ω|·dt exceeds the forward-Euler comfort zone.
bool check_euler_stability(const Tensor& omega, double dt, double limit = 0.5);

// How a per-channel parameter vector lines up with a state tensor:
// state is viewed as [outer × channels × inner].
struct ChannelLayout {
    std::size_t outer = 1;
    std::size_t channels = 1;
    std::size_t inner = 1;
};

// Rank 1 [N] and rank 3 [C×H×W] put channels on axis 0; rank 2 [B×N] and
// rank 4 [B×C×H×W] on axis 1. A single-element parameter broadcasts everywhere.
ChannelLayout channel_layout(const Shape& state, std::size_t channels);

RAFState zero_state(const Shape& shape);

// v' = v + dt·u ; u' = u + dt·(I − 2ξ⊙u − ω²⊙v)
RAFState raf_step(const RAFState& state, const NeuronParams& params, const Tensor& i_ext, double dt);
RAFStateVars raf_step(const RAFStateVars& state, Var omega, Var xi, Var i_ext, double dt);

enum class SpikeMode {
    Hard,  // Heaviside forward, sigmoid-derivative backward
    Soft,  // sigmoid forward and backward; smooth, for gradient checking
};

double sigmoid(double x);

// s = H(v − θ) with H(0) = 1.
Tensor heaviside_spike(const Tensor& v, const Tensor& theta);

// Forward per `mode`; backward is always ∂σ(β(v−θ)) w.r.t. v, θ and β.
Var hardsoft_spike(Var v, Var theta, Var beta, SpikeMode mode = SpikeMode::Hard);

// Closed-form unforced solution of v'' + 2ξv' + ω²v = 0 with v(0)=v0, v'(0)=u0.
// Handles under-, critically and over-damped regimes.
double analytic_oscillator(double omega, double xi, double v0, double u0, double t);

}  // namespace rafsnn
