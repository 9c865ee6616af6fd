#pragma once

#include <cstddef>
#include <numbers>
#include <random>

#include "rafsnn/dynamics.hpp"
#include "rafsnn/tensor.hpp"

namespace rafsnn {

using Rng = std::mt19937_64;

struct NeuronInit {
    double omega_max = 1.1 * 2.0 * std::numbers::pi;
    double xi_max = 2.5;
    double theta_max = 2.5;
    double beta = 5.0;
};

// ω ~ U(0, 1.1·2π), ξ ~ U(0, 2.5), θ ~ U(0, 2.5), β = 5 by default.
NeuronParams init_neuron_params(std::size_t n_units, Rng& rng, const NeuronInit& init = {});

// U(−b, b) with b = gain·√(6 / fan_in).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0);

Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

}  // namespace rafsnn
