#include "rafsnn/init.hpp"

#include <cmath>

#include "rafsnn/errors.hpp"

namespace rafsnn {

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (auto& x : t.data()) x = dist(rng);
    return t;
}

NeuronParams init_neuron_params(std::size_t n_units, Rng& rng, const NeuronInit& init) {
    if (n_units == 0) throw UsageError("init_neuron_params: need at least one unit");
    NeuronParams p;
    p.omega = uniform({n_units}, 0.0, init.omega_max, rng);
    p.xi = uniform({n_units}, 0.0, init.xi_max, rng);
    p.theta = uniform({n_units}, 0.0, init.theta_max, rng);
    p.beta = Tensor({n_units}, init.beta);
    return p;
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng, double gain) {
    if (fan_in == 0) throw UsageError("kaiming_uniform: fan_in must be positive");
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in));
    return uniform(std::move(shape), -bound, bound, rng);
}

}  // namespace rafsnn
