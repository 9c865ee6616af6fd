#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rafsnn/dynamics.hpp"
#include "rafsnn/init.hpp"
#include "rafsnn/tape.hpp"

namespace rafsnn {

enum class LayerKind {
    RafDense,
    RafConv,
    SpikingAvgPool,
    SpikingLinear,
    Lstm,
    Linear,
    ConvRelu,
    AvgPool,
    Flatten,
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

// Geometry only; weights live in Network.
struct LayerSpec {
    LayerKind kind = LayerKind::Flatten;
    std::size_t units = 0;  // output width, or output channels for convolutions
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    bool relu = false;  // Linear only
    bool bias = false;  // Linear only

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

bool is_stateful(LayerKind kind);
bool is_spiking(LayerKind kind);

enum class Objective {
    LastPotential,     // CE on the readout membrane potential at the last valid step
    SpikeCountWindow,  // CE on readout spike counts over the last `window` valid steps
    Logits,            // non-spiking models: CE on the model output
};

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

struct NetworkSpec {
    Shape input_shape;  // per sample, per time step
    std::vector<LayerSpec> layers;
    double dt = 0.01;
    Objective objective = Objective::LastPotential;
    std::size_t window = 15;
    bool reset_on_spike = false;
    std::size_t classes = 10;

    // Number of stateful layers (L).
    std::size_t depth() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

void to_json(nlohmann::json& j, const LayerSpec& spec);
void from_json(const nlohmann::json& j, LayerSpec& spec);
void to_json(nlohmann::json& j, const NetworkSpec& spec);
void from_json(const nlohmann::json& j, NetworkSpec& spec);

// Per-sample output shape of every layer; throws DimensionError on mismatch.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

// Exact learnable-scalar count implied by the spec.
std::size_t count_parameters(const NetworkSpec& spec);

enum class ExecutionMode {
    Pipelined,    // spiking: layer ℓ consumes layer ℓ−1's output from the previous step
    Recurrent,    // LSTM: every layer sees the same step
    Feedforward,  // single pass on a static input
};

ExecutionMode execution_mode(const NetworkSpec& spec);

struct ForwardContext {
    double dt = 0.01;
    SpikeMode spike_mode = SpikeMode::Hard;
    bool reset_on_spike = false;
};

// Per-layer recurrent state carried across steps.
struct LayerState {
    std::optional<RAFStateVars> raf;
    Var h, c;
};

class Layer {
public:
    explicit Layer(LayerSpec spec, Shape in_shape, Shape out_shape)
        : spec_(spec), in_shape_(std::move(in_shape)), out_shape_(std::move(out_shape)) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }
    const Shape& input_shape() const { return in_shape_; }
    const Shape& output_shape() const { return out_shape_; }

    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual void initialize(Rng& rng) { (void)rng; }

    // x is batched: [B × input_shape]. Stateless layers ignore `state`.
    virtual Var forward(Var x, LayerState& state, const ForwardContext& ctx) = 0;

protected:
    LayerSpec spec_;
    Shape in_shape_;
    Shape out_shape_;
};

// RAF dense / RAF conv / spiking linear: I = f(s_in), then raf_step and spike.
class SpikingLayer final : public Layer {
public:
    SpikingLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix);
    std::vector<Parameter*> parameters() override { return {&weight, &omega, &xi, &theta, &beta}; }
    void initialize(Rng& rng) override;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;

    Parameter weight, omega, xi, theta, beta;
};

// avg_pool2d then hardsoft spike with per-channel θ and β; no membrane state.
class SpikingPoolLayer final : public Layer {
public:
    SpikingPoolLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix);
    std::vector<Parameter*> parameters() override { return {&theta, &beta}; }
    void initialize(Rng& rng) override;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;

    Parameter theta, beta;
};

// Standard LSTM cell, gate order (input, forget, cell, output), two bias vectors.
class LstmLayer final : public Layer {
public:
    LstmLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix);
    std::vector<Parameter*> parameters() override { return {&w_ih, &w_hh, &b_ih, &b_hh}; }
    void initialize(Rng& rng) override;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;

    Parameter w_ih, w_hh, b_ih, b_hh;
};

class LinearLayer final : public Layer {
public:
    LinearLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix);
    std::vector<Parameter*> parameters() override;
    void initialize(Rng& rng) override;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;

    Parameter weight, bias;
};

class ConvReluLayer final : public Layer {
public:
    ConvReluLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix);
    std::vector<Parameter*> parameters() override { return {&kernels}; }
    void initialize(Rng& rng) override;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;

    Parameter kernels;
};

class AvgPoolLayer final : public Layer {
public:
    using Layer::Layer;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;
};

class FlattenLayer final : public Layer {
public:
    using Layer::Layer;
    Var forward(Var x, LayerState& state, const ForwardContext& ctx) override;
};

// Result of running a network on one batch.
struct ForwardResult {
    // Pipelined mode: readout spikes/potentials per global step.
    std::vector<Var> spikes;
    std::vector<Var> potentials;
    std::size_t first_valid = 0;
    // Recurrent/feedforward mode: model output.
    Var logits;

    bool valid(std::size_t step) const { return step >= first_valid; }
};

class Network {
public:
    Network(NetworkSpec spec, Rng& rng);
    explicit Network(NetworkSpec spec);  // zero-initialized; for loading checkpoints

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    const NetworkSpec& spec() const { return spec_; }
    ExecutionMode mode() const { return mode_; }
    std::size_t depth() const { return spec_.depth(); }
    std::vector<Parameter*> parameters();
    std::size_t parameter_count();
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    std::size_t layer_count() const { return layers_.size(); }

    SpikeMode spike_mode = SpikeMode::Hard;

    // `steps` holds one [B × input_shape] tensor per input time step
    // (exactly one for feedforward networks).
    ForwardResult forward(Tape& tape, const std::vector<Tensor>& steps);

private:
    void build();
    ForwardResult unrolled_forward(Tape& tape, const std::vector<Tensor>& steps);
    ForwardResult recurrent_forward(Tape& tape, const std::vector<Tensor>& steps);
    ForwardResult feedforward(Tape& tape, const std::vector<Tensor>& steps);
    ForwardContext context() const;

    NetworkSpec spec_;
    ExecutionMode mode_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Reference architectures. `padding` 2 gives the "same" 5×5 convolutions
// whose 7×7×C flatten matches the LeNet parameter table.
NetworkSpec raf_spec(Shape input_shape, std::size_t width, std::size_t depth = 1, std::size_t classes = 10);
NetworkSpec lstm_spec(Shape input_shape, std::size_t width, std::size_t depth = 1, std::size_t classes = 10);
NetworkSpec raf_cnn_spec(std::size_t channels, std::size_t fc_width = 200, std::size_t depth = 2,
                         std::size_t padding = 2, std::size_t classes = 10);
NetworkSpec cnn_spec(std::size_t channels, std::size_t fc_width = 200, std::size_t depth = 2,
                     std::size_t padding = 2, std::size_t classes = 10);

}  // namespace rafsnn
