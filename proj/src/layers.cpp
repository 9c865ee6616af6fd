#include "rafsnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rafsnn/errors.hpp"

namespace rafsnn {

namespace {

const std::map<LayerKind, std::string>& kind_names() {
    static const std::map<LayerKind, std::string> names{
        {LayerKind::RafDense, "raf-dense"},         {LayerKind::RafConv, "raf-conv"},
        {LayerKind::SpikingAvgPool, "spiking-avg-pool"}, {LayerKind::SpikingLinear, "spiking-linear"},
        {LayerKind::Lstm, "lstm"},                   {LayerKind::Linear, "linear"},
        {LayerKind::ConvRelu, "conv-relu"},          {LayerKind::AvgPool, "avg-pool"},
        {LayerKind::Flatten, "flatten"},
    };
    return names;
}

}  // namespace

std::string to_string(LayerKind kind) { return kind_names().at(kind); }

LayerKind layer_kind_from_string(const std::string& name) {
    for (const auto& [kind, n] : kind_names())
        if (n == name) return kind;
    throw FormatError("unknown layer kind '" + name + "'");
}

bool is_stateful(LayerKind kind) {
    return kind == LayerKind::RafDense || kind == LayerKind::RafConv || kind == LayerKind::SpikingLinear ||
           kind == LayerKind::Lstm;
}

bool is_spiking(LayerKind kind) {
    return kind == LayerKind::RafDense || kind == LayerKind::RafConv || kind == LayerKind::SpikingLinear ||
           kind == LayerKind::SpikingAvgPool;
}

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::LastPotential: return "last-potential";
        case Objective::SpikeCountWindow: return "spike-count-window";
        case Objective::Logits: return "logits";
    }
    return "?";
}

Objective objective_from_string(const std::string& name) {
    for (auto o : {Objective::LastPotential, Objective::SpikeCountWindow, Objective::Logits})
        if (to_string(o) == name) return o;
    throw FormatError("unknown objective '" + name + "'");
}

std::size_t NetworkSpec::depth() const {
    return static_cast<std::size_t>(
        std::count_if(layers.begin(), layers.end(), [](const LayerSpec& l) { return is_stateful(l.kind); }));
}

void to_json(nlohmann::json& j, const LayerSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)}};
    switch (spec.kind) {
        case LayerKind::RafDense:
        case LayerKind::SpikingLinear:
        case LayerKind::Lstm: j["units"] = spec.units; break;
        case LayerKind::Linear:
            j["units"] = spec.units;
            j["relu"] = spec.relu;
            j["bias"] = spec.bias;
            break;
        case LayerKind::RafConv:
        case LayerKind::ConvRelu:
            j["units"] = spec.units;
            j["kernel"] = spec.kernel;
            j["stride"] = spec.stride;
            j["padding"] = spec.padding;
            break;
        case LayerKind::SpikingAvgPool:
        case LayerKind::AvgPool:
            j["kernel"] = spec.kernel;
            j["stride"] = spec.stride;
            break;
        case LayerKind::Flatten: break;
    }
}

void from_json(const nlohmann::json& j, LayerSpec& spec) {
    spec = LayerSpec{};
    spec.kind = layer_kind_from_string(j.at("kind").get<std::string>());
    spec.units = j.value("units", std::size_t{0});
    spec.kernel = j.value("kernel", std::size_t{0});
    spec.stride = j.value("stride", std::size_t{1});
    spec.padding = j.value("padding", std::size_t{0});
    spec.relu = j.value("relu", false);
    spec.bias = j.value("bias", false);
}

void to_json(nlohmann::json& j, const NetworkSpec& spec) {
    j = nlohmann::json{{"input_shape", spec.input_shape},
                       {"layers", spec.layers},
                       {"dt", spec.dt},
                       {"objective", to_string(spec.objective)},
                       {"window", spec.window},
                       {"reset_on_spike", spec.reset_on_spike},
                       {"classes", spec.classes}};
}

void from_json(const nlohmann::json& j, NetworkSpec& spec) {
    spec = NetworkSpec{};
    spec.input_shape = j.at("input_shape").get<Shape>();
    spec.layers = j.at("layers").get<std::vector<LayerSpec>>();
    spec.dt = j.value("dt", 0.01);
    spec.objective = objective_from_string(j.value("objective", std::string("last-potential")));
    spec.window = j.value("window", std::size_t{15});
    spec.reset_on_spike = j.value("reset_on_spike", false);
    spec.classes = j.value("classes", std::size_t{10});
}

namespace {

Shape layer_output_shape(const LayerSpec& l, const Shape& in, std::size_t index) {
    auto fail = [&](const std::string& why) {
        return DimensionError("layer " + std::to_string(index) + " (" + to_string(l.kind) + "): " + why +
                              ", input " + shape_str(in));
    };
    switch (l.kind) {
        case LayerKind::RafDense:
        case LayerKind::SpikingLinear:
        case LayerKind::Lstm:
        case LayerKind::Linear:
            if (in.size() != 1) throw fail("expects a flat input");
            if (l.units == 0) throw fail("units must be positive");
            return {l.units};
        case LayerKind::RafConv:
        case LayerKind::ConvRelu:
            if (in.size() != 3) throw fail("expects [C×H×W]");
            if (l.units == 0 || l.kernel == 0) throw fail("channels and kernel must be positive");
            return {l.units, conv_output_extent(in[1], l.kernel, l.stride, l.padding),
                    conv_output_extent(in[2], l.kernel, l.stride, l.padding)};
        case LayerKind::SpikingAvgPool:
        case LayerKind::AvgPool:
            if (in.size() != 3) throw fail("expects [C×H×W]");
            if (l.kernel == 0 || l.stride == 0) throw fail("window and stride must be positive");
            if (l.kernel > in[1] || l.kernel > in[2]) throw fail("window larger than input");
            return {in[0], (in[1] - l.kernel) / l.stride + 1, (in[2] - l.kernel) / l.stride + 1};
        case LayerKind::Flatten: return {shape_size(in)};
    }
    throw fail("unknown kind");
}

std::size_t layer_parameter_count(const LayerSpec& l, const Shape& in) {
    switch (l.kind) {
        case LayerKind::RafDense:
        case LayerKind::SpikingLinear: return in[0] * l.units + 4 * l.units;
        case LayerKind::RafConv: return l.units * in[0] * l.kernel * l.kernel + 4 * l.units;
        case LayerKind::SpikingAvgPool: return 2 * in[0];
        case LayerKind::Lstm: return 4 * l.units * (in[0] + l.units) + 2 * 4 * l.units;
        case LayerKind::Linear: return in[0] * l.units + (l.bias ? l.units : 0);
        case LayerKind::ConvRelu: return l.units * in[0] * l.kernel * l.kernel;
        case LayerKind::AvgPool:
        case LayerKind::Flatten: return 0;
    }
    return 0;
}

Shape batched(std::size_t batch, const Shape& shape) {
    Shape s{batch};
    s.insert(s.end(), shape.begin(), shape.end());
    return s;
}

}  // namespace

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
    if (spec.input_shape.empty()) throw DimensionError("network input shape is empty");
    std::vector<Shape> shapes;
    Shape cur = spec.input_shape;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        cur = layer_output_shape(spec.layers[i], cur, i);
        shapes.push_back(cur);
    }
    return shapes;
}

std::size_t count_parameters(const NetworkSpec& spec) {
    const auto shapes = infer_shapes(spec);
    std::size_t total = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        total += layer_parameter_count(spec.layers[i], i == 0 ? spec.input_shape : shapes[i - 1]);
    return total;
}

ExecutionMode execution_mode(const NetworkSpec& spec) {
    bool spiking = false, lstm = false;
    for (const auto& l : spec.layers) {
        spiking = spiking || (is_spiking(l.kind) && is_stateful(l.kind));
        lstm = lstm || l.kind == LayerKind::Lstm;
    }
    if (spiking && lstm) throw UsageError("a network cannot mix RAF and LSTM layers");
    if (spiking) return ExecutionMode::Pipelined;
    if (lstm) return ExecutionMode::Recurrent;
    return ExecutionMode::Feedforward;
}

SpikingLayer::SpikingLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix)
    : Layer(spec, std::move(in_shape), std::move(out_shape)) {
    const std::size_t n = spec_.units;
    if (spec_.kind == LayerKind::RafConv)
        weight = {prefix + "weight", Tensor({n, in_shape_[0], spec_.kernel, spec_.kernel})};
    else
        weight = {prefix + "weight", Tensor({n, in_shape_[0]})};
    omega = {prefix + "omega", Tensor({n})};
    xi = {prefix + "xi", Tensor({n})};
    theta = {prefix + "theta", Tensor({n})};
    beta = {prefix + "beta", Tensor({n})};
}

void SpikingLayer::initialize(Rng& rng) {
    const std::size_t fan_in = shape_size(weight.value.shape()) / spec_.units;
    weight.value = kaiming_uniform(weight.value.shape(), fan_in, rng);
    auto p = init_neuron_params(spec_.units, rng);
    omega.value = std::move(p.omega);
    xi.value = std::move(p.xi);
    theta.value = std::move(p.theta);
    beta.value = std::move(p.beta);
}

Var SpikingLayer::forward(Var x, LayerState& state, const ForwardContext& ctx) {
    Tape& tape = x.tape();
    Var w = tape.param(weight);
    Var current = spec_.kind == LayerKind::RafConv ? conv2d(x, w, {spec_.stride, spec_.padding}) : linear(x, w);
    if (!state.raf) {
        Var zero = tape.input(Tensor::zeros(current.shape()));
        state.raf = RAFStateVars{zero, zero};
    }
    RAFStateVars next = raf_step(*state.raf, tape.param(omega), tape.param(xi), current, ctx.dt);
    Var spikes = hardsoft_spike(next.v, tape.param(theta), tape.param(beta), ctx.spike_mode);
    if (ctx.reset_on_spike) next.v = next.v * add_scalar(scale(spikes, -1.0), 1.0);
    state.raf = next;
    return spikes;
}

SpikingPoolLayer::SpikingPoolLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix)
    : Layer(spec, std::move(in_shape), std::move(out_shape)),
      theta{prefix + "theta", Tensor({in_shape_[0]})},
      beta{prefix + "beta", Tensor({in_shape_[0]})} {}

void SpikingPoolLayer::initialize(Rng& rng) {
    // Pooled inputs live in [0, 1]; thresholds above 1 would silence a channel.
    theta.value = uniform(theta.value.shape(), 0.0, 1.0, rng);
    beta.value.fill(NeuronInit{}.beta);
}

Var SpikingPoolLayer::forward(Var x, LayerState&, const ForwardContext& ctx) {
    Tape& tape = x.tape();
    return hardsoft_spike(avg_pool2d(x, spec_.kernel, spec_.stride), tape.param(theta), tape.param(beta),
                          ctx.spike_mode);
}

LstmLayer::LstmLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix)
    : Layer(spec, std::move(in_shape), std::move(out_shape)),
      w_ih{prefix + "w_ih", Tensor({4 * spec_.units, in_shape_[0]})},
      w_hh{prefix + "w_hh", Tensor({4 * spec_.units, spec_.units})},
      b_ih{prefix + "b_ih", Tensor({4 * spec_.units})},
      b_hh{prefix + "b_hh", Tensor({4 * spec_.units})} {}

void LstmLayer::initialize(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.units));
    for (Parameter* p : parameters()) p->value = uniform(p->value.shape(), -bound, bound, rng);
}

Var LstmLayer::forward(Var x, LayerState& state, const ForwardContext&) {
    Tape& tape = x.tape();
    const std::size_t batch = x.shape()[0];
    const std::size_t h = spec_.units;
    if (!state.h.valid()) {
        state.h = tape.input(Tensor::zeros({batch, h}));
        state.c = state.h;
    }
    Var gates = linear(x, tape.param(w_ih)) + linear(state.h, tape.param(w_hh));
    gates = add_row_bias(add_row_bias(gates, tape.param(b_ih)), tape.param(b_hh));
    Var in_gate = sigmoid(slice_cols(gates, 0, h));
    Var forget_gate = sigmoid(slice_cols(gates, h, h));
    Var cell_gate = tanh(slice_cols(gates, 2 * h, h));
    Var out_gate = sigmoid(slice_cols(gates, 3 * h, h));
    state.c = forget_gate * state.c + in_gate * cell_gate;
    state.h = out_gate * tanh(state.c);
    return state.h;
}

LinearLayer::LinearLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix)
    : Layer(spec, std::move(in_shape), std::move(out_shape)),
      weight{prefix + "weight", Tensor({spec_.units, in_shape_[0]})},
      bias{prefix + "bias", Tensor({spec_.units})} {}

std::vector<Parameter*> LinearLayer::parameters() {
    if (spec_.bias) return {&weight, &bias};
    return {&weight};
}

void LinearLayer::initialize(Rng& rng) {
    const std::size_t fan_in = in_shape_[0];
    weight.value = kaiming_uniform(weight.value.shape(), fan_in, rng);
    if (spec_.bias) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        bias.value = uniform(bias.value.shape(), -bound, bound, rng);
    }
}

Var LinearLayer::forward(Var x, LayerState&, const ForwardContext&) {
    Tape& tape = x.tape();
    Var y = linear(x, tape.param(weight));
    if (spec_.bias) y = add_row_bias(y, tape.param(bias));
    return spec_.relu ? relu(y) : y;
}

ConvReluLayer::ConvReluLayer(LayerSpec spec, Shape in_shape, Shape out_shape, const std::string& prefix)
    : Layer(spec, std::move(in_shape), std::move(out_shape)),
      kernels{prefix + "weight", Tensor({spec_.units, in_shape_[0], spec_.kernel, spec_.kernel})} {}

void ConvReluLayer::initialize(Rng& rng) {
    kernels.value = kaiming_uniform(kernels.value.shape(), in_shape_[0] * spec_.kernel * spec_.kernel, rng);
}

Var ConvReluLayer::forward(Var x, LayerState&, const ForwardContext&) {
    return relu(conv2d(x, x.tape().param(kernels), {spec_.stride, spec_.padding}));
}

Var AvgPoolLayer::forward(Var x, LayerState&, const ForwardContext&) {
    return avg_pool2d(x, spec_.kernel, spec_.stride);
}

Var FlattenLayer::forward(Var x, LayerState&, const ForwardContext&) {
    const std::size_t batch = x.shape()[0];
    return reshape(x, {batch, shape_size(out_shape_)});
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)), mode_(execution_mode(spec_)) { build(); }

Network::Network(NetworkSpec spec, Rng& rng) : Network(std::move(spec)) {
    for (auto& l : layers_) l->initialize(rng);
    for (auto& l : layers_)
        if (auto* s = dynamic_cast<SpikingLayer*>(l.get())) check_euler_stability(s->omega.value, spec_.dt);
}

void Network::build() {
    if (spec_.layers.empty()) throw UsageError("network has no layers");
    if (!(spec_.dt > 0.0)) throw UsageError("dt must be positive");
    const auto shapes = infer_shapes(spec_);
    if (shapes.back() != Shape{spec_.classes})
        throw DimensionError("network output " + shape_str(shapes.back()) + " does not match " +
                             std::to_string(spec_.classes) + " classes");
    if (mode_ == ExecutionMode::Pipelined) {
        if (spec_.objective == Objective::Logits)
            throw UsageError("spiking networks need a last-potential or spike-count objective");
        if (!is_stateful(spec_.layers.back().kind))
            throw UsageError("spiking networks must end in a stateful spiking readout");
        if (spec_.objective == Objective::SpikeCountWindow && spec_.window == 0)
            throw UsageError("spike-count window must be positive");
    } else if (spec_.objective != Objective::Logits) {
        throw UsageError("non-spiking networks use the logits objective");
    }
    layers_.clear();
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        const Shape in = i == 0 ? spec_.input_shape : shapes[i - 1];
        const std::string prefix = std::to_string(i) + "." + to_string(l.kind) + ".";
        switch (l.kind) {
            case LayerKind::RafDense:
            case LayerKind::RafConv:
            case LayerKind::SpikingLinear:
                layers_.push_back(std::make_unique<SpikingLayer>(l, in, shapes[i], prefix));
                break;
            case LayerKind::SpikingAvgPool:
                layers_.push_back(std::make_unique<SpikingPoolLayer>(l, in, shapes[i], prefix));
                break;
            case LayerKind::Lstm: layers_.push_back(std::make_unique<LstmLayer>(l, in, shapes[i], prefix)); break;
            case LayerKind::Linear: layers_.push_back(std::make_unique<LinearLayer>(l, in, shapes[i], prefix)); break;
            case LayerKind::ConvRelu:
                layers_.push_back(std::make_unique<ConvReluLayer>(l, in, shapes[i], prefix));
                break;
            case LayerKind::AvgPool: layers_.push_back(std::make_unique<AvgPoolLayer>(l, in, shapes[i])); break;
            case LayerKind::Flatten: layers_.push_back(std::make_unique<FlattenLayer>(l, in, shapes[i])); break;
        }
    }
}

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
        for (Parameter* p : l->parameters()) out.push_back(p);
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (Parameter* p : parameters()) n += p->value.size();
    return n;
}

ForwardContext Network::context() const { return {spec_.dt, spike_mode, spec_.reset_on_spike}; }

ForwardResult Network::forward(Tape& tape, const std::vector<Tensor>& steps) {
    if (steps.empty()) throw UsageError("forward: no input steps");
    const Shape expect = batched(steps[0].dim(0), spec_.input_shape);
    for (const auto& s : steps)
        if (s.shape() != expect)
            throw DimensionError("forward: input step " + shape_str(s.shape()) + " but network expects " +
                                 shape_str(expect));
    switch (mode_) {
        case ExecutionMode::Pipelined: return unrolled_forward(tape, steps);
        case ExecutionMode::Recurrent: return recurrent_forward(tape, steps);
        case ExecutionMode::Feedforward: return feedforward(tape, steps);
    }
    throw UsageError("unknown execution mode");
}

ForwardResult Network::unrolled_forward(Tape& tape, const std::vector<Tensor>& steps) {
    // Blocks: leading stateless layers plus the stateful layer they feed.
    std::vector<std::vector<std::size_t>> blocks(1);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        blocks.back().push_back(i);
        if (is_stateful(spec_.layers[i].kind) && i + 1 < layers_.size()) blocks.emplace_back();
    }
    const std::size_t depth = blocks.size();
    const std::size_t input_steps = steps.size();
    if (input_steps < depth)
        throw UsageError("unrolled_forward: " + std::to_string(input_steps) + " input steps but network depth is " +
                         std::to_string(depth));
    const std::size_t batch = steps[0].dim(0);
    const ForwardContext ctx = context();

    std::vector<Var> idle_input(depth);
    idle_input[0] = tape.input(Tensor::zeros(steps[0].shape()));
    for (std::size_t b = 1; b < depth; ++b) {
        const std::size_t first = blocks[b].front();
        idle_input[b] = tape.input(Tensor::zeros(batched(batch, layers_[first]->input_shape())));
    }

    std::vector<LayerState> states(layers_.size());
    std::vector<Var> previous(depth);
    ForwardResult result;
    result.first_valid = depth - 1;
    const std::size_t readout = layers_.size() - 1;
    for (std::size_t t = 0; t < input_steps + depth - 1; ++t) {
        std::vector<Var> current(depth);
        for (std::size_t b = 0; b < depth; ++b) {
            Var x;
            if (b == 0)
                x = t < input_steps ? tape.input(steps[t]) : idle_input[0];
            else
                x = previous[b - 1].valid() ? previous[b - 1] : idle_input[b];
            for (std::size_t i : blocks[b]) x = layers_[i]->forward(x, states[i], ctx);
            current[b] = x;
        }
        previous = std::move(current);
        result.spikes.push_back(previous.back());
        result.potentials.push_back(states[readout].raf->v);
    }
    return result;
}

ForwardResult Network::recurrent_forward(Tape& tape, const std::vector<Tensor>& steps) {
    std::size_t last_stateful = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (is_stateful(spec_.layers[i].kind)) last_stateful = i;
    const ForwardContext ctx = context();
    std::vector<LayerState> states(layers_.size());
    Var x;
    for (const auto& step : steps) {
        x = tape.input(step);
        for (std::size_t i = 0; i <= last_stateful; ++i) x = layers_[i]->forward(x, states[i], ctx);
    }
    for (std::size_t i = last_stateful + 1; i < layers_.size(); ++i) x = layers_[i]->forward(x, states[i], ctx);
    ForwardResult result;
    result.logits = x;
    return result;
}

ForwardResult Network::feedforward(Tape& tape, const std::vector<Tensor>& steps) {
    if (steps.size() != 1) throw UsageError("feedforward networks take exactly one input step");
    const ForwardContext ctx = context();
    std::vector<LayerState> states(layers_.size());
    Var x = tape.input(steps[0]);
    for (std::size_t i = 0; i < layers_.size(); ++i) x = layers_[i]->forward(x, states[i], ctx);
    ForwardResult result;
    result.logits = x;
    return result;
}

NetworkSpec raf_spec(Shape input_shape, std::size_t width, std::size_t depth, std::size_t classes) {
    NetworkSpec s;
    s.input_shape = std::move(input_shape);
    s.classes = classes;
    if (s.input_shape.size() > 1) s.layers.push_back({LayerKind::Flatten});
    for (std::size_t i = 0; i < depth; ++i) s.layers.push_back({.kind = LayerKind::RafDense, .units = width});
    s.layers.push_back({.kind = LayerKind::SpikingLinear, .units = classes});
    return s;
}

NetworkSpec lstm_spec(Shape input_shape, std::size_t width, std::size_t depth, std::size_t classes) {
    NetworkSpec s;
    s.input_shape = std::move(input_shape);
    s.classes = classes;
    s.objective = Objective::Logits;
    if (s.input_shape.size() > 1) s.layers.push_back({LayerKind::Flatten});
    for (std::size_t i = 0; i < depth; ++i) s.layers.push_back({.kind = LayerKind::Lstm, .units = width});
    s.layers.push_back({.kind = LayerKind::Linear, .units = classes, .bias = true});
    return s;
}

NetworkSpec raf_cnn_spec(std::size_t channels, std::size_t fc_width, std::size_t depth, std::size_t padding,
                         std::size_t classes) {
    NetworkSpec s;
    s.input_shape = {1, 28, 28};
    s.classes = classes;
    for (std::size_t i = 0; i < depth; ++i) {
        s.layers.push_back(
            {.kind = LayerKind::RafConv, .units = channels, .kernel = 5, .stride = 1, .padding = padding});
        s.layers.push_back({.kind = LayerKind::SpikingAvgPool, .kernel = 2, .stride = 2});
    }
    s.layers.push_back({LayerKind::Flatten});
    s.layers.push_back({.kind = LayerKind::SpikingLinear, .units = fc_width});
    s.layers.push_back({.kind = LayerKind::SpikingLinear, .units = classes});
    return s;
}

NetworkSpec cnn_spec(std::size_t channels, std::size_t fc_width, std::size_t depth, std::size_t padding,
                     std::size_t classes) {
    NetworkSpec s;
    s.input_shape = {1, 28, 28};
    s.classes = classes;
    s.objective = Objective::Logits;
    for (std::size_t i = 0; i < depth; ++i) {
        s.layers.push_back(
            {.kind = LayerKind::ConvRelu, .units = channels, .kernel = 5, .stride = 1, .padding = padding});
        s.layers.push_back({.kind = LayerKind::AvgPool, .kernel = 2, .stride = 2});
    }
    s.layers.push_back({LayerKind::Flatten});
    s.layers.push_back({.kind = LayerKind::Linear, .units = fc_width, .relu = true});
    s.layers.push_back({.kind = LayerKind::Linear, .units = classes});
    return s;
}

}  // namespace rafsnn
