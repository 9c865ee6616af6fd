#include "rafsnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "rafsnn/errors.hpp"
#include "rafsnn/runtime.hpp"

namespace rafsnn {

namespace fs = std::filesystem;

Var loss_last_potential(Var readout_v, std::span<const int> labels) {
    return softmax_cross_entropy(readout_v, labels, static_cast<double>(labels.size()));
}

Var spike_count_logits(const ForwardResult& out, std::size_t window) {
    if (window == 0) throw UsageError("spike-count window must be positive");
    const std::size_t total = out.spikes.size();
    const std::size_t valid = total > out.first_valid ? total - out.first_valid : 0;
    if (valid < window)
        throw UsageError("spike-count objective needs " + std::to_string(window) + " valid readout steps, got " +
                         std::to_string(valid));
    Var counts = out.spikes[total - window];
    for (std::size_t t = total - window + 1; t < total; ++t) counts = counts + out.spikes[t];
    return counts;
}

Var loss_spike_count(const ForwardResult& out, std::size_t window, std::span<const int> labels) {
    return softmax_cross_entropy(spike_count_logits(out, window), labels, static_cast<double>(labels.size()));
}

Var objective_logits(const NetworkSpec& spec, const ForwardResult& out) {
    switch (spec.objective) {
    case Objective::LastPotential: return out.potentials.back();
    case Objective::SpikeCountWindow: return spike_count_logits(out, spec.window);
    case Objective::Logits: return out.logits;
    }
    throw UsageError("unknown objective");
}

OptimizerState make_optimizer_state(const std::vector<Parameter*>& params, const AdamWConfig& config) {
    OptimizerState s;
    s.config = config;
    s.lr = config.lr;
    for (const Parameter* p : params) {
        s.m.emplace_back(p->value.shape());
        s.v.emplace_back(p->value.shape());
    }
    return s;
}

void adamw_step(const std::vector<Parameter*>& params, const std::vector<Tensor>& grads, OptimizerState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw DimensionError("adamw_step: parameter, gradient and moment counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i]->value.shape())
            throw DimensionError("adamw_step: gradient " + shape_str(grads[i].shape()) + " for parameter " +
                                 params[i]->name + " " + shape_str(params[i]->value.shape()));
        if (!grads[i].all_finite()) {
            std::size_t bad = 0;
            while (std::isfinite(grads[i][bad])) ++bad;
            throw NumericalError("non-finite gradient " + std::to_string(grads[i][bad]) + " for " + params[i]->name +
                                 "[" + std::to_string(bad) + "] at optimizer step " +
                                 std::to_string(state.step + 1));
        }
    }
    ++state.step;
    const AdamWConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* w = params[i]->value.raw();
        double* m = state.m[i].raw();
        double* v = state.v[i].raw();
        const double* g = grads[i].raw();
        for (std::size_t k = 0; k < grads[i].size(); ++k) {
            m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
            v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1, v_hat = v[k] / bc2;
            w[k] -= state.lr * c.weight_decay * w[k];
            w[k] -= state.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

PlateauScheduler::PlateauScheduler(std::size_t patience, double factor) : patience_(patience), factor_(factor) {
    if (patience == 0) throw UsageError("scheduler patience must be >= 1");
    if (!(factor > 0.0 && factor < 1.0)) throw UsageError("scheduler factor must lie in (0, 1)");
}

double PlateauScheduler::observe(double val_loss, double lr) {
    if (val_loss < best_) {
        best_ = val_loss;
        bad_ = 0;
        return lr;
    }
    if (++bad_ >= patience_) {
        bad_ = 0;
        return lr * factor_;
    }
    return lr;
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw UsageError("early-stop patience must be >= 1");
}

bool EarlyStopping::observe(double val_accuracy) {
    improved_ = val_accuracy > best_;
    if (improved_) {
        best_ = val_accuracy;
        bad_ = 0;
        return false;
    }
    return ++bad_ >= patience_;
}

void TrainSchedule::validate() const {
    if (batch_size == 0) throw UsageError("batch size must be >= 1");
    if (lr_halve_patience == 0 || early_stop_patience == 0) throw UsageError("patiences must be >= 1");
    if (max_epochs == 0) throw UsageError("max epochs must be >= 1");
    if (!(optimizer.lr > 0.0)) throw UsageError("learning rate must be positive");
}

std::vector<Tensor> make_inputs(const NetworkSpec& spec, const LabeledDataset& ds,
                                std::span<const std::size_t> indices, const Presentation& presentation,
                                std::uint64_t seed, std::uint64_t epoch) {
    const std::size_t per_step = shape_size(spec.input_shape);
    const std::size_t batch = indices.size();
    const bool feedforward = execution_mode(spec) == ExecutionMode::Feedforward;
    const NoiseSpec& noise = presentation.noise;
    noise.validate();
    Shape step_shape{batch};
    step_shape.insert(step_shape.end(), spec.input_shape.begin(), spec.input_shape.end());

    std::size_t steps = 1;
    if (ds.temporal) {
        if (feedforward) throw UsageError("feedforward models take static images, not frame sequences");
        if (noise.kind == NoiseKind::GaussianStatic)
            throw UsageError("gaussian-static noise applies to static images only");
        steps = ds.sample_shape[0];
        if (ds.sample_size() / steps != per_step)
            throw DimensionError("frame size " + std::to_string(ds.sample_size() / steps) +
                                 " does not match network input " + shape_str(spec.input_shape));
    } else {
        if (noise.kind == NoiseKind::BitflipDynamic)
            throw UsageError("bitflip-dynamic noise applies to binary frame sequences only");
        if (ds.sample_size() != per_step)
            throw DimensionError("image size " + std::to_string(ds.sample_size()) + " does not match network input " +
                                 shape_str(spec.input_shape));
        if (!feedforward) steps = presentation.steps;
    }
    if (steps == 0) throw UsageError("presentation needs at least one step");

    std::vector<Tensor> out(steps, Tensor(step_shape));
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t i = indices[b];
        Rng rng = stream_rng(seed, epoch, ds.ids.at(i));
        Tensor x = ds.sample(i);
        if (ds.temporal) {
            if (noise.kind == NoiseKind::BitflipDynamic && noise.p > 0.0) x = bitflip_perturb(x, noise.p, rng);
            for (std::size_t t = 0; t < steps; ++t)
                std::copy_n(x.raw() + t * per_step, per_step, out[t].raw() + b * per_step);
            continue;
        }
        if (noise.kind == NoiseKind::GaussianStatic && noise.sigma > 0.0) x = gaussian_perturb(x, noise.sigma, rng);
        if (feedforward) {
            std::copy_n(x.raw(), per_step, out[0].raw() + b * per_step);
            continue;
        }
        const Tensor spikes = poisson_encode(x, steps, rng);
        for (std::size_t t = 0; t < steps; ++t)
            std::copy_n(spikes.raw() + t * per_step, per_step, out[t].raw() + b * per_step);
    }
    return out;
}

namespace {

struct BatchOutcome {
    double loss_sum = 0.0;  // Σ per-sample loss
    std::size_t correct = 0;
    Gradients grads;
};

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
    const std::size_t classes = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double* row = logits.raw() + r * classes;
        const auto pred = std::max_element(row, row + classes) - row;
        correct += pred == labels[r];
    }
    return correct;
}

// Runs one chunk on its own tape. The loss is normalised by the full batch so
// chunk gradients add up to the batch gradient.
BatchOutcome run_chunk(Network& net, const LabeledDataset& ds, std::span<const std::size_t> idx,
                       const Presentation& presentation, std::uint64_t seed, std::uint64_t epoch, double normalizer,
                       bool backward) {
    BatchOutcome res;
    if (idx.empty()) return res;
    std::vector<int> labels;
    for (std::size_t i : idx) labels.push_back(ds.labels[i]);
    Tape tape;
    const ForwardResult out = net.forward(tape, make_inputs(net.spec(), ds, idx, presentation, seed, epoch));
    Var logits = objective_logits(net.spec(), out);
    Var loss = softmax_cross_entropy(logits, labels, normalizer);
    res.loss_sum = loss.value().item() * normalizer;
    res.correct = count_correct(logits.value(), labels);
    if (backward) res.grads = tape.backward(loss);
    return res;
}

BatchOutcome run_batch(Network& net, const LabeledDataset& ds, std::span<const std::size_t> idx,
                       const Presentation& presentation, std::uint64_t seed, std::uint64_t epoch,
                       std::size_t threads, bool backward) {
    const double normalizer = static_cast<double>(idx.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, idx.size()));
    if (workers == 1) return run_chunk(net, ds, idx, presentation, seed, epoch, normalizer, backward);

    std::vector<BatchOutcome> parts(workers);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (idx.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(idx.size(), w * chunk), hi = std::min(idx.size(), lo + chunk);
        pool.emplace_back([&, w, lo, hi] {
            try {
                parts[w] = run_chunk(net, ds, idx.subspan(lo, hi - lo), presentation, seed, epoch, normalizer,
                                     backward);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    BatchOutcome total = std::move(parts[0]);
    for (std::size_t w = 1; w < workers; ++w) {
        total.loss_sum += parts[w].loss_sum;
        total.correct += parts[w].correct;
        if (backward) total.grads += parts[w].grads;
    }
    return total;
}

// Epoch tags for the noise streams; evaluation draws never collide with training ones.
constexpr std::uint64_t kEvalEpoch = 0xe7a1'0000'0000ULL;
constexpr std::uint64_t kShuffleTag = 0x5348'5546ULL;

EvalResult evaluate_epoch(Network& net, const LabeledDataset& ds, const Presentation& presentation,
                          std::uint64_t seed, std::uint64_t epoch, std::size_t batch_size, std::size_t threads) {
    EvalResult r;
    r.count = ds.size();
    if (ds.size() == 0) return r;
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
        const std::size_t n = std::min(batch_size, idx.size() - lo);
        auto part = run_batch(net, ds, std::span(idx).subspan(lo, n), presentation, seed, epoch, threads, false);
        loss += part.loss_sum;
        correct += part.correct;
    }
    r.loss = loss / static_cast<double>(ds.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return r;
}

void append_log(const fs::path& path, const EpochRecord& r) {
    const bool fresh = !fs::exists(path);
    std::ofstream os(path, std::ios::app);
    if (!os) throw FormatError("cannot write training log '" + path.string() + "'");
    if (fresh) os << "epoch,split,loss,accuracy,lr,wall_time\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,train,%.10g,%.6f,%.10g,%.3f\n%zu,val,%.10g,%.6f,%.10g,%.3f\n", r.epoch,
                  r.train_loss, r.train_accuracy, r.lr, r.wall_seconds, r.epoch, r.val_loss, r.val_accuracy, r.lr,
                  r.wall_seconds);
    os << buf;
}

}  // namespace

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = stream_rng(seed, kShuffleTag, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

EvalResult evaluate(Network& net, const LabeledDataset& ds, const EvalOptions& options) {
    tune_allocator();
    if (options.batch_size == 0) throw UsageError("evaluation batch size must be >= 1");
    return evaluate_epoch(net, ds, options.presentation, options.seed, kEvalEpoch, options.batch_size,
                          options.threads);
}

TrainResult train(Network& net, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainOptions& options) {
    const TrainSchedule& sched = options.schedule;
    sched.validate();
    tune_allocator();
    if (train_set.size() == 0 || val_set.size() == 0) throw UsageError("training and validation sets must be non-empty");
    if (options.log_path) {
        if (options.log_path->has_parent_path()) fs::create_directories(options.log_path->parent_path());
        fs::remove(*options.log_path);
    }

    const auto params = net.parameters();
    OptimizerState opt = make_optimizer_state(params, sched.optimizer);
    PlateauScheduler plateau(sched.lr_halve_patience);
    EarlyStopping stopper(sched.early_stop_patience);
    TrainResult result;
    ParameterSnapshot best = snapshot(net);

    for (std::size_t epoch = 1; epoch <= sched.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = opt.lr;
        const std::vector<std::size_t> order = epoch_order(train_set.size(), options.seed, epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += sched.batch_size) {
            const std::size_t n = std::min(sched.batch_size, order.size() - lo);
            BatchOutcome b;
            try {
                b = run_batch(net, train_set, std::span(order).subspan(lo, n), options.presentation, options.seed,
                              epoch, options.threads, true);
                std::vector<Tensor> grads;
                grads.reserve(params.size());
                for (const Parameter* p : params) grads.push_back(b.grads.of(*p));
                adamw_step(params, grads, opt);
            } catch (const NumericalError& e) {
                spdlog::error("training diverged in epoch {} at batch offset {}: {}", epoch, lo, e.what());
                throw NumericalError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
            }
            loss_sum += b.loss_sum;
            correct += b.correct;
        }
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        const EvalResult val =
            evaluate_epoch(net, val_set, options.presentation, options.seed, kEvalEpoch + epoch, 64, options.threads);
        rec.val_loss = val.loss;
        rec.val_accuracy = val.accuracy;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(rec);
        if (options.log_path) append_log(*options.log_path, rec);
        if (options.on_epoch) options.on_epoch(rec);
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
            throw NumericalError("training diverged: non-finite loss in epoch " + std::to_string(epoch));

        const bool stop = stopper.observe(val.accuracy);
        if (stopper.improved()) {
            best = snapshot(net);
            result.best_epoch = epoch;
            result.best_val_accuracy = val.accuracy;
            if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, net);
        }
        opt.lr = plateau.observe(val.loss, opt.lr);
        if (stop) {
            result.early_stopped = true;
            break;
        }
    }
    restore(net, best);
    return result;
}

GradCheckResult gradient_check(Network& net, const std::vector<Tensor>& steps, std::span<const int> labels,
                               std::size_t samples, Rng& rng, double h, double floor) {
    const SpikeMode saved_mode = net.spike_mode;
    net.spike_mode = SpikeMode::Soft;
    auto loss_of = [&] {
        Tape tape;
        const ForwardResult out = net.forward(tape, steps);
        return softmax_cross_entropy(objective_logits(net.spec(), out), labels, static_cast<double>(labels.size()))
            .value()
            .item();
    };
    Tape tape;
    const ForwardResult out = net.forward(tape, steps);
    const Gradients grads = tape.backward(
        softmax_cross_entropy(objective_logits(net.spec(), out), labels, static_cast<double>(labels.size())));

    const auto params = net.parameters();
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    std::size_t total = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        total += params[p]->value.size();
        picks.emplace_back(p, rng() % params[p]->value.size());
    }
    while (picks.size() < std::min(samples, total)) {
        std::size_t flat = rng() % total, p = 0;
        while (flat >= params[p]->value.size()) flat -= params[p++]->value.size();
        picks.emplace_back(p, flat);
    }

    GradCheckResult res;
    for (auto [p, i] : picks) {
        Tensor& w = params[p]->value;
        const double orig = w[i];
        w[i] = orig + h;
        const double up = loss_of();
        w[i] = orig - h;
        const double down = loss_of();
        w[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads.of(*params[p])[i];
        const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
        ++res.checked;
        if (err >= res.max_relative_error) {
            res.max_relative_error = err;
            res.worst = params[p]->name + "[" + std::to_string(i) + "]";
        }
    }
    net.spike_mode = saved_mode;
    return res;
}

}  // namespace rafsnn
