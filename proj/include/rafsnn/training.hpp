#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rafsnn/checkpoint.hpp"
#include "rafsnn/datasets.hpp"
#include "rafsnn/encode.hpp"
#include "rafsnn/layers.hpp"
#include "rafsnn/tape.hpp"

namespace rafsnn {

// ---- Loss heads ----------------------------------------------------------------

// Mean softmax cross-entropy over the batch.
Var loss_last_potential(Var readout_v, std::span<const int> labels);

// Per-class spike counts summed over the last `window` valid readout steps.
Var spike_count_logits(const ForwardResult& out, std::size_t window);
Var loss_spike_count(const ForwardResult& out, std::size_t window, std::span<const int> labels);

// Scores the objective of `spec` is trained on; argmax gives the prediction.
Var objective_logits(const NetworkSpec& spec, const ForwardResult& out);

// ---- Optimisation ----------------------------------------------------------------

struct AdamWConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct OptimizerState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t step = 0;
    double lr = 0.01;
    AdamWConfig config;
};

OptimizerState make_optimizer_state(const std::vector<Parameter*>& params, const AdamWConfig& config);

// Decoupled weight decay: θ ← θ − lr·λ·θ − lr·m̂/(√v̂ + ε).
// Throws NumericalError naming the parameter on a non-finite gradient,
// before any parameter is modified.
void adamw_step(const std::vector<Parameter*>& params, const std::vector<Tensor>& grads, OptimizerState& state);

// Halves the learning rate after `patience` epochs without a strictly lower
// validation loss. The counter restarts after each halving and each improvement.
class PlateauScheduler {
public:
    explicit PlateauScheduler(std::size_t patience = 2, double factor = 0.5);
    // Returns the learning rate for the next epoch.
    double observe(double val_loss, double lr);
    std::size_t patience() const { return patience_; }

private:
    std::size_t patience_;
    double factor_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t bad_ = 0;
};

// Signals a stop after `patience` consecutive epochs without a strictly
// higher validation accuracy.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience = 6);
    bool observe(double val_accuracy);
    bool improved() const { return improved_; }

private:
    std::size_t patience_;
    double best_ = -std::numeric_limits<double>::infinity();
    std::size_t bad_ = 0;
    bool improved_ = false;
};

struct TrainSchedule {
    std::size_t batch_size = 32;
    std::size_t lr_halve_patience = 2;
    std::size_t early_stop_patience = 6;
    std::size_t max_epochs = 200;
    AdamWConfig optimizer;

    void validate() const;
    friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

// ---- Data presentation ----------------------------------------------------------

// How samples become network inputs. Static images are Poisson-encoded over
// `steps` steps for spiking networks and fed directly to feedforward ones.
struct Presentation {
    std::size_t steps = 20;
    NoiseSpec noise;  // applied whatever its phase tag; callers pick the spec per split
};

// One [B × input_shape] tensor per input step. Randomness for sample `i` comes
// from stream_rng(seed, epoch, ds.ids[i]), so results do not depend on batching.
std::vector<Tensor> make_inputs(const NetworkSpec& spec, const LabeledDataset& ds,
                                std::span<const std::size_t> indices, const Presentation& presentation,
                                std::uint64_t seed, std::uint64_t epoch);

// Visiting order of the training set in a given epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

// ---- Training loop ----------------------------------------------------------------

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

struct EvalOptions {
    Presentation presentation;
    std::uint64_t seed = 0;
    std::size_t batch_size = 64;
    std::size_t threads = 1;
};

EvalResult evaluate(Network& net, const LabeledDataset& ds, const EvalOptions& options);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;  // rate used during this epoch
    double wall_seconds = 0.0;
};

struct TrainOptions {
    TrainSchedule schedule;
    Presentation presentation;  // for both training and validation batches
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::optional<std::filesystem::path> log_path;         // CSV: epoch,split,loss,accuracy,lr,wall_time
    std::optional<std::filesystem::path> checkpoint_path;  // best-validation-accuracy weights
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
    bool early_stopped = false;
};

// Leaves `net` holding the best-validation-accuracy weights. A non-finite
// loss or gradient aborts with NumericalError after the log is written.
TrainResult train(Network& net, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainOptions& options);

// ---- Gradient check -----------------------------------------------------------------

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "name[index]"
};

// Soft-forward finite-difference check of the objective loss on one batch.
// Every parameter tensor contributes at least one entry; the rest are drawn
// uniformly until `samples` entries are checked. Relative error is
// |a − n| / max(|a|, |n|, floor).
GradCheckResult gradient_check(Network& net, const std::vector<Tensor>& steps, std::span<const int> labels,
                               std::size_t samples, Rng& rng, double h = 1e-5, double floor = 1e-6);

}  // namespace rafsnn
