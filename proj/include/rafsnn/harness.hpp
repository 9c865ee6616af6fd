#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rafsnn/datasets.hpp"
#include "rafsnn/encode.hpp"
#include "rafsnn/layers.hpp"
#include "rafsnn/training.hpp"

namespace rafsnn {

enum class ModelKind { Raf, Lstm, RafCnn, Cnn };
enum class DatasetKind { Mnist, Nmnist, Synthetic };

std::string to_string(ModelKind kind);
std::string to_string(DatasetKind kind);
ModelKind model_kind_from_string(const std::string& name);
DatasetKind dataset_kind_from_string(const std::string& name);

struct ArchitectureConfig {
    std::size_t depth = 0;  // hidden layers (raf, lstm) or conv blocks (cnn); 0 = model default
    std::size_t width = 64;       // hidden units of raf/lstm
    std::size_t channels = 16;    // conv channels
    std::size_t fc_width = 200;   // conv models' dense layer
    std::size_t padding = 2;      // conv padding
    double dt = 0.01;
    bool reset_on_spike = false;
    std::size_t window = 15;      // spike-count objective
    friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct ExperimentConfig {
    ModelKind model = ModelKind::Raf;
    DatasetKind dataset = DatasetKind::Synthetic;
    std::string dataset_root;     // empty: $RAFSNN_DATASET_ROOT or the build default
    std::size_t train_size = 5000;  // before the validation split
    std::size_t test_size = 0;      // 0: whole test split (1000 for synthetic data)
    double val_fraction = 0.1;
    std::size_t steps = 20;         // Poisson steps for static images
    std::size_t frames = 30;        // frames per event sequence
    ArchitectureConfig arch;
    TrainSchedule schedule;
    NoiseSpec noise;
    std::size_t repeats = 3;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string output_dir = "runs/experiment";

    void validate() const;
    bool static_data() const { return dataset == DatasetKind::Mnist; }
    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Missing keys keep their defaults; unknown keys are a FormatError.
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// 16 hex digits of FNV-1a over the canonical JSON, excluding output_dir.
std::string config_hash(const ExperimentConfig& c);

NetworkSpec build_network_spec(const ExperimentConfig& c);

// The test split the config evaluates on: the (sub)sampled MNIST/N-MNIST
// test files, or a synthetic set generated from a seed disjoint from training.
LabeledDataset load_test_set(const ExperimentConfig& c);

// Distinct per-repeat seeds, a pure function of the base seed.
std::vector<std::uint64_t> derive_seeds(std::uint64_t base, std::size_t n);

struct RepeatResult {
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;   // under the configured test condition
    double test_loss = 0.0;
    double clean_accuracy = 0.0;  // unperturbed test set
    std::size_t best_epoch = 0;
    std::size_t epochs = 0;
    double wall_seconds = 0.0;
    std::vector<EpochRecord> log;
};

struct MetricsRecord {
    std::string config_hash;
    ModelKind model = ModelKind::Raf;
    DatasetKind dataset = DatasetKind::Synthetic;
    std::size_t n_params = 0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_clean_accuracy = 0.0;
    double wall_seconds = 0.0;
    std::vector<RepeatResult> runs;
};

inline constexpr const char* kMetricsHeader =
    "config_hash,model,dataset,repeat,seed,test_accuracy,test_loss,clean_accuracy,best_epoch,epochs,n_params";
inline constexpr const char* kSummaryHeader =
    "config_hash,model,dataset,repeats,mean_accuracy,std_accuracy,mean_clean_accuracy,n_params";
inline constexpr const char* kSweepHeader =
    "axis,value,model,dataset,mean_accuracy,std_accuracy,n_params,wall_time,config_hash";

// Trains and tests `repeats` times. Writes into output_dir: config.json,
// metrics.csv (one row per repeat), summary.csv, logs/repeat_<k>.csv and
// checkpoints/repeat_<k>.ckpt. metrics.csv and summary.csv hold no timings.
MetricsRecord run_experiment(const ExperimentConfig& c,
                             const std::function<void(std::size_t, const EpochRecord&)>& on_epoch = {});

enum class SweepAxis { TestNoise, TrainNoise, TrainSize, BatchSize, Depth, Width };
std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepSpec {
    ExperimentConfig base;
    SweepAxis axis = SweepAxis::TestNoise;
    std::vector<double> values;
};

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);

// Noise axes use σ for static data and p for event data.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value);

struct SweepRow {
    double value = 0.0;
    MetricsRecord record;
};

// Each point runs in output_dir/points/<axis>=<value>. Rows are appended to
// output_dir/sweep.csv as points finish, so a failure keeps earlier rows.
std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                const std::function<void(const SweepRow&)>& on_point = {});

struct Report {
    std::string markdown;
    std::string csv;
    std::size_t runs = 0;
};

// Aggregates every summary.csv and sweep.csv below `dir`, in path order.
Report build_report(const std::filesystem::path& dir);
// Writes report.md and report.csv into `dir`.
Report write_report(const std::filesystem::path& dir);

}  // namespace rafsnn
