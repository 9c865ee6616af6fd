#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "rafsnn/errors.hpp"
#include "rafsnn/harness.hpp"
#include "rafsnn/runtime.hpp"

using namespace rafsnn;
namespace fs = std::filesystem;

namespace {

enum Exit { Ok = 0, Usage = 1, Data = 2, Numerical = 3 };

// Flag values land here; only flags given on the command line override the
// config file.
struct Overrides {
    std::string config;
    std::string model, dataset, dataset_root, out;
    std::size_t repeats = 0, threads = 0, train_size = 0, test_size = 0, steps = 0, frames = 0;
    std::uint64_t seed = 0;
    std::size_t depth = 0, width = 0, channels = 0, fc_width = 0, padding = 0, window = 0;
    double dt = 0.0, val_fraction = 0.0;
    bool reset = false;
    std::size_t batch_size = 0, max_epochs = 0;
    double lr = 0.0;
    std::string noise, noise_phase;
    double sigma = 0.0, p = 0.0;
};

struct Bound {
    Overrides o;
    std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;
};

void add_config_options(CLI::App* app, Bound& b) {
    auto& o = b.o;
    auto bind = [&](CLI::Option* opt, std::function<void(ExperimentConfig&)> f) { b.setters.emplace_back(opt, f); };
    app->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    bind(app->add_option("--model", o.model, "raf, lstm, raf-cnn or cnn"),
         [&](ExperimentConfig& c) { c.model = model_kind_from_string(o.model); });
    bind(app->add_option("--dataset", o.dataset, "mnist, nmnist or synthetic"),
         [&](ExperimentConfig& c) { c.dataset = dataset_kind_from_string(o.dataset); });
    bind(app->add_option("--dataset-root", o.dataset_root, "directory holding mnist/ and nmnist/"),
         [&](ExperimentConfig& c) { c.dataset_root = o.dataset_root; });
    bind(app->add_option("--out", o.out, "output directory"), [&](ExperimentConfig& c) { c.output_dir = o.out; });
    bind(app->add_option("--seed", o.seed, "base seed"), [&](ExperimentConfig& c) { c.seed = o.seed; });
    bind(app->add_option("--repeats", o.repeats, "runs with derived seeds"),
         [&](ExperimentConfig& c) { c.repeats = o.repeats; });
    bind(app->add_option("--threads", o.threads, "worker threads per batch"),
         [&](ExperimentConfig& c) { c.threads = o.threads; });
    bind(app->add_option("--train-size", o.train_size), [&](ExperimentConfig& c) { c.train_size = o.train_size; });
    bind(app->add_option("--test-size", o.test_size, "0: whole test split"),
         [&](ExperimentConfig& c) { c.test_size = o.test_size; });
    bind(app->add_option("--val-fraction", o.val_fraction),
         [&](ExperimentConfig& c) { c.val_fraction = o.val_fraction; });
    bind(app->add_option("--steps", o.steps, "Poisson steps for static images"),
         [&](ExperimentConfig& c) { c.steps = o.steps; });
    bind(app->add_option("--frames", o.frames, "frames per event sequence"),
         [&](ExperimentConfig& c) { c.frames = o.frames; });
    bind(app->add_option("--depth", o.depth), [&](ExperimentConfig& c) { c.arch.depth = o.depth; });
    bind(app->add_option("--width", o.width), [&](ExperimentConfig& c) { c.arch.width = o.width; });
    bind(app->add_option("--channels", o.channels), [&](ExperimentConfig& c) { c.arch.channels = o.channels; });
    bind(app->add_option("--fc-width", o.fc_width), [&](ExperimentConfig& c) { c.arch.fc_width = o.fc_width; });
    bind(app->add_option("--padding", o.padding), [&](ExperimentConfig& c) { c.arch.padding = o.padding; });
    bind(app->add_option("--dt", o.dt), [&](ExperimentConfig& c) { c.arch.dt = o.dt; });
    bind(app->add_flag("--reset-on-spike", o.reset), [&](ExperimentConfig& c) { c.arch.reset_on_spike = o.reset; });
    bind(app->add_option("--window", o.window, "spike-count window"),
         [&](ExperimentConfig& c) { c.arch.window = o.window; });
    bind(app->add_option("--batch-size", o.batch_size),
         [&](ExperimentConfig& c) { c.schedule.batch_size = o.batch_size; });
    bind(app->add_option("--max-epochs", o.max_epochs),
         [&](ExperimentConfig& c) { c.schedule.max_epochs = o.max_epochs; });
    bind(app->add_option("--lr", o.lr), [&](ExperimentConfig& c) { c.schedule.optimizer.lr = o.lr; });
    bind(app->add_option("--noise", o.noise, "none, gaussian-static or bitflip-dynamic"),
         [&](ExperimentConfig& c) { c.noise.kind = noise_kind_from_string(o.noise); });
    bind(app->add_option("--sigma", o.sigma), [&](ExperimentConfig& c) { c.noise.sigma = o.sigma; });
    bind(app->add_option("--p", o.p, "bit-flip probability"), [&](ExperimentConfig& c) { c.noise.p = o.p; });
    bind(app->add_option("--noise-phase", o.noise_phase, "train or test"),
         [&](ExperimentConfig& c) { c.noise.phase = noise_phase_from_string(o.noise_phase); });
}

ExperimentConfig resolve(const Bound& b) {
    ExperimentConfig c = b.o.config.empty() ? ExperimentConfig{} : load_config(b.o.config);
    for (const auto& [opt, set] : b.setters)
        if (opt->count() > 0) set(c);
    c.validate();
    return c;
}

void print_record(const MetricsRecord& r) {
    std::printf("%s on %s: mean accuracy %.4f (std %.4f, clean %.4f) over %zu runs, %zu parameters, config %s\n",
                to_string(r.model).c_str(), to_string(r.dataset).c_str(), r.mean_accuracy, r.std_accuracy,
                r.mean_clean_accuracy, r.runs.size(), r.n_params, r.config_hash.c_str());
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw UsageError("--values: '" + cell + "' is not a number");
        }
    }
    return out;
}

struct Reference {
    const char* name;
    NetworkSpec spec;
};

std::vector<Reference> reference_models() {
    const Shape events{2, kSensorSize, kSensorSize};
    return {{"cnn", cnn_spec(128)},
            {"raf-cnn", raf_cnn_spec(128)},
            {"lstm", lstm_spec(events, 128)},
            {"raf", raf_spec(events, 128)}};
}

int run(int argc, char** argv) {
    CLI::App app{"Resonate-and-fire spiking networks: training, evaluation and noise-robustness sweeps"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string verbosity = "info";
    app.add_option("--log-level", verbosity, "trace, debug, info, warn, error or off");

    Bound train_b, eval_b, sweep_b, grad_b, params_b;
    auto* train_cmd = app.add_subcommand("train", "train and test `repeats` times; writes metrics and logs");
    add_config_options(train_cmd, train_b);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the config's test set");
    add_config_options(eval_cmd, eval_b);
    std::string checkpoint;
    eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

    auto* sweep_cmd = app.add_subcommand("sweep", "vary one axis over a list of values");
    add_config_options(sweep_cmd, sweep_b);
    std::string sweep_file, axis, values;
    sweep_cmd->add_option("--sweep", sweep_file, "JSON sweep spec {base, axis, values}")->check(CLI::ExistingFile);
    sweep_cmd->add_option("--axis", axis, "test-noise, train-noise, train-size, batch-size, depth or width");
    sweep_cmd->add_option("--values", values, "comma-separated axis values");

    auto* report_cmd = app.add_subcommand("report", "aggregate summaries and sweeps below a directory");
    std::string report_dir;
    report_cmd->add_option("dir,--out", report_dir, "directory to aggregate")->required();

    auto* grad_cmd = app.add_subcommand("gradcheck", "compare BPTT gradients with finite differences");
    add_config_options(grad_cmd, grad_b);
    std::size_t samples = 200, grad_steps = 6, batch = 2;
    double tolerance = 1e-4;
    grad_cmd->add_option("--samples", samples, "parameter entries to check");
    grad_cmd->add_option("--time-steps", grad_steps, "sequence length");
    grad_cmd->add_option("--batch", batch, "random samples per check");
    grad_cmd->add_option("--tolerance", tolerance, "maximum relative error");

    auto* params_cmd = app.add_subcommand("params", "print the trainable parameter count");
    add_config_options(params_cmd, params_b);
    bool reference = false;
    params_cmd->add_flag("--reference", reference, "print the four full-size reference models");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? Ok : Usage;
    }
    spdlog::set_level(spdlog::level::from_str(verbosity));

    if (*train_cmd) {
        const auto c = resolve(train_b);
        print_record(run_experiment(c, [&](std::size_t k, const EpochRecord& r) {
            spdlog::info("run {} epoch {}: train {:.4f}/{:.4f} val {:.4f}/{:.4f} lr {:g} ({:.1f}s)", k, r.epoch,
                         r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.lr, r.wall_seconds);
        }));
        std::printf("results in %s\n", c.output_dir.c_str());
    } else if (*eval_cmd) {
        const auto c = resolve(eval_b);
        Network net = load_checkpoint(checkpoint);
        const auto test = load_test_set(c);
        const auto r = evaluate(net, test, {{c.steps, c.noise}, c.seed, 64, c.threads});
        std::printf("accuracy %.4f loss %.6f on %zu samples\n", r.accuracy, r.loss, r.count);
    } else if (*sweep_cmd) {
        SweepSpec s;
        if (!sweep_file.empty()) {
            std::ifstream is(sweep_file);
            try {
                s = nlohmann::json::parse(is).get<SweepSpec>();
            } catch (const nlohmann::json::exception& e) {
                throw FormatError("'" + sweep_file + "': " + e.what());
            }
            // flags still override the spec's base config
            for (const auto& [opt, set] : sweep_b.setters)
                if (opt->count() > 0) set(s.base);
        } else {
            s.base = resolve(sweep_b);
        }
        if (!axis.empty()) s.axis = sweep_axis_from_string(axis);
        if (!values.empty()) s.values = parse_values(values);
        if (sweep_file.empty() && (axis.empty() || values.empty()))
            throw UsageError("sweep needs --sweep FILE or both --axis and --values");
        run_sweep(s, [&](const SweepRow& r) {
            std::printf("%s=%g: ", to_string(s.axis).c_str(), r.value);
            print_record(r.record);
        });
        std::printf("sweep table in %s\n", (fs::path(s.base.output_dir) / "sweep.csv").c_str());
    } else if (*report_cmd) {
        const auto r = write_report(report_dir);
        std::fputs(r.markdown.c_str(), stdout);
    } else if (*grad_cmd) {
        const auto c = resolve(grad_b);
        Rng rng = stream_rng(c.seed, 0x6772);
        Network net(build_network_spec(c), rng);
        const Shape in = net.spec().input_shape;
        std::vector<Tensor> steps;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t t = 0; t < grad_steps; ++t) {
            Shape s{batch};
            s.insert(s.end(), in.begin(), in.end());
            Tensor x(s);
            for (double& v : x.data()) v = u(rng);
            steps.push_back(std::move(x));
        }
        std::vector<int> labels;
        for (std::size_t i = 0; i < batch; ++i) labels.push_back(static_cast<int>(rng() % net.spec().classes));
        const auto r = gradient_check(net, steps, labels, samples, rng);
        std::printf("checked %zu entries: max relative error %.3e at %s\n", r.checked, r.max_relative_error,
                    r.worst.c_str());
        if (r.max_relative_error >= tolerance) {
            std::fprintf(stderr, "gradient check failed: %.3e >= %.1e\n", r.max_relative_error, tolerance);
            return Numerical;
        }
    } else if (*params_cmd) {
        if (reference) {
            for (const auto& m : reference_models())
                std::printf("%-8s %zu\n", m.name, count_parameters(m.spec));
        } else {
            std::printf("%zu\n", count_parameters(build_network_spec(resolve(params_b))));
        }
    }
    return Ok;
}

}  // namespace

int main(int argc, char** argv) {
    configure_runtime(argc, argv);
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return Usage;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return Usage;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return Numerical;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return Data;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return Data;
    }
}
