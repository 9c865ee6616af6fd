#include "rafsnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "rafsnn/datasets.hpp"
#include "rafsnn/errors.hpp"

namespace rafsnn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Raf: return "raf";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::RafCnn: return "raf-cnn";
    case ModelKind::Cnn: return "cnn";
    }
    return "?";
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::Mnist: return "mnist";
    case DatasetKind::Nmnist: return "nmnist";
    case DatasetKind::Synthetic: return "synthetic";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    for (auto k : {ModelKind::Raf, ModelKind::Lstm, ModelKind::RafCnn, ModelKind::Cnn})
        if (to_string(k) == name) return k;
    throw UsageError("unknown model '" + name + "' (expected raf, lstm, raf-cnn or cnn)");
}

DatasetKind dataset_kind_from_string(const std::string& name) {
    for (auto k : {DatasetKind::Mnist, DatasetKind::Nmnist, DatasetKind::Synthetic})
        if (to_string(k) == name) return k;
    throw UsageError("unknown dataset '" + name + "' (expected mnist, nmnist or synthetic)");
}

void ExperimentConfig::validate() const {
    if (repeats == 0) throw UsageError("repeats must be >= 1");
    if (train_size < 2) throw UsageError("train_size must be >= 2");
    if (steps == 0 || frames == 0) throw UsageError("steps and frames must be >= 1");
    if (threads == 0) throw UsageError("threads must be >= 1");
    if (!(arch.dt > 0.0)) throw UsageError("dt must be positive");
    if (arch.width == 0 || arch.channels == 0 || arch.fc_width == 0) throw UsageError("layer sizes must be >= 1");
    schedule.validate();
    noise.validate();
    const bool conv = model == ModelKind::RafCnn || model == ModelKind::Cnn;
    if (conv && !static_data())
        throw UsageError("model " + to_string(model) + " needs static images; dataset " + to_string(dataset) +
                         " provides event frames");
    if (noise.kind == NoiseKind::GaussianStatic && !static_data())
        throw UsageError("gaussian-static noise applies to static images only");
    if (noise.kind == NoiseKind::BitflipDynamic && static_data())
        throw UsageError("bitflip-dynamic noise applies to event frames only");
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw FormatError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
            throw FormatError("unknown key '" + key + "' in " + where);
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
    j = json{
        {"model", to_string(c.model)},
        {"dataset", to_string(c.dataset)},
        {"dataset_root", c.dataset_root},
        {"train_size", c.train_size},
        {"test_size", c.test_size},
        {"val_fraction", c.val_fraction},
        {"steps", c.steps},
        {"frames", c.frames},
        {"architecture",
         {{"depth", c.arch.depth},
          {"width", c.arch.width},
          {"channels", c.arch.channels},
          {"fc_width", c.arch.fc_width},
          {"padding", c.arch.padding},
          {"dt", c.arch.dt},
          {"reset_on_spike", c.arch.reset_on_spike},
          {"window", c.arch.window}}},
        {"schedule",
         {{"batch_size", c.schedule.batch_size},
          {"lr_halve_patience", c.schedule.lr_halve_patience},
          {"early_stop_patience", c.schedule.early_stop_patience},
          {"max_epochs", c.schedule.max_epochs},
          {"lr", c.schedule.optimizer.lr},
          {"beta1", c.schedule.optimizer.beta1},
          {"beta2", c.schedule.optimizer.beta2},
          {"eps", c.schedule.optimizer.eps},
          {"weight_decay", c.schedule.optimizer.weight_decay}}},
        {"noise",
         {{"kind", to_string(c.noise.kind)},
          {"sigma", c.noise.sigma},
          {"p", c.noise.p},
          {"phase", to_string(c.noise.phase)}}},
        {"repeats", c.repeats},
        {"seed", c.seed},
        {"threads", c.threads},
        {"output_dir", c.output_dir},
    };
}

void from_json(const json& j, ExperimentConfig& c) {
    try {
        reject_unknown(j,
                       {"model", "dataset", "dataset_root", "train_size", "test_size", "val_fraction", "steps",
                        "frames", "architecture", "schedule", "noise", "repeats", "seed", "threads", "output_dir"},
                       "config");
        if (auto it = j.find("model"); it != j.end()) c.model = model_kind_from_string(it->get<std::string>());
        if (auto it = j.find("dataset"); it != j.end()) c.dataset = dataset_kind_from_string(it->get<std::string>());
        read_key(j, "dataset_root", c.dataset_root);
        read_key(j, "train_size", c.train_size);
        read_key(j, "test_size", c.test_size);
        read_key(j, "val_fraction", c.val_fraction);
        read_key(j, "steps", c.steps);
        read_key(j, "frames", c.frames);
        read_key(j, "repeats", c.repeats);
        read_key(j, "seed", c.seed);
        read_key(j, "threads", c.threads);
        read_key(j, "output_dir", c.output_dir);
        if (auto it = j.find("architecture"); it != j.end()) {
            const json& a = *it;
            reject_unknown(a, {"depth", "width", "channels", "fc_width", "padding", "dt", "reset_on_spike", "window"},
                           "architecture");
            read_key(a, "depth", c.arch.depth);
            read_key(a, "width", c.arch.width);
            read_key(a, "channels", c.arch.channels);
            read_key(a, "fc_width", c.arch.fc_width);
            read_key(a, "padding", c.arch.padding);
            read_key(a, "dt", c.arch.dt);
            read_key(a, "reset_on_spike", c.arch.reset_on_spike);
            read_key(a, "window", c.arch.window);
        }
        if (auto it = j.find("schedule"); it != j.end()) {
            const json& s = *it;
            reject_unknown(s,
                           {"batch_size", "lr_halve_patience", "early_stop_patience", "max_epochs", "lr", "beta1",
                            "beta2", "eps", "weight_decay"},
                           "schedule");
            read_key(s, "batch_size", c.schedule.batch_size);
            read_key(s, "lr_halve_patience", c.schedule.lr_halve_patience);
            read_key(s, "early_stop_patience", c.schedule.early_stop_patience);
            read_key(s, "max_epochs", c.schedule.max_epochs);
            read_key(s, "lr", c.schedule.optimizer.lr);
            read_key(s, "beta1", c.schedule.optimizer.beta1);
            read_key(s, "beta2", c.schedule.optimizer.beta2);
            read_key(s, "eps", c.schedule.optimizer.eps);
            read_key(s, "weight_decay", c.schedule.optimizer.weight_decay);
        }
        if (auto it = j.find("noise"); it != j.end()) {
            const json& n = *it;
            reject_unknown(n, {"kind", "sigma", "p", "phase"}, "noise");
            if (auto k = n.find("kind"); k != n.end()) c.noise.kind = noise_kind_from_string(k->get<std::string>());
            read_key(n, "sigma", c.noise.sigma);
            read_key(n, "p", c.noise.p);
            if (auto p = n.find("phase"); p != n.end()) c.noise.phase = noise_phase_from_string(p->get<std::string>());
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
    return j.get<ExperimentConfig>();
}

std::string config_hash(const ExperimentConfig& c) {
    json j = c;
    j.erase("output_dir");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

NetworkSpec build_network_spec(const ExperimentConfig& c) {
    const Shape input = c.static_data() ? Shape{28, 28} : Shape{2, kSensorSize, kSensorSize};
    const std::size_t depth = c.arch.depth;
    NetworkSpec spec;
    switch (c.model) {
    case ModelKind::Raf:
        spec = raf_spec(input, c.arch.width, depth ? depth : 1);
        spec.objective = c.static_data() ? Objective::LastPotential : Objective::SpikeCountWindow;
        break;
    case ModelKind::Lstm: spec = lstm_spec(input, c.arch.width, depth ? depth : 1); break;
    case ModelKind::RafCnn:
        spec = raf_cnn_spec(c.arch.channels, c.arch.fc_width, depth ? depth : 2, c.arch.padding);
        break;
    case ModelKind::Cnn: spec = cnn_spec(c.arch.channels, c.arch.fc_width, depth ? depth : 2, c.arch.padding); break;
    }
    spec.dt = c.arch.dt;
    spec.reset_on_spike = c.arch.reset_on_spike;
    spec.window = c.arch.window;
    return spec;
}

std::vector<std::uint64_t> derive_seeds(std::uint64_t base, std::size_t n) {
    std::vector<std::uint64_t> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(stream_rng(base, 0x5eed, k)());
    return out;
}

namespace {

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << text;
    if (!os) throw FormatError("cannot write '" + path.string() + "'");
}

void append_line(const fs::path& path, const std::string& line) {
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << line << '\n';
    if (!os) throw FormatError("cannot write '" + path.string() + "'");
}

struct DataPools {
    LabeledDataset train;  // source the training subset is drawn from
    LabeledDataset test;
};

DataPools load_pools(const ExperimentConfig& c, bool with_train = true) {
    const auto root = resolve_dataset_root(c.dataset_root.empty() ? std::nullopt
                                                                  : std::optional<fs::path>(c.dataset_root));
    DataPools pools;
    switch (c.dataset) {
    case DatasetKind::Mnist:
        if (with_train) pools.train = load_mnist(root, Split::Train);
        pools.test = load_mnist(root, Split::Test);
        break;
    case DatasetKind::Nmnist:
        if (with_train) pools.train = load_nmnist(root, Split::Train, c.frames);
        pools.test = load_nmnist(root, Split::Test, c.frames);
        break;
    case DatasetKind::Synthetic:
        pools.test = synthetic_moving_bar(c.test_size ? c.test_size : 1000, c.frames, c.seed ^ 0x7e57'0000ULL);
        return pools;
    }
    if (c.test_size && c.test_size < pools.test.size()) pools.test = subsample(pools.test, c.test_size, c.seed);
    return pools;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace

LabeledDataset load_test_set(const ExperimentConfig& c) { return load_pools(c, false).test; }

MetricsRecord run_experiment(const ExperimentConfig& c,
                             const std::function<void(std::size_t, const EpochRecord&)>& on_epoch) {
    c.validate();
    const auto start = std::chrono::steady_clock::now();
    const NetworkSpec spec = build_network_spec(c);
    MetricsRecord rec;
    rec.config_hash = config_hash(c);
    rec.model = c.model;
    rec.dataset = c.dataset;
    rec.n_params = count_parameters(spec);

    const DataPools pools = load_pools(c);
    if (c.dataset != DatasetKind::Synthetic && c.train_size > pools.train.size())
        throw UsageError("train_size " + std::to_string(c.train_size) + " exceeds the " +
                         std::to_string(pools.train.size()) + " available training samples");

    const fs::path out = c.output_dir;
    fs::create_directories(out);
    write_text(out / "config.json", json(c).dump(2) + "\n");

    const NoiseSpec none{};
    Presentation train_p{c.steps, c.noise.phase == NoisePhase::Train ? c.noise : none};
    Presentation test_p{c.steps, c.noise.phase == NoisePhase::Test ? c.noise : none};
    Presentation clean_p{c.steps, none};

    const fs::path metrics = out / "metrics.csv";
    write_text(metrics, std::string(kMetricsHeader) + "\n");
    const auto seeds = derive_seeds(c.seed, c.repeats);
    std::vector<double> accs, cleans;
    for (std::size_t k = 0; k < c.repeats; ++k) {
        const auto rep_start = std::chrono::steady_clock::now();
        const std::uint64_t s = seeds[k];
        const LabeledDataset pool = c.dataset == DatasetKind::Synthetic
                                        ? synthetic_moving_bar(c.train_size, c.frames, s)
                                        : subsample(pools.train, c.train_size, s);
        auto [train_set, val_set] = split_train_val(pool, c.val_fraction, s);
        Rng init = stream_rng(s, 0x1417);
        Network net(spec, init);

        TrainOptions opt;
        opt.schedule = c.schedule;
        opt.presentation = train_p;
        opt.seed = s;
        opt.threads = c.threads;
        opt.log_path = out / "logs" / ("repeat_" + std::to_string(k) + ".csv");
        opt.checkpoint_path = out / "checkpoints" / ("repeat_" + std::to_string(k) + ".ckpt");
        fs::create_directories(opt.checkpoint_path->parent_path());
        if (on_epoch) opt.on_epoch = [&, k](const EpochRecord& r) { on_epoch(k, r); };
        const TrainResult tr = train(net, train_set, val_set, opt);

        RepeatResult r;
        r.repeat = k;
        r.seed = s;
        const EvalResult test = evaluate(net, pools.test, {test_p, s, 64, c.threads});
        r.test_accuracy = test.accuracy;
        r.test_loss = test.loss;
        r.clean_accuracy =
            test_p.noise.active() ? evaluate(net, pools.test, {clean_p, s, 64, c.threads}).accuracy : test.accuracy;
        r.best_epoch = tr.best_epoch;
        r.epochs = tr.log.size();
        r.log = tr.log;
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - rep_start).count();
        append_line(metrics, fmt("%s,%s,%s,%zu,%llu,%.6f,%.10g,%.6f,%zu,%zu,%zu", rec.config_hash.c_str(),
                                 to_string(c.model).c_str(), to_string(c.dataset).c_str(), k,
                                 static_cast<unsigned long long>(s), r.test_accuracy, r.test_loss, r.clean_accuracy,
                                 r.best_epoch, r.epochs, rec.n_params));
        spdlog::info("{} repeat {}/{}: test accuracy {:.4f} (clean {:.4f}) after {} epochs", to_string(c.model), k + 1,
                     c.repeats, r.test_accuracy, r.clean_accuracy, r.epochs);
        accs.push_back(r.test_accuracy);
        cleans.push_back(r.clean_accuracy);
        rec.runs.push_back(std::move(r));
    }
    rec.mean_accuracy = mean_of(accs);
    rec.std_accuracy = sample_std(accs);
    rec.mean_clean_accuracy = mean_of(cleans);
    write_text(out / "summary.csv",
               std::string(kSummaryHeader) + "\n" +
                   fmt("%s,%s,%s,%zu,%.6f,%.6f,%.6f,%zu\n", rec.config_hash.c_str(), to_string(c.model).c_str(),
                       to_string(c.dataset).c_str(), c.repeats, rec.mean_accuracy, rec.std_accuracy,
                       rec.mean_clean_accuracy, rec.n_params));
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::TestNoise: return "test-noise";
    case SweepAxis::TrainNoise: return "train-noise";
    case SweepAxis::TrainSize: return "train-size";
    case SweepAxis::BatchSize: return "batch-size";
    case SweepAxis::Depth: return "depth";
    case SweepAxis::Width: return "width";
    }
    return "?";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    for (auto a : {SweepAxis::TestNoise, SweepAxis::TrainNoise, SweepAxis::TrainSize, SweepAxis::BatchSize,
                   SweepAxis::Depth, SweepAxis::Width})
        if (to_string(a) == name) return a;
    throw UsageError("unknown sweep axis '" + name +
                     "' (expected test-noise, train-noise, train-size, batch-size, depth or width)");
}

void to_json(json& j, const SweepSpec& s) {
    j = json{{"base", s.base}, {"axis", to_string(s.axis)}, {"values", s.values}};
}

void from_json(const json& j, SweepSpec& s) {
    try {
        reject_unknown(j, {"base", "axis", "values"}, "sweep");
        if (auto it = j.find("base"); it != j.end()) s.base = it->get<ExperimentConfig>();
        s.axis = sweep_axis_from_string(j.at("axis").get<std::string>());
        s.values = j.at("values").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("sweep: ") + e.what());
    }
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig c = base;
    auto count = [&](const char* what) {
        if (!(value >= 1.0) || value != std::floor(value))
            throw UsageError(std::string(what) + " values must be positive integers, got " + fmt("%g", value));
        return static_cast<std::size_t>(value);
    };
    switch (axis) {
    case SweepAxis::TestNoise:
    case SweepAxis::TrainNoise:
        c.noise = {};
        c.noise.phase = axis == SweepAxis::TestNoise ? NoisePhase::Test : NoisePhase::Train;
        if (c.static_data()) {
            c.noise.kind = NoiseKind::GaussianStatic;
            c.noise.sigma = value;
        } else {
            c.noise.kind = NoiseKind::BitflipDynamic;
            c.noise.p = value;
        }
        c.noise.validate();
        break;
    case SweepAxis::TrainSize: c.train_size = count("train-size"); break;
    case SweepAxis::BatchSize: c.schedule.batch_size = count("batch-size"); break;
    case SweepAxis::Depth: c.arch.depth = count("depth"); break;
    case SweepAxis::Width:
        (c.model == ModelKind::RafCnn || c.model == ModelKind::Cnn ? c.arch.channels : c.arch.width) =
            count("width");
        break;
    }
    return c;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const std::function<void(const SweepRow&)>& on_point) {
    if (spec.values.empty()) throw UsageError("sweep needs at least one axis value");
    std::vector<ExperimentConfig> points;
    for (double v : spec.values) points.push_back(apply_axis(spec.base, spec.axis, v));
    for (const auto& p : points) p.validate();

    const fs::path out = spec.base.output_dir;
    fs::create_directories(out);
    write_text(out / "sweep.json", json(spec).dump(2) + "\n");
    const fs::path table = out / "sweep.csv";
    write_text(table, std::string(kSweepHeader) + "\n");
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < points.size(); ++i) {
        ExperimentConfig c = points[i];
        c.output_dir = (out / "points" / (to_string(spec.axis) + "=" + fmt("%g", spec.values[i]))).string();
        SweepRow row{spec.values[i], run_experiment(c)};
        append_line(table, fmt("%s,%g,%s,%s,%.6f,%.6f,%zu,%.1f,%s", to_string(spec.axis).c_str(), row.value,
                               to_string(c.model).c_str(), to_string(c.dataset).c_str(), row.record.mean_accuracy,
                               row.record.std_accuracy, row.record.n_params, row.record.wall_seconds,
                               row.record.config_hash.c_str()));
        if (on_point) on_point(row);
        if (spec.axis == SweepAxis::TrainSize && !rows.empty() &&
            row.record.mean_accuracy < rows.back().record.mean_accuracy)
            spdlog::warn("mean accuracy fell from {:.4f} to {:.4f} as train-size grew from {:g} to {:g}",
                         rows.back().record.mean_accuracy, row.record.mean_accuracy, rows.back().value, row.value);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) rows.push_back(split_csv(line));
    return rows;
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s + "\n";
}

std::string md_rule(std::size_t n) {
    std::string s = "|";
    for (std::size_t i = 0; i < n; ++i) s += "---|";
    return s + "\n";
}

std::string thousands(std::size_t n) {
    std::string digits = std::to_string(n), out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

}  // namespace

Report build_report(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw UsageError("report: '" + dir.string() + "' is not a directory");
    std::vector<fs::path> summaries, sweeps;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        if (e.path().filename() == "summary.csv") summaries.push_back(e.path());
        if (e.path().filename() == "sweep.csv") sweeps.push_back(e.path());
    }
    if (summaries.empty() && sweeps.empty())
        throw UsageError("report: no summary.csv or sweep.csv under '" + dir.string() + "'");
    std::sort(summaries.begin(), summaries.end());
    std::sort(sweeps.begin(), sweeps.end());

    Report r;
    std::string& md = r.markdown;
    md += "# Experiment report\n\n## Runs\n\n";
    const std::vector<std::string> cols{"run",          "model",        "dataset",  "repeats",    "mean accuracy",
                                        "std accuracy", "mean clean accuracy", "parameters", "config hash"};
    md += md_row(cols) + md_rule(cols.size());
    r.csv = "run," + std::string(kSummaryHeader) + "\n";
    for (const auto& p : summaries) {
        const auto rows = read_csv(p);
        const std::string run = fs::relative(p.parent_path(), dir).generic_string();
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& v = rows[i];
            if (v.size() < 8) throw FormatError("malformed summary row in '" + p.string() + "'");
            md += md_row({run, v[1], v[2], v[3], v[4], v[5], v[6], thousands(std::stoull(v[7])), v[0]});
            std::string line = run;
            for (const auto& cell : v) line += "," + cell;
            r.csv += line + "\n";
            ++r.runs;
        }
    }
    for (const auto& p : sweeps) {
        const auto rows = read_csv(p);
        md += "\n## Sweep: " + fs::relative(p.parent_path(), dir).generic_string() + "\n\n";
        if (rows.empty()) continue;
        md += md_row(rows[0]) + md_rule(rows[0].size());
        for (std::size_t i = 1; i < rows.size(); ++i) md += md_row(rows[i]);
    }

    const std::size_t raf = count_parameters(raf_spec({2, kSensorSize, kSensorSize}, 128));
    const std::size_t lstm = count_parameters(lstm_spec({2, kSensorSize, kSensorSize}, 128));
    const std::size_t raf_cnn = count_parameters(raf_cnn_spec(128));
    const std::size_t cnn = count_parameters(cnn_spec(128));
    md += "\n## Reference model sizes\n\n";
    md += md_row({"model", "configuration", "parameters"}) + md_rule(3);
    md += md_row({"cnn", "2 conv blocks, 128 channels, fc 200", thousands(cnn)});
    md += md_row({"raf-cnn", "2 conv blocks, 128 channels, fc 200", thousands(raf_cnn)});
    md += md_row({"lstm", "1 layer, 128 hidden, 34x34x2 input", thousands(lstm)});
    md += md_row({"raf", "1 layer, 128 hidden, 34x34x2 input", thousands(raf)});
    md += "\nRAF / LSTM parameters: " + thousands(raf) + " / " + thousands(lstm) + " = " +
          fmt("%.2f%%", 100.0 * static_cast<double>(raf) / static_cast<double>(lstm)) + "\n";
    md += "RAF-CNN / CNN parameters: " + thousands(raf_cnn) + " / " + thousands(cnn) + " = " +
          fmt("%.2f%%", 100.0 * static_cast<double>(raf_cnn) / static_cast<double>(cnn)) + "\n";
    return r;
}

Report write_report(const fs::path& dir) {
    Report r = build_report(dir);
    write_text(dir / "report.md", r.markdown);
    write_text(dir / "report.csv", r.csv);
    return r;
}

}  // namespace rafsnn
