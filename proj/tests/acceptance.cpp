// One PASS/FAIL line per acceptance criterion. Groups: fast (1-5, 9),
// static (6), dynamic (7), training (8); no argument runs everything.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "rafsnn/datasets.hpp"
#include "rafsnn/dynamics.hpp"
#include "rafsnn/encode.hpp"
#include "rafsnn/harness.hpp"
#include "rafsnn/runtime.hpp"
#include "rafsnn/training.hpp"

using namespace rafsnn;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void emit(int n, const char* title, const Outcome& o) {
    std::printf("criterion %d (%s): %s  %s\n", n, title, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path run_root() { return fs::current_path() / "acceptance_runs"; }

// ---- 1 -------------------------------------------------------------------

std::map<std::string, std::size_t> cli_reference_counts() {
    std::map<std::string, std::size_t> out;
    FILE* pipe = popen((std::string("\"") + RAFSNN_CLI_PATH + "\" params --reference").c_str(), "r");
    if (!pipe) return out;
    char name[64];
    std::size_t count = 0;
    while (std::fscanf(pipe, "%63s %zu", name, &count) == 2) out[name] = count;
    pclose(pipe);
    return out;
}

std::size_t cli_config_count(const std::string& args) {
    FILE* pipe = popen((std::string("\"") + RAFSNN_CLI_PATH + "\" params " + args).c_str(), "r");
    if (!pipe) return 0;
    std::size_t count = 0;
    if (std::fscanf(pipe, "%zu", &count) != 1) count = 0;
    pclose(pipe);
    return count;
}

Outcome parameter_counts() {
    const std::map<std::string, std::size_t> expected{
        {"cnn", 1'669'200}, {"raf-cnn", 1'671'576}, {"lstm", 1'251'594}, {"raf", 297'768}};
    const auto cli = cli_reference_counts();
    const std::map<std::string, std::string> config_flags{
        {"cnn", "--model cnn --dataset mnist --channels 128"},
        {"raf-cnn", "--model raf-cnn --dataset mnist --channels 128"},
        {"lstm", "--model lstm --dataset nmnist --width 128"},
        {"raf", "--model raf --dataset nmnist --width 128"}};
    Outcome o{true, ""};
    for (const auto& [name, want] : expected) {
        const auto it = cli.find(name);
        const std::size_t got = it == cli.end() ? 0 : it->second;
        const std::size_t via_config = cli_config_count(config_flags.at(name));
        o.pass = o.pass && got == want && via_config == want;
        o.detail += fmt("%s %zu/%zu (want %zu) ", name.c_str(), got, via_config, want);
    }
    return o;
}

// ---- 2 -------------------------------------------------------------------

double closed_form(double w, double xi, double v0, double u0, double t) {
    const double wd = std::sqrt(w * w - xi * xi);
    return std::exp(-xi * t) * (v0 * std::cos(wd * t) + ((u0 + xi * v0) / wd) * std::sin(wd * t));
}

double euler_max_error(double dt) {
    const NeuronParams p{Tensor::vector({kTwoPi}), Tensor::vector({0.5}), Tensor::vector({1.0}),
                         Tensor::vector({1.0})};
    RAFState s{Tensor::vector({1.0}), Tensor::vector({0.0})};
    const Tensor zero = Tensor::vector({0.0});
    const auto n = static_cast<std::size_t>(std::llround(1.0 / dt));
    double worst = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        s = raf_step(s, p, zero, dt);
        worst = std::max(worst, std::abs(s.v[0] - closed_form(kTwoPi, 0.5, 1.0, 0.0, static_cast<double>(k) * dt)));
    }
    return worst;
}

Outcome dynamics_fidelity() {
    const double e1 = euler_max_error(1e-3), e2 = euler_max_error(5e-4);
    const double ratio = e1 / e2;
    return {e1 < 0.02 && std::abs(ratio - 2.0) <= 0.4,
            fmt("max error %.5f at dt=1e-3 (< 0.02), error ratio %.3f for halved dt (2 +/- 0.4)", e1, ratio)};
}

// ---- 3 -------------------------------------------------------------------

double impulse_peak(double period) {
    const double dt = 0.01;
    const NeuronParams p{Tensor::vector({kTwoPi}), Tensor::vector({0.2}), Tensor::vector({1.0}),
                         Tensor::vector({1.0})};
    RAFState s = zero_state({1});
    const auto every = static_cast<std::size_t>(std::llround(period / dt));
    double peak = 0.0;
    for (std::size_t k = 0; k < 1000; ++k) {
        s = raf_step(s, p, Tensor::vector({k % every == 0 ? 1.0 / dt : 0.0}), dt);
        peak = std::max(peak, std::abs(s.v[0]));
    }
    return peak;
}

Outcome resonance() {
    const double natural = impulse_peak(1.0), slow = impulse_peak(2.0);
    return {natural >= 1.5 * slow,
            fmt("peak |v| %.4f at the natural period vs %.4f at twice it, ratio %.3f (>= 1.5)", natural, slow,
                natural / slow)};
}

// ---- 4 -------------------------------------------------------------------

Outcome gradient_correctness() {
    Rng rng(2024);
    NetworkSpec spec = raf_spec({12}, 10, 2, 4);
    spec.dt = 0.1;
    Network net(spec, rng);
    net.spike_mode = SpikeMode::Soft;
    const std::size_t T = 6, B = 3;
    std::vector<Tensor> steps;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor x({B, 12});
        for (double& v : x.data()) v = u(rng);
        steps.push_back(std::move(x));
    }
    const std::vector<int> labels{0, 3, 1};
    auto loss_of = [&](Tape& tape) {
        const ForwardResult out = net.forward(tape, steps);
        return softmax_cross_entropy(objective_logits(net.spec(), out), labels, static_cast<double>(B));
    };
    Tape tape;
    const Gradients grads = tape.backward(loss_of(tape));

    // Every entry of every parameter, then a random subset of at least 200.
    std::vector<std::pair<Parameter*, std::size_t>> all;
    for (Parameter* p : net.parameters())
        for (std::size_t i = 0; i < p->value.size(); ++i) all.emplace_back(p, i);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::pair<Parameter*, std::size_t>> picks;
    std::set<std::string> kinds;
    for (auto& e : all) {
        const std::string& n = e.first->name;
        const std::string kind = n.substr(n.rfind('.') == std::string::npos ? 0 : n.rfind('.') + 1);
        if (picks.size() < 240 || !kinds.contains(kind)) {
            picks.push_back(e);
            kinds.insert(kind);
        }
    }
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    for (auto [p, i] : picks) {
        const double orig = p->value[i];
        p->value[i] = orig + h;
        Tape up_tape;
        const double up = loss_of(up_tape).value().item();
        p->value[i] = orig - h;
        Tape down_tape;
        const double down = loss_of(down_tape).value().item();
        p->value[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads.of(*p)[i];
        const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        if (err > worst) {
            worst = err;
            worst_name = p->name + "[" + std::to_string(i) + "]";
        }
    }
    const bool all_kinds = kinds.contains("omega") && kinds.contains("xi") && kinds.contains("theta") &&
                           kinds.contains("beta");
    std::string kind_list;
    for (const auto& k : kinds) kind_list += k + " ";
    return {worst < 1e-4 && picks.size() >= 200 && all_kinds,
            fmt("%zu entries (kinds: %s), max relative error %.3e at %s (< 1e-4)", picks.size(), kind_list.c_str(),
                worst, worst_name.c_str())};
}

// ---- 5 -------------------------------------------------------------------

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double big_phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Outcome encoder_statistics() {
    std::vector<std::string> notes;
    bool ok = true;

    Rng rng(77);
    const Tensor image({5}, {0.05, 0.25, 0.5, 0.75, 0.95});
    const std::size_t T = 20'000;
    const Tensor train = poisson_encode(image, T, rng);
    double worst_z = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        double k = 0.0;
        for (std::size_t t = 0; t < T; ++t) k += train[t * image.size() + i];
        const double p = image[i];
        worst_z = std::max(worst_z, std::abs(k - T * p) / std::sqrt(T * p * (1 - p)));
    }
    ok = ok && worst_z <= 3.0;
    notes.push_back(fmt("poisson max |z| %.2f", worst_z));

    // Clamping N(0.5, 0.2²) to [0, 1] censors at ±2.5σ.
    const std::size_t n = 200'000;
    const double mu = 0.5, sigma = 0.2, a = 2.5;
    const double inside = 2.0 * big_phi(a) - 1.0, tail = 1.0 - big_phi(a);
    const double m2 = inside - 2.0 * a * phi(a) + 2.0 * a * a * tail;
    const double m4 = 3.0 * inside - 2.0 * phi(a) * (a * a * a + 3.0 * a) + 2.0 * std::pow(a, 4) * tail;
    const double sd_expected = sigma * std::sqrt(m2);
    const double sd_se = sigma * std::sqrt((m4 - m2 * m2) / static_cast<double>(n)) / (2.0 * std::sqrt(m2));
    const Tensor noisy = gaussian_perturb(Tensor({n}, mu), sigma, rng);
    double mean = 0.0, sq = 0.0;
    for (double x : noisy.data()) mean += x / static_cast<double>(n);
    for (double x : noisy.data()) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n - 1));
    const double z_sd = std::abs(sd - sd_expected) / sd_se;
    ok = ok && z_sd <= 3.0;
    notes.push_back(fmt("gaussian std %.5f vs %.5f (|z| %.2f)", sd, sd_expected, z_sd));

    Tensor frames({30, 2, kSensorSize, kSensorSize});
    for (double& x : frames.data()) x = uniform01(rng) < 0.05 ? 1.0 : 0.0;
    for (double p : {0.05, 0.2}) {
        const Tensor flipped = bitflip_perturb(frames, p, rng);
        double changed = 0.0;
        for (std::size_t i = 0; i < frames.size(); ++i) changed += flipped[i] != frames[i];
        const double m = static_cast<double>(frames.size());
        const double z = std::abs(changed - m * p) / std::sqrt(m * p * (1 - p));
        ok = ok && z <= 3.0;
        notes.push_back(fmt("bitflip p=%.2f fraction %.5f (|z| %.2f)", p, changed / m, z));
    }
    std::string detail;
    for (const auto& s : notes) detail += s + "; ";
    return {ok, detail};
}

// ---- 9 -------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome determinism_and_persistence() {
    ExperimentConfig c;
    c.model = ModelKind::Raf;
    c.dataset = DatasetKind::Synthetic;
    c.train_size = 300;
    c.test_size = 200;
    c.arch.dt = 0.1;
    c.schedule.max_epochs = 3;
    c.repeats = 2;
    c.threads = 1;
    c.seed = 11;
    const fs::path a = run_root() / "determinism_a", b = run_root() / "determinism_b";
    fs::remove_all(a);
    fs::remove_all(b);
    c.output_dir = a.string();
    const auto rec = run_experiment(c);
    c.output_dir = b.string();
    run_experiment(c);
    const std::string ma = slurp(a / "metrics.csv"), mb = slurp(b / "metrics.csv");
    const bool same_csv = !ma.empty() && ma == mb;

    bool round_trip = true;
    const auto test = load_test_set(c);
    for (std::size_t k = 0; k < rec.runs.size(); ++k) {
        const fs::path ckpt = a / "checkpoints" / ("repeat_" + std::to_string(k) + ".ckpt");
        Network loaded = load_checkpoint(ckpt);
        const EvalOptions opt{{c.steps, {}}, rec.runs[k].seed, 64, 1};
        const auto first = evaluate(loaded, test, opt);
        const fs::path again = run_root() / "resaved.ckpt";
        save_checkpoint(again, loaded);
        Network reloaded = load_checkpoint(again);
        const auto second = evaluate(reloaded, test, opt);
        round_trip = round_trip && first.accuracy == rec.runs[k].test_accuracy &&
                     first.loss == rec.runs[k].test_loss && second.accuracy == first.accuracy &&
                     second.loss == first.loss;
    }
    return {same_csv && round_trip,
            fmt("metrics CSV %s across reruns (%zu bytes); checkpoint evaluations %s the recorded results",
                same_csv ? "bit-identical" : "DIFFERS", ma.size(), round_trip ? "reproduce" : "DO NOT reproduce")};
}

// ---- 6, 7, 8 -------------------------------------------------------------

MetricsRecord run_logged(ExperimentConfig c, const std::string& name) {
    c.output_dir = (run_root() / name).string();
    fs::remove_all(c.output_dir);
    std::printf("  running %s (%zu repeats, at most %zu epochs each)\n", name.c_str(), c.repeats,
                c.schedule.max_epochs);
    std::fflush(stdout);
    auto rec = run_experiment(c, [&](std::size_t k, const EpochRecord& r) {
        std::printf("    %s run %zu epoch %zu: val accuracy %.4f, lr %g, %.1fs\n", name.c_str(), k, r.epoch,
                    r.val_accuracy, r.lr, r.wall_seconds);
        std::fflush(stdout);
    });
    std::printf("  %s: test accuracy %.4f (std %.4f), clean %.4f, %.0fs\n", name.c_str(), rec.mean_accuracy,
                rec.std_accuracy, rec.mean_clean_accuracy, rec.wall_seconds);
    return rec;
}

Outcome static_robustness() {
    ExperimentConfig base;
    base.dataset = DatasetKind::Mnist;
    base.train_size = 5000;
    base.test_size = 2000;
    base.steps = 20;
    base.arch.channels = 16;
    base.arch.dt = 0.1;
    base.schedule.max_epochs = 8;
    base.repeats = 3;
    base.seed = 6;
    base.noise = {NoiseKind::GaussianStatic, 0.2, 0.0, NoisePhase::Test};

    double drops[2];
    std::string detail;
    for (int m = 0; m < 2; ++m) {
        ExperimentConfig c = base;
        c.model = m == 0 ? ModelKind::RafCnn : ModelKind::Cnn;
        const auto rec = run_logged(c, "static_" + to_string(c.model));
        double drop = 0.0;
        for (const auto& r : rec.runs) drop += (r.clean_accuracy - r.test_accuracy) / rec.runs.size();
        drops[m] = drop;
        detail += fmt("%s clean %.4f noisy %.4f drop %.2f pts; ", to_string(c.model).c_str(), rec.mean_clean_accuracy,
                      rec.mean_accuracy, 100.0 * drop);
    }
    const double gap = 100.0 * (drops[1] - drops[0]);
    return {gap >= 5.0, detail + fmt("cnn drop minus raf-cnn drop %.2f pts (>= 5)", gap)};
}

Outcome dynamic_robustness() {
    ExperimentConfig base;
    const fs::path root = resolve_dataset_root(std::nullopt);
    const bool nmnist = fs::is_directory(root / "nmnist");
    base.dataset = nmnist ? DatasetKind::Nmnist : DatasetKind::Synthetic;
    base.train_size = nmnist ? 5000 : 2000;
    base.test_size = nmnist ? 2000 : 1000;
    base.arch.width = 64;
    base.arch.dt = 0.1;
    base.schedule.max_epochs = 30;
    base.repeats = 3;
    base.seed = 7;

    double drops[2];
    std::string detail = std::string("dataset ") + to_string(base.dataset) + "; ";
    for (int m = 0; m < 2; ++m) {
        ExperimentConfig c = base;
        c.model = m == 0 ? ModelKind::Raf : ModelKind::Lstm;
        const auto clean = run_logged(c, "dynamic_" + to_string(c.model) + "_p0");
        c.noise = {NoiseKind::BitflipDynamic, 0.0, 0.2, NoisePhase::Train};
        const auto noisy = run_logged(c, "dynamic_" + to_string(c.model) + "_p0.2");
        drops[m] = clean.mean_clean_accuracy - noisy.mean_clean_accuracy;
        detail += fmt("%s clean-test accuracy %.4f at p=0, %.4f at p=0.2, drop %.2f pts; ", to_string(c.model).c_str(),
                      clean.mean_clean_accuracy, noisy.mean_clean_accuracy, 100.0 * drops[m]);
    }
    return {drops[0] < drops[1], detail + "raf drop must be smaller than lstm drop"};
}

bool state_machines_ok() {
    PlateauScheduler s(2);
    double lr = s.observe(1.0, 0.01);
    std::vector<double> seen;
    for (int e = 0; e < 5; ++e) {
        seen.push_back(lr);
        lr = s.observe(1.0, lr);
    }
    const bool plateau = seen == std::vector<double>{0.01, 0.01, 0.005, 0.005, 0.0025};
    EarlyStopping stop(6);
    bool early = !stop.observe(0.5);
    for (int e = 1; e <= 5; ++e) early = early && !stop.observe(0.5);
    early = early && stop.observe(0.5);
    return plateau && early;
}

Outcome training_smoke() {
    ExperimentConfig c;
    c.model = ModelKind::Raf;
    c.dataset = DatasetKind::Mnist;
    c.train_size = 5000;
    c.test_size = 0;
    c.steps = 20;
    c.arch.width = 128;
    c.schedule.max_epochs = 30;
    c.repeats = 1;
    c.seed = 8;
    const auto rec = run_logged(c, "training_raf_mnist");
    const auto& r = rec.runs.front();
    const bool machines = state_machines_ok();
    return {r.test_accuracy >= 0.90 && r.epochs <= 30 && machines,
            fmt("test accuracy %.4f on %zu-sample test set after %zu epochs (best %zu) (>= 0.90 within 30); "
                "scheduler and early-stop examples %s",
                r.test_accuracy, load_test_set(c).size(), r.epochs, r.best_epoch, machines ? "hold" : "FAIL")};
}

template <class F>
void guarded(int n, const char* title, F&& f) {
    try {
        emit(n, title, f());
    } catch (const std::exception& e) {
        emit(n, title, {false, std::string("error: ") + e.what()});
    }
}

}  // namespace

int main(int argc, char** argv) {
    configure_runtime(argc, argv);
    spdlog::set_level(spdlog::level::err);
    const std::string group = argc > 1 ? argv[1] : "all";
    const std::set<std::string> known{"all", "fast", "static", "dynamic", "training"};
    if (!known.contains(group)) {
        std::fprintf(stderr, "usage: %s [all|fast|static|dynamic|training]\n", argv[0]);
        return 2;
    }
    fs::create_directories(run_root());
    auto want = [&](const char* g) { return group == "all" || group == g; };
    if (want("fast")) {
        guarded(1, "parameter counts", parameter_counts);
        guarded(2, "dynamics fidelity", dynamics_fidelity);
        guarded(3, "resonance", resonance);
        guarded(4, "gradient correctness", gradient_correctness);
        guarded(5, "encoder and noise statistics", encoder_statistics);
    }
    if (want("static")) guarded(6, "static robustness trend", static_robustness);
    if (want("dynamic")) guarded(7, "dynamic robustness trend", dynamic_robustness);
    if (want("training")) guarded(8, "training-loop smoke", training_smoke);
    if (want("fast")) guarded(9, "determinism and persistence", determinism_and_persistence);
    return failures == 0 ? 0 : 1;
}
