#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "rafsnn/errors.hpp"
#include "rafsnn/training.hpp"
#include "support.hpp"

using namespace rafsnn;
using rafsnn::testing::random_tensor;

namespace {

// Independent log-sum-exp oracle for mean softmax cross-entropy.
double ce_oracle(const Tensor& z, const std::vector<int>& labels) {
    const std::size_t c = z.dim(1);
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        long double denom = 0.0;
        for (std::size_t k = 0; k < c; ++k) denom += std::exp(static_cast<long double>(z[r * c + k]));
        total += static_cast<double>(std::log(denom) - z[r * c + static_cast<std::size_t>(labels[r])]);
    }
    return total / static_cast<double>(labels.size());
}

ForwardResult fake_readout(Tape& tape, const std::vector<Tensor>& spikes, std::size_t first_valid) {
    ForwardResult out;
    for (const auto& s : spikes) {
        out.spikes.push_back(tape.variable(s));
        out.potentials.push_back(tape.variable(s));
    }
    out.first_valid = first_valid;
    return out;
}

// A static dataset whose class is the quadrant holding a bright blob; easy to learn.
LabeledDataset blob_images(std::size_t n, std::uint64_t seed) {
    LabeledDataset ds;
    ds.sample_shape = {8, 8};
    ds.scale = 1.0 / 255.0;
    ds.classes = 4;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 4);
        const std::size_t oy = label / 2 * 4, ox = label % 2 * 4;
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x) {
                const bool on = y >= oy && y < oy + 4 && x >= ox && x < ox + 4;
                ds.data.push_back(static_cast<std::uint8_t>(on ? 200 + rng() % 56 : rng() % 40));
            }
        ds.labels.push_back(label);
        ds.ids.push_back(i);
    }
    return ds;
}

NetworkSpec blob_raf() {
    NetworkSpec spec = raf_spec({64}, 12, 1, 4);
    spec.dt = 0.05;
    return spec;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("neuron parameter initialisation") {
    Rng rng(1);
    const NeuronParams p = init_neuron_params(100'000, rng);
    double theta_mean = 0.0;
    for (std::size_t i = 0; i < p.omega.size(); ++i) {
        CHECK((p.omega[i] >= 0.0 && p.omega[i] <= 1.1 * 2 * std::numbers::pi));
        CHECK((p.xi[i] >= 0.0 && p.xi[i] <= 2.5));
        CHECK(p.beta[i] == 5.0);
        theta_mean += p.theta[i];
    }
    CHECK(p.omega.size() == 100'000);
    CHECK(std::abs(theta_mean / 100'000 - 1.25) <= 0.01);
}

TEST_CASE("last-potential loss") {
    Tape tape;
    std::vector<int> labels{3, 7};
    CHECK(loss_last_potential(tape.input(Tensor({2, 10}, 0.4)), labels).value().item() ==
          doctest::Approx(std::log(10.0)).epsilon(1e-14));
    Tensor sharp({1, 10});
    sharp[4] = 1e3;
    std::vector<int> four{4};
    CHECK(loss_last_potential(tape.input(sharp), four).value().item() < 1e-12);

    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor z = random_tensor({5, 10}, rng, 3.0);
        std::vector<int> l;
        for (int i = 0; i < 5; ++i) l.push_back(static_cast<int>(rng() % 10));
        const double got = loss_last_potential(tape.input(z), l).value().item();
        CHECK(std::abs(got - ce_oracle(z, l)) < 1e-12);
        CHECK(got >= 0.0);
    }
    std::vector<int> bad{10};
    CHECK_THROWS_AS(loss_last_potential(tape.input(Tensor({1, 10})), bad), UsageError);
}

TEST_CASE("spike-count loss") {
    Tape tape;
    std::vector<int> label{2};
    std::vector<Tensor> silent(17, Tensor({1, 10}));
    CHECK(loss_spike_count(fake_readout(tape, silent, 2), 15, label).value().item() ==
          doctest::Approx(std::log(10.0)).epsilon(1e-14));

    std::vector<Tensor> perfect(17, Tensor({1, 10}));
    for (auto& s : perfect) s[2] = 1.0;
    const double got = loss_spike_count(fake_readout(tape, perfect, 2), 15, label).value().item();
    CHECK(got == doctest::Approx(-std::log(std::exp(15.0) / (std::exp(15.0) + 9.0))).epsilon(1e-9));
    CHECK(got == doctest::Approx(2.75e-6).epsilon(0.01));

    // Only the final window counts, in any order.
    Rng rng(3);
    std::vector<Tensor> train(20, Tensor({2, 10}));
    for (auto& s : train)
        for (double& x : s.data()) x = rng() % 3 == 0;
    std::vector<int> labels{1, 8};
    const double base = loss_spike_count(fake_readout(tape, train, 0), 15, labels).value().item();
    auto shuffled = train;
    std::shuffle(shuffled.begin() + 5, shuffled.end(), rng);
    shuffled[0] = Tensor({2, 10}, 1.0);
    CHECK(loss_spike_count(fake_readout(tape, shuffled, 0), 15, labels).value().item() == doctest::Approx(base));

    CHECK_THROWS_AS(loss_spike_count(fake_readout(tape, silent, 3), 15, label), UsageError);
}

TEST_CASE("spike-count gradient flows through the surrogate") {
    Rng rng(4);
    NetworkSpec spec = raf_spec({6}, 5, 1, 3);
    spec.objective = Objective::SpikeCountWindow;
    spec.window = 4;
    Network net(spec, rng);
    std::vector<Tensor> steps;
    for (int t = 0; t < 6; ++t) steps.push_back(random_tensor({2, 6}, rng, 5.0));
    Tape tape;
    const auto out = net.forward(tape, steps);
    std::vector<int> labels{0, 2};
    const auto g = tape.backward(loss_spike_count(out, 4, labels));
    double mag = 0.0;
    for (Parameter* p : net.parameters())
        if (p->name.ends_with("theta"))
            for (double x : g.of(*p).data()) mag += std::abs(x);
    CHECK(mag > 0.0);
}

TEST_CASE("adamw") {
    Parameter w{"w", Tensor({1}, 1.0)};
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    OptimizerState st = make_optimizer_state({&w}, cfg);
    adamw_step({&w}, {Tensor({1}, 0.5)}, st);
    CHECK(st.step == 1);
    CHECK(st.m[0][0] / (1 - 0.9) == doctest::Approx(0.5));
    CHECK(st.v[0][0] / (1 - 0.999) == doctest::Approx(0.25));
    CHECK(w.value[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    CHECK(w.value[0] == doctest::Approx(0.99));

    Parameter z{"z", Tensor({3}, {1.0, -2.0, 0.5})};
    OptimizerState sz = make_optimizer_state({&z}, cfg);
    const Tensor before = z.value;
    for (int i = 0; i < 10; ++i) adamw_step({&z}, {Tensor({3})}, sz);
    CHECK(z.value == before);

    // Decoupled decay shrinks weights even with zero gradient.
    OptimizerState decay = make_optimizer_state({&z}, AdamWConfig{});
    adamw_step({&z}, {Tensor({3})}, decay);
    CHECK(z.value[0] == doctest::Approx(1.0 - 0.01 * 0.01));

    // Adam moves about lr per step, so 100 steps from 1 need lr above 0.01.
    Parameter q{"q", Tensor({1}, 1.0)};
    AdamWConfig fast = cfg;
    fast.lr = 0.1;
    OptimizerState sq = make_optimizer_state({&q}, fast);
    for (int i = 0; i < 100; ++i) adamw_step({&q}, {Tensor({1}, 2.0 * q.value[0])}, sq);
    CHECK(std::abs(q.value[0]) < 1e-2);

    Parameter n{"n", Tensor({2}, 1.0)};
    OptimizerState sn = make_optimizer_state({&n}, cfg);
    try {
        adamw_step({&n}, {Tensor({2}, {0.0, std::nan("")})}, sn);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("n[1]") != std::string::npos);
    }
    CHECK(n.value == Tensor({2}, 1.0));
}

TEST_CASE("plateau scheduler") {
    PlateauScheduler s(2);
    double lr = 0.01;
    lr = s.observe(1.0, lr);  // establishes the best loss
    std::vector<double> seen;
    for (int e = 0; e < 5; ++e) {
        seen.push_back(lr);
        lr = s.observe(1.0, lr);
    }
    CHECK(seen == std::vector<double>{0.01, 0.01, 0.005, 0.005, 0.0025});

    PlateauScheduler t(2);
    double r = 0.01;
    for (double loss : {1.0, 1.1, 0.9, 1.2, 0.95, 0.95, 0.8}) {
        const double next = t.observe(loss, r);
        CHECK(next <= r);
        r = next;
    }
    CHECK(r == 0.005);
    CHECK_THROWS_AS(PlateauScheduler(0), UsageError);
}

TEST_CASE("early stopping") {
    EarlyStopping s(6);
    CHECK_FALSE(s.observe(0.5));
    for (int e = 1; e <= 5; ++e) CHECK_FALSE(s.observe(0.5));
    CHECK(s.observe(0.49));

    EarlyStopping t(6);
    t.observe(0.5);
    for (int e = 0; e < 5; ++e) t.observe(0.4);
    CHECK_FALSE(t.observe(0.51));
    CHECK(t.improved());
    for (int e = 0; e < 5; ++e) CHECK_FALSE(t.observe(0.51));
    CHECK(t.observe(0.51));
}

TEST_CASE("input presentation") {
    const LabeledDataset ds = blob_images(8, 1);
    const std::vector<std::size_t> idx{0, 3, 5};
    Presentation p;
    p.steps = 7;
    const auto a = make_inputs(blob_raf(), ds, idx, p, 11, 2);
    CHECK(a.size() == 7);
    CHECK(a[0].shape() == Shape{3, 64});
    CHECK(make_inputs(blob_raf(), ds, idx, p, 11, 2) == a);
    CHECK(make_inputs(blob_raf(), ds, idx, p, 11, 3) != a);
    // A sample's draws do not depend on its batch neighbours.
    const std::vector<std::size_t> alone{3};
    const auto b = make_inputs(blob_raf(), ds, alone, p, 11, 2);
    for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t k = 0; k < 64; ++k) CHECK(b[t][k] == a[t][64 + k]);

    NetworkSpec ff;
    ff.input_shape = {8, 8};
    ff.classes = 4;
    ff.objective = Objective::Logits;
    ff.layers = {{.kind = LayerKind::Flatten}, {.kind = LayerKind::Linear, .units = 4, .bias = true}};
    const auto img = make_inputs(ff, ds, idx, p, 11, 2);
    CHECK(img.size() == 1);
    CHECK(img[0][0] == doctest::Approx(ds.sample(0)[0]));

    p.noise = {NoiseKind::BitflipDynamic, 0.0, 0.1};
    CHECK_THROWS_AS(make_inputs(blob_raf(), ds, idx, p, 1, 1), UsageError);
    const LabeledDataset bars = synthetic_moving_bar(4, 5, 1);
    p.noise = {NoiseKind::GaussianStatic, 0.1};
    CHECK_THROWS_AS(make_inputs(raf_spec({2, 34, 34}, 4), bars, idx, p, 1, 1), UsageError);
}

TEST_CASE("gradient check") {
    Rng rng(5);
    SUBCASE("one RAF layer, five neurons, four steps") {
        NetworkSpec spec;
        spec.input_shape = {3};
        spec.classes = 5;
        spec.dt = 0.1;
        spec.layers = {{.kind = LayerKind::SpikingLinear, .units = 5}};
        Network net(spec, rng);
        std::vector<Tensor> steps;
        for (int t = 0; t < 4; ++t) steps.push_back(random_tensor({2, 3}, rng, 3.0));
        std::vector<int> labels{1, 4};
        const auto r = gradient_check(net, steps, labels, 200, rng);
        CHECK(r.checked == 35);
        CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
        CHECK(net.spike_mode == SpikeMode::Hard);
    }
    SUBCASE("linear readout") {
        NetworkSpec spec;
        spec.input_shape = {6};
        spec.classes = 4;
        spec.objective = Objective::Logits;
        spec.layers = {{.kind = LayerKind::Linear, .units = 4, .bias = true}};
        Network net(spec, rng);
        std::vector<int> labels{0, 3, 2};
        const auto r = gradient_check(net, {random_tensor({3, 6}, rng)}, labels, 200, rng);
        CHECK_MESSAGE(r.max_relative_error < 1e-7, r.worst);
    }
    SUBCASE("zero input gives zero input-path weight gradients") {
        Network net(raf_spec({6}, 5, 1, 3), rng);
        net.spike_mode = SpikeMode::Soft;
        Tape tape;
        const auto out = net.forward(tape, std::vector<Tensor>(5, Tensor({2, 6})));
        std::vector<int> labels{0, 1};
        const auto g = tape.backward(loss_last_potential(out.potentials.back(), labels));
        CHECK(g.of(*net.parameters()[0]) == Tensor({5, 6}));
    }
}

TEST_CASE("training loop") {
    const LabeledDataset data = blob_images(240, 7);
    auto [train_set, val_set] = split_train_val(data, 0.25, 1);
    const auto dir = std::filesystem::temp_directory_path() / "rafsnn_train_test";
    std::filesystem::remove_all(dir);

    TrainOptions opt;
    opt.schedule.max_epochs = 8;
    opt.presentation.steps = 20;
    opt.seed = 3;
    opt.log_path = dir / "log.csv";
    opt.checkpoint_path = dir / "best.ckpt";
    Rng rng(1);
    Network net(blob_raf(), rng);
    const TrainResult r = train(net, train_set, val_set, opt);
    REQUIRE(r.log.size() == 8);
    CHECK(r.log.back().val_accuracy > 0.9);
    for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].lr <= r.log[i - 1].lr);

    const std::string log = slurp(*opt.log_path);
    CHECK(log.starts_with("epoch,split,loss,accuracy,lr,wall_time\n"));
    CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 2 * 8);

    // The returned network holds the best-validation weights, as does the checkpoint.
    EvalOptions eval;
    eval.presentation = opt.presentation;
    eval.seed = 99;
    Network loaded = load_checkpoint(*opt.checkpoint_path);
    const EvalResult a = evaluate(net, val_set, eval);
    const EvalResult b = evaluate(loaded, val_set, eval);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.loss == b.loss);

    // Same seed, same first-epoch loss; a different seed differs.
    auto first_loss = [&](std::uint64_t seed, std::size_t threads) {
        Rng init(1);
        Network n(blob_raf(), init);
        TrainOptions o = opt;
        o.schedule.max_epochs = 1;
        o.seed = seed;
        o.threads = threads;
        o.log_path.reset();
        o.checkpoint_path.reset();
        return train(n, train_set, val_set, o).log[0].train_loss;
    };
    CHECK(first_loss(3, 1) == first_loss(3, 1));
    CHECK(first_loss(3, 1) != first_loss(4, 1));
    // Worker threads only change the summation order.
    CHECK(first_loss(3, 3) == doctest::Approx(first_loss(3, 1)).epsilon(1e-9));
    std::filesystem::remove_all(dir);
}

TEST_CASE("early stop halts training") {
    const LabeledDataset data = blob_images(80, 8);
    auto [train_set, val_set] = split_train_val(data, 0.25, 1);
    TrainOptions opt;
    opt.schedule.max_epochs = 50;
    opt.schedule.early_stop_patience = 1;
    opt.schedule.optimizer.lr = 1e-12;
    opt.presentation.steps = 4;
    Rng rng(2);
    Network net(blob_raf(), rng);
    const TrainResult r = train(net, train_set, val_set, opt);
    CHECK(r.early_stopped);
    CHECK(r.log.size() < 50);
}

TEST_CASE("divergence aborts with the log preserved") {
    const LabeledDataset data = blob_images(40, 9);
    auto [train_set, val_set] = split_train_val(data, 0.25, 1);
    const auto dir = std::filesystem::temp_directory_path() / "rafsnn_diverge_test";
    std::filesystem::remove_all(dir);
    TrainOptions opt;
    opt.schedule.max_epochs = 3;
    opt.presentation.steps = 4;
    opt.log_path = dir / "log.csv";
    int epochs_seen = 0;
    Rng rng(3);
    Network net(blob_raf(), rng);
    opt.on_epoch = [&](const EpochRecord&) {
        if (++epochs_seen == 1) net.parameters()[0]->value[0] = std::nan("");
    };
    CHECK_THROWS_AS(train(net, train_set, val_set, opt), NumericalError);
    CHECK(slurp(*opt.log_path).find("1,val,") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("property: epoch order is a permutation") {
    for (std::size_t n : {1u, 7u, 100u, 4500u}) {
        for (std::size_t epoch = 1; epoch <= 3; ++epoch) {
            auto order = epoch_order(n, 42, epoch);
            CHECK(order.size() == n);
            std::sort(order.begin(), order.end());
            for (std::size_t i = 0; i < n; ++i) CHECK(order[i] == i);
        }
    }
    CHECK(epoch_order(100, 42, 1) == epoch_order(100, 42, 1));
    CHECK(epoch_order(100, 42, 1) != epoch_order(100, 42, 2));
}
