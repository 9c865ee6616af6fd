#include "doctest.h"

#include <cmath>

#include "rafsnn/encode.hpp"
#include "rafsnn/errors.hpp"

using namespace rafsnn;

namespace {

// 3σ binomial band for k successes in n trials at rate p.
bool within_3_sigma(double k, double n, double p) { return std::abs(k - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)); }

}  // namespace

TEST_CASE("poisson encoding") {
    Rng rng(1);
    CHECK(poisson_encode(Tensor::zeros({5, 5}), 50, rng) == Tensor::zeros({50, 5, 5}));
    CHECK(poisson_encode(Tensor::ones({5, 5}), 50, rng) == Tensor::ones({50, 5, 5}));
    const Tensor half = poisson_encode(Tensor({1}, 0.5), 1000, rng);
    CHECK(within_3_sigma(sum(half), 1000, 0.5));
    CHECK_THROWS_AS(poisson_encode(Tensor({1}, std::nan("")), 3, rng), NumericalError);
    CHECK_THROWS_AS(poisson_encode(Tensor({1}, 0.5), 0, rng), UsageError);
    // Out-of-range intensities are clamped.
    const Tensor clamped = poisson_encode(Tensor({2}, {-0.5, 1.5}), 20, rng);
    for (std::size_t t = 0; t < 20; ++t) {
        CHECK(clamped.at({t, 0}) == 0.0);
        CHECK(clamped.at({t, 1}) == 1.0);
    }
}

TEST_CASE("property: encoder rates converge to intensity") {
    Rng rng(2);
    const Tensor image({6}, {0.0, 0.05, 0.3, 0.5, 0.77, 1.0});
    const std::size_t T = 10'000;
    const Tensor train = poisson_encode(image, T, rng);
    for (std::size_t i = 0; i < image.size(); ++i) {
        double count = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double s = train[t * image.size() + i];
            CHECK((s == 0.0 || s == 1.0));
            count += s;
        }
        CHECK(within_3_sigma(count, T, image[i]));
    }
}

TEST_CASE("gaussian perturbation") {
    Rng rng(3);
    const Tensor img({4}, {0.1, 0.5, 0.9, 0.0});
    CHECK(gaussian_perturb(img, 0.0, rng) == img);

    const std::size_t n = 100'000;
    const Tensor noisy = gaussian_perturb(Tensor({n}, 0.5), 0.2, rng);
    double mean = 0.0, sq = 0.0;
    for (double x : noisy.data()) mean += x;
    mean /= n;
    for (double x : noisy.data()) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / (n - 1));
    // Clamping at 0 and 1 sits 2.5σ out and trims the spread by about 0.6%.
    CHECK(sd == doctest::Approx(0.2).epsilon(0.025));
    CHECK(std::abs(sd - 0.2) <= 0.005);

    const Tensor black = gaussian_perturb(Tensor({n}, 0.0), 1.0, rng);
    double black_mean = 0.0, lo = 1.0, hi = 0.0;
    for (double x : black.data()) {
        black_mean += x / n;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(black_mean > 0.0);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
}

TEST_CASE("bit-flip perturbation") {
    Rng rng(4);
    Tensor frames({30, 2, 34, 34});
    Rng fill(5);
    for (double& x : frames.data()) x = uniform01(fill) < 0.1 ? 1.0 : 0.0;
    CHECK(bitflip_perturb(frames, 0.0, rng) == frames);
    const Tensor all = bitflip_perturb(frames, 1.0, rng);
    for (std::size_t i = 0; i < frames.size(); ++i) CHECK_EQ(all[i], 1.0 - frames[i]);

    const Tensor flipped = bitflip_perturb(frames, 0.2, rng);
    double changed = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) changed += flipped[i] != frames[i];
    CHECK(frames.size() == 69'360);
    CHECK(std::abs(changed / frames.size() - 0.2) <= 0.006);

    // Two passes at p compose to a single flip with probability 2p(1−p).
    const Tensor twice = bitflip_perturb(bitflip_perturb(frames, 0.3, rng), 0.3, rng);
    double net = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) net += twice[i] != frames[i];
    CHECK(within_3_sigma(net, frames.size(), 2 * 0.3 * 0.7));

    CHECK_THROWS_AS(bitflip_perturb(Tensor({2}, 0.5), 0.1, rng), UsageError);
    CHECK_THROWS_AS(bitflip_perturb(frames, 1.5, rng), UsageError);
}

TEST_CASE("seeded streams are reproducible and distinct") {
    Rng a = stream_rng(42, 3, 7), b = stream_rng(42, 3, 7), c = stream_rng(42, 3, 8), d = stream_rng(42, 4, 7);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
    Rng r1 = stream_rng(9, 0), r2 = stream_rng(9, 0);
    CHECK(poisson_encode(Tensor({100}, 0.4), 10, r1) == poisson_encode(Tensor({100}, 0.4), 10, r2));
}

TEST_CASE("noise spec validation and names") {
    CHECK_NOTHROW(NoiseSpec{NoiseKind::GaussianStatic, 0.2}.validate());
    CHECK_THROWS_AS((NoiseSpec{NoiseKind::GaussianStatic, -0.1}.validate()), UsageError);
    CHECK_THROWS_AS((NoiseSpec{NoiseKind::BitflipDynamic, 0.0, 1.1}.validate()), UsageError);
    for (auto k : {NoiseKind::None, NoiseKind::GaussianStatic, NoiseKind::BitflipDynamic})
        CHECK(noise_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(noise_kind_from_string("salt"), UsageError);
}
