#include "rafsnn/encode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rafsnn/errors.hpp"

namespace rafsnn {

std::string to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::GaussianStatic: return "gaussian-static";
    case NoiseKind::BitflipDynamic: return "bitflip-dynamic";
    }
    return "?";
}

std::string to_string(NoisePhase phase) { return phase == NoisePhase::Train ? "train" : "test"; }

NoiseKind noise_kind_from_string(const std::string& name) {
    for (auto k : {NoiseKind::None, NoiseKind::GaussianStatic, NoiseKind::BitflipDynamic})
        if (to_string(k) == name) return k;
    throw UsageError("unknown noise kind '" + name + "' (expected none, gaussian-static or bitflip-dynamic)");
}

NoisePhase noise_phase_from_string(const std::string& name) {
    if (name == "train") return NoisePhase::Train;
    if (name == "test") return NoisePhase::Test;
    throw UsageError("unknown noise phase '" + name + "' (expected train or test)");
}

void NoiseSpec::validate() const {
    if (!(sigma >= 0.0)) throw UsageError("noise sigma must be >= 0, got " + std::to_string(sigma));
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("flip probability must lie in [0, 1], got " + std::to_string(p));
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed;
    std::uint64_t h = splitmix64(x);
    x = h ^ a;
    h = splitmix64(x);
    x = h ^ b;
    return Rng(splitmix64(x));
}

Tensor poisson_encode(const Tensor& image, std::size_t steps, Rng& rng) {
    if (steps == 0) throw UsageError("poisson_encode needs at least one step");
    if (!image.all_finite()) throw NumericalError("poisson_encode: non-finite pixel intensity");
    Shape shape{steps};
    shape.insert(shape.end(), image.shape().begin(), image.shape().end());
    Tensor out(shape);
    const std::size_t n = image.size();
    for (std::size_t t = 0; t < steps; ++t) {
        double* row = out.raw() + t * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double rate = std::clamp(image[i], 0.0, 1.0);
            row[i] = uniform01(rng) < rate ? 1.0 : 0.0;
        }
    }
    return out;
}

Tensor gaussian_perturb(const Tensor& image, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw UsageError("gaussian_perturb: sigma must be >= 0");
    Tensor out = image;
    if (sigma == 0.0) return out;
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& x : out.data()) x = std::clamp(x + noise(rng), 0.0, 1.0);
    return out;
}

Tensor bitflip_perturb(const Tensor& frames, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("bitflip_perturb: p must lie in [0, 1]");
    Tensor out = frames;
    for (double& x : out.data()) {
        if (x != 0.0 && x != 1.0) throw UsageError("bitflip_perturb: input frames must be binary");
        if (p > 0.0 && uniform01(rng) < p) x = 1.0 - x;
    }
    return out;
}

}  // namespace rafsnn
