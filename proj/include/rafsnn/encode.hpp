#pragma once

#include <cstdint>
#include <string>

#include "rafsnn/init.hpp"
#include "rafsnn/tensor.hpp"

namespace rafsnn {

enum class NoiseKind { None, GaussianStatic, BitflipDynamic };
enum class NoisePhase { Train, Test };

std::string to_string(NoiseKind kind);
std::string to_string(NoisePhase phase);
NoiseKind noise_kind_from_string(const std::string& name);
NoisePhase noise_phase_from_string(const std::string& name);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double sigma = 0.0;  // gaussian-static
    double p = 0.0;      // bitflip-dynamic
    NoisePhase phase = NoisePhase::Test;

    void validate() const;
    bool active() const { return kind != NoiseKind::None && (sigma > 0.0 || p > 0.0); }
    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

// Independent generator for (seed, a, b), e.g. (run seed, epoch, sample index),
// so batch workers can draw noise without sharing state.
Rng stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Per step and pixel, spike with probability equal to the clamped intensity.
// Output shape is [T × image.shape].
Tensor poisson_encode(const Tensor& image, std::size_t steps, Rng& rng);

// Adds N(0, σ²) per pixel, then clamps to [0, 1].
Tensor gaussian_perturb(const Tensor& image, double sigma, Rng& rng);

// Complements each element of a binary tensor with probability p.
Tensor bitflip_perturb(const Tensor& frames, double p, Rng& rng);

}  // namespace rafsnn
