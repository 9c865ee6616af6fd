#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rafsnn/tensor.hpp"

namespace rafsnn {

// Samples are stored as bytes; value = byte · scale.
struct LabeledDataset {
    Shape sample_shape;       // [28, 28] for images, [T, 2, 34, 34] for frames
    bool temporal = false;    // leading axis of sample_shape is time
    double scale = 1.0;
    std::vector<std::uint8_t> data;
    std::vector<int> labels;
    std::vector<std::size_t> ids;  // identity within the source collection
    std::size_t classes = 10;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return shape_size(sample_shape); }
    Tensor sample(std::size_t i) const;
    void append(const LabeledDataset& other, std::size_t i);
    LabeledDataset select(const std::vector<std::size_t>& indices) const;
    LabeledDataset empty_like() const;
};

// ---- IDX -------------------------------------------------------------------

struct IdxArray {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> bytes;
};

// Unsigned-byte IDX arrays only (type code 0x08).
IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

// Pixels scaled to [0, 1].
LabeledDataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

enum class Split { Train, Test };
// <root>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
LabeledDataset load_mnist(const std::filesystem::path& root, Split split);

// ---- N-MNIST AER -------------------------------------------------------------

struct Event {
    std::uint32_t t = 0;  // µs
    std::uint8_t x = 0;
    std::uint8_t y = 0;
    bool on = false;
    friend bool operator==(const Event&, const Event&) = default;
};
using EventStream = std::vector<Event>;

inline constexpr std::size_t kSensorSize = 34;
inline constexpr std::uint32_t kBinMicros = 10'000;
inline constexpr std::size_t kFrames = 30;

// 5 bytes per event: x | y | pol(bit 7) + t[22:16] | t[15:8] | t[7:0].
EventStream decode_nmnist_events(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_nmnist_events(const EventStream& stream);
EventStream load_nmnist_events(const std::filesystem::path& path);
void write_nmnist_events(const std::filesystem::path& path, const EventStream& stream);

// frame[k][pol][y][x] = 1 iff some event of that polarity (OFF = 0, ON = 1) has
// t in [k·bin, (k+1)·bin). Shape [frames × 2 × 34 × 34]. Later events are dropped.
Tensor bin_events(const EventStream& stream, std::uint32_t bin_us = kBinMicros, std::size_t frames = kFrames);

// <root>/nmnist/{Train,Test}/<digit>/*.bin
LabeledDataset load_nmnist(const std::filesystem::path& root, Split split, std::size_t frames = kFrames);

// ---- Generators and splitting --------------------------------------------------

// Binary bars moving in one of 10 directions (label d moves along angle d·36°,
// so direction 0 translates +1 px per frame along x). Channel 1 marks pixels
// the bar enters, channel 0 pixels it leaves. Shape [T × 2 × 34 × 34].
LabeledDataset synthetic_moving_bar(std::size_t n, std::size_t steps, std::uint64_t seed);

// Class-stratified random subset, shuffled. Quotas are equal across classes,
// with any shortfall of a small class taken from the others.
LabeledDataset subsample(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

// Seeded shuffle, then the last `fraction` becomes the validation split.
std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds, double fraction,
                                                          std::uint64_t seed);

// Explicit root if given, else $RAFSNN_DATASET_ROOT, else the build-time default.
std::filesystem::path resolve_dataset_root(const std::optional<std::filesystem::path>& explicit_root);

}  // namespace rafsnn
