#include "rafsnn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>

#include "rafsnn/encode.hpp"
#include "rafsnn/errors.hpp"

namespace rafsnn {

namespace fs = std::filesystem;

Tensor LabeledDataset::sample(std::size_t i) const {
    if (i >= size()) throw UsageError("sample index " + std::to_string(i) + " out of range");
    const std::size_t n = sample_size();
    Tensor out(sample_shape);
    const std::uint8_t* src = data.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) out[k] = src[k] * scale;
    return out;
}

void LabeledDataset::append(const LabeledDataset& other, std::size_t i) {
    const std::size_t n = sample_size();
    data.insert(data.end(), other.data.begin() + i * n, other.data.begin() + (i + 1) * n);
    labels.push_back(other.labels[i]);
    ids.push_back(other.ids[i]);
}

LabeledDataset LabeledDataset::empty_like() const {
    LabeledDataset out;
    out.sample_shape = sample_shape;
    out.temporal = temporal;
    out.scale = scale;
    out.classes = classes;
    return out;
}

LabeledDataset LabeledDataset::select(const std::vector<std::size_t>& indices) const {
    LabeledDataset out = empty_like();
    out.data.reserve(indices.size() * sample_size());
    for (std::size_t i : indices) out.append(*this, i);
    return out;
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("cannot write '" + path.string() + "'");
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

}  // namespace

IdxArray read_idx(const fs::path& path) {
    const auto bytes = read_bytes(path);
    const std::string where = "'" + path.string() + "'";
    if (bytes.size() < 4) throw FormatError(where + ": truncated IDX header at offset 0");
    if (bytes[0] != 0 || bytes[1] != 0)
        throw FormatError(where + ": bad IDX magic at offset 0 (first two bytes must be zero)");
    if (bytes[2] != 0x08)
        throw FormatError(where + ": unsupported IDX element type 0x" + std::to_string(bytes[2]) +
                          " at offset 2 (only unsigned byte is supported)");
    const std::size_t rank = bytes[3];
    if (rank == 0) throw FormatError(where + ": IDX rank 0 at offset 3");
    if (bytes.size() < 4 + 4 * rank)
        throw FormatError(where + ": truncated IDX dimensions at offset " + std::to_string(bytes.size()));
    IdxArray out;
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        out.dims.push_back(be32(bytes, 4 + 4 * i));
        count *= out.dims.back();
    }
    const std::size_t header = 4 + 4 * rank;
    if (bytes.size() - header < count)
        throw FormatError(where + ": truncated IDX payload at offset " + std::to_string(bytes.size()) +
                          " (expected " + std::to_string(header + count) + " bytes)");
    if (bytes.size() - header > count)
        throw FormatError(where + ": trailing bytes after IDX payload at offset " + std::to_string(header + count));
    out.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return out;
}

void write_idx(const fs::path& path, const IdxArray& array) {
    if (array.dims.empty() || array.dims.size() > 255) throw UsageError("write_idx: rank must be 1..255");
    std::size_t count = 1;
    for (auto d : array.dims) count *= d;
    if (count != array.bytes.size()) throw DimensionError("write_idx: payload size does not match dims");
    std::vector<std::uint8_t> out{0, 0, 0x08, static_cast<std::uint8_t>(array.dims.size())};
    for (auto d : array.dims)
        for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(d >> s));
    out.insert(out.end(), array.bytes.begin(), array.bytes.end());
    write_bytes(path, out);
}

LabeledDataset load_mnist_idx(const fs::path& images, const fs::path& labels) {
    const IdxArray img = read_idx(images);
    const IdxArray lab = read_idx(labels);
    if (img.dims.size() != 3)
        throw FormatError("'" + images.string() + "': bad image magic at offset 0 (expected 0x00000803)");
    if (lab.dims.size() != 1)
        throw FormatError("'" + labels.string() + "': bad label magic at offset 0 (expected 0x00000801)");
    if (img.dims[0] != lab.dims[0])
        throw FormatError("image/label count mismatch: " + std::to_string(img.dims[0]) + " images vs " +
                          std::to_string(lab.dims[0]) + " labels (offset 4)");
    LabeledDataset ds;
    ds.sample_shape = {img.dims[1], img.dims[2]};
    ds.scale = 1.0 / 255.0;
    ds.data = img.bytes;
    for (std::size_t i = 0; i < lab.bytes.size(); ++i) {
        if (lab.bytes[i] > 9)
            throw FormatError("'" + labels.string() + "': label " + std::to_string(lab.bytes[i]) +
                              " out of range at offset " + std::to_string(8 + i));
        ds.labels.push_back(lab.bytes[i]);
        ds.ids.push_back(i);
    }
    return ds;
}

LabeledDataset load_mnist(const fs::path& root, Split split) {
    const fs::path dir = root / "mnist";
    const std::string stem = split == Split::Train ? "train" : "t10k";
    const fs::path images = dir / (stem + "-images-idx3-ubyte");
    const fs::path labels = dir / (stem + "-labels-idx1-ubyte");
    for (const auto& p : {images, labels})
        if (!fs::exists(p))
            throw FormatError("MNIST file not found: expected '" + p.string() +
                              "' (set --dataset-root or RAFSNN_DATASET_ROOT)");
    return load_mnist_idx(images, labels);
}

EventStream decode_nmnist_events(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 5 != 0)
        throw FormatError("AER stream length " + std::to_string(bytes.size()) +
                          " is not a multiple of 5 (trailing record at offset " +
                          std::to_string(bytes.size() - bytes.size() % 5) + ")");
    EventStream out;
    out.reserve(bytes.size() / 5);
    for (std::size_t off = 0; off < bytes.size(); off += 5) {
        Event e;
        e.x = bytes[off];
        e.y = bytes[off + 1];
        e.on = (bytes[off + 2] & 0x80) != 0;
        e.t = (std::uint32_t{bytes[off + 2] & 0x7fu} << 16) | (std::uint32_t{bytes[off + 3]} << 8) | bytes[off + 4];
        if (e.x >= kSensorSize || e.y >= kSensorSize)
            throw FormatError("AER event at offset " + std::to_string(off) + " has coordinate (" +
                              std::to_string(e.x) + ", " + std::to_string(e.y) + ") outside 34x34");
        out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    return out;
}

std::vector<std::uint8_t> encode_nmnist_events(const EventStream& stream) {
    std::vector<std::uint8_t> out;
    out.reserve(stream.size() * 5);
    for (const Event& e : stream) {
        if (e.x >= kSensorSize || e.y >= kSensorSize) throw UsageError("event coordinate outside 34x34");
        if (e.t >= (1u << 23)) throw UsageError("event timestamp exceeds 23 bits");
        out.push_back(e.x);
        out.push_back(e.y);
        out.push_back(static_cast<std::uint8_t>((e.on ? 0x80 : 0) | (e.t >> 16)));
        out.push_back(static_cast<std::uint8_t>(e.t >> 8));
        out.push_back(static_cast<std::uint8_t>(e.t));
    }
    return out;
}

EventStream load_nmnist_events(const fs::path& path) {
    try {
        return decode_nmnist_events(read_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

void write_nmnist_events(const fs::path& path, const EventStream& stream) {
    write_bytes(path, encode_nmnist_events(stream));
}

Tensor bin_events(const EventStream& stream, std::uint32_t bin_us, std::size_t frames) {
    if (bin_us == 0 || frames == 0) throw UsageError("bin_events: bin width and frame count must be positive");
    Tensor out({frames, 2, kSensorSize, kSensorSize});
    for (const Event& e : stream) {
        const std::size_t k = e.t / bin_us;
        if (k >= frames) continue;
        out.at({k, e.on ? 1u : 0u, e.y, e.x}) = 1.0;
    }
    return out;
}

LabeledDataset load_nmnist(const fs::path& root, Split split, std::size_t frames) {
    const fs::path dir = root / "nmnist" / (split == Split::Train ? "Train" : "Test");
    if (!fs::is_directory(dir))
        throw FormatError("N-MNIST directory not found: expected '" + dir.string() +
                          "' with one subdirectory per digit (set --dataset-root or RAFSNN_DATASET_ROOT)");
    LabeledDataset ds;
    ds.sample_shape = {frames, 2, kSensorSize, kSensorSize};
    ds.temporal = true;
    std::size_t id = 0;
    for (int digit = 0; digit < 10; ++digit) {
        std::vector<fs::path> files;
        const fs::path sub = dir / std::to_string(digit);
        if (!fs::is_directory(sub)) continue;
        for (const auto& entry : fs::directory_iterator(sub))
            if (entry.path().extension() == ".bin") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const Tensor t = bin_events(load_nmnist_events(f), kBinMicros, frames);
            for (double v : t.data()) ds.data.push_back(static_cast<std::uint8_t>(v));
            ds.labels.push_back(digit);
            ds.ids.push_back(id++);
        }
    }
    if (ds.size() == 0) throw FormatError("no .bin event files under '" + dir.string() + "'");
    return ds;
}

LabeledDataset synthetic_moving_bar(std::size_t n, std::size_t steps, std::uint64_t seed) {
    if (steps == 0) throw UsageError("synthetic_moving_bar needs at least one frame");
    constexpr std::size_t S = kSensorSize;
    LabeledDataset ds;
    ds.sample_shape = {steps, 2, S, S};
    ds.temporal = true;
    ds.data.resize(n * ds.sample_size());
    Rng rng = stream_rng(seed, 0x6261);
    std::uniform_int_distribution<int> half_len(4, 8), width(2, 3), jitter(-3, 3);
    std::vector<std::uint8_t> prev(S * S), cur(S * S);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 10);
        const double angle = label * 2.0 * std::numbers::pi / 10.0;
        const double dx = std::cos(angle), dy = std::sin(angle);
        const int hl = half_len(rng), w = width(rng);
        // Centre passes near the middle of the field halfway through the sequence.
        const double mid = static_cast<double>(steps) / 2.0;
        const double cx0 = 16.0 + jitter(rng) - mid * dx;
        const double cy0 = 16.0 + jitter(rng) - mid * dy;
        auto rasterize = [&](double t, std::vector<std::uint8_t>& occ) {
            const double cx = cx0 + t * dx, cy = cy0 + t * dy;
            for (std::size_t y = 0; y < S; ++y)
                for (std::size_t x = 0; x < S; ++x) {
                    const double rx = static_cast<double>(x) - cx, ry = static_cast<double>(y) - cy;
                    const double along = rx * dx + ry * dy;
                    const double across = -rx * dy + ry * dx;
                    occ[y * S + x] = along >= 0.0 && along < w && std::abs(across) <= hl ? 1 : 0;
                }
        };
        std::uint8_t* dst = ds.data.data() + i * ds.sample_size();
        rasterize(-1.0, prev);
        for (std::size_t k = 0; k < steps; ++k) {
            rasterize(static_cast<double>(k), cur);
            for (std::size_t p = 0; p < S * S; ++p) {
                dst[(k * 2 + 1) * S * S + p] = cur[p] && !prev[p];
                dst[(k * 2 + 0) * S * S + p] = prev[p] && !cur[p];
            }
            std::swap(prev, cur);
        }
        ds.labels.push_back(label);
        ds.ids.push_back(i);
    }
    // Interleaved labels would leak order; shuffle once.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    return ds.select(order);
}

LabeledDataset subsample(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
    if (n > ds.size())
        throw UsageError("subsample: requested " + std::to_string(n) + " samples from a set of " +
                         std::to_string(ds.size()));
    Rng rng = stream_rng(seed, 0x7375);
    std::vector<std::vector<std::size_t>> by_class(ds.classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(static_cast<std::size_t>(ds.labels[i])).push_back(i);
    for (auto& c : by_class) std::shuffle(c.begin(), c.end(), rng);

    std::vector<std::size_t> quota(ds.classes, 0);
    std::size_t remaining = n;
    // Water-fill: equal shares, capped by class size, repeated until placed.
    while (remaining > 0) {
        std::size_t open = 0;
        for (std::size_t c = 0; c < ds.classes; ++c) open += quota[c] < by_class[c].size();
        const std::size_t share = std::max<std::size_t>(1, remaining / open);
        for (std::size_t c = 0; c < ds.classes && remaining > 0; ++c) {
            const std::size_t take = std::min({share, by_class[c].size() - quota[c], remaining});
            quota[c] += take;
            remaining -= take;
        }
    }
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < ds.classes; ++c)
        chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    return ds.select(chosen);
}

std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds, double fraction,
                                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("validation fraction must lie in (0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = stream_rng(seed, 0x7661);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.size())));
    if (n_val == 0 || n_val == ds.size()) throw UsageError("dataset too small to split off a validation set");
    const auto cut = order.begin() + static_cast<std::ptrdiff_t>(ds.size() - n_val);
    return {ds.select({order.begin(), cut}), ds.select({cut, order.end()})};
}

fs::path resolve_dataset_root(const std::optional<fs::path>& explicit_root) {
    if (explicit_root && !explicit_root->empty()) return *explicit_root;
    if (const char* env = std::getenv("RAFSNN_DATASET_ROOT"); env && *env) return env;
    return RAFSNN_DEFAULT_DATASET_ROOT;
}

}  // namespace rafsnn
