#include "rafsnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "rafsnn/errors.hpp"

namespace rafsnn {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'F', 'S', 'N', 'N', 'C', 'K'};

template <class T>
void put_le(std::ostream& os, T value) {
    unsigned char bytes[sizeof(T)];
    std::uint64_t bits;
    if constexpr (std::is_same_v<T, double>)
        bits = std::bit_cast<std::uint64_t>(value);
    else
        bits = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path.string()) {
        if (!in_) throw FormatError("cannot open checkpoint '" + path_ + "'");
    }

    void read(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError("checkpoint '" + path_ + "' truncated at offset " + std::to_string(offset_));
        offset_ += n;
    }

    template <class T>
    T get_le() {
        unsigned char bytes[sizeof(T)];
        read(bytes, sizeof(T));
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        if constexpr (std::is_same_v<T, double>)
            return std::bit_cast<double>(bits);
        else
            return static_cast<T>(bits);
    }

    std::string get_string(std::size_t limit) {
        const auto n = get_le<std::uint32_t>();
        if (n > limit) throw FormatError("checkpoint string length " + std::to_string(n) + " is implausible");
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }

    std::size_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

private:
    std::ifstream in_;
    std::string path_;
    std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Network& net) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write checkpoint '" + path.string() + "'");
    os.write(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(os, kCheckpointVersion);
    const std::string spec = nlohmann::json(net.spec()).dump();
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.size()));
    os.write(spec.data(), static_cast<std::streamsize>(spec.size()));
    const auto params = net.parameters();
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.rank()));
        for (auto d : p->value.shape()) put_le<std::uint64_t>(os, d);
        for (double x : p->value.data()) put_le<double>(os, x);
    }
    if (!os) throw FormatError("failed writing checkpoint '" + path.string() + "'");
}

Network load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("'" + r.path() + "' is not a checkpoint (bad magic)");
    const auto version = r.get_le<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    NetworkSpec spec;
    try {
        spec = nlohmann::json::parse(r.get_string(1u << 24)).get<NetworkSpec>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint spec is malformed: " + std::string(e.what()));
    }
    Network net(std::move(spec));
    std::map<std::string, Parameter*> by_name;
    for (Parameter* p : net.parameters()) by_name[p->name] = p;

    const auto count = r.get_le<std::uint32_t>();
    if (count != by_name.size())
        throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, network expects " +
                          std::to_string(by_name.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.get_string(4096);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("unexpected tensor '" + name + "' in checkpoint");
        const auto rank = r.get_le<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get_le<std::uint64_t>());
        if (shape != it->second->value.shape())
            throw FormatError("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                              shape_str(it->second->value.shape()));
        for (auto& x : it->second->value.data()) x = r.get_le<double>();
    }
    return net;
}

ParameterSnapshot snapshot(Network& net) {
    ParameterSnapshot snap;
    for (const Parameter* p : net.parameters()) snap.push_back(p->value);
    return snap;
}

void restore(Network& net, const ParameterSnapshot& snap) {
    auto params = net.parameters();
    if (params.size() != snap.size()) throw UsageError("snapshot does not match network");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->value.shape() != snap[i].shape()) throw UsageError("snapshot does not match network");
        params[i]->value = snap[i];
    }
}

}  // namespace rafsnn
