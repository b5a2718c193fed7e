#include "moco/regressor.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace moco {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

namespace {

void write_u32(std::ofstream& f, uint32_t x) { f.write(reinterpret_cast<const char*>(&x), 4); }

uint32_t read_u32(std::ifstream& f) {
    uint32_t x = 0;
    f.read(reinterpret_cast<char*>(&x), 4);
    return x;
}

} // namespace

void save_model(const std::string& path, const RegressorNet& net) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write("RPEM", 4);
    write_u32(f, 1); // version
    write_u32(f, static_cast<uint32_t>(net.input_size()));
    write_u32(f, RegressorNet::kNumConv);
    for (int l = 0; l <= RegressorNet::kNumConv; ++l)
        write_u32(f, static_cast<uint32_t>(RegressorNet::kChannels[l]));
    write_u32(f, static_cast<uint32_t>(net.n_params()));
    f.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(net.n_params() * sizeof(float)));
    if (!f) throw std::runtime_error("short write: " + path);
}

RegressorNet load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open model file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, "RPEM", 4) != 0) throw std::runtime_error("not an RPEM model: " + path);
    uint32_t version = read_u32(f);
    if (version != 1) throw std::runtime_error("unsupported RPEM version in " + path);
    uint32_t input_size = read_u32(f);
    uint32_t n_conv = read_u32(f);
    if (n_conv != RegressorNet::kNumConv) throw std::runtime_error("unexpected layer count in " + path);
    for (int l = 0; l <= RegressorNet::kNumConv; ++l) {
        if (read_u32(f) != static_cast<uint32_t>(RegressorNet::kChannels[l]))
            throw std::runtime_error("unexpected channel widths in " + path);
    }
    RegressorNet net(static_cast<int>(input_size));
    uint32_t n_params = read_u32(f);
    if (n_params != net.n_params()) throw std::runtime_error("parameter count mismatch in " + path);
    f.read(reinterpret_cast<char*>(net.params().data()),
           static_cast<std::streamsize>(n_params * sizeof(float)));
    if (!f) throw std::runtime_error("short read: " + path);
    return net;
}

} // namespace moco
