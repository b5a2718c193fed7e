#include "moco/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace moco {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

namespace {

void write_floats(std::ofstream& f, const std::vector<float>& v) {
    f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_floats(std::ifstream& f, std::vector<float>& v) {
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!f) throw std::runtime_error("short binary payload");
}

std::string read_header_line(std::ifstream& f) {
    std::string line;
    std::getline(f, line);
    if (!f) throw std::runtime_error("missing header line");
    return line;
}

} // namespace

void save_stack(const std::string& path, const ProjectionStack& stack) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "RAWP " << stack.n_views << " " << stack.nv << " " << stack.nu << " "
      << stack.detector.du << " " << stack.detector.dv << "\n";
    write_floats(f, stack.v);
    if (!f) throw std::runtime_error("short write: " + path);
}

ProjectionStack load_stack(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::istringstream hs(read_header_line(f));
    std::string magic;
    ProjectionStack stack;
    hs >> magic >> stack.n_views >> stack.nv >> stack.nu >> stack.detector.du >> stack.detector.dv;
    if (magic != "RAWP" || hs.fail()) throw std::runtime_error("not a RAWP file: " + path);
    stack.detector.nu = stack.nu;
    stack.detector.nv = stack.nv;
    stack.detector.u0 = 0.5 * (stack.nu - 1);
    stack.detector.v0 = 0.5 * (stack.nv - 1);
    stack.v.assign(static_cast<size_t>(stack.n_views) * stack.nv * stack.nu, 0.f);
    read_floats(f, stack.v);
    return stack;
}

void save_volume(const std::string& path, const Volume& vol) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.precision(17);
    f << "RAWV " << vol.nx << " " << vol.ny << " " << vol.nz << " "
      << vol.spacing.x() << " " << vol.spacing.y() << " " << vol.spacing.z() << " "
      << vol.origin.x() << " " << vol.origin.y() << " " << vol.origin.z() << "\n";
    write_floats(f, vol.v);
    if (!f) throw std::runtime_error("short write: " + path);
}

Volume load_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::istringstream hs(read_header_line(f));
    std::string magic;
    Volume vol;
    hs >> magic >> vol.nx >> vol.ny >> vol.nz >> vol.spacing.x() >> vol.spacing.y() >> vol.spacing.z() >>
        vol.origin.x() >> vol.origin.y() >> vol.origin.z();
    if (magic != "RAWV" || hs.fail()) throw std::runtime_error("not a RAWV file: " + path);
    vol.v.assign(static_cast<size_t>(vol.nx) * vol.ny * vol.nz, 0.f);
    read_floats(f, vol.v);
    return vol;
}

void save_radon_lut(const std::string& path, const RadonLUT& lut) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "RAWL " << lut.n_views << " " << lut.grid.n_theta << " " << lut.grid.ns << "\n";
    write_floats(f, lut.v);
    if (!f) throw std::runtime_error("short write: " + path);
}

void save_pgm16(const std::string& path, const Image2D& img, double level, double window) {
    if (!(window > 0)) throw std::invalid_argument("save_pgm16: window must be > 0");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "P5\n" << img.nx << " " << img.ny << "\n65535\n";
    const double lo = level - 0.5 * window;
    for (int y = 0; y < img.ny; ++y) {
        for (int x = 0; x < img.nx; ++x) {
            double t = (img.at(x, y) - lo) / window;
            t = std::clamp(t, 0.0, 1.0);
            auto q = static_cast<uint16_t>(std::lround(t * 65535.0));
            // PGM 16-bit is big-endian by convention
            unsigned char hi = static_cast<unsigned char>(q >> 8);
            unsigned char lo8 = static_cast<unsigned char>(q & 0xff);
            f.put(static_cast<char>(hi));
            f.put(static_cast<char>(lo8));
        }
    }
    if (!f) throw std::runtime_error("short write: " + path);
}

} // namespace moco
