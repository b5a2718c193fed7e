#pragma once

#include "moco/consistency.hpp"
#include "moco/image.hpp"
#include "moco/phantom.hpp"

#include <string>

namespace moco {

/// RAWP: ASCII header "RAWP n_views nv nu du dv" + little-endian float32
/// payload, view-major.
void save_stack(const std::string& path, const ProjectionStack& stack);
ProjectionStack load_stack(const std::string& path);

/// RAWV: ASCII header "RAWV nx ny nz sx sy sz ox oy oz" + little-endian
/// float32 payload, z-major.
void save_volume(const std::string& path, const Volume& vol);
Volume load_volume(const std::string& path);

/// RAWL: ASCII header "RAWL n_views ntheta ns" + float32 payload (debug dump).
void save_radon_lut(const std::string& path, const RadonLUT& lut);

/// 16-bit binary PGM with the window/level mapping
/// pixel = clamp((x - (level - window/2)) / window, 0, 1) * 65535.
void save_pgm16(const std::string& path, const Image2D& img, double level, double window);

} // namespace moco
