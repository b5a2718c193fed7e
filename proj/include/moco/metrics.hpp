#pragma once

#include "moco/image.hpp"

#include <cstdint>
#include <vector>

namespace moco {

/// Root mean squared difference over all pixels.
double rmse(const Image2D& a, const Image2D& b);

/// RMSE restricted to mask != 0 (the Table-style evaluation uses the phantom
/// support dilated by 5 pixels).
double rmse_masked(const Image2D& a, const Image2D& b, const std::vector<uint8_t>& mask);

/// Binary support of the reference slice (|value| > threshold), dilated by
/// `dilate` pixels (Chebyshev radius).
std::vector<uint8_t> support_mask(const Image2D& reference, int dilate, float threshold = 1e-6f);

/// Mean local SSIM with a square sliding window. The dynamic range is taken
/// from the joint min/max of both inputs, which equals the ground-truth range
/// whenever the ground truth spans both; this keeps ssim symmetric.
double ssim(const Image2D& a, const Image2D& b, int window = 8, double k1 = 0.01, double k2 = 0.03);

/// Percent RMSE improvement: 100*(u - c)/u. Negative when compensation made
/// things worse; that is reported, not clamped.
double artifact_suppression(double rmse_uncomp, double rmse_comp);

} // namespace moco
