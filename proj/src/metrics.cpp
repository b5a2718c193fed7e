#include "moco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moco {

namespace {

void check_shapes(const Image2D& a, const Image2D& b) {
    if (a.nx != b.nx || a.ny != b.ny) throw std::invalid_argument("metrics: image shapes do not match");
    if (a.nx == 0 || a.ny == 0) throw std::invalid_argument("metrics: empty image");
}

} // namespace

double rmse(const Image2D& a, const Image2D& b) {
    check_shapes(a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        double d = static_cast<double>(a.v[i]) - b.v[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.v.size()));
}

double rmse_masked(const Image2D& a, const Image2D& b, const std::vector<uint8_t>& mask) {
    check_shapes(a, b);
    if (mask.size() != a.v.size()) throw std::invalid_argument("rmse_masked: mask size mismatch");
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        if (!mask[i]) continue;
        double d = static_cast<double>(a.v[i]) - b.v[i];
        acc += d * d;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("rmse_masked: empty mask");
    return std::sqrt(acc / static_cast<double>(n));
}

std::vector<uint8_t> support_mask(const Image2D& reference, int dilate, float threshold) {
    std::vector<uint8_t> mask(reference.v.size(), 0);
    for (size_t i = 0; i < reference.v.size(); ++i)
        mask[i] = std::abs(reference.v[i]) > threshold ? 1 : 0;
    for (int pass = 0; pass < dilate; ++pass) {
        std::vector<uint8_t> next = mask;
        for (int y = 0; y < reference.ny; ++y) {
            for (int x = 0; x < reference.nx; ++x) {
                if (mask[static_cast<size_t>(y) * reference.nx + x]) continue;
                bool hit = false;
                for (int dy = -1; dy <= 1 && !hit; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= reference.nx || yy >= reference.ny) continue;
                        if (mask[static_cast<size_t>(yy) * reference.nx + xx]) { hit = true; break; }
                    }
                }
                if (hit) next[static_cast<size_t>(y) * reference.nx + x] = 1;
            }
        }
        mask.swap(next);
    }
    return mask;
}

double ssim(const Image2D& a, const Image2D& b, int window, double k1, double k2) {
    check_shapes(a, b);
    if (window < 2 || window > std::min(a.nx, a.ny))
        throw std::invalid_argument("ssim: bad window size");

    float lo = a.v[0], hi = a.v[0];
    for (float x : a.v) { lo = std::min(lo, x); hi = std::max(hi, x); }
    for (float x : b.v) { lo = std::min(lo, x); hi = std::max(hi, x); }
    double range = static_cast<double>(hi) - lo;
    if (range <= 0.0) range = 1.0; // both images constant
    const double c1 = (k1 * range) * (k1 * range);
    const double c2 = (k2 * range) * (k2 * range);

    // summed-area tables in double
    const int nx = a.nx, ny = a.ny;
    const int sx = nx + 1, sy = ny + 1;
    std::vector<double> sa(static_cast<size_t>(sx) * sy, 0.0), sb = sa, saa = sa, sbb = sa, sab = sa;
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            size_t i = static_cast<size_t>(y) * nx + x;
            size_t j = static_cast<size_t>(y + 1) * sx + (x + 1);
            size_t ju = j - sx, jl = j - 1, jul = ju - 1;
            double va = a.v[i], vb = b.v[i];
            sa[j] = va + sa[ju] + sa[jl] - sa[jul];
            sb[j] = vb + sb[ju] + sb[jl] - sb[jul];
            saa[j] = va * va + saa[ju] + saa[jl] - saa[jul];
            sbb[j] = vb * vb + sbb[ju] + sbb[jl] - sbb[jul];
            sab[j] = va * vb + sab[ju] + sab[jl] - sab[jul];
        }
    }
    auto box = [&](const std::vector<double>& s, int x, int y) {
        size_t j11 = static_cast<size_t>(y + window) * sx + (x + window);
        size_t j01 = static_cast<size_t>(y) * sx + (x + window);
        size_t j10 = static_cast<size_t>(y + window) * sx + x;
        size_t j00 = static_cast<size_t>(y) * sx + x;
        return s[j11] - s[j01] - s[j10] + s[j00];
    };

    const double n = static_cast<double>(window) * window;
    double acc = 0.0;
    int count = 0;
    for (int y = 0; y + window <= ny; ++y) {
        for (int x = 0; x + window <= nx; ++x) {
            double ma = box(sa, x, y) / n;
            double mb = box(sb, x, y) / n;
            double va = box(saa, x, y) / n - ma * ma;
            double vb = box(sbb, x, y) / n - mb * mb;
            double cab = box(sab, x, y) / n - ma * mb;
            double num = (2 * ma * mb + c1) * (2 * cab + c2);
            double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
            ++count;
        }
    }
    return acc / count;
}

double artifact_suppression(double rmse_uncomp, double rmse_comp) {
    if (!(rmse_uncomp > 0.0))
        throw std::invalid_argument("artifact_suppression: undefined baseline (rmse_uncomp must be > 0)");
    return 100.0 * (rmse_uncomp - rmse_comp) / rmse_uncomp;
}

} // namespace moco
