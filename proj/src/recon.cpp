#include "moco/recon.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace moco {

namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// iterative radix-2 FFT, size must be a power of two
void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * EIGEN_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<double> kernel_ring(int n, double du) {
    std::vector<double> h(n, 0.0);
    for (int k = 0; k < n; ++k) {
        int off = (k <= n / 2) ? k : k - n;
        h[k] = ramp_kernel(off, du);
    }
    return h;
}

} // namespace

double ramp_kernel(int n, double du) {
    if (n == 0) return 1.0 / (4.0 * du * du);
    if (n % 2 == 0) return 0.0;
    double d = EIGEN_PI * n * du;
    return -1.0 / (d * d);
}

ProjectionStack cosine_weight(const ProjectionStack& stack, double sdd, Exec exec) {
    ProjectionStack out = stack;
    const DetectorSpec& det = stack.detector;
    const int n_views = stack.n_views;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
    for (int i = 0; i < n_views; ++i) {
        for (int r = 0; r < stack.nv; ++r) {
            double vb = (r - det.v0) * det.dv;
            for (int c = 0; c < stack.nu; ++c) {
                double ub = (c - det.u0) * det.du;
                double w = sdd / std::sqrt(sdd * sdd + ub * ub + vb * vb);
                out.at(i, r, c) = static_cast<float>(stack.at(i, r, c) * w);
            }
        }
    }
    return out;
}

ProjectionStack ramp_filter(const ProjectionStack& stack, RampPath path, Exec exec) {
    if (stack.nu < 4) throw std::invalid_argument("ramp_filter: nu must be >= 4");
    const int nu = stack.nu;
    const int npad = next_pow2(2 * nu);
    const double du = stack.detector.du;
    ProjectionStack out = stack;

    const std::vector<double> ring = kernel_ring(npad, du);
    std::vector<std::complex<double>> ring_spec;
    if (path == RampPath::frequency) {
        ring_spec.assign(npad, {0.0, 0.0});
        for (int k = 0; k < npad; ++k) ring_spec[k] = ring[k];
        fft(ring_spec, false);
    }

    const int n_rows = stack.n_views * stack.nv;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
    for (int row = 0; row < n_rows; ++row) {
        const float* src = &stack.v[static_cast<size_t>(row) * nu];
        float* dst = &out.v[static_cast<size_t>(row) * nu];
        if (path == RampPath::spatial) {
            for (int j = 0; j < nu; ++j) {
                double acc = 0.0;
                for (int k = 0; k < nu; ++k) {
                    int off = j - k;
                    if (off < 0) off += npad;
                    acc += static_cast<double>(src[k]) * ring[off];
                }
                dst[j] = static_cast<float>(acc);
            }
        } else {
            std::vector<std::complex<double>> buf(npad, {0.0, 0.0});
            for (int k = 0; k < nu; ++k) buf[k] = static_cast<double>(src[k]);
            fft(buf, false);
            for (int k = 0; k < npad; ++k) buf[k] *= ring_spec[k];
            fft(buf, true);
            for (int j = 0; j < nu; ++j) dst[j] = static_cast<float>(buf[j].real());
        }
    }
    return out;
}

ProjectionStack fdk_prefilter(const ProjectionStack& stack, const CircularGeometry& geom, Exec exec) {
    return ramp_filter(cosine_weight(stack, geom.sdd, exec), RampPath::frequency, exec);
}

Volume backproject(const ProjectionStack& filtered, const Trajectory& traj, const MotionTrajectory& motion,
                   const GridSpec& grid, FdkMode mode, Exec exec) {
    if (motion.size() != traj.views.size())
        throw std::invalid_argument("backproject: motion length does not match trajectory");
    if (filtered.n_views != traj.n_views())
        throw std::invalid_argument("backproject: stack/trajectory view count mismatch");
    grid.validate();

    GridSpec g = grid;
    if (mode == FdkMode::central_slice) {
        g.nz = 1;
        g.origin.z() = 0.0;
    }
    Volume vol(g);

    const CircularGeometry& geom = traj.geometry;
    // 0.5 * dbeta * du * sdd/sid -- see the fan-beam FBP normalization; exact
    // for full scans, which are the supported default
    const double c0 = 0.5 * geom.angular_step() * geom.detector.du * geom.sdd / geom.sid;
    const double sid2 = geom.sid * geom.sid;

    std::vector<ProjectionMatrix> cams(traj.views.size());
    for (size_t i = 0; i < traj.views.size(); ++i)
        cams[i] = normalize_projection(traj.views[i] * motion[i].matrix());

    const int nu = filtered.nu, nv = filtered.nv;
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const int n_views = traj.n_views();
    const int n_rows = nz * ny;
    int bad_view = -1; // exceptions must not escape the parallel region

#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
    for (int row = 0; row < n_rows; ++row) {
        const int z = row / ny;
        const int y = row % ny;
        for (int x = 0; x < nx; ++x) {
            Eigen::Vector4d p(g.origin.x() + x * g.spacing.x(),
                              g.origin.y() + y * g.spacing.y(),
                              g.origin.z() + z * g.spacing.z(), 1.0);
            double acc = 0.0;
            for (int i = 0; i < n_views; ++i) {
                const ProjectionMatrix& cp = cams[i];
                double w = cp.row(2).dot(p);
                if (w <= 1e-9) {
#if defined(_OPENMP)
#pragma omp atomic write
#endif
                    bad_view = i;
                    break;
                }
                double u = cp.row(0).dot(p) / w;
                double v = cp.row(1).dot(p) / w;
                if (u < 0.0 || u > nu - 1 || v < 0.0 || v > nv - 1) continue;
                int iu = static_cast<int>(u);
                int iv = static_cast<int>(v);
                if (iu > nu - 2) iu = nu - 2;
                if (iv > nv - 2) iv = nv - 2;
                double fu = u - iu, fv = v - iv;
                double s00 = filtered.at(i, iv, iu);
                double s10 = filtered.at(i, iv, iu + 1);
                double s01 = filtered.at(i, iv + 1, iu);
                double s11 = filtered.at(i, iv + 1, iu + 1);
                double s = (1 - fv) * ((1 - fu) * s00 + fu * s10) + fv * ((1 - fu) * s01 + fu * s11);
                acc += (sid2 / (w * w)) * s;
            }
            vol.at(x, y, z) = static_cast<float>(c0 * acc);
        }
    }
    if (bad_view >= 0)
        throw std::runtime_error("backproject: non-positive ray depth at view " + std::to_string(bad_view));
    return vol;
}

Volume fdk(const ProjectionStack& stack, const Trajectory& traj, const MotionTrajectory& motion,
           const GridSpec& grid, FdkMode mode, Exec exec) {
    return backproject(fdk_prefilter(stack, traj.geometry, exec), traj, motion, grid, mode, exec);
}

} // namespace moco
