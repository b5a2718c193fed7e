#include "moco/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace moco {

void RadonGrid::validate() const {
    if (n_theta < 16 || ns < 16) throw std::invalid_argument("RadonGrid: n_theta, ns must be >= 16");
    if (!(s_max > 0)) throw std::invalid_argument("RadonGrid: s_max must be > 0");
}

RadonGrid default_radon_grid(const DetectorSpec& det, int n_theta, int ns) {
    RadonGrid g;
    g.n_theta = n_theta;
    g.s_max = 0.5 * det.diagonal_mm() + det.du;
    g.ns = ns > 0 ? ns : std::max(16, static_cast<int>(std::lround(2.0 * det.diagonal_mm() / det.du)));
    g.validate();
    return g;
}

namespace {

struct Rect {
    double x0, x1, y0, y1;
};

Rect detector_rect_mm(const DetectorSpec& det) {
    return {(0 - det.u0) * det.du, (det.nu - 1 - det.u0) * det.du,
            (0 - det.v0) * det.dv, (det.nv - 1 - det.v0) * det.dv};
}

// clip p0 + t*dir against the rect, Liang-Barsky; false when no overlap
bool clip_segment(const Rect& r, const Eigen::Vector2d& p0, const Eigen::Vector2d& dir,
                  double& t0, double& t1) {
    t0 = -1e300;
    t1 = 1e300;
    const double p[2] = {p0.x(), p0.y()};
    const double d[2] = {dir.x(), dir.y()};
    const double lo[2] = {r.x0, r.y0};
    const double hi[2] = {r.x1, r.y1};
    for (int ax = 0; ax < 2; ++ax) {
        if (std::abs(d[ax]) < 1e-15) {
            if (p[ax] < lo[ax] || p[ax] > hi[ax]) return false;
            continue;
        }
        double a = (lo[ax] - p[ax]) / d[ax];
        double b = (hi[ax] - p[ax]) / d[ax];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    return t0 < t1;
}

inline double bilerp_image(const Image2D& img, double x, double y) {
    // x, y in pixel units
    if (x < 0.0 || y < 0.0 || x > img.nx - 1 || y > img.ny - 1) return 0.0;
    int ix = static_cast<int>(x), iy = static_cast<int>(y);
    if (ix > img.nx - 2) ix = img.nx - 2;
    if (iy > img.ny - 2) iy = img.ny - 2;
    double fx = x - ix, fy = y - iy;
    double s00 = img.at(ix, iy), s10 = img.at(ix + 1, iy);
    double s01 = img.at(ix, iy + 1), s11 = img.at(ix + 1, iy + 1);
    return (1 - fy) * ((1 - fx) * s00 + fx * s10) + fy * ((1 - fx) * s01 + fx * s11);
}

} // namespace

std::vector<float> radon_derivative_view(const Image2D& img, const DetectorSpec& det, const RadonGrid& grid) {
    grid.validate();
    const Rect rect = detector_rect_mm(det);
    const double step = 0.5 * std::min(det.du, det.dv);
    const double ds = grid.ds();

    // The pixel raster imprints a short-period ripple on R(theta, .) that a
    // raw central difference would amplify by 1/(2 ds). R is therefore
    // sampled on a 2x fine s-grid, low-pass filtered along s with a Gaussian
    // of one pixel pitch, differentiated on the fine grid and decimated back.
    const int ns_f = 2 * grid.ns - 1;
    const double ds_f = 0.5 * ds;
    const double sigma = 2.0 * std::min(det.du, det.dv);
    const int krad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma / ds_f)));
    std::vector<double> kernel(2 * krad + 1);
    double ksum = 0.0;
    for (int j = -krad; j <= krad; ++j) {
        kernel[j + krad] = std::exp(-0.5 * (j * ds_f) * (j * ds_f) / (sigma * sigma));
        ksum += kernel[j + krad];
    }
    for (double& w : kernel) w /= ksum;

    std::vector<double> fine(ns_f), smooth(ns_f);
    std::vector<float> deriv(static_cast<size_t>(grid.n_theta) * grid.ns, 0.f);
    for (int t = 0; t < grid.n_theta; ++t) {
        double theta = t * grid.dtheta();
        Eigen::Vector2d n(std::cos(theta), std::sin(theta));
        Eigen::Vector2d e(-n.y(), n.x());
        for (int k = 0; k < ns_f; ++k) {
            double s = -grid.s_max + k * ds_f;
            fine[k] = 0.0;
            Eigen::Vector2d p0 = s * n;
            double t0, t1;
            if (!clip_segment(rect, p0, e, t0, t1)) continue;
            // midpoint rule along the clipped chord
            int nsteps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
            double h = (t1 - t0) / nsteps;
            double acc = 0.0;
            for (int m = 0; m < nsteps; ++m) {
                Eigen::Vector2d q = p0 + (t0 + (m + 0.5) * h) * e;
                acc += bilerp_image(img, q.x() / det.du + det.u0, q.y() / det.dv + det.v0);
            }
            fine[k] = acc * h;
        }
        for (int k = 0; k < ns_f; ++k) {
            double acc = 0.0;
            for (int j = -krad; j <= krad; ++j) {
                int kk = std::clamp(k + j, 0, ns_f - 1);
                acc += kernel[j + krad] * fine[kk];
            }
            smooth[k] = acc;
        }
        float* out = &deriv[static_cast<size_t>(t) * grid.ns];
        for (int k = 0; k < grid.ns; ++k) {
            int kf = 2 * k;
            double d;
            if (kf == 0) d = (smooth[1] - smooth[0]) / ds_f;
            else if (kf == ns_f - 1) d = (smooth[kf] - smooth[kf - 1]) / ds_f;
            else d = (smooth[kf + 1] - smooth[kf - 1]) / (2.0 * ds_f);
            out[k] = static_cast<float>(d);
        }
    }
    return deriv;
}

RadonLUT build_radon_luts(const ProjectionStack& weighted, const RadonGrid& grid, Exec exec) {
    grid.validate();
    RadonLUT lut;
    lut.grid = grid;
    lut.n_views = weighted.n_views;
    lut.v.assign(static_cast<size_t>(weighted.n_views) * grid.n_theta * grid.ns, 0.f);

    const int n_views = weighted.n_views;
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
#endif
    for (int i = 0; i < n_views; ++i) {
        Image2D img = weighted.view_image(i);
        std::vector<float> entry = radon_derivative_view(img, weighted.detector, grid);
        std::copy(entry.begin(), entry.end(),
                  lut.v.begin() + static_cast<size_t>(i) * grid.n_theta * grid.ns);
    }
    return lut;
}

double RadonLUT::sample(int view, double theta, double s) const {
    const int nt = grid.n_theta, ns = grid.ns;
    // fold theta into [0, pi); (theta + pi, s) is the line (theta, -s)
    double th = theta;
    if (th < 0.0 || th >= EIGEN_PI) {
        double k = std::floor(th / EIGEN_PI);
        th -= k * EIGEN_PI;
        if (static_cast<long long>(k) % 2 != 0) s = -s;
        if (th >= EIGEN_PI) th = 0.0; // roundoff at the fold boundary
    }
    double tf = th / grid.dtheta();
    int t0 = static_cast<int>(tf);
    if (t0 > nt - 1) t0 = nt - 1;
    double ft = tf - t0;
    int t1 = t0 + 1;
    double s1v = s;
    bool wrap = t1 >= nt;
    if (wrap) { t1 = 0; s1v = -s; }

    auto sample_row = [&](int t, double sv) {
        double kf = (sv + grid.s_max) / grid.ds();
        if (kf < 0) kf = 0;
        if (kf > ns - 1) kf = ns - 1;
        int k0 = static_cast<int>(kf);
        if (k0 > ns - 2) k0 = ns - 2;
        double fk = kf - k0;
        return (1 - fk) * at(view, t, k0) + fk * at(view, t, k0 + 1);
    };
    return (1 - ft) * sample_row(t0, s) + ft * sample_row(t1, s1v);
}

using DualMatrix = Eigen::Matrix<double, 3, 4>;

/// pinv(P)^T as a 3x4 map from planes to pixel lines.
static DualMatrix dual_projection(const ProjectionMatrix& p) {
    Eigen::Matrix3d ppt = p * p.transpose();
    return ppt.inverse() * p;
}

static std::optional<DetectorLine> line_from_dual(const DualMatrix& dual, const Eigen::Vector4d& plane,
                                                  const DetectorSpec& det) {
    Eigen::Vector3d l = dual * plane;
    // to Hesse form in principal-point-centered mm
    double alpha = l.x() / det.du;
    double beta = l.y() / det.dv;
    double gamma = l.z() + l.x() * det.u0 + l.y() * det.v0;
    double n = std::hypot(alpha, beta);
    double scale = std::abs(l.x()) + std::abs(l.y()) + std::abs(l.z());
    if (n <= 1e-14 * (scale + 1e-300)) return std::nullopt; // line at infinity
    DetectorLine out;
    out.theta = std::atan2(beta, alpha);
    out.s = -gamma / n;
    if (out.theta < 0) {
        out.theta += EIGEN_PI;
        out.s = -out.s;
    }
    if (out.theta >= EIGEN_PI) { // atan2 == pi edge
        out.theta -= EIGEN_PI;
        out.s = -out.s;
    }
    return out;
}

std::optional<DetectorLine> line_from_plane(const ProjectionMatrix& p, const Eigen::Vector4d& plane,
                                            const DetectorSpec& det) {
    return line_from_dual(dual_projection(p), plane, det);
}

bool line_hits_detector(const DetectorLine& l, const DetectorSpec& det) {
    const Rect r = detector_rect_mm(det);
    Eigen::Vector2d n(std::cos(l.theta), std::sin(l.theta));
    double d00 = Eigen::Vector2d(r.x0, r.y0).dot(n) - l.s;
    double d01 = Eigen::Vector2d(r.x0, r.y1).dot(n) - l.s;
    double d10 = Eigen::Vector2d(r.x1, r.y0).dot(n) - l.s;
    double d11 = Eigen::Vector2d(r.x1, r.y1).dot(n) - l.s;
    double lo = std::min(std::min(d00, d01), std::min(d10, d11));
    double hi = std::max(std::max(d00, d01), std::max(d10, d11));
    return lo <= 0.0 && hi >= 0.0;
}

namespace {

struct PlaneBasis {
    Eigen::Vector3d c_i;
    Eigen::Vector3d n1, n2;
};

PlaneBasis baseline_basis(const ProjectionMatrix& pi, const ProjectionMatrix& pj) {
    Eigen::Vector3d ci = camera_center(pi);
    Eigen::Vector3d cj = camera_center(pj);
    Eigen::Vector3d b = cj - ci;
    double bn = b.norm();
    if (bn <= 1e-6)
        throw std::runtime_error("epipolar pair: coincident source positions (degenerate baseline)");
    b /= bn;
    // kappa = 0 aligned with the acquisition plane whenever possible
    Eigen::Vector3d seed = Eigen::Vector3d::UnitZ();
    if (std::abs(b.dot(seed)) > 0.999) seed = Eigen::Vector3d::UnitX();
    Eigen::Vector3d n1 = (seed - b.dot(seed) * b).normalized();
    Eigen::Vector3d n2 = b.cross(n1);
    return {ci, n1, n2};
}

Eigen::Vector4d plane_at(const PlaneBasis& basis, double kappa) {
    Eigen::Vector3d n = std::cos(kappa) * basis.n1 + std::sin(kappa) * basis.n2;
    return {n.x(), n.y(), n.z(), -n.dot(basis.c_i)};
}

std::optional<EpipolarSample> sample_at(const DualMatrix& di, const DualMatrix& dj,
                                        const DetectorSpec& det, const PlaneBasis& basis, double kappa) {
    Eigen::Vector4d plane = plane_at(basis, kappa);
    auto li = line_from_dual(di, plane, det);
    auto lj = line_from_dual(dj, plane, det);
    if (!li || !lj) return std::nullopt;
    if (!line_hits_detector(*li, det) || !line_hits_detector(*lj, det)) return std::nullopt;
    return EpipolarSample{kappa, *li, *lj};
}

// contiguous kappa interval (around the acquisition plane) in which the
// induced lines cross both detectors
std::optional<std::pair<double, double>> feasible_kappa(const DualMatrix& di, const DualMatrix& dj,
                                                        const DetectorSpec& det, const PlaneBasis& basis) {
    constexpr int kScan = 256;
    double lo = 1e300, hi = -1e300;
    for (int m = 0; m < kScan; ++m) {
        double kappa = -0.5 * EIGEN_PI + EIGEN_PI * (m + 0.5) / kScan;
        if (sample_at(di, dj, det, basis, kappa)) {
            lo = std::min(lo, kappa);
            hi = std::max(hi, kappa);
        }
    }
    if (hi < lo) return std::nullopt;
    return std::make_pair(lo, hi);
}

} // namespace

std::vector<EpipolarSample> epipolar_samples(const ProjectionMatrix& pi, const ProjectionMatrix& pj,
                                             const DetectorSpec& det, int n_kappa) {
    if (n_kappa < 1) throw std::invalid_argument("epipolar_samples: n_kappa must be >= 1");
    PlaneBasis basis = baseline_basis(pi, pj);
    DualMatrix di = dual_projection(pi), dj = dual_projection(pj);
    auto range = feasible_kappa(di, dj, det, basis);
    std::vector<EpipolarSample> out;
    if (!range) return out;
    out.reserve(n_kappa);
    for (int m = 0; m < n_kappa; ++m) {
        double kappa = range->first + (range->second - range->first) * (m + 0.5) / n_kappa;
        if (auto s = sample_at(di, dj, det, basis, kappa)) out.push_back(*s);
    }
    return out;
}

double ecc_pair(const RadonLUT& lut, int view_i, int view_j, const std::vector<EpipolarSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("ecc_pair: no surviving epipolar samples");
    double acc = 0.0;
    for (const auto& s : samples) {
        double a = lut.sample(view_i, s.line_i.theta, s.line_i.s);
        double b = lut.sample(view_j, s.line_j.theta, s.line_j.s);
        double d = a - b;
        acc += d * d;
    }
    return acc / static_cast<double>(samples.size());
}

EccContext make_ecc_context(RadonLUT luts, const Trajectory& traj, const EccSettings& settings) {
    if (settings.stride < 1) throw std::invalid_argument("EccSettings: stride must be >= 1");
    if (luts.n_views != traj.n_views())
        throw std::invalid_argument("make_ecc_context: LUT/trajectory view count mismatch");
    EccContext ctx;
    ctx.luts = std::move(luts);
    ctx.detector = traj.geometry.detector;
    ctx.settings = settings;

    const double dbeta = traj.geometry.angular_step();
    const int max_hops = static_cast<int>(settings.max_separation / (dbeta * settings.stride));
    for (int i = 0; i < traj.n_views(); ++i) {
        for (int k = 1; k <= max_hops; ++k) {
            int j = i + k * settings.stride;
            if (j >= traj.n_views()) break;
            ctx.pairs.emplace_back(i, j);
        }
    }
    if (ctx.pairs.empty()) throw std::invalid_argument("make_ecc_context: empty pair list");

    std::vector<DualMatrix> duals(traj.views.size());
    for (size_t i = 0; i < traj.views.size(); ++i) duals[i] = dual_projection(traj.views[i]);

    ctx.kappa_ranges.resize(ctx.pairs.size(), {0.0, 0.0});
    const int n_pairs = static_cast<int>(ctx.pairs.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
    for (int p = 0; p < n_pairs; ++p) {
        auto [i, j] = ctx.pairs[p];
        PlaneBasis basis = baseline_basis(traj.views[i], traj.views[j]);
        auto range = feasible_kappa(duals[i], duals[j], ctx.detector, basis);
        ctx.kappa_ranges[p] = range ? *range : std::make_pair(0.0, -1.0); // empty marker
    }
    return ctx;
}

double ecc_total(const EccContext& ctx, const Trajectory& traj, const MotionTrajectory& motion,
                 Exec exec, int* skipped_pairs) {
    if (motion.size() != traj.views.size())
        throw std::invalid_argument("ecc_total: motion length does not match trajectory");

    std::vector<ProjectionMatrix> eff(traj.views.size());
    std::vector<DualMatrix> duals(traj.views.size());
    for (size_t i = 0; i < traj.views.size(); ++i) {
        eff[i] = traj.views[i] * motion[i].matrix();
        duals[i] = dual_projection(eff[i]);
    }

    const int n_pairs = static_cast<int>(ctx.pairs.size());
    std::vector<double> pair_vals(n_pairs, 0.0);
    std::vector<uint8_t> pair_ok(n_pairs, 0);

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 8) if (exec == Exec::parallel)
#endif
    for (int p = 0; p < n_pairs; ++p) {
        auto [i, j] = ctx.pairs[p];
        auto [klo, khi] = ctx.kappa_ranges[p];
        if (khi < klo) continue;
        PlaneBasis basis;
        try {
            basis = baseline_basis(eff[i], eff[j]);
        } catch (const std::runtime_error&) {
            continue; // collapsed baseline under the current motion: skip pair
        }
        double acc = 0.0;
        int n_ok = 0;
        const int nk = ctx.settings.n_kappa;
        for (int m = 0; m < nk; ++m) {
            double kappa = klo + (khi - klo) * (m + 0.5) / nk;
            auto s = sample_at(duals[i], duals[j], ctx.detector, basis, kappa);
            if (!s) continue;
            double a = ctx.luts.sample(i, s->line_i.theta, s->line_i.s);
            double b = ctx.luts.sample(j, s->line_j.theta, s->line_j.s);
            acc += (a - b) * (a - b);
            ++n_ok;
        }
        if (n_ok > 0) {
            pair_vals[p] = acc / n_ok;
            pair_ok[p] = 1;
        }
    }

    double total = 0.0;
    int skipped = 0;
    for (int p = 0; p < n_pairs; ++p) {
        if (pair_ok[p]) total += pair_vals[p];
        else ++skipped;
    }
    if (skipped_pairs) *skipped_pairs = skipped;
    return total;
}

double ecc_total(const Trajectory& traj, const MotionTrajectory& motion, const RadonLUT& luts,
                 const EccSettings& settings, Exec exec) {
    EccContext ctx = make_ecc_context(luts, traj, settings);
    return ecc_total(ctx, traj, motion, exec);
}

} // namespace moco
