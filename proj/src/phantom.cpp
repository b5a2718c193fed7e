#include "moco/phantom.hpp"

#include <cmath>
#include <stdexcept>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace moco {

void Ellipsoid::validate() const {
    if (!(semi_axes.x() > 0 && semi_axes.y() > 0 && semi_axes.z() > 0))
        throw std::invalid_argument("Ellipsoid: semi-axes must be strictly positive");
}

void Phantom::validate() const {
    if (ellipsoids.empty()) throw std::invalid_argument("Phantom: must contain at least one ellipsoid");
    for (const auto& e : ellipsoids) e.validate();
}

Phantom default_head_phantom() {
    Phantom ph;
    auto add = [&](Eigen::Vector3d c, Eigen::Vector3d a, double rho) {
        Ellipsoid e;
        e.center = c;
        e.semi_axes = a;
        e.density = rho;
        ph.ellipsoids.push_back(e);
    };
    // skull shell: outer 0.5 with a -0.3 interior, so brain reads 0.2 net
    add({0, 0, 0}, {55, 65, 50}, 0.5);
    add({0, 0, 0}, {47, 57, 43}, -0.3);
    add({20, 10, 0}, {8, 8, 8}, 0.1);
    add({-18, 15, 5}, {10, 10, 10}, -0.1);
    add({0, -28, -4}, {7, 7, 7}, 0.1);
    return ph;
}

Image2D ProjectionStack::view_image(int view) const {
    Image2D img(nu, nv);
    for (int r = 0; r < nv; ++r)
        for (int c = 0; c < nu; ++c)
            img.at(c, r) = at(view, r, c);
    return img;
}

void ProjectionStack::validate_finite() const {
    for (float x : v)
        if (!std::isfinite(x)) throw std::runtime_error("ProjectionStack: non-finite value");
}

double density_at(const Phantom& ph, const Eigen::Vector3d& x) {
    double rho = 0.0;
    for (const auto& e : ph.ellipsoids) {
        Eigen::Vector3d p = e.rotation.transpose() * (x - e.center);
        p = p.cwiseQuotient(e.semi_axes);
        if (p.squaredNorm() <= 1.0) rho += e.density;
    }
    return rho;
}

namespace {

// canonical-frame map of one ellipsoid, cached for the projector inner loop
struct EllipsoidFrame {
    Eigen::Matrix3d to_canonical; // diag(1/axes) * R^T
    Eigen::Vector3d center;
    double density;
};

std::vector<EllipsoidFrame> prepare(const Phantom& ph) {
    std::vector<EllipsoidFrame> frames;
    frames.reserve(ph.ellipsoids.size());
    for (const auto& e : ph.ellipsoids)
        frames.push_back({e.semi_axes.cwiseInverse().asDiagonal() * e.rotation.transpose(),
                          e.center, e.density});
    return frames;
}

// sum of density * chord length over the prepared ellipsoids, d unit
inline double chord_sum(const std::vector<EllipsoidFrame>& frames, const Eigen::Vector3d& o,
                        const Eigen::Vector3d& d) {
    double acc = 0.0;
    for (const auto& f : frames) {
        Eigen::Vector3d p = f.to_canonical * (o - f.center);
        Eigen::Vector3d q = f.to_canonical * d;
        double a = q.squaredNorm();
        double b = 2.0 * p.dot(q);
        double c = p.squaredNorm() - 1.0;
        double disc = b * b - 4.0 * a * c;
        if (disc <= 0.0 || a <= 0.0) continue;
        acc += f.density * std::sqrt(disc) / a; // chord t2 - t1 in world mm
    }
    return acc;
}

} // namespace

double line_integral(const Phantom& ph, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) {
    if (std::abs(direction.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("line_integral: direction must be unit length");
    return chord_sum(prepare(ph), origin, direction);
}

ProjectionStack forward_project(const Phantom& ph, const Trajectory& traj, const MotionTrajectory& motion,
                                Exec exec, int supersample) {
    ph.validate();
    if (motion.size() != traj.views.size())
        throw std::invalid_argument("forward_project: motion length does not match trajectory");
    if (supersample < 1) throw std::invalid_argument("forward_project: supersample must be >= 1");
    const DetectorSpec& det = traj.geometry.detector;
    ProjectionStack stack(traj.n_views(), det);
    const std::vector<EllipsoidFrame> frames = prepare(ph);

    // per-view effective camera and its ray decomposition
    struct Cam {
        Eigen::Vector3d center;
        Eigen::Matrix3d ainv;
        Eigen::Vector3d row2; // unit principal-ray row
    };
    std::vector<Cam> cams(traj.views.size());
    for (size_t i = 0; i < traj.views.size(); ++i) {
        ProjectionMatrix p = normalize_projection(traj.views[i] * motion[i].matrix());
        Eigen::Matrix3d a = p.block<3, 3>(0, 0);
        if (std::abs(a.determinant()) < 1e-12)
            throw std::runtime_error("forward_project: degenerate camera at view " + std::to_string(i));
        cams[i] = {camera_center(p), a.inverse(), p.block<1, 3>(2, 0).transpose()};
    }

    const int n_views = traj.n_views();
    const int nv = det.nv, nu = det.nu;
    const int ss = supersample;
    const double inv_n = 1.0 / (ss * ss);

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
#endif
    for (int i = 0; i < n_views; ++i) {
        const Cam& cam = cams[i];
        for (int r = 0; r < nv; ++r) {
            for (int c = 0; c < nu; ++c) {
                double acc = 0.0;
                for (int sy = 0; sy < ss; ++sy) {
                    for (int sx = 0; sx < ss; ++sx) {
                        double ox = ss == 1 ? 0.0 : (sx + 0.5) / ss - 0.5;
                        double oy = ss == 1 ? 0.0 : (sy + 0.5) / ss - 0.5;
                        Eigen::Vector3d dir = cam.ainv * Eigen::Vector3d(c + ox, r + oy, 1.0);
                        if (cam.row2.dot(dir) < 0) dir = -dir; // point away from the source
                        dir.normalize();
                        acc += chord_sum(frames, cam.center, dir);
                    }
                }
                stack.at(i, r, c) = static_cast<float>(acc * inv_n);
            }
        }
    }
    return stack;
}

Volume voxelize(const Phantom& ph, const GridSpec& grid, Exec exec) {
    ph.validate();
    grid.validate();
    Volume vol(grid);
    const int nz = grid.nz, ny = grid.ny, nx = grid.nx;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                Eigen::Vector3d p = grid.origin +
                    Eigen::Vector3d(x * grid.spacing.x(), y * grid.spacing.y(), z * grid.spacing.z());
                vol.at(x, y, z) = static_cast<float>(density_at(ph, p));
            }
        }
    }
    return vol;
}

} // namespace moco
