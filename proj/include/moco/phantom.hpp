#pragma once

#include "moco/exec.hpp"
#include "moco/geometry.hpp"
#include "moco/image.hpp"

#include <string>
#include <vector>

namespace moco {

struct Ellipsoid {
    Eigen::Vector3d center{0, 0, 0};
    Eigen::Vector3d semi_axes{1, 1, 1};     // strictly positive [mm]
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    double density = 0.0;                   // additive attenuation [1/mm], may be negative

    void validate() const;
};

/// Analytic phantom: a list of ellipsoids with additive densities.
struct Phantom {
    std::vector<Ellipsoid> ellipsoids;

    void validate() const;
};

/// Head-like default: skull shell (net 0.5), brain interior (net 0.2) and
/// three small ball inserts (+-0.1) for high-contrast edges.
Phantom default_head_phantom();

/// Line integrals for one acquisition. Values are stored view-major:
/// index (view*nv + v)*nu + u.
struct ProjectionStack {
    int n_views = 0, nv = 0, nu = 0;
    DetectorSpec detector;
    std::vector<float> v;

    ProjectionStack() = default;
    ProjectionStack(int n_views_, const DetectorSpec& det)
        : n_views(n_views_), nv(det.nv), nu(det.nu), detector(det),
          v(static_cast<size_t>(n_views_) * det.nv * det.nu, 0.f) {}

    float& at(int view, int row, int col) { return v[(static_cast<size_t>(view) * nv + row) * nu + col]; }
    float at(int view, int row, int col) const { return v[(static_cast<size_t>(view) * nv + row) * nu + col]; }

    Image2D view_image(int view) const;
    void validate_finite() const;
};

/// Summed density of the ellipsoids containing the point.
double density_at(const Phantom& ph, const Eigen::Vector3d& x);

/// Exact chord-length line integral through the phantom.
/// direction must be unit length within 1e-9.
double line_integral(const Phantom& ph, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction);

/// Analytic cone-beam forward projection with the effective camera T_i * M_i
/// (equivalently, the phantom at pose M_i). supersample > 1 averages an
/// n x n sub-ray grid over the pixel footprint; 1 samples the pixel center.
ProjectionStack forward_project(const Phantom& ph, const Trajectory& traj, const MotionTrajectory& motion,
                                Exec exec = Exec::parallel, int supersample = 1);

/// Point-sampled voxelization on the voxel centers.
Volume voxelize(const Phantom& ph, const GridSpec& grid, Exec exec = Exec::parallel);

} // namespace moco
