#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace moco {

/// Flat-panel detector: pixel counts, pitch in mm, principal point in pixels.
struct DetectorSpec {
    int nu = 0, nv = 0;
    double du = 1.0, dv = 1.0;
    double u0 = 0.0, v0 = 0.0;

    void validate() const;
    double width_mm() const { return nu * du; }
    double height_mm() const { return nv * dv; }
    double diagonal_mm() const;
};

/// Circular short- or full-scan acquisition around the z axis.
/// Source at angle k*angular_range/n_views on a circle of radius sid in the
/// z=0 plane, detector orthogonal to the central ray at distance sdd.
struct CircularGeometry {
    double sid = 0.0;   // source-isocenter distance [mm]
    double sdd = 0.0;   // source-detector distance [mm]
    int n_views = 0;
    double angular_range = 2.0 * EIGEN_PI;
    DetectorSpec detector;

    void validate() const;
    double angular_step() const { return angular_range / n_views; }
};

using ProjectionMatrix = Eigen::Matrix<double, 3, 4>;

/// Rigid transform in SE(3), stored as a validated 4x4 homogeneous matrix.
class RigidTransform {
  public:
    RigidTransform() { m_.setIdentity(); }
    explicit RigidTransform(const Eigen::Matrix4d& m);

    static RigidTransform from_rotation_translation(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

    const Eigen::Matrix4d& matrix() const { return m_; }
    Eigen::Matrix3d rotation() const { return m_.block<3, 3>(0, 0); }
    Eigen::Vector3d translation() const { return m_.block<3, 1>(0, 3); }

    RigidTransform inverse() const;
    RigidTransform operator*(const RigidTransform& o) const;
    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const;

    bool is_identity(double tol = 0.0) const;

  private:
    Eigen::Matrix4d m_;
};

struct Trajectory {
    std::vector<ProjectionMatrix> views;
    CircularGeometry geometry;

    int n_views() const { return static_cast<int>(views.size()); }
};

using MotionTrajectory = std::vector<RigidTransform>;
using MarkerSet = std::vector<Eigen::Vector3d>;

MotionTrajectory identity_motion(int n_views);

/// Calibrated circular trajectory realizing the geometry; world frame has the
/// isocenter at the origin and z along the rotation axis, so in-plane motion
/// is {rz, tx, ty} and out-plane motion is {rx, ry, tz}.
Trajectory circular_trajectory(const CircularGeometry& geom);

/// Homogeneous projection of a world point to detector pixels.
/// Throws if the point lies (numerically) on the camera's principal plane.
Eigen::Vector2d project_point(const ProjectionMatrix& p, const Eigen::Vector3d& x);

/// Euler ZYX convention: R = Rz(rz) * Ry(ry) * Rx(rx); translation in mm.
RigidTransform se3_from_params(double rx, double ry, double rz, double tx, double ty, double tz);

/// Source position (camera center) of a projection matrix.
Eigen::Vector3d camera_center(const ProjectionMatrix& p);

/// Scale P so its third row has a unit rotational part and points project
/// with positive depth in front of the source.
ProjectionMatrix normalize_projection(const ProjectionMatrix& p);

/// Reprojection error: mean over views and markers of the pixel displacement
/// between the motion-perturbed and the calibrated projection.
double rpe(const Trajectory& traj, const MotionTrajectory& motion, const MarkerSet& markers);

/// Mean marker displacement contributed by a single view.
double rpe_view(const ProjectionMatrix& p, const RigidTransform& m, const MarkerSet& markers, int view_index);

/// Residual reprojection error between two motion hypotheses on the same
/// trajectory: mean ||proj(T*Ma, x) - proj(T*Mb, x)||. Equals rpe() when
/// b is the identity motion.
double rpe_between(const Trajectory& traj, const MotionTrajectory& a, const MotionTrajectory& b,
                   const MarkerSet& markers);

/// Default virtual markers: corners of a 100 mm cube centered at the
/// isocenter plus the isocenter itself (9 points).
MarkerSet default_markers();

void save_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory_csv(const std::string& path);

} // namespace moco
