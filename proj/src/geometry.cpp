#include "moco/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace moco {

void DetectorSpec::validate() const {
    if (nu < 2 || nv < 2) throw std::invalid_argument("DetectorSpec: nu, nv must be >= 2");
    if (!(du > 0) || !(dv > 0)) throw std::invalid_argument("DetectorSpec: du, dv must be > 0");
    if (!(u0 >= 0 && u0 < nu)) throw std::invalid_argument("DetectorSpec: u0 out of range");
    if (!(v0 >= 0 && v0 < nv)) throw std::invalid_argument("DetectorSpec: v0 out of range");
}

double DetectorSpec::diagonal_mm() const {
    return std::hypot(nu * du, nv * dv);
}

void CircularGeometry::validate() const {
    if (!(sid > 0 && sid < sdd)) throw std::invalid_argument("CircularGeometry: need 0 < sid < sdd");
    if (n_views < 2) throw std::invalid_argument("CircularGeometry: n_views must be >= 2");
    if (!(angular_range > 0 && angular_range <= 2.0 * EIGEN_PI + 1e-12))
        throw std::invalid_argument("CircularGeometry: angular_range must be in (0, 2*pi]");
    detector.validate();
}

RigidTransform::RigidTransform(const Eigen::Matrix4d& m) : m_(m) {
    const Eigen::Matrix3d r = m.block<3, 3>(0, 0);
    double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
    double det = r.determinant();
    if (ortho >= 1e-9 || std::abs(det - 1.0) > 1e-9)
        throw std::invalid_argument("RigidTransform: rotation block not in SO(3)");
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
        throw std::invalid_argument("RigidTransform: bottom row must be (0,0,0,1)");
}

RigidTransform RigidTransform::from_rotation_translation(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = r;
    m.block<3, 1>(0, 3) = t;
    return RigidTransform(m);
}

RigidTransform RigidTransform::inverse() const {
    Eigen::Matrix3d rt = rotation().transpose();
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rt;
    m.block<3, 1>(0, 3) = -rt * translation();
    return RigidTransform(m);
}

RigidTransform RigidTransform::operator*(const RigidTransform& o) const {
    Eigen::Matrix4d m = m_ * o.m_;
    m.row(3) << 0, 0, 0, 1; // keep the bottom row exact under roundoff
    return RigidTransform(m);
}

Eigen::Vector3d RigidTransform::operator*(const Eigen::Vector3d& p) const {
    return rotation() * p + translation();
}

bool RigidTransform::is_identity(double tol) const {
    return (m_ - Eigen::Matrix4d::Identity()).lpNorm<Eigen::Infinity>() <= tol;
}

MotionTrajectory identity_motion(int n_views) {
    return MotionTrajectory(static_cast<size_t>(n_views));
}

Trajectory circular_trajectory(const CircularGeometry& geom) {
    geom.validate();
    Trajectory traj;
    traj.geometry = geom;
    traj.views.reserve(geom.n_views);

    const DetectorSpec& d = geom.detector;
    Eigen::Matrix3d k = Eigen::Matrix3d::Zero();
    k(0, 0) = geom.sdd / d.du;
    k(1, 1) = geom.sdd / d.dv;
    k(0, 2) = d.u0;
    k(1, 2) = d.v0;
    k(2, 2) = 1.0;

    for (int i = 0; i < geom.n_views; ++i) {
        double theta = geom.angular_step() * i;
        Eigen::Vector3d src(geom.sid * std::cos(theta), geom.sid * std::sin(theta), 0.0);
        Eigen::Vector3d ray = -src.normalized();              // toward the isocenter
        Eigen::Vector3d eu(-std::sin(theta), std::cos(theta), 0.0);
        Eigen::Vector3d ev(0.0, 0.0, 1.0);

        Eigen::Matrix3d r;
        r.row(0) = eu.transpose();
        r.row(1) = ev.transpose();
        r.row(2) = ray.transpose();

        ProjectionMatrix p;
        p.block<3, 3>(0, 0) = k * r;
        p.block<3, 1>(0, 3) = k * (-r * src);
        traj.views.push_back(p);
    }
    return traj;
}

Eigen::Vector2d project_point(const ProjectionMatrix& p, const Eigen::Vector3d& x) {
    Eigen::Vector4d xh(x.x(), x.y(), x.z(), 1.0);
    Eigen::Vector3d q = p * xh;
    if (std::abs(q.z()) <= 1e-12)
        throw std::runtime_error("project_point: degenerate projection (point on principal plane)");
    return {q.x() / q.z(), q.y() / q.z()};
}

RigidTransform se3_from_params(double rx, double ry, double rz, double tx, double ty, double tz) {
    Eigen::Matrix3d r =
        (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX())).toRotationMatrix();
    return RigidTransform::from_rotation_translation(r, {tx, ty, tz});
}

Eigen::Vector3d camera_center(const ProjectionMatrix& p) {
    Eigen::Matrix3d a = p.block<3, 3>(0, 0);
    Eigen::Vector3d b = p.block<3, 1>(0, 3);
    return -a.inverse() * b;
}

ProjectionMatrix normalize_projection(const ProjectionMatrix& p) {
    double n = p.block<1, 3>(2, 0).norm();
    if (n <= 0) throw std::invalid_argument("normalize_projection: zero third row");
    ProjectionMatrix q = p / n;
    // positive depth for a point one unit along the principal ray
    Eigen::Vector3d c = camera_center(q);
    Eigen::Vector3d probe = c + q.block<1, 3>(2, 0).transpose();
    Eigen::Vector4d ph(probe.x(), probe.y(), probe.z(), 1.0);
    if ((q.row(2) * ph) < 0) q = -q;
    return q;
}

double rpe_view(const ProjectionMatrix& p, const RigidTransform& m, const MarkerSet& markers, int view_index) {
    if (markers.empty()) throw std::invalid_argument("rpe: marker set is empty");
    ProjectionMatrix pm = p * m.matrix();
    double acc = 0.0;
    for (size_t k = 0; k < markers.size(); ++k) {
        Eigen::Vector2d a, b;
        try {
            a = project_point(pm, markers[k]);
            b = project_point(p, markers[k]);
        } catch (const std::runtime_error&) {
            throw std::runtime_error("rpe: degenerate projection at view " + std::to_string(view_index) +
                                     ", marker " + std::to_string(k));
        }
        acc += (a - b).norm();
    }
    return acc / static_cast<double>(markers.size());
}

double rpe(const Trajectory& traj, const MotionTrajectory& motion, const MarkerSet& markers) {
    if (motion.size() != traj.views.size())
        throw std::invalid_argument("rpe: motion length does not match trajectory");
    double acc = 0.0;
    for (size_t i = 0; i < traj.views.size(); ++i)
        acc += rpe_view(traj.views[i], motion[i], markers, static_cast<int>(i));
    return acc / static_cast<double>(traj.views.size());
}

double rpe_between(const Trajectory& traj, const MotionTrajectory& a, const MotionTrajectory& b,
                   const MarkerSet& markers) {
    if (a.size() != traj.views.size() || b.size() != traj.views.size())
        throw std::invalid_argument("rpe_between: motion length does not match trajectory");
    if (markers.empty()) throw std::invalid_argument("rpe: marker set is empty");
    double acc = 0.0;
    for (size_t i = 0; i < traj.views.size(); ++i) {
        ProjectionMatrix pa = traj.views[i] * a[i].matrix();
        ProjectionMatrix pb = traj.views[i] * b[i].matrix();
        double view_acc = 0.0;
        for (size_t k = 0; k < markers.size(); ++k) {
            Eigen::Vector2d qa, qb;
            try {
                qa = project_point(pa, markers[k]);
                qb = project_point(pb, markers[k]);
            } catch (const std::runtime_error&) {
                throw std::runtime_error("rpe_between: degenerate projection at view " + std::to_string(i) +
                                         ", marker " + std::to_string(k));
            }
            view_acc += (qa - qb).norm();
        }
        acc += view_acc / static_cast<double>(markers.size());
    }
    return acc / static_cast<double>(traj.views.size());
}

MarkerSet default_markers() {
    MarkerSet m;
    const double h = 50.0;
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1})
                m.emplace_back(sx * h, sy * h, sz * h);
    m.emplace_back(0.0, 0.0, 0.0);
    return m;
}

void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const DetectorSpec& d = traj.geometry.detector;
    f << "# projmat " << d.nu << " " << d.nv << " " << d.du << " " << d.dv << "\n";
    f.precision(17);
    for (const auto& p : traj.views) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c)
                f << p(r, c) << (r == 2 && c == 3 ? "\n" : ",");
    }
}

Trajectory load_trajectory_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string header;
    std::getline(f, header);
    Trajectory traj;
    DetectorSpec& d = traj.geometry.detector;
    {
        std::istringstream hs(header);
        std::string hash, tag;
        hs >> hash >> tag >> d.nu >> d.nv >> d.du >> d.dv;
        if (hash != "#" || tag != "projmat" || hs.fail())
            throw std::runtime_error("trajectory csv: bad header in " + path);
    }
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ProjectionMatrix p;
        std::string cell;
        for (int k = 0; k < 12; ++k) {
            if (!std::getline(ls, cell, ','))
                throw std::runtime_error("trajectory csv: short row in " + path);
            p(k / 4, k % 4) = std::stod(cell);
        }
        traj.views.push_back(p);
    }
    traj.geometry.n_views = static_cast<int>(traj.views.size());
    return traj;
}

} // namespace moco
