#include "moco/geometry.hpp"

#include <doctest.h>

#include <cstdio>
#include <random>

using namespace moco;

namespace {

CircularGeometry test_geometry(int n_views = 16) {
    CircularGeometry g;
    g.sid = 625.0;
    g.sdd = 1000.0;
    g.n_views = n_views;
    g.angular_range = 2.0 * EIGEN_PI;
    g.detector = {64, 48, 2.0, 2.0, 31.5, 23.5};
    return g;
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("isocenter projects to the principal point in every view") {
    Trajectory traj = circular_trajectory(test_geometry());
    for (const auto& p : traj.views) {
        Eigen::Vector2d uv = project_point(p, {0, 0, 0});
        CHECK(uv.x() == doctest::Approx(31.5).epsilon(1e-12));
        CHECK(uv.y() == doctest::Approx(23.5).epsilon(1e-12));
    }
}

TEST_CASE("axial offset follows the magnification law at view 0") {
    CircularGeometry g = test_geometry();
    Trajectory traj = circular_trajectory(g);
    const double h = 17.0;
    // similar triangles: a point on the rotation axis at height h sits at
    // depth sid, so its detector offset is h * sdd / sid
    double expected_v = g.detector.v0 + h * (g.sdd / g.detector.dv) / g.sid;
    Eigen::Vector2d uv = project_point(traj.views[0], {0, 0, h});
    CHECK(uv.y() == doctest::Approx(expected_v).epsilon(1e-12));
    CHECK(uv.x() == doctest::Approx(g.detector.u0).epsilon(1e-12));
}

TEST_CASE("full-scan source positions are antipodal") {
    CircularGeometry g = test_geometry(16);
    Trajectory traj = circular_trajectory(g);
    for (int k = 0; k < 8; ++k) {
        Eigen::Vector3d a = camera_center(traj.views[k]);
        Eigen::Vector3d b = camera_center(traj.views[k + 8]);
        CHECK((a + b).norm() < 1e-8);
    }
}

TEST_CASE("project_point matches the homogeneous definition") {
    SUBCASE("canonical camera") {
        ProjectionMatrix p;
        p << 1, 0, 0, 0,
             0, 1, 0, 0,
             0, 0, 1, 0;
        Eigen::Vector2d uv = project_point(p, {0, 0, 1});
        CHECK(uv.x() == doctest::Approx(0.0));
        CHECK(uv.y() == doctest::Approx(0.0));
    }
    SUBCASE("scale invariance and explicit formula") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int k = 0; k < 50; ++k) {
            ProjectionMatrix p;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 4; ++c) p(r, c) = u(rng);
            Eigen::Vector3d x(u(rng), u(rng), u(rng));
            Eigen::Vector4d xh(x.x(), x.y(), x.z(), 1.0);
            double w = p.row(2).dot(xh);
            if (std::abs(w) < 1e-3) continue;
            Eigen::Vector2d uv = project_point(p, x);
            CHECK(uv.x() == doctest::Approx(p.row(0).dot(xh) / w).epsilon(1e-12));
            CHECK(uv.y() == doctest::Approx(p.row(1).dot(xh) / w).epsilon(1e-12));
            Eigen::Vector2d uv5 = project_point(ProjectionMatrix(5.0 * p), x);
            CHECK((uv - uv5).norm() < 1e-9);
        }
    }
    SUBCASE("degenerate point raises") {
        ProjectionMatrix p;
        p << 1, 0, 0, 0,
             0, 1, 0, 0,
             0, 0, 1, 0;
        CHECK_THROWS_AS(project_point(p, {1.0, 2.0, 0.0}), std::runtime_error);
    }
}

TEST_CASE("se3_from_params") {
    SUBCASE("zeros give the identity") {
        CHECK(se3_from_params(0, 0, 0, 0, 0, 0).is_identity(0.0));
    }
    SUBCASE("quarter turn about z") {
        RigidTransform t = se3_from_params(0, 0, EIGEN_PI / 2, 0, 0, 0);
        Eigen::Vector3d y = t * Eigen::Vector3d(1, 0, 0);
        CHECK((y - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
    }
    SUBCASE("compose with inverse is the identity (matrix-inverse oracle)") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int k = 0; k < 100; ++k) {
            RigidTransform t = se3_from_params(u(rng), u(rng), u(rng), u(rng) * 10, u(rng) * 10, u(rng) * 10);
            // oracle: generic 4x4 inverse, independent of RigidTransform::inverse
            Eigen::Matrix4d inv = t.matrix().inverse();
            CHECK((t.matrix() * inv - Eigen::Matrix4d::Identity()).norm() < 1e-10);
            CHECK(((t * t.inverse()).matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-10);
            CHECK((t.inverse().matrix() - inv).norm() < 1e-10);
        }
    }
    SUBCASE("outputs stay in SE(3) for 1000 random draws") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(-10.0, 10.0);
        for (int k = 0; k < 1000; ++k) {
            RigidTransform t = se3_from_params(u(rng), u(rng), u(rng), u(rng), u(rng), u(rng));
            Eigen::Matrix3d r = t.rotation();
            CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-9);
            CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
            CHECK(t.matrix()(3, 0) == 0.0);
            CHECK(t.matrix()(3, 3) == 1.0);
        }
    }
}

TEST_CASE("rpe") {
    CircularGeometry g = test_geometry(12);
    Trajectory traj = circular_trajectory(g);
    MarkerSet markers = default_markers();

    SUBCASE("identity motion gives exactly zero") {
        CHECK(rpe(traj, identity_motion(g.n_views), markers) == 0.0);
    }
    SUBCASE("detector-parallel translation at view 0 follows the magnification law") {
        // at view 0 the detector u-axis is the world y-axis; a y-translation
        // of a marker at the isocenter keeps its depth at sid
        const double d = 7.0;
        MarkerSet iso = {{0.0, 0.0, 0.0}};
        RigidTransform m = se3_from_params(0, 0, 0, 0, d, 0);
        double expected = d * (g.sdd / g.detector.du) / g.sid;
        CHECK(rpe_view(traj.views[0], m, iso, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("doubling a detector-parallel translation doubles that view's contribution") {
        MarkerSet iso = {{0.0, 0.0, 0.0}};
        RigidTransform m1 = se3_from_params(0, 0, 0, 0, 3.0, 0);
        RigidTransform m2 = se3_from_params(0, 0, 0, 0, 6.0, 0);
        double r1 = rpe_view(traj.views[0], m1, iso, 0);
        double r2 = rpe_view(traj.views[0], m2, iso, 0);
        CHECK(r2 == doctest::Approx(2.0 * r1).epsilon(1e-9));
    }
    SUBCASE("nonnegative for random motion") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-0.02, 0.02);
        MotionTrajectory motion;
        for (int i = 0; i < g.n_views; ++i)
            motion.push_back(se3_from_params(u(rng), u(rng), u(rng), u(rng) * 100, u(rng) * 100, u(rng) * 100));
        CHECK(rpe(traj, motion, markers) > 0.0);
    }
    SUBCASE("degenerate marker names view and marker") {
        // a marker on the view-0 principal plane (contains the source)
        MarkerSet bad = {{g.sid, 10.0, 0.0}};
        MotionTrajectory motion = identity_motion(g.n_views);
        CHECK_THROWS_WITH_AS(rpe(traj, motion, bad), doctest::Contains("view 0"), std::runtime_error);
    }
    SUBCASE("rpe_between vanishes when both motions agree") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(-0.01, 0.01);
        MotionTrajectory a;
        for (int i = 0; i < g.n_views; ++i)
            a.push_back(se3_from_params(u(rng), u(rng), u(rng), u(rng) * 100, u(rng) * 100, u(rng) * 100));
        CHECK(rpe_between(traj, a, a, markers) == 0.0);
        CHECK(rpe_between(traj, a, identity_motion(g.n_views), markers) ==
              doctest::Approx(rpe(traj, a, markers)).epsilon(1e-12));
    }
}

TEST_CASE("trajectory csv round trip") {
    CircularGeometry g = test_geometry(6);
    Trajectory traj = circular_trajectory(g);
    const char* path = "test_traj.csv";
    save_trajectory_csv(path, traj);
    Trajectory back = load_trajectory_csv(path);
    REQUIRE(back.n_views() == traj.n_views());
    CHECK(back.geometry.detector.nu == g.detector.nu);
    CHECK(back.geometry.detector.dv == doctest::Approx(g.detector.dv));
    for (int i = 0; i < traj.n_views(); ++i)
        CHECK((back.views[i] - traj.views[i]).norm() < 1e-12);
    std::remove(path);
}

TEST_CASE("validation errors") {
    CircularGeometry g = test_geometry();
    g.sid = 1200.0; // sid >= sdd
    CHECK_THROWS_AS(circular_trajectory(g), std::invalid_argument);
    g = test_geometry();
    g.detector.du = 0.0;
    CHECK_THROWS_AS(circular_trajectory(g), std::invalid_argument);
    g = test_geometry();
    g.n_views = 1;
    CHECK_THROWS_AS(circular_trajectory(g), std::invalid_argument);
}

} // TEST_SUITE
