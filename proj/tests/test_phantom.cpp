#include "moco/phantom.hpp"

#include <doctest.h>

#include <random>

using namespace moco;

namespace {

CircularGeometry small_geometry(int n_views = 24) {
    CircularGeometry g;
    g.sid = 625.0;
    g.sdd = 1000.0;
    g.n_views = n_views;
    g.angular_range = 2.0 * EIGEN_PI;
    g.detector = {48, 36, 4.0, 4.0, 23.5, 17.5};
    return g;
}

Phantom unit_ball(double radius = 1.0, double density = 1.0) {
    Phantom ph;
    Ellipsoid e;
    e.semi_axes = {radius, radius, radius};
    e.density = density;
    ph.ellipsoids.push_back(e);
    return ph;
}

// quadrature oracle: march along the ray sampling the pointwise density
double ray_march(const Phantom& ph, const Eigen::Vector3d& o, const Eigen::Vector3d& d, double t_max,
                 double step = 0.1) {
    double acc = 0.0;
    for (double t = 0.5 * step; t < t_max; t += step) acc += density_at(ph, o + t * d);
    return acc * step;
}

Phantom transform_phantom(const Phantom& ph, const RigidTransform& m) {
    Phantom out = ph;
    for (auto& e : out.ellipsoids) {
        e.center = m * e.center;
        e.rotation = m.rotation() * e.rotation;
    }
    return out;
}

} // namespace

TEST_SUITE("phantom") {

TEST_CASE("line_integral") {
    SUBCASE("ray missing everything is zero") {
        Phantom ph = unit_ball();
        CHECK(line_integral(ph, {0, 5, 0}, {1, 0, 0}) == 0.0);
    }
    SUBCASE("central chord of the unit ball is the diameter") {
        Phantom ph = unit_ball();
        CHECK(line_integral(ph, {-5, 0, 0}, {1, 0, 0}) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("offset chords follow 2*sqrt(r^2-b^2) and the quadrature oracle") {
        const double r = 30.0, rho = 0.4;
        Phantom ph = unit_ball(r, rho);
        for (double b : {0.0, 5.0, 12.0, 25.0, 29.5}) {
            double expected = 2.0 * std::sqrt(r * r - b * b) * rho;
            double got = line_integral(ph, {-100.0, b, 0.0}, {1, 0, 0});
            CHECK(got == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("matches dense ray-marching on 100 random rays") {
        // core rays through a large ball keep the integral big enough that the
        // marching grid's boundary quantization (<= rho*step per crossing)
        // stays below the 1e-3 relative bound
        const double r = 60.0, rho = 0.3;
        Phantom ph = unit_ball(r, rho);
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int k = 0; k < 100; ++k) {
            Eigen::Vector3d o(250.0 + 50.0 * u(rng), 80.0 * u(rng), 80.0 * u(rng));
            Eigen::Vector3d target(18.0 * u(rng), 18.0 * u(rng), 18.0 * u(rng));
            Eigen::Vector3d d = (target - o).normalized();
            double exact = line_integral(ph, o, d);
            REQUIRE(exact > 30.0 * rho);
            double approx = ray_march(ph, o, d, 700.0);
            CHECK(std::abs(approx - exact) / exact < 1e-3);
        }
    }
    SUBCASE("rejects non-unit directions") {
        Phantom ph = unit_ball();
        CHECK_THROWS_AS(line_integral(ph, {0, 0, 0}, {1.0, 1.0, 0.0}), std::invalid_argument);
    }
}

TEST_CASE("forward_project") {
    CircularGeometry g = small_geometry();
    Trajectory traj = circular_trajectory(g);

    SUBCASE("zero-density phantom projects to all zeros") {
        Phantom ph = unit_ball(40.0, 0.0);
        ProjectionStack s = forward_project(ph, traj, identity_motion(g.n_views));
        for (float x : s.v) CHECK(x == 0.0f);
    }
    SUBCASE("mirror symmetry for a symmetric phantom") {
        Phantom ph;
        Ellipsoid e;
        e.semi_axes = {50.0, 35.0, 40.0};
        e.density = 0.3;
        ph.ellipsoids.push_back(e);
        ProjectionStack s = forward_project(ph, traj, identity_motion(g.n_views));
        // views at +theta and -theta see u-mirrored copies of each other
        for (int k = 1; k < g.n_views / 2; ++k) {
            int km = g.n_views - k;
            for (int r = 0; r < s.nv; ++r)
                for (int c = 0; c < s.nu; ++c)
                    CHECK(s.at(k, r, c) == doctest::Approx(s.at(km, r, s.nu - 1 - c)).epsilon(1e-5));
        }
    }
    SUBCASE("density linearity is exact") {
        Phantom ph = default_head_phantom();
        Phantom ph2 = ph;
        for (auto& e : ph2.ellipsoids) e.density *= 2.0;
        ProjectionStack a = forward_project(ph, traj, identity_motion(g.n_views));
        ProjectionStack b = forward_project(ph2, traj, identity_motion(g.n_views));
        for (size_t i = 0; i < a.v.size(); ++i) CHECK(b.v[i] == 2.0f * a.v[i]);
    }
    SUBCASE("camera-side motion equals moving the object") {
        // with the effective camera T*M, the rays traverse M^{-1}(c + t*d),
        // which is exactly the projection of the phantom at pose M
        Phantom ph = default_head_phantom();
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 3; ++trial) {
            RigidTransform m = se3_from_params(0.03 * u(rng), 0.03 * u(rng), 0.03 * u(rng),
                                               6.0 * u(rng), 6.0 * u(rng), 6.0 * u(rng));
            MotionTrajectory motion(g.n_views, m);
            ProjectionStack via_camera = forward_project(ph, traj, motion);
            ProjectionStack via_object =
                forward_project(transform_phantom(ph, m), traj, identity_motion(g.n_views));
            double worst = 0.0;
            for (size_t i = 0; i < via_camera.v.size(); ++i)
                worst = std::max(worst, static_cast<double>(std::abs(via_camera.v[i] - via_object.v[i])));
            CHECK(worst < 1e-5);
        }
    }
    SUBCASE("serial and parallel kernels agree bit for bit") {
        Phantom ph = default_head_phantom();
        MotionTrajectory motion = identity_motion(g.n_views);
        ProjectionStack a = forward_project(ph, traj, motion, Exec::serial);
        ProjectionStack b = forward_project(ph, traj, motion, Exec::parallel);
        CHECK(a.v == b.v);
    }
}

TEST_CASE("voxelize") {
    SUBCASE("voxel values inside and outside") {
        Phantom ph = unit_ball(5.0, 1.0);
        GridSpec g = GridSpec::centered(5, 5, 5, {2.0, 2.0, 2.0});
        Volume v = voxelize(ph, g);
        CHECK(v.at(2, 2, 2) == 1.0f); // isocenter voxel inside the ball
        CHECK(v.at(0, 0, 0) == 0.0f); // corner voxel at radius ~6.9 mm, outside
    }
    SUBCASE("ball mass matches the analytic volume within 2% at 64^3") {
        const double r = 20.0, rho = 0.7;
        Phantom ph = unit_ball(r, rho);
        GridSpec g = GridSpec::centered(64, 64, 64, {0.75, 0.75, 0.75});
        Volume v = voxelize(ph, g);
        double mass = 0.0;
        for (float x : v.v) mass += x;
        mass *= g.spacing.prod();
        double expected = 4.0 / 3.0 * EIGEN_PI * r * r * r * rho;
        CHECK(std::abs(mass - expected) / expected < 0.02);
    }
    SUBCASE("serial and parallel voxelization agree bit for bit") {
        Phantom ph = default_head_phantom();
        GridSpec g = GridSpec::centered(32, 32, 16, {4.0, 4.0, 4.0});
        CHECK(voxelize(ph, g, Exec::serial).v == voxelize(ph, g, Exec::parallel).v);
    }
}

} // TEST_SUITE
