#include "moco/iqm.hpp"

#include "moco/recon.hpp"

#include <doctest.h>

#include <cstdio>
#include <random>

using namespace moco;

namespace {

Image2D random_slice(int n, uint64_t seed) {
    Image2D img(n, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (auto& x : img.v) x = u(rng);
    return img;
}

struct SimFixture {
    CircularGeometry geom;
    Trajectory traj;
    Phantom phantom;
    GridSpec slice_grid;
};

const SimFixture& sim_fixture() {
    static SimFixture* fx = [] {
        auto* f = new SimFixture();
        f->geom.sid = 625.0;
        f->geom.sdd = 1000.0;
        f->geom.n_views = 60;
        f->geom.detector = {128, 8, 3.5, 3.5, 63.5, 3.5};
        f->traj = circular_trajectory(f->geom);
        f->phantom = default_head_phantom();
        f->slice_grid = GridSpec::centered(128, 128, 1, {1.25, 1.25, 1.25});
        f->slice_grid.origin.z() = 0.0;
        return f;
    }();
    return *fx;
}

} // namespace

TEST_SUITE("iqm") {

TEST_CASE("entropy_iqm") {
    SUBCASE("constant image has zero entropy") {
        Image2D img(16, 16, 3.5f);
        CHECK(entropy_iqm(img) == 0.0);
    }
    SUBCASE("two equally frequent values give ln 2") {
        Image2D img(16, 16);
        for (size_t i = 0; i < img.v.size(); ++i) img.v[i] = (i % 2 == 0) ? 1.0f : 2.0f;
        CHECK(entropy_iqm(img, 256) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("invariant under affine intensity rescaling") {
        Image2D img = random_slice(32, 7);
        Image2D scaled = img;
        for (auto& x : scaled.v) x = 3.7f * x - 2.25f;
        CHECK(std::abs(entropy_iqm(img) - entropy_iqm(scaled)) < 1e-9);
    }
    SUBCASE("motion artifacts raise the slice entropy") {
        const SimFixture& fx = sim_fixture();
        MotionTrajectory still = identity_motion(fx.geom.n_views);
        MotionSpline spline = random_motion(3, {5.0, 2.0 * EIGEN_PI / 180.0}, 6, MotionFamily::in_plane,
                                            fx.geom.n_views);
        MotionTrajectory moved = sample_motion(spline, fx.geom.n_views);
        ProjectionStack clean = forward_project(fx.phantom, fx.traj, still, Exec::parallel, 3);
        ProjectionStack corrupt = forward_project(fx.phantom, fx.traj, moved, Exec::parallel, 3);
        Image2D slice_clean =
            fdk(clean, fx.traj, still, fx.slice_grid, FdkMode::central_slice).central_slice();
        Image2D slice_corrupt =
            fdk(corrupt, fx.traj, still, fx.slice_grid, FdkMode::central_slice).central_slice();
        CHECK(entropy_iqm(slice_corrupt) > entropy_iqm(slice_clean));
    }
    SUBCASE("input validation") {
        Image2D img(8, 8, 1.f);
        CHECK_THROWS_AS(entropy_iqm(img, 1), std::invalid_argument);
        img.v[3] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_AS(entropy_iqm(img), std::invalid_argument);
    }
}

TEST_CASE("slice helpers") {
    SUBCASE("normalize_slice standardizes mean and variance") {
        Image2D img = random_slice(32, 9);
        Image2D n = normalize_slice(img);
        double mean = 0, var = 0;
        for (float x : n.v) mean += x;
        mean /= n.v.size();
        for (float x : n.v) var += (x - mean) * (x - mean);
        var /= n.v.size();
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("downsample_to takes exact block means") {
        Image2D img(4, 4);
        for (size_t i = 0; i < img.v.size(); ++i) img.v[i] = static_cast<float>(i);
        Image2D d = downsample_to(img, 2, 2);
        CHECK(d.at(0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
        CHECK(d.at(1, 1) == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
        CHECK_THROWS_AS(downsample_to(img, 3, 3), std::invalid_argument);
    }
}

TEST_CASE("build_training_set") {
    const SimFixture& fx = sim_fixture();
    TrainingSetup setup;
    setup.phantom = &fx.phantom;
    setup.traj = &fx.traj;
    setup.slice_grid = fx.slice_grid;
    setup.markers = default_markers();
    setup.n_motion_nodes = 6;
    setup.supersample = 1;

    SUBCASE("zero amplitude gives zero labels") {
        setup.amp_lo = setup.amp_hi = {0.0, 0.0};
        auto samples = build_training_set(setup, 11, 3);
        for (const auto& s : samples) CHECK(s.label == 0.0f);
    }
    SUBCASE("same seed reproduces the set bit for bit") {
        setup.amp_lo = {1.0, 0.005};
        setup.amp_hi = {6.0, 0.03};
        auto a = build_training_set(setup, 42, 4);
        auto b = build_training_set(setup, 42, 4);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].label == b[i].label);
            CHECK(a[i].slice.v == b[i].slice.v);
        }
    }
    SUBCASE("scaling a detector-parallel translation spline raises the label") {
        // ty track only: in-plane translation; RPE grows monotonically with it
        MotionSpline s;
        s.kind = SplineKind::akima;
        s.node_views = uniform_nodes(6, fx.geom.n_views);
        for (auto& t : s.tracks) t.assign(6, 0.0);
        s.tracks[4] = {0.0, 1.5, 3.0, 2.0, 1.0, 2.5};
        MotionSpline s2 = s;
        for (auto& v : s2.tracks[4]) v *= 2.0;
        double l1 = rpe(fx.traj, sample_motion(s, fx.geom.n_views), setup.markers);
        double l2 = rpe(fx.traj, sample_motion(s2, fx.geom.n_views), setup.markers);
        CHECK(l2 > l1);
    }
}

TEST_CASE("regressor gradients match central finite differences (double precision)") {
    RegressorNetT<double> net(4);
    net.init_weights(123);
    auto& params = net.params();

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> input(16);
    for (auto& x : input) x = u(rng);
    const double label = 1.3;

    auto loss = [&] {
        double pred = net.forward(std::span<const double>(input.data(), input.size()));
        return (pred - label) * (pred - label);
    };

    RegressorNetT<double>::Tape tape;
    double pred = net.forward_tape(std::span<const double>(input.data(), input.size()), tape);
    std::vector<double> grad(params.size(), 0.0);
    net.backward(tape, 2.0 * (pred - label), grad);

    const double h = 1e-6;
    for (size_t k = 0; k < params.size(); ++k) {
        double keep = params[k];
        params[k] = keep + h;
        double lp = loss();
        params[k] = keep - h;
        double lm = loss();
        params[k] = keep;
        double fd = (lp - lm) / (2.0 * h);
        double err = std::abs(grad[k] - fd);
        CHECK(err <= 1e-4 * std::max(std::abs(fd), 1e-2) + 1e-6);
    }
}

TEST_CASE("regressor training") {
    SUBCASE("constant labels are fit to numerical precision") {
        std::vector<TrainingSample> samples(60);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<float> u(-1.f, 1.f);
        for (auto& s : samples) {
            s.slice = Image2D(16, 16);
            for (auto& x : s.slice.v) x = u(rng);
            s.label = 3.0f;
        }
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.seed = 1;
        TrainResult res = regressor_train(samples, cfg);
        CHECK(res.log.back().val_mse < 1e-4 * 9.0); // 1e-4 of the label scale squared
    }
    SUBCASE("too few samples or too small a split are rejected") {
        std::vector<TrainingSample> samples(10);
        for (auto& s : samples) s.slice = Image2D(8, 8);
        TrainConfig cfg;
        CHECK_THROWS_AS(regressor_train(samples, cfg), std::invalid_argument);
        std::vector<TrainingSample> enough(60);
        for (auto& s : enough) s.slice = Image2D(8, 8);
        cfg.val_fraction = 0.1;
        CHECK_THROWS_AS(regressor_train(enough, cfg), std::invalid_argument);
    }
    SUBCASE("training is reproducible bit for bit under a fixed seed") {
        std::vector<TrainingSample> samples(60);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<float> u(-1.f, 1.f);
        for (auto& s : samples) {
            s.slice = Image2D(16, 16);
            for (auto& x : s.slice.v) x = u(rng);
            s.label = u(rng) + 2.f;
        }
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.seed = 77;
        TrainResult a = regressor_train(samples, cfg, Exec::parallel);
        TrainResult b = regressor_train(samples, cfg, Exec::serial);
        CHECK(a.model.params() == b.model.params());
        CHECK(a.log.back().val_mse == b.log.back().val_mse);
    }
}

TEST_CASE("regressor inference") {
    RegressorNet net(64);
    net.init_weights(9);
    Image2D img = random_slice(64, 21);
    Image2D norm = normalize_slice(img);

    SUBCASE("deterministic and clamped at zero") {
        double a = regressor_infer(net, norm);
        double b = regressor_infer(net, norm);
        CHECK(a == b);
        CHECK(a >= 0.0);
    }
    SUBCASE("finite for an all-zero slice") {
        Image2D zero(64, 64);
        CHECK(std::isfinite(regressor_infer(net, zero)));
    }
    SUBCASE("shape mismatch raises") {
        Image2D small(32, 32);
        CHECK_THROWS_AS(regressor_infer(net, small), std::invalid_argument);
    }
}

TEST_CASE("model file round trip is bit exact") {
    RegressorNet net(64);
    net.init_weights(31);
    const char* path = "test_model.rpem";
    save_model(path, net);
    RegressorNet back = load_model(path);
    CHECK(back.input_size() == 64);
    CHECK(back.params() == net.params());
    std::remove(path);
}

TEST_CASE("oracle IQM equals the residual reprojection error") {
    const SimFixture& fx = sim_fixture();
    MotionSpline spline = random_motion(5, {4.0, 0.02}, 6, MotionFamily::mixed, fx.geom.n_views);
    MotionTrajectory truth = sample_motion(spline, fx.geom.n_views);
    IqmEvaluator iqm;
    iqm.kind = IqmKind::oracle_rpe;
    iqm.traj = &fx.traj;
    iqm.true_motion = &truth;
    iqm.markers = default_markers();
    Image2D dummy(8, 8);
    CHECK(iqm.evaluate(dummy, truth) == 0.0);
    MotionTrajectory still = identity_motion(fx.geom.n_views);
    CHECK(iqm.evaluate(dummy, still) ==
          doctest::Approx(rpe(fx.traj, truth, iqm.markers)).epsilon(1e-12));
}

} // TEST_SUITE
