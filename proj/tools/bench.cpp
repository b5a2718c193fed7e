// Timing harness comparing the serial reference kernels against their
// OpenMP variants on a mid-size scene.

#include "moco/consistency.hpp"
#include "moco/iqm.hpp"
#include "moco/optim.hpp"
#include "moco/phantom.hpp"
#include "moco/recon.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace {

double time_once(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s %9.3f ms %9.3f ms %6.2fx\n", name, serial_s * 1e3, parallel_s * 1e3,
                serial_s / parallel_s);
}

} // namespace

int main() {
    using namespace moco;

    CircularGeometry geom;
    geom.sid = 625.0;
    geom.sdd = 1000.0;
    geom.n_views = 90;
    geom.detector = {96, 72, 2.0, 2.0, 47.5, 35.5};
    Trajectory traj = circular_trajectory(geom);
    Phantom phantom = default_head_phantom();
    MotionTrajectory motion = identity_motion(geom.n_views);
    GridSpec grid = GridSpec::centered(96, 96, 33, {1.5, 1.5, 1.5});

#if defined(_OPENMP)
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run the serial path\n");
#endif
    std::printf("%-28s %12s %12s %7s\n", "kernel", "serial", "parallel", "speedup");

    ProjectionStack stack;
    report("forward_project",
           time_once([&] { stack = forward_project(phantom, traj, motion, Exec::serial); }),
           time_once([&] { stack = forward_project(phantom, traj, motion, Exec::parallel); }));

    ProjectionStack filtered;
    report("fdk_prefilter",
           time_once([&] { filtered = ramp_filter(cosine_weight(stack, geom.sdd, Exec::serial),
                                                  RampPath::frequency, Exec::serial); }),
           time_once([&] { filtered = fdk_prefilter(stack, geom, Exec::parallel); }));

    report("backproject_full",
           time_once([&] { backproject(filtered, traj, motion, grid, FdkMode::full, Exec::serial); }),
           time_once([&] { backproject(filtered, traj, motion, grid, FdkMode::full, Exec::parallel); }));

    report("backproject_slice",
           time_once([&] { backproject(filtered, traj, motion, grid, FdkMode::central_slice, Exec::serial); }),
           time_once([&] { backproject(filtered, traj, motion, grid, FdkMode::central_slice, Exec::parallel); }));

    RadonGrid rgrid = default_radon_grid(geom.detector, 90);
    ProjectionStack weighted = cosine_weight(stack, geom.sdd);
    RadonLUT lut;
    report("build_radon_luts",
           time_once([&] { lut = build_radon_luts(weighted, rgrid, Exec::serial); }),
           time_once([&] { lut = build_radon_luts(weighted, rgrid, Exec::parallel); }));

    EccContext ctx = make_ecc_context(lut, traj, EccSettings{});
    report("ecc_total",
           time_once([&] { ecc_total(ctx, traj, motion, Exec::serial); }),
           time_once([&] { ecc_total(ctx, traj, motion, Exec::parallel); }));

    // one epoch of the regressor on synthetic data
    std::vector<TrainingSample> samples(64);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    for (auto& s : samples) {
        s.slice = Image2D(64, 64);
        for (auto& x : s.slice.v) x = u(rng);
        s.label = u(rng) + 2.f;
    }
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 7;
    report("regressor_epoch",
           time_once([&] { regressor_train(samples, tc, Exec::serial); }),
           time_once([&] { regressor_train(samples, tc, Exec::parallel); }));

    return 0;
}
