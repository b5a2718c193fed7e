#pragma once

#include "moco/exec.hpp"
#include "moco/geometry.hpp"
#include "moco/image.hpp"
#include "moco/phantom.hpp"

namespace moco {

enum class FdkMode { full, central_slice };
enum class RampPath { spatial, frequency };

/// FDK cosine pre-weighting: pixel (u,v) scaled by sdd/sqrt(sdd^2+u^2+v^2)
/// with u,v the mm offsets from the principal point.
ProjectionStack cosine_weight(const ProjectionStack& stack, double sdd, Exec exec = Exec::parallel);

/// Discrete Ram-Lak kernel value at integer offset n for pixel pitch du:
/// h(0)=1/(4du^2), h(odd n)=-1/(pi n du)^2, h(even n != 0)=0.
double ramp_kernel(int n, double du);

/// Row-wise ramp filtering: each detector row is circularly convolved with
/// the Ram-Lak kernel on a ring zero-padded to the next power of two >= 2*nu.
/// The spatial and frequency paths agree to ~1e-6 and are cross-checked in
/// the tests; the frequency path is the default.
ProjectionStack ramp_filter(const ProjectionStack& stack, RampPath path = RampPath::frequency,
                            Exec exec = Exec::parallel);

/// Cosine weight + ramp filter; the result is motion-independent and can be
/// backprojected many times while optimizing.
ProjectionStack fdk_prefilter(const ProjectionStack& stack, const CircularGeometry& geom,
                              Exec exec = Exec::parallel);

/// Voxel-driven FDK backprojection of an already filtered stack with the
/// per-view effective cameras T_i * M_i. Voxels projecting off the detector
/// contribute nothing; a non-positive ray depth is an error.
Volume backproject(const ProjectionStack& filtered, const Trajectory& traj, const MotionTrajectory& motion,
                   const GridSpec& grid, FdkMode mode = FdkMode::full, Exec exec = Exec::parallel);

/// Full FDK: cosine weight, ramp filter, distance-weighted backprojection.
Volume fdk(const ProjectionStack& stack, const Trajectory& traj, const MotionTrajectory& motion,
           const GridSpec& grid, FdkMode mode = FdkMode::full, Exec exec = Exec::parallel);

} // namespace moco
