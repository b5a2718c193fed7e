#pragma once

#include "moco/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace moco {

enum class SplineKind { akima, pchip };

enum class MotionFamily { in_plane, out_plane, mixed };

/// Parameter track order used throughout: rx, ry, rz [rad], tx, ty, tz [mm].
constexpr int kNumTracks = 6;
constexpr const char* kTrackNames[kNumTracks] = {"rx", "ry", "rz", "tx", "ty", "tz"};

/// Active-track masks for the in-/out-plane split of a circular trajectory
/// (z is the rotation axis).
std::array<bool, kNumTracks> family_mask(MotionFamily f);

/// Six rigid-parameter tracks over the view index, interpolated by a
/// piecewise-cubic spline. Akima drives simulation, PCHIP the estimate, so the
/// two sides of the pipeline never share an interpolation family.
struct MotionSpline {
    SplineKind kind = SplineKind::pchip;
    std::vector<double> node_views;                 // strictly increasing, first 0, last n_views-1
    std::array<std::vector<double>, kNumTracks> tracks;

    int n_nodes() const { return static_cast<int>(node_views.size()); }
    void validate() const;
};

/// Akima piecewise-cubic interpolation (weighted divided-difference slopes,
/// ends by Akima's extrapolated differences). Needs >= 5 nodes; throws for
/// out-of-range queries.
double akima_eval(std::span<const double> xs, std::span<const double> ys, double x);

/// Fritsch-Carlson monotone PCHIP. Needs >= 2 nodes (2 -> linear).
double pchip_eval(std::span<const double> xs, std::span<const double> ys, double x);

double spline_eval(SplineKind kind, std::span<const double> xs, std::span<const double> ys, double x);

/// Per-view rigid transforms from the six spline tracks.
MotionTrajectory sample_motion(const MotionSpline& spline, int n_views);

struct Amplitude {
    double mm = 0.0;
    double rad = 0.0;
};

/// Random Akima ground-truth motion: node values uniform in +/- amplitude on
/// the family's active tracks, first node pinned to zero (reference pose).
MotionSpline random_motion(uint64_t seed, Amplitude amplitude, int n_nodes, MotionFamily family, int n_views);

/// Evenly spread node positions over [0, n_views-1].
std::vector<double> uniform_nodes(int n_nodes, int n_views);

void save_spline_csv(const std::string& path, const MotionSpline& s);
MotionSpline load_spline_csv(const std::string& path);

} // namespace moco
