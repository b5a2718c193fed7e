#pragma once

#include "moco/exec.hpp"
#include "moco/geometry.hpp"
#include "moco/image.hpp"
#include "moco/phantom.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace moco {

/// Sampling grid of the per-view Radon-derivative table: line angle
/// theta in [0, pi), signed distance s in [-s_max, s_max], both in detector
/// mm centered at the principal point.
struct RadonGrid {
    int n_theta = 0;
    int ns = 0;
    double s_max = 0.0;

    double dtheta() const { return EIGEN_PI / n_theta; }
    double ds() const { return 2.0 * s_max / (ns - 1); }
    void validate() const;
};

/// d/ds of the 2-D Radon transform of each (cosine-weighted) projection,
/// precomputed once per acquisition and immutable afterwards.
struct RadonLUT {
    RadonGrid grid;
    int n_views = 0;
    std::vector<float> v; // [view][theta][s]

    float at(int view, int t, int k) const {
        return v[(static_cast<size_t>(view) * grid.n_theta + t) * grid.ns + k];
    }
    /// Bilinear interpolation with the (theta + pi, -s) wrap.
    double sample(int view, double theta, double s) const;
};

RadonGrid default_radon_grid(const DetectorSpec& det, int n_theta = 180, int ns = 0);

/// One view's Radon-derivative table. The image is integrated as given;
/// the pipeline passes cosine-weighted projections.
std::vector<float> radon_derivative_view(const Image2D& img, const DetectorSpec& det, const RadonGrid& grid);

/// Tables for a whole (cosine-weighted) stack.
RadonLUT build_radon_luts(const ProjectionStack& weighted, const RadonGrid& grid, Exec exec = Exec::parallel);

/// Detector line in Hesse normal form, mm, centered at the principal point.
struct DetectorLine {
    double theta = 0.0;
    double s = 0.0;
};

struct EpipolarSample {
    double kappa = 0.0;
    DetectorLine line_i, line_j;
};

/// Image of the plane under the dual projection, as a pixel-homogeneous line
/// (valid for planes containing the camera center). Empty when the line is
/// at infinity.
std::optional<DetectorLine> line_from_plane(const ProjectionMatrix& p, const Eigen::Vector4d& plane,
                                            const DetectorSpec& det);

bool line_hits_detector(const DetectorLine& l, const DetectorSpec& det);

/// Epipolar-plane samples for a view pair: planes through the baseline of the
/// two sources, swept over the angle range in which the induced lines cross
/// both detectors; samples whose line misses either detector are dropped.
/// Throws for coincident sources (baseline <= 1e-6 mm).
std::vector<EpipolarSample> epipolar_samples(const ProjectionMatrix& pi, const ProjectionMatrix& pj,
                                             const DetectorSpec& det, int n_kappa);

/// Mean squared Radon-derivative difference over the samples.
double ecc_pair(const RadonLUT& lut, int view_i, int view_j, const std::vector<EpipolarSample>& samples);

struct EccSettings {
    int stride = 4;
    double max_separation = 0.5 * EIGEN_PI; // radians of gantry rotation
    int n_kappa = 64;
};

/// Precomputed pairing state: LUTs, the view-pair list and the per-pair kappa
/// interval (frozen at build time from the calibrated geometry). Only the
/// projection matrices change during compensation.
struct EccContext {
    RadonLUT luts;
    DetectorSpec detector;
    EccSettings settings;
    std::vector<std::pair<int, int>> pairs;
    std::vector<std::pair<double, double>> kappa_ranges; // per pair
};

EccContext make_ecc_context(RadonLUT luts, const Trajectory& traj, const EccSettings& settings);

/// Sum of ecc_pair over the pair list under the current motion estimate;
/// pairs with no surviving samples are skipped (counted in skipped_pairs).
double ecc_total(const EccContext& ctx, const Trajectory& traj, const MotionTrajectory& motion,
                 Exec exec = Exec::parallel, int* skipped_pairs = nullptr);

/// Convenience form building the context on the fly (LUTs must come from the
/// measured stack; they are never rebuilt during optimization).
double ecc_total(const Trajectory& traj, const MotionTrajectory& motion, const RadonLUT& luts,
                 const EccSettings& settings, Exec exec = Exec::parallel);

} // namespace moco
