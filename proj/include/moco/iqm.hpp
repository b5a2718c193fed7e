#pragma once

#include "moco/exec.hpp"
#include "moco/geometry.hpp"
#include "moco/image.hpp"
#include "moco/motion.hpp"
#include "moco/phantom.hpp"
#include "moco/regressor.hpp"

#include <string>
#include <vector>

namespace moco {

enum class IqmKind { entropy, oracle_rpe, regressor };

const char* iqm_name(IqmKind k);
IqmKind iqm_from_name(const std::string& name);

/// Histogram entropy of a slice between its robust (1st/99th percentile)
/// intensity bounds; lower is sharper. Invariant under affine rescaling.
double entropy_iqm(const Image2D& slice, int n_bins = 256);

/// Zero-mean, unit-variance copy (variance floor guards constant slices).
Image2D normalize_slice(const Image2D& slice);

/// Block-mean downsampling; source dimensions must be multiples of the target.
Image2D downsample_to(const Image2D& img, int nx, int ny);

struct TrainingSample {
    Image2D slice;   // regressor input resolution, normalized
    float label = 0; // RPE in detector pixels
};

struct TrainingSetup {
    const Phantom* phantom = nullptr;
    const Trajectory* traj = nullptr;
    GridSpec slice_grid;           // reconstruction grid of the (z=0) slice
    MarkerSet markers;
    int n_motion_nodes = 10;
    Amplitude amp_lo{0.0, 0.0};    // per-sample amplitude drawn uniformly in [lo, hi]
    Amplitude amp_hi{8.0, 0.05};
    MotionFamily family = MotionFamily::mixed;
    int net_input = 64;
    int supersample = 3;
};

/// Simulate motion -> reconstruct the uncompensated central slice -> pair it
/// with the exact RPE label. Parallel over samples; per-sample seeds are
/// pre-drawn so the result is independent of the thread count.
std::vector<TrainingSample> build_training_set(const TrainingSetup& setup, uint64_t seed, int n_samples,
                                               Exec exec = Exec::parallel);

struct TrainConfig {
    int epochs = 60;
    int batch = 32;
    double lr = 1e-3;
    double val_fraction = 0.2;
    uint64_t seed = 1;
};

struct EpochLog {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double val_pearson = 0.0;
};

struct TrainResult {
    RegressorNet model{64};
    std::vector<EpochLog> log;
    double val_pearson = 0.0;
};

/// Mini-batch Adam on the MSE loss with a held-out validation split
/// (>= 20 %). Throws on divergence (non-finite loss) with diagnostics.
TrainResult regressor_train(const std::vector<TrainingSample>& samples, const TrainConfig& cfg,
                            Exec exec = Exec::parallel);

/// Deterministic prediction, clamped at 0 (the label space is nonnegative).
double regressor_infer(const RegressorNet& net, const Image2D& normalized);

void save_training_log(const std::string& path, const std::vector<EpochLog>& log);

/// The IQM as seen by the compensation objective: entropy reads the slice,
/// the regressor reads the normalized downsampled slice, and the oracle reads
/// the residual RPE between the estimate and the true (injected) motion.
struct IqmEvaluator {
    IqmKind kind = IqmKind::entropy;
    int entropy_bins = 256;
    const RegressorNet* model = nullptr;
    const Trajectory* traj = nullptr;            // oracle
    const MotionTrajectory* true_motion = nullptr;
    MarkerSet markers;

    double evaluate(const Image2D& slice, const MotionTrajectory& estimate) const;
};

} // namespace moco
