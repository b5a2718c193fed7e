#pragma once

#include "moco/consistency.hpp"
#include "moco/iqm.hpp"
#include "moco/motion.hpp"
#include "moco/recon.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace moco {

struct NmOptions {
    double tol = 1e-6;   // simplex f-spread termination
    int max_evals = 1000;
};

struct NmResult {
    std::vector<double> x;
    double f = 0.0;
    int evals = 0;
};

/// Standard Nelder-Mead simplex (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) with per-dimension initial steps. The best vertex value is
/// non-increasing across iterations. A NaN objective value aborts with an
/// error naming the offending point.
NmResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> x0, std::span<const double> initial_step,
                     const NmOptions& opts);

/// Simplex steps matched to the initial RPE-like metric value R:
/// translation 0.5*max(R, 0.1) mm, rotation the same divided by 100, in rad.
struct SimplexScale {
    double translation_mm = 0.0;
    double rotation_rad = 0.0;
};
SimplexScale initial_simplex_scale(double initial_rpe);

/// lambda = IQM / ECC at the initial estimate, clamped to [1e-6, 1e6]; a zero
/// IQM falls back to 1 and a (near-)zero ECC clamps via a machine-scaled
/// floor. Any fallback is described in *warning.
double auto_lambda(double iqm_term, double ecc_term, std::string* warning = nullptr);

struct EstimationConfig {
    SplineKind kind = SplineKind::pchip; // the simulation side is Akima; never share a family
    int n_nodes = 7;
    std::array<bool, kNumTracks> active = family_mask(MotionFamily::mixed);
    int block_size = 3;      // consecutive spline nodes per Nelder-Mead subproblem
    int max_sweeps = 5;
    double epsilon = 1e-3;   // relative objective decrease to keep sweeping
    NmOptions nm{1e-5, 400};
};

struct ObjectiveSettings {
    IqmKind iqm = IqmKind::entropy;
    double lambda = -1.0;    // < 0 selects auto_lambda
    EccSettings ecc;
};

/// Everything the objective needs, precomputed once per run: the filtered
/// measured stack, the consistency context (LUTs + pairing) and the bound
/// IQM. Only the motion estimate changes between evaluations.
struct ObjectiveContext {
    const Trajectory* traj = nullptr;
    ProjectionStack filtered;
    EccContext ecc;
    GridSpec slice_grid;
    IqmEvaluator iqm;
    double lambda = 0.0;
    SplineKind kind = SplineKind::pchip;
    std::vector<double> node_views;
    std::array<bool, kNumTracks> active{};
    Exec exec = Exec::parallel;

    int n_free_nodes() const { return static_cast<int>(node_views.size()) - 1; }
    int n_active() const;
    int dim() const { return n_free_nodes() * n_active(); }

    /// Node parameters (free nodes x active tracks, node-major) -> spline.
    MotionSpline spline_from_params(std::span<const double> params) const;
    MotionTrajectory motion_from_params(std::span<const double> params) const;

    double iqm_term(std::span<const double> params) const;
    double ecc_term(std::span<const double> params) const;
};

ObjectiveContext make_objective_context(const ProjectionStack& measured, const Trajectory& traj,
                                        const GridSpec& slice_grid, const IqmEvaluator& iqm,
                                        const ObjectiveSettings& obj, const EstimationConfig& est,
                                        Exec exec = Exec::parallel);

/// Eq.-style combined cost: IQM(slice(M)) + lambda * ECC(M).
double objective(const ObjectiveContext& ctx, std::span<const double> params);

struct SweepStats {
    int sweep = 0;
    double objective_after = 0.0;
    double seconds = 0.0;
    int evals = 0;
};

struct RunReport {
    std::string iqm;
    double lambda = 0.0;
    std::string lambda_warning;
    double initial_objective = 0.0;
    double final_objective = 0.0;
    double initial_iqm = 0.0;
    double initial_ecc = 0.0;
    std::vector<double> trace; // objective after every accepted block solve
    std::vector<SweepStats> sweeps;
    int total_evals = 0;
    int block_size = 0;
    double epsilon = 0.0;
    bool first_sweep_improved = true;
    uint64_t stack_hash_before = 0;
    uint64_t stack_hash_after = 0;
};

struct CompensateResult {
    MotionSpline spline;
    MotionTrajectory motion;
    Volume volume;
    RunReport report;
};

/// The autofocus loop: left-to-right sweeps of block-wise Nelder-Mead over the
/// PCHIP node parameters, then one full-volume FDK with the estimate. The
/// measured stack is never modified (hash-checked); LUTs and the filtered
/// stack are built once up front.
CompensateResult compensate(const ProjectionStack& measured, const Trajectory& traj,
                            const GridSpec& slice_grid, const GridSpec& volume_grid,
                            const IqmEvaluator& iqm, const ObjectiveSettings& obj,
                            const EstimationConfig& est, Exec exec = Exec::parallel);

uint64_t fnv1a_hash(const void* data, size_t n_bytes);

} // namespace moco
