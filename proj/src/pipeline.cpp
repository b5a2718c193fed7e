#include "moco/pipeline.hpp"

#include "moco/io.hpp"
#include "moco/metrics.hpp"
#include "moco/recon.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace moco {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string hash_hex(uint64_t h) {
    std::ostringstream ss;
    ss << std::hex << h;
    return ss.str();
}

void write_manifest(const Config& cfg, const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& artifacts) {
    json j;
    j["command"] = command;
    j["config_hash"] = hash_hex(config_hash(cfg));
    j["seed"] = cfg.seed;
    j["artifacts"] = artifacts;
    std::ofstream f(join(out_dir, command + "_manifest.json"));
    if (!f) throw std::runtime_error("cannot write manifest in " + out_dir);
    f << j.dump(2) << "\n";
}

ProjectionStack load_stack_with_detector(const std::string& path, const DetectorSpec& det) {
    ProjectionStack stack = load_stack(path);
    if (stack.nu != det.nu || stack.nv != det.nv ||
        std::abs(stack.detector.du - det.du) > 1e-9 || std::abs(stack.detector.dv - det.dv) > 1e-9)
        throw std::runtime_error("stack geometry mismatch with the config: " + path);
    stack.detector = det; // the RAWP header does not carry the principal point
    return stack;
}

struct SliceMetrics {
    double rmse_uncomp = 0.0;
    double rmse_comp = 0.0;
    double ssim_uncomp = 0.0;
    double ssim_comp = 0.0;
    bool as_defined = true;
    double as_percent = 0.0;
};

SliceMetrics slice_metrics(const Image2D& reference, const Image2D& uncomp, const Image2D& comp,
                           const std::vector<uint8_t>& mask) {
    SliceMetrics m;
    m.rmse_uncomp = rmse_masked(uncomp, reference, mask);
    m.rmse_comp = rmse_masked(comp, reference, mask);
    m.ssim_uncomp = ssim(reference, uncomp);
    m.ssim_comp = ssim(reference, comp);
    if (m.rmse_uncomp > 0.0) {
        m.as_percent = artifact_suppression(m.rmse_uncomp, m.rmse_comp);
    } else {
        m.as_defined = false;
    }
    return m;
}

void append_metrics_row(const std::string& path, const Config& cfg, const std::string& method,
                        const SliceMetrics& m, double runtime_s, const std::string& note) {
    const bool fresh = !fs::exists(path);
    std::ofstream f(path, std::ios::app);
    if (!f) throw std::runtime_error("cannot open metrics csv: " + path);
    if (fresh) f << "dataset,family,method,as_percent,ssim_nocomp,ssim,runtime_s,note\n";
    f.precision(12);
    f << cfg.name << "," << family_name(cfg.simulate.family) << "," << method << ",";
    if (m.as_defined) f << m.as_percent;
    f << "," << m.ssim_uncomp << "," << m.ssim_comp << ","
      << (cfg.deterministic ? 0.0 : runtime_s) << "," << note << "\n";
}

std::vector<uint8_t> evaluation_mask(const Config& cfg) {
    Volume gt_slice = voxelize(cfg.phantom, cfg.slice_grid());
    return support_mask(gt_slice.central_slice(), 5);
}

void save_report(const std::string& path, const RunReport& rep, const Config& cfg,
                 const SliceMetrics* metrics) {
    json j;
    j["iqm"] = rep.iqm;
    j["lambda"] = rep.lambda;
    if (!rep.lambda_warning.empty()) j["lambda_warning"] = rep.lambda_warning;
    j["initial_objective"] = rep.initial_objective;
    j["final_objective"] = rep.final_objective;
    j["initial_iqm"] = rep.initial_iqm;
    j["initial_ecc"] = rep.initial_ecc;
    j["trace"] = rep.trace;
    j["total_evals"] = rep.total_evals;
    j["block_schedule"] = {{"block_size", rep.block_size},
                           {"epsilon", rep.epsilon},
                           {"max_sweeps", cfg.estimate.max_sweeps},
                           {"nm_tol", cfg.estimate.nm.tol},
                           {"nm_max_evals", cfg.estimate.nm.max_evals}};
    j["first_sweep_improved"] = rep.first_sweep_improved;
    j["stack_hash"] = hash_hex(rep.stack_hash_before);
    j["seed"] = cfg.seed;
    j["config_hash"] = hash_hex(config_hash(cfg));
    json sweeps = json::array();
    for (const auto& s : rep.sweeps) {
        sweeps.push_back({{"sweep", s.sweep},
                          {"objective", s.objective_after},
                          {"evals", s.evals},
                          {"seconds", cfg.deterministic ? 0.0 : s.seconds}});
    }
    j["sweeps"] = sweeps;
    if (metrics) {
        j["metrics"] = {{"as_percent", metrics->as_defined ? json(metrics->as_percent) : json()},
                        {"ssim_nocomp", metrics->ssim_uncomp},
                        {"ssim", metrics->ssim_comp},
                        {"rmse_nocomp", metrics->rmse_uncomp},
                        {"rmse", metrics->rmse_comp}};
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write report: " + path);
    f << j.dump(2) << "\n";
}

} // namespace

void cmd_simulate(const Config& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);

    Trajectory traj = circular_trajectory(cfg.geometry);
    save_trajectory_csv(join(out_dir, "trajectory.csv"), traj);

    Volume gt = voxelize(cfg.phantom, cfg.volume_grid);
    save_volume(join(out_dir, "ground_truth.rawv"), gt);

    Amplitude amp{cfg.simulate.amplitude_mm, cfg.simulate.amplitude_deg * EIGEN_PI / 180.0};
    MotionSpline spline = random_motion(cfg.seed, amp, cfg.simulate.n_nodes, cfg.simulate.family,
                                        cfg.geometry.n_views);
    save_spline_csv(join(out_dir, "motion_true.csv"), spline);
    MotionTrajectory motion = sample_motion(spline, cfg.geometry.n_views);

    ProjectionStack clean = forward_project(cfg.phantom, traj, identity_motion(cfg.geometry.n_views),
                                            Exec::parallel, cfg.simulate.supersample);
    ProjectionStack moved = forward_project(cfg.phantom, traj, motion, Exec::parallel,
                                            cfg.simulate.supersample);

    if (cfg.simulate.noise_sigma > 0.0) {
        std::mt19937_64 rng(cfg.seed ^ 0xA5A5A5A5A5A5A5A5ull);
        std::normal_distribution<double> noise(0.0, cfg.simulate.noise_sigma);
        for (float& x : clean.v) x += static_cast<float>(noise(rng));
        for (float& x : moved.v) x += static_cast<float>(noise(rng));
    }

    save_stack(join(out_dir, "stack_motionfree.rawp"), clean);
    save_stack(join(out_dir, "stack_motion.rawp"), moved);

    write_manifest(cfg, out_dir, "simulate",
                   {"trajectory.csv", "ground_truth.rawv", "motion_true.csv", "stack_motionfree.rawp",
                    "stack_motion.rawp"});
}

void cmd_train(const Config& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);

    // the z=0 slice of an identity-motion reconstruction reads only detector
    // rows at v ~ v0, and the ramp filter is row-wise, so training stacks can
    // be rendered on a v-cropped detector; RPE labels are unaffected (the v0
    // offset cancels in the projection difference)
    CircularGeometry train_geom = cfg.geometry;
    train_geom.detector.nv = 6;
    train_geom.detector.v0 = 2.5;
    Trajectory traj = circular_trajectory(train_geom);
    TrainingSetup setup;
    setup.phantom = &cfg.phantom;
    setup.traj = &traj;
    setup.slice_grid = cfg.slice_grid();
    setup.markers = default_markers();
    setup.supersample = cfg.simulate.supersample;
    setup.n_motion_nodes = cfg.train.n_nodes;
    setup.amp_lo = {cfg.train.amp_mm_min, cfg.train.amp_deg_min * EIGEN_PI / 180.0};
    setup.amp_hi = {cfg.train.amp_mm_max, cfg.train.amp_deg_max * EIGEN_PI / 180.0};
    setup.family = cfg.train.family;

    std::vector<TrainingSample> samples = build_training_set(setup, cfg.seed, cfg.train.n_samples);

    TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.batch = cfg.train.batch;
    tc.lr = cfg.train.lr;
    tc.val_fraction = cfg.train.val_fraction;
    tc.seed = cfg.seed;
    TrainResult res = regressor_train(samples, tc);

    save_model(join(out_dir, cfg.model_file), res.model);
    save_training_log(join(out_dir, "training_log.csv"), res.log);
    write_manifest(cfg, out_dir, "train", {cfg.model_file, "training_log.csv"});
}

void cmd_compensate(const Config& cfg, const std::string& out_dir) {
    cfg.validate();
    Trajectory traj = circular_trajectory(cfg.geometry);

    ProjectionStack measured = load_stack_with_detector(join(out_dir, "stack_motion.rawp"),
                                                        cfg.geometry.detector);
    ProjectionStack clean = load_stack_with_detector(join(out_dir, "stack_motionfree.rawp"),
                                                     cfg.geometry.detector);
    MotionSpline true_spline = load_spline_csv(join(out_dir, "motion_true.csv"));
    MotionTrajectory true_motion = sample_motion(true_spline, cfg.geometry.n_views);

    // Table-style references: the motion-free FDK reconstruction, plus the
    // uncompensated one as the no-comp baseline
    Volume reference = fdk(clean, traj, identity_motion(traj.n_views()), cfg.volume_grid);
    save_volume(join(out_dir, "reference.rawv"), reference);
    Volume uncomp = fdk(measured, traj, identity_motion(traj.n_views()), cfg.volume_grid);
    save_volume(join(out_dir, "uncompensated.rawv"), uncomp);

    const std::vector<uint8_t> mask = evaluation_mask(cfg);
    const Image2D ref_slice = reference.central_slice();
    const Image2D uncomp_slice = uncomp.central_slice();

    std::vector<std::string> artifacts = {"reference.rawv", "uncompensated.rawv"};

    for (const auto& method : cfg.methods) {
        IqmEvaluator iqm;
        iqm.kind = method.iqm;
        iqm.markers = default_markers();
        RegressorNet model{64};
        if (method.iqm == IqmKind::regressor) {
            std::string model_path = join(out_dir, cfg.model_file);
            if (!fs::exists(model_path))
                throw std::runtime_error("regressor method '" + method.name +
                                         "' needs a model file; not found: " + model_path);
            model = load_model(model_path);
            iqm.model = &model;
        }
        if (method.iqm == IqmKind::oracle_rpe) {
            iqm.traj = &traj;
            iqm.true_motion = &true_motion;
        }

        ObjectiveSettings obj;
        obj.iqm = method.iqm;
        obj.lambda = method.lambda;
        obj.ecc = cfg.ecc;

        auto t0 = std::chrono::steady_clock::now();
        CompensateResult res = compensate(measured, traj, cfg.slice_grid(), cfg.volume_grid, iqm, obj,
                                          cfg.estimate);
        double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        save_volume(join(out_dir, "compensated_" + method.name + ".rawv"), res.volume);
        save_spline_csv(join(out_dir, "motion_est_" + method.name + ".csv"), res.spline);

        SliceMetrics m = slice_metrics(ref_slice, uncomp_slice, res.volume.central_slice(), mask);
        std::string note = m.as_defined ? "" : "as_undefined_zero_baseline";
        append_metrics_row(join(out_dir, "metrics.csv"), cfg, method.name, m, runtime, note);
        save_report(join(out_dir, "report_" + method.name + ".json"), res.report, cfg, &m);

        artifacts.push_back("compensated_" + method.name + ".rawv");
        artifacts.push_back("motion_est_" + method.name + ".csv");
        artifacts.push_back("report_" + method.name + ".json");
    }
    artifacts.push_back("metrics.csv");
    write_manifest(cfg, out_dir, "compensate", artifacts);
}

void cmd_evaluate(const Config& cfg, const std::string& out_dir) {
    cfg.validate();
    Volume gt = load_volume(join(out_dir, "ground_truth.rawv"));
    Volume reference = load_volume(join(out_dir, "reference.rawv"));
    Volume uncomp = load_volume(join(out_dir, "uncompensated.rawv"));
    if (reference.nx != uncomp.nx || reference.ny != uncomp.ny || reference.nz != uncomp.nz)
        throw std::runtime_error("evaluate: volume shapes do not match");

    const Image2D gt_slice = gt.central_slice();
    const Image2D ref_slice = reference.central_slice();
    const Image2D uncomp_slice = uncomp.central_slice();
    const std::vector<uint8_t> mask = evaluation_mask(cfg);

    // window/level from the robust range of the reference slice
    std::vector<float> sorted = ref_slice.v;
    std::sort(sorted.begin(), sorted.end());
    double lo = sorted[static_cast<size_t>(std::lround(0.01 * (sorted.size() - 1)))];
    double hi = sorted[static_cast<size_t>(std::lround(0.99 * (sorted.size() - 1)))];
    double window = std::max(hi - lo, 1e-6);
    double level = 0.5 * (hi + lo);

    save_pgm16(join(out_dir, "slice_ground_truth.pgm"), gt_slice, level, window);
    save_pgm16(join(out_dir, "slice_reference.pgm"), ref_slice, level, window);
    save_pgm16(join(out_dir, "slice_uncompensated.pgm"), uncomp_slice, level, window);

    const std::string metrics_path = join(out_dir, "metrics.csv");
    if (fs::exists(metrics_path)) fs::remove(metrics_path); // evaluate owns the final table

    std::vector<std::string> artifacts = {"slice_ground_truth.pgm", "slice_reference.pgm",
                                          "slice_uncompensated.pgm", "metrics.csv"};
    for (const auto& method : cfg.methods) {
        const std::string vol_path = join(out_dir, "compensated_" + method.name + ".rawv");
        if (!fs::exists(vol_path))
            throw std::runtime_error("evaluate: missing compensated volume " + vol_path);
        Volume comp = load_volume(vol_path);
        if (comp.nx != reference.nx || comp.ny != reference.ny || comp.nz != reference.nz)
            throw std::runtime_error("evaluate: volume shapes do not match for " + method.name);
        Image2D comp_slice = comp.central_slice();

        SliceMetrics m = slice_metrics(ref_slice, uncomp_slice, comp_slice, mask);
        std::string note = m.as_defined ? "" : "as_undefined_zero_baseline";
        append_metrics_row(metrics_path, cfg, method.name, m, 0.0, note);

        Image2D diff(comp_slice.nx, comp_slice.ny);
        for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = comp_slice.v[i] - ref_slice.v[i];
        save_pgm16(join(out_dir, "slice_" + method.name + ".pgm"), comp_slice, level, window);
        save_pgm16(join(out_dir, "diff_" + method.name + ".pgm"), diff, 0.0, window);
        artifacts.push_back("slice_" + method.name + ".pgm");
        artifacts.push_back("diff_" + method.name + ".pgm");
    }
    write_manifest(cfg, out_dir, "evaluate", artifacts);
}

void cmd_all(const Config& cfg, const std::string& out_dir) {
    cmd_simulate(cfg, out_dir);
    bool needs_model = false;
    for (const auto& m : cfg.methods) needs_model |= (m.iqm == IqmKind::regressor);
    if (needs_model && !fs::exists(join(out_dir, cfg.model_file))) cmd_train(cfg, out_dir);
    cmd_compensate(cfg, out_dir);
    cmd_evaluate(cfg, out_dir);
}

} // namespace moco
