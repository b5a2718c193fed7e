#include "moco/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace moco {

uint64_t fnv1a_hash(const void* data, size_t n_bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < n_bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

NmResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> x0, std::span<const double> initial_step,
                     const NmOptions& opts) {
    const int n = static_cast<int>(x0.size());
    if (n < 1) throw std::invalid_argument("nelder_mead: empty parameter vector");
    if (initial_step.size() != x0.size())
        throw std::invalid_argument("nelder_mead: step vector size mismatch");

    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        double v = f(std::span<const double>(x.data(), x.size()));
        ++evals;
        if (std::isnan(v)) {
            std::ostringstream ss;
            ss << "nelder_mead: objective returned NaN at (";
            for (int i = 0; i < n; ++i) ss << x[i] << (i + 1 < n ? ", " : ")");
            throw std::runtime_error(ss.str());
        }
        return v;
    };

    std::vector<std::vector<double>> xs(n + 1, std::vector<double>(x0.begin(), x0.end()));
    std::vector<double> fs(n + 1);
    for (int i = 0; i < n; ++i) xs[i + 1][i] += initial_step[i];
    for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

    auto order = [&]() {
        std::vector<int> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        std::vector<std::vector<double>> xs2(n + 1);
        std::vector<double> fs2(n + 1);
        for (int k = 0; k <= n; ++k) { xs2[k] = xs[idx[k]]; fs2[k] = fs[idx[k]]; }
        xs.swap(xs2);
        fs.swap(fs2);
    };

    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    order();
    while (evals < opts.max_evals && (fs[n] - fs[0]) >= opts.tol) {
        std::vector<double> centroid(n, 0.0);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i) centroid[i] += xs[k][i] / n;

        auto along = [&](double c) {
            std::vector<double> x(n);
            for (int i = 0; i < n; ++i) x[i] = centroid[i] + c * (centroid[i] - xs[n][i]);
            return x;
        };

        std::vector<double> xr = along(alpha);
        double fr = eval(xr);
        if (fr < fs[0]) {
            std::vector<double> xe = along(gamma);
            double fe = eval(xe);
            if (fe < fr) { xs[n] = xe; fs[n] = fe; }
            else { xs[n] = xr; fs[n] = fr; }
        } else if (fr < fs[n - 1]) {
            xs[n] = xr;
            fs[n] = fr;
        } else {
            bool outside = fr < fs[n];
            std::vector<double> xc(n);
            if (outside) {
                for (int i = 0; i < n; ++i) xc[i] = centroid[i] + rho * (xr[i] - centroid[i]);
            } else {
                for (int i = 0; i < n; ++i) xc[i] = centroid[i] + rho * (xs[n][i] - centroid[i]);
            }
            double fc = eval(xc);
            if (fc < std::min(fr, fs[n])) {
                xs[n] = xc;
                fs[n] = fc;
            } else {
                for (int k = 1; k <= n; ++k) {
                    for (int i = 0; i < n; ++i) xs[k][i] = xs[0][i] + sigma * (xs[k][i] - xs[0][i]);
                    fs[k] = eval(xs[k]);
                }
            }
        }
        order();
    }
    return {xs[0], fs[0], evals};
}

SimplexScale initial_simplex_scale(double initial_rpe) {
    const double c_t = 0.5, c_r = 0.5, delta_min = 0.1;
    double r = std::max(initial_rpe, delta_min);
    return {c_t * r, c_r * r / 100.0};
}

double auto_lambda(double iqm_term, double ecc_term, std::string* warning) {
    if (iqm_term == 0.0) {
        if (warning) *warning = "IQM term is zero at the initial estimate; lambda = 1";
        return 1.0;
    }
    double floor = std::numeric_limits<double>::epsilon() * std::max(std::abs(iqm_term), 1.0);
    if (ecc_term < floor && warning)
        *warning = "ECC term (near-)zero at the initial estimate; lambda clamped via floor";
    double lambda = iqm_term / std::max(ecc_term, floor);
    return std::clamp(lambda, 1e-6, 1e6);
}

int ObjectiveContext::n_active() const {
    int c = 0;
    for (bool a : active) c += a ? 1 : 0;
    return c;
}

MotionSpline ObjectiveContext::spline_from_params(std::span<const double> params) const {
    if (static_cast<int>(params.size()) != dim())
        throw std::invalid_argument("ObjectiveContext: parameter vector size mismatch");
    MotionSpline s;
    s.kind = kind;
    s.node_views = node_views;
    for (int t = 0; t < kNumTracks; ++t) s.tracks[t].assign(node_views.size(), 0.0);
    int na = n_active();
    for (int fn = 0; fn < n_free_nodes(); ++fn) { // node 0 pinned at the reference pose
        int a = 0;
        for (int t = 0; t < kNumTracks; ++t) {
            if (!active[t]) continue;
            s.tracks[t][fn + 1] = params[static_cast<size_t>(fn) * na + a];
            ++a;
        }
    }
    return s;
}

MotionTrajectory ObjectiveContext::motion_from_params(std::span<const double> params) const {
    return sample_motion(spline_from_params(params), traj->n_views());
}

double ObjectiveContext::iqm_term(std::span<const double> params) const {
    MotionTrajectory motion = motion_from_params(params);
    Volume slice = backproject(filtered, *traj, motion, slice_grid, FdkMode::central_slice, exec);
    return iqm.evaluate(slice.central_slice(), motion);
}

double ObjectiveContext::ecc_term(std::span<const double> params) const {
    MotionTrajectory motion = motion_from_params(params);
    return ecc_total(ecc, *traj, motion, exec);
}

ObjectiveContext make_objective_context(const ProjectionStack& measured, const Trajectory& traj,
                                        const GridSpec& slice_grid, const IqmEvaluator& iqm,
                                        const ObjectiveSettings& obj, const EstimationConfig& est,
                                        Exec exec) {
    if (est.kind != SplineKind::pchip)
        throw std::invalid_argument("estimation must use PCHIP; the simulation side owns Akima");
    if (est.n_nodes < 3) throw std::invalid_argument("EstimationConfig: need >= 3 nodes");
    if (est.block_size < 1 || est.block_size > est.n_nodes)
        throw std::invalid_argument("EstimationConfig: bad block size");
    if (!(est.epsilon > 0)) throw std::invalid_argument("EstimationConfig: epsilon must be > 0");

    ObjectiveContext ctx;
    ctx.traj = &traj;
    ctx.filtered = fdk_prefilter(measured, traj.geometry, exec);
    RadonGrid grid = default_radon_grid(traj.geometry.detector);
    ctx.ecc = make_ecc_context(build_radon_luts(cosine_weight(measured, traj.geometry.sdd, exec), grid, exec),
                               traj, obj.ecc);
    ctx.slice_grid = slice_grid;
    ctx.iqm = iqm;
    ctx.lambda = std::max(obj.lambda, 0.0);
    ctx.kind = est.kind;
    ctx.node_views = uniform_nodes(est.n_nodes, traj.n_views());
    ctx.active = est.active;
    ctx.exec = exec;
    return ctx;
}

double objective(const ObjectiveContext& ctx, std::span<const double> params) {
    MotionTrajectory motion = ctx.motion_from_params(params);
    Volume slice = backproject(ctx.filtered, *ctx.traj, motion, ctx.slice_grid, FdkMode::central_slice,
                               ctx.exec);
    double iqm_v = ctx.iqm.evaluate(slice.central_slice(), motion);
    double ecc_v = ctx.lambda > 0.0 ? ecc_total(ctx.ecc, *ctx.traj, motion, ctx.exec) : 0.0;
    double v = iqm_v + ctx.lambda * ecc_v;
    if (std::isnan(v)) throw std::runtime_error("objective: NaN value");
    return v;
}

CompensateResult compensate(const ProjectionStack& measured, const Trajectory& traj,
                            const GridSpec& slice_grid, const GridSpec& volume_grid,
                            const IqmEvaluator& iqm, const ObjectiveSettings& obj,
                            const EstimationConfig& est, Exec exec) {
    using clock = std::chrono::steady_clock;

    CompensateResult out;
    RunReport& rep = out.report;
    rep.iqm = iqm_name(iqm.kind);
    rep.block_size = est.block_size;
    rep.epsilon = est.epsilon;
    rep.stack_hash_before = fnv1a_hash(measured.v.data(), measured.v.size() * sizeof(float));

    ObjectiveContext ctx = make_objective_context(measured, traj, slice_grid, iqm, obj, est, exec);

    const int dim = ctx.dim();
    std::vector<double> params(dim, 0.0);

    // balance the two terms at the initial estimate
    rep.initial_iqm = ctx.iqm_term(params);
    rep.initial_ecc = ctx.ecc_term(params);
    if (obj.lambda >= 0.0) {
        ctx.lambda = obj.lambda;
    } else {
        ctx.lambda = auto_lambda(rep.initial_iqm, rep.initial_ecc, &rep.lambda_warning);
    }
    rep.lambda = ctx.lambda;

    // simplex scale from the initial metric value (fixed default for entropy,
    // which is not in RPE-like units)
    double r_hat = iqm.kind == IqmKind::entropy ? 2.0 : rep.initial_iqm;
    SimplexScale scale = initial_simplex_scale(r_hat);

    long total_evals = 0;
    auto eval_full = [&](std::span<const double> p) {
        ++total_evals;
        return objective(ctx, p);
    };

    double f_curr = eval_full(params);
    rep.initial_objective = f_curr;
    rep.trace.push_back(f_curr);

    const int n_free = ctx.n_free_nodes();
    const int n_active = ctx.n_active();
    const int n_blocks = (n_free + est.block_size - 1) / est.block_size;

    // per-track simplex steps within a block vector (node-major layout)
    std::vector<int> active_tracks;
    for (int t = 0; t < kNumTracks; ++t)
        if (est.active[t]) active_tracks.push_back(t);

    for (int sweep = 0; sweep < est.max_sweeps; ++sweep) {
        auto t0 = clock::now();
        double f_sweep_start = f_curr;
        long evals_sweep = 0;

        for (int b = 0; b < n_blocks; ++b) {
            int node_lo = b * est.block_size;
            int node_hi = std::min(n_free, node_lo + est.block_size);
            int bdim = (node_hi - node_lo) * n_active;

            std::vector<double> x0(bdim), steps(bdim);
            for (int fn = node_lo; fn < node_hi; ++fn) {
                for (int a = 0; a < n_active; ++a) {
                    int k = (fn - node_lo) * n_active + a;
                    x0[k] = params[static_cast<size_t>(fn) * n_active + a];
                    steps[k] = active_tracks[a] < 3 ? scale.rotation_rad : scale.translation_mm;
                }
            }

            auto f_block = [&](std::span<const double> x) {
                std::vector<double> full(params);
                for (int fn = node_lo; fn < node_hi; ++fn)
                    for (int a = 0; a < n_active; ++a)
                        full[static_cast<size_t>(fn) * n_active + a] = x[(fn - node_lo) * n_active + a];
                return eval_full(full);
            };

            NmResult res = nelder_mead(f_block, x0, steps, est.nm);
            evals_sweep += res.evals;
            if (res.f < f_curr) { // accept only strict improvements
                for (int fn = node_lo; fn < node_hi; ++fn)
                    for (int a = 0; a < n_active; ++a)
                        params[static_cast<size_t>(fn) * n_active + a] = res.x[(fn - node_lo) * n_active + a];
                f_curr = res.f;
            }
            rep.trace.push_back(f_curr);
        }

        SweepStats st;
        st.sweep = sweep;
        st.objective_after = f_curr;
        st.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        st.evals = static_cast<int>(evals_sweep);
        rep.sweeps.push_back(st);

        double rel = (f_sweep_start - f_curr) / std::max(std::abs(f_sweep_start), 1e-12);
        if (sweep == 0 && !(f_curr < f_sweep_start)) rep.first_sweep_improved = false;
        if (rel < est.epsilon) break;
    }

    rep.final_objective = f_curr;
    rep.total_evals = static_cast<int>(total_evals);

    out.spline = ctx.spline_from_params(params);
    out.motion = sample_motion(out.spline, traj.n_views());
    out.volume = backproject(ctx.filtered, traj, out.motion, volume_grid, FdkMode::full, exec);

    rep.stack_hash_after = fnv1a_hash(measured.v.data(), measured.v.size() * sizeof(float));
    if (rep.stack_hash_after != rep.stack_hash_before)
        throw std::runtime_error("compensate: measured projection data changed during the run");
    return out;
}

} // namespace moco
