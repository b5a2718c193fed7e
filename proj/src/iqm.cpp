#include "moco/iqm.hpp"

#include "moco/recon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace moco {

const char* iqm_name(IqmKind k) {
    switch (k) {
        case IqmKind::entropy: return "entropy";
        case IqmKind::oracle_rpe: return "oracle";
        case IqmKind::regressor: return "regressor";
    }
    return "?";
}

IqmKind iqm_from_name(const std::string& name) {
    if (name == "entropy") return IqmKind::entropy;
    if (name == "oracle") return IqmKind::oracle_rpe;
    if (name == "regressor") return IqmKind::regressor;
    throw std::invalid_argument("unknown IQM kind: " + name);
}

namespace {

float percentile(std::vector<float> sorted_copy, double q) {
    // nearest-rank on the sorted data
    size_t n = sorted_copy.size();
    size_t idx = static_cast<size_t>(std::lround(q * (n - 1)));
    return sorted_copy[std::min(idx, n - 1)];
}

} // namespace

double entropy_iqm(const Image2D& slice, int n_bins) {
    if (n_bins < 2) throw std::invalid_argument("entropy_iqm: n_bins must be >= 2");
    if (slice.v.empty()) throw std::invalid_argument("entropy_iqm: empty slice");
    for (float x : slice.v)
        if (!std::isfinite(x)) throw std::invalid_argument("entropy_iqm: non-finite slice value");

    std::vector<float> sorted = slice.v;
    std::sort(sorted.begin(), sorted.end());
    double lo = percentile(sorted, 0.01);
    double hi = percentile(sorted, 0.99);
    if (!(hi > lo)) return 0.0; // (near-)constant slice: single occupied bin

    std::vector<double> hist(n_bins, 0.0);
    const double scale = n_bins / (hi - lo);
    for (float x : slice.v) {
        int b = static_cast<int>((x - lo) * scale);
        b = std::clamp(b, 0, n_bins - 1); // values outside the robust window land in the edge bins
        hist[b] += 1.0;
    }
    const double total = static_cast<double>(slice.v.size());
    double h = 0.0;
    for (double c : hist) {
        if (c <= 0.0) continue;
        double p = c / total;
        h -= p * std::log(p);
    }
    return h;
}

Image2D normalize_slice(const Image2D& slice) {
    Image2D out = slice;
    double mean = 0.0;
    for (float x : slice.v) mean += x;
    mean /= static_cast<double>(slice.v.size());
    double var = 0.0;
    for (float x : slice.v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(slice.v.size());
    double sd = std::sqrt(std::max(var, 1e-24));
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = static_cast<float>((slice.v[i] - mean) / sd);
    return out;
}

Image2D downsample_to(const Image2D& img, int nx, int ny) {
    if (nx < 1 || ny < 1 || img.nx % nx != 0 || img.ny % ny != 0)
        throw std::invalid_argument("downsample_to: dimensions must divide the source");
    const int bx = img.nx / nx, by = img.ny / ny;
    Image2D out(nx, ny);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double acc = 0.0;
            for (int j = 0; j < by; ++j)
                for (int i = 0; i < bx; ++i)
                    acc += img.at(x * bx + i, y * by + j);
            out.at(x, y) = static_cast<float>(acc / (bx * by));
        }
    }
    return out;
}

std::vector<TrainingSample> build_training_set(const TrainingSetup& setup, uint64_t seed, int n_samples,
                                               Exec exec) {
    if (!setup.phantom || !setup.traj) throw std::invalid_argument("build_training_set: setup incomplete");
    if (n_samples < 1) throw std::invalid_argument("build_training_set: n_samples must be >= 1");

    // pre-draw per-sample seeds and amplitudes so the result does not depend
    // on the scheduling of the parallel loop
    std::mt19937_64 rng(seed);
    std::vector<uint64_t> sample_seeds(n_samples);
    std::vector<Amplitude> amps(n_samples);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int k = 0; k < n_samples; ++k) {
        sample_seeds[k] = rng();
        amps[k].mm = setup.amp_lo.mm + (setup.amp_hi.mm - setup.amp_lo.mm) * u01(rng);
        amps[k].rad = setup.amp_lo.rad + (setup.amp_hi.rad - setup.amp_lo.rad) * u01(rng);
    }

    const Trajectory& traj = *setup.traj;
    std::vector<TrainingSample> out(n_samples);
    std::string error;

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
#endif
    for (int k = 0; k < n_samples; ++k) {
        try {
            MotionSpline spline = random_motion(sample_seeds[k], amps[k], setup.n_motion_nodes,
                                                setup.family, traj.n_views());
            MotionTrajectory motion = sample_motion(spline, traj.n_views());
            ProjectionStack stack = forward_project(*setup.phantom, traj, motion, Exec::serial,
                                                    setup.supersample);
            ProjectionStack filtered = fdk_prefilter(stack, traj.geometry, Exec::serial);
            Volume vol = backproject(filtered, traj, identity_motion(traj.n_views()), setup.slice_grid,
                                     FdkMode::central_slice, Exec::serial);
            Image2D small = downsample_to(vol.central_slice(), setup.net_input, setup.net_input);
            out[k].slice = normalize_slice(small);
            out[k].label = static_cast<float>(rpe(traj, motion, setup.markers));
        } catch (const std::exception& e) {
#if defined(_OPENMP)
#pragma omp critical
#endif
            error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error("build_training_set: " + error);
    return out;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
    ma /= n; mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    double den = std::sqrt(saa * sbb);
    return den > 0 ? sab / den : 0.0;
}

} // namespace

TrainResult regressor_train(const std::vector<TrainingSample>& samples, const TrainConfig& cfg, Exec exec) {
    if (samples.size() < 50) throw std::invalid_argument("regressor_train: need >= 50 samples");
    if (cfg.val_fraction < 0.2) throw std::invalid_argument("regressor_train: held-out split must be >= 20 %");
    const int net_input = samples.front().slice.nx;
    for (const auto& s : samples)
        if (s.slice.nx != net_input || s.slice.ny != net_input)
            throw std::invalid_argument("regressor_train: inconsistent slice shapes");

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::shuffle(order.begin(), order.end(), rng);

    const int n_val = std::max(1, static_cast<int>(std::lround(cfg.val_fraction * samples.size())));
    const int n_train = static_cast<int>(samples.size()) - n_val;
    if (n_train < 1) throw std::invalid_argument("regressor_train: empty training split");
    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> val_idx(order.begin() + n_train, order.end());

    TrainResult res;
    res.model = RegressorNet(net_input);
    res.model.init_weights(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    auto& params = res.model.params();

    // standardized targets; the affine head absorbs the remap afterwards
    double label_mean = 0.0;
    for (int i : train_idx) label_mean += samples[i].label;
    label_mean /= n_train;
    double label_var = 0.0;
    for (int i : train_idx) label_var += (samples[i].label - label_mean) * (samples[i].label - label_mean);
    label_var /= n_train;
    const double label_sd = std::sqrt(std::max(label_var, 1e-12));
    auto target = [&](int idx) { return static_cast<float>((samples[idx].label - label_mean) / label_sd); };

    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0); // Adam moments
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    auto slice_span = [&](int idx) {
        const auto& s = samples[idx].slice;
        return std::span<const float>(s.v.data(), s.v.size());
    };

    auto eval_set = [&](const std::vector<int>& idx, std::vector<double>* preds) {
        // raw-unit predictions and MSE
        std::vector<double> p(idx.size(), 0.0);
        const int n = static_cast<int>(idx.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
        for (int i = 0; i < n; ++i)
            p[i] = res.model.forward(slice_span(idx[i])) * label_sd + label_mean;
        double mse = 0.0;
        for (int i = 0; i < n; ++i) {
            double d = p[i] - samples[idx[i]].label;
            mse += d * d;
        }
        if (preds) *preds = p;
        return mse / n;
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double train_loss = 0.0;
        int n_batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch) {
            const int bsz = std::min(cfg.batch, n_train - start);
            // per-sample gradients into slots, reduced in fixed order
            std::vector<std::vector<float>> slot_grads(bsz);
            std::vector<double> slot_loss(bsz, 0.0);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
#endif
            for (int b = 0; b < bsz; ++b) {
                int idx = train_idx[start + b];
                RegressorNet::Tape tape;
                float pred = res.model.forward_tape(slice_span(idx), tape);
                float err = pred - target(idx);
                slot_loss[b] = static_cast<double>(err) * err;
                slot_grads[b].assign(params.size(), 0.f);
                res.model.backward(tape, 2.f * err / static_cast<float>(bsz), slot_grads[b]);
            }
            std::vector<double> grad(params.size(), 0.0);
            double batch_loss = 0.0;
            for (int b = 0; b < bsz; ++b) {
                batch_loss += slot_loss[b];
                for (size_t k = 0; k < grad.size(); ++k) grad[k] += slot_grads[b][k];
            }
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("regressor_train: diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch) + ", step " + std::to_string(step));
            train_loss += batch_loss;
            ++n_batches;
            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (size_t k = 0; k < params.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                double update = cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
                params[k] = static_cast<float>(params[k] - update);
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_mse = train_loss / std::max(1, n_batches) * label_sd * label_sd; // raw units
        std::vector<double> vp;
        log.val_mse = eval_set(val_idx, &vp);
        std::vector<double> vl(val_idx.size());
        for (size_t i = 0; i < val_idx.size(); ++i) vl[i] = samples[val_idx[i]].label;
        log.val_pearson = pearson(vp, vl);
        res.log.push_back(log);
    }
    res.val_pearson = res.log.empty() ? 0.0 : res.log.back().val_pearson;
    // bake the target standardization into the affine head
    res.model.scale_output(static_cast<float>(label_sd), static_cast<float>(label_mean));
    return res;
}

double regressor_infer(const RegressorNet& net, const Image2D& normalized) {
    if (normalized.nx != net.input_size() || normalized.ny != net.input_size())
        throw std::invalid_argument("regressor_infer: slice shape mismatch");
    std::span<const float> span(normalized.v.data(), normalized.v.size());
    double y = net.forward(span);
    if (!std::isfinite(y)) throw std::runtime_error("regressor_infer: non-finite output");
    return std::max(0.0, y);
}

void save_training_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "epoch,train_mse,val_mse,val_pearson\n";
    f.precision(12);
    for (const auto& row : log)
        f << row.epoch << "," << row.train_mse << "," << row.val_mse << "," << row.val_pearson << "\n";
}

double IqmEvaluator::evaluate(const Image2D& slice, const MotionTrajectory& estimate) const {
    switch (kind) {
        case IqmKind::entropy:
            return entropy_iqm(slice, entropy_bins);
        case IqmKind::oracle_rpe: {
            if (!traj || !true_motion) throw std::invalid_argument("oracle IQM: missing true motion");
            return rpe_between(*traj, estimate, *true_motion, markers);
        }
        case IqmKind::regressor: {
            if (!model) throw std::invalid_argument("regressor IQM: missing model");
            Image2D small = downsample_to(slice, model->input_size(), model->input_size());
            return regressor_infer(*model, normalize_slice(small));
        }
    }
    throw std::logic_error("IqmEvaluator: bad kind");
}

} // namespace moco
