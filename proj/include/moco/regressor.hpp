#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace moco {

/// Compact convolutional RPE regressor: four 3x3 stride-2 convolutions
/// (widths 8-16-32-64), SiLU after each, global average pooling, affine map
/// to one scalar. Templated on the scalar so tests can run the gradient
/// check in double while models are stored in float.
template <typename T>
class RegressorNetT {
  public:
    static constexpr int kChannels[5] = {1, 8, 16, 32, 64};
    static constexpr int kNumConv = 4;

    explicit RegressorNetT(int input_size = 64) : input_size_(input_size) {
        if (input_size < 4) throw std::invalid_argument("RegressorNetT: input size must be >= 4");
        int n = input_size;
        spatial_[0] = n;
        for (int l = 0; l < kNumConv; ++l) {
            n = (n + 1) / 2; // 3x3, stride 2, pad 1
            spatial_[l + 1] = n;
        }
        size_t total = 0;
        for (int l = 0; l < kNumConv; ++l) {
            conv_w_off_[l] = total;
            total += static_cast<size_t>(kChannels[l + 1]) * kChannels[l] * 9;
            conv_b_off_[l] = total;
            total += kChannels[l + 1];
        }
        fc_w_off_ = total;
        total += kChannels[kNumConv];
        fc_b_off_ = total;
        total += 1;
        params_.assign(total, T(0));
    }

    int input_size() const { return input_size_; }
    size_t n_params() const { return params_.size(); }
    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }

    void init_weights(uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (int l = 0; l < kNumConv; ++l) {
            double bound = std::sqrt(6.0 / (kChannels[l] * 9));
            std::uniform_real_distribution<double> u(-bound, bound);
            size_t nw = static_cast<size_t>(kChannels[l + 1]) * kChannels[l] * 9;
            for (size_t k = 0; k < nw; ++k) params_[conv_w_off_[l] + k] = static_cast<T>(u(rng));
            for (int k = 0; k < kChannels[l + 1]; ++k) params_[conv_b_off_[l] + k] = T(0);
        }
        double bound = std::sqrt(6.0 / kChannels[kNumConv]);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int k = 0; k < kChannels[kNumConv]; ++k) params_[fc_w_off_ + k] = static_cast<T>(u(rng));
        params_[fc_b_off_] = T(0);
    }

    /// Activations of one forward pass, kept for backprop.
    struct Tape {
        std::vector<std::vector<T>> pre;  // pre-activation of each conv
        std::vector<std::vector<T>> act;  // act[0] = input, act[l+1] = silu(pre[l])
        std::vector<T> pooled;
        T output = T(0);
    };

    T forward(std::span<const T> img) const {
        Tape tape;
        return forward_tape(img, tape);
    }

    T forward_tape(std::span<const T> img, Tape& tape) const {
        if (img.size() != static_cast<size_t>(input_size_) * input_size_)
            throw std::invalid_argument("RegressorNetT: input shape mismatch");
        tape.pre.assign(kNumConv, {});
        tape.act.assign(kNumConv + 1, {});
        tape.act[0].assign(img.begin(), img.end());
        for (int l = 0; l < kNumConv; ++l) {
            conv_forward(l, tape.act[l], tape.pre[l]);
            tape.act[l + 1].resize(tape.pre[l].size());
            for (size_t k = 0; k < tape.pre[l].size(); ++k) tape.act[l + 1][k] = silu(tape.pre[l][k]);
        }
        const int c = kChannels[kNumConv];
        const int n = spatial_[kNumConv];
        tape.pooled.assign(c, T(0));
        for (int ch = 0; ch < c; ++ch) {
            T acc = T(0);
            const T* a = &tape.act[kNumConv][static_cast<size_t>(ch) * n * n];
            for (int k = 0; k < n * n; ++k) acc += a[k];
            tape.pooled[ch] = acc / static_cast<T>(n * n);
        }
        T y = params_[fc_b_off_];
        for (int ch = 0; ch < c; ++ch) y += params_[fc_w_off_ + ch] * tape.pooled[ch];
        tape.output = y;
        return y;
    }

    /// Folds an affine output remap y -> scale*y + shift into the final
    /// layer; exact because the head is linear.
    void scale_output(T scale, T shift) {
        for (int ch = 0; ch < kChannels[kNumConv]; ++ch) params_[fc_w_off_ + ch] *= scale;
        params_[fc_b_off_] = params_[fc_b_off_] * scale + shift;
    }

    /// Accumulates d(loss)/d(params) into grad for upstream dL/dy.
    void backward(const Tape& tape, T dy, std::vector<T>& grad) const {
        if (grad.size() != params_.size()) throw std::invalid_argument("backward: grad size mismatch");
        const int c = kChannels[kNumConv];
        const int n = spatial_[kNumConv];
        grad[fc_b_off_] += dy;
        std::vector<T> d_act(static_cast<size_t>(c) * n * n);
        for (int ch = 0; ch < c; ++ch) {
            grad[fc_w_off_ + ch] += dy * tape.pooled[ch];
            T dpool = dy * params_[fc_w_off_ + ch] / static_cast<T>(n * n);
            for (int k = 0; k < n * n; ++k) d_act[static_cast<size_t>(ch) * n * n + k] = dpool;
        }
        for (int l = kNumConv - 1; l >= 0; --l) {
            std::vector<T> d_pre(tape.pre[l].size());
            for (size_t k = 0; k < d_pre.size(); ++k) d_pre[k] = d_act[k] * silu_grad(tape.pre[l][k]);
            std::vector<T> d_in;
            conv_backward(l, tape.act[l], d_pre, grad, d_in, l > 0);
            d_act.swap(d_in);
        }
    }

  private:
    static T silu(T x) {
        T s = T(1) / (T(1) + std::exp(-x));
        return x * s;
    }
    static T silu_grad(T x) {
        T s = T(1) / (T(1) + std::exp(-x));
        return s * (T(1) + x * (T(1) - s));
    }

    void conv_forward(int l, const std::vector<T>& in, std::vector<T>& out) const {
        const int ci = kChannels[l], co = kChannels[l + 1];
        const int ni = spatial_[l], no = spatial_[l + 1];
        out.assign(static_cast<size_t>(co) * no * no, T(0));
        const T* w = &params_[conv_w_off_[l]];
        const T* b = &params_[conv_b_off_[l]];
        for (int oc = 0; oc < co; ++oc) {
            for (int oy = 0; oy < no; ++oy) {
                for (int ox = 0; ox < no; ++ox) {
                    T acc = b[oc];
                    for (int ic = 0; ic < ci; ++ic) {
                        const T* wp = w + (static_cast<size_t>(oc) * ci + ic) * 9;
                        const T* ip = &in[static_cast<size_t>(ic) * ni * ni];
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = 2 * oy - 1 + ky;
                            if (iy < 0 || iy >= ni) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = 2 * ox - 1 + kx;
                                if (ix < 0 || ix >= ni) continue;
                                acc += wp[ky * 3 + kx] * ip[static_cast<size_t>(iy) * ni + ix];
                            }
                        }
                    }
                    out[(static_cast<size_t>(oc) * no + oy) * no + ox] = acc;
                }
            }
        }
    }

    void conv_backward(int l, const std::vector<T>& in, const std::vector<T>& d_out,
                       std::vector<T>& grad, std::vector<T>& d_in, bool need_d_in) const {
        const int ci = kChannels[l], co = kChannels[l + 1];
        const int ni = spatial_[l], no = spatial_[l + 1];
        T* gw = &grad[conv_w_off_[l]];
        T* gb = &grad[conv_b_off_[l]];
        const T* w = &params_[conv_w_off_[l]];
        if (need_d_in) d_in.assign(static_cast<size_t>(ci) * ni * ni, T(0));
        for (int oc = 0; oc < co; ++oc) {
            for (int oy = 0; oy < no; ++oy) {
                for (int ox = 0; ox < no; ++ox) {
                    T d = d_out[(static_cast<size_t>(oc) * no + oy) * no + ox];
                    gb[oc] += d;
                    for (int ic = 0; ic < ci; ++ic) {
                        T* gwp = gw + (static_cast<size_t>(oc) * ci + ic) * 9;
                        const T* wp = w + (static_cast<size_t>(oc) * ci + ic) * 9;
                        const T* ip = &in[static_cast<size_t>(ic) * ni * ni];
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = 2 * oy - 1 + ky;
                            if (iy < 0 || iy >= ni) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = 2 * ox - 1 + kx;
                                if (ix < 0 || ix >= ni) continue;
                                gwp[ky * 3 + kx] += d * ip[static_cast<size_t>(iy) * ni + ix];
                                if (need_d_in)
                                    d_in[(static_cast<size_t>(ic) * ni + iy) * ni + ix] +=
                                        d * wp[ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    int input_size_;
    int spatial_[kNumConv + 1] = {};
    size_t conv_w_off_[kNumConv] = {};
    size_t conv_b_off_[kNumConv] = {};
    size_t fc_w_off_ = 0;
    size_t fc_b_off_ = 0;
    std::vector<T> params_;
};

using RegressorNet = RegressorNetT<float>;

void save_model(const std::string& path, const RegressorNet& net);
RegressorNet load_model(const std::string& path);

} // namespace moco
