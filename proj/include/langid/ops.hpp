// The operations the classifier is built from, each paired with an exact
// backward pass. Backward functions accumulate (+=) into their gradient
// arguments so minibatch gradients can be summed in a fixed order.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "langid/rng.hpp"
#include "langid/tensor.hpp"

namespace langid {

constexpr double kLogFloor = 1e-12;

// -------- small dense kernels --------

// y = A x, A is m x n.
inline Tensor mul_mv(const Tensor& A, const Tensor& x) {
    Tensor::require(A.rank() == 2 && x.rank() == 1 && A.dim(1) == x.dim(0),
                    "mul_mv: shape mismatch " + shape_string(A) + " * " + shape_string(x));
    Tensor y = Tensor::zeros({A.dim(0)});
    for (int i = 0; i < A.dim(0); ++i) {
        double acc = 0.0;
        for (int j = 0; j < A.dim(1); ++j) acc += A.at(i, j) * x.at(j);
        y.at(i) = acc;
    }
    return y;
}

// dA += dy xᵀ
inline void add_outer(Tensor& dA, const Tensor& dy, const Tensor& x) {
    for (int i = 0; i < dA.dim(0); ++i) {
        for (int j = 0; j < dA.dim(1); ++j) dA.at(i, j) += dy.at(i) * x.at(j);
    }
}

// dx += Aᵀ dy
inline void add_mtv(Tensor& dx, const Tensor& A, const Tensor& dy) {
    for (int i = 0; i < A.dim(0); ++i) {
        double d = dy.at(i);
        for (int j = 0; j < A.dim(1); ++j) dx.at(j) += A.at(i, j) * d;
    }
}

// -------- affine --------

inline Tensor affine(const Tensor& A, const Tensor& x, const Tensor& b) {
    Tensor y = mul_mv(A, x);
    Tensor::require(b.rank() == 1 && b.dim(0) == y.dim(0), "affine: bias shape");
    for (int i = 0; i < y.dim(0); ++i) y.at(i) += b.at(i);
    return y;
}

inline void affine_backward(const Tensor& A, const Tensor& x, const Tensor& d_y,
                            Tensor& d_A, Tensor& d_x, Tensor& d_b) {
    add_outer(d_A, d_y, x);
    add_mtv(d_x, A, d_y);
    d_b += d_y;
}

// -------- narrow (valid-region) convolution --------
// input d x L, filters k x d x w, bias k  ->  k x (L - w + 1)

inline Tensor narrow_conv(const Tensor& input, const Tensor& filters,
                          const Tensor& bias) {
    Tensor::require(input.rank() == 2 && filters.rank() == 3 && bias.rank() == 1,
                    "narrow_conv: ranks");
    int d = input.dim(0), L = input.dim(1);
    int k = filters.dim(0), w = filters.dim(2);
    Tensor::require(filters.dim(1) == d, "narrow_conv: channel mismatch");
    Tensor::require(bias.dim(0) == k, "narrow_conv: bias size");
    if (L < w) {
        throw std::invalid_argument("narrow_conv: input narrower than filter");
    }
    Tensor out = Tensor::zeros({k, L - w + 1});
    for (int i = 0; i < k; ++i) {
        for (int t = 0; t <= L - w; ++t) {
            double acc = bias.at(i);
            for (int r = 0; r < d; ++r) {
                for (int c = 0; c < w; ++c) {
                    acc += filters.at(i, r, c) * input.at(r, t + c);
                }
            }
            out.at(i, t) = acc;
        }
    }
    return out;
}

inline void narrow_conv_backward(const Tensor& input, const Tensor& filters,
                                 const Tensor& d_out, Tensor& d_input,
                                 Tensor& d_filters, Tensor& d_bias) {
    int d = input.dim(0), L = input.dim(1);
    int k = filters.dim(0), w = filters.dim(2);
    for (int i = 0; i < k; ++i) {
        for (int t = 0; t <= L - w; ++t) {
            double g = d_out.at(i, t);
            d_bias.at(i) += g;
            for (int r = 0; r < d; ++r) {
                for (int c = 0; c < w; ++c) {
                    d_filters.at(i, r, c) += g * input.at(r, t + c);
                    d_input.at(r, t + c) += g * filters.at(i, r, c);
                }
            }
        }
    }
}

// -------- ReLU --------

inline Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

inline void relu_backward(const Tensor& x_pre, const Tensor& d_out, Tensor& d_in) {
    for (std::size_t i = 0; i < x_pre.data.size(); ++i) {
        if (x_pre.data[i] > 0.0) d_in.data[i] += d_out.data[i];
    }
}

// -------- max pool across time --------
// x is k x L; output k. Ties go to the earliest time index.

inline Tensor max_pool_time(const Tensor& x, std::vector<int>* argmax) {
    Tensor::require(x.rank() == 2, "max_pool_time: rank");
    int k = x.dim(0), L = x.dim(1);
    Tensor y = Tensor::zeros({k});
    if (argmax) argmax->assign(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
        int best = 0;
        for (int t = 1; t < L; ++t) {
            if (x.at(i, t) > x.at(i, best)) best = t;
        }
        y.at(i) = x.at(i, best);
        if (argmax) (*argmax)[static_cast<std::size_t>(i)] = best;
    }
    return y;
}

inline void max_pool_time_backward(const std::vector<int>& argmax,
                                   const Tensor& d_out, Tensor& d_in) {
    for (int i = 0; i < d_out.dim(0); ++i) {
        d_in.at(i, argmax[static_cast<std::size_t>(i)]) += d_out.at(i);
    }
}

// -------- dropout (inverted scaling) --------

inline Tensor dropout_mask(const std::vector<int>& shape, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout: rate must be in [0,1)");
    }
    Tensor m = Tensor::zeros(shape);
    for (double& v : m.data) v = rng.bernoulli(rate) ? 0.0 : 1.0;
    return m;
}

// y = x .* mask / (1 - rate); identity when mask is all ones and rate 0.
inline Tensor dropout_apply(const Tensor& x, const Tensor& mask, double rate) {
    Tensor::require(x.same_shape(mask), "dropout: mask shape");
    double keep = 1.0 - rate;
    Tensor y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= mask.data[i] / keep;
    return y;
}

inline Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng,
                      Tensor* mask_out = nullptr) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout: rate must be in [0,1)");
    }
    if (!training || rate == 0.0) {
        if (mask_out) *mask_out = Tensor();
        return x;
    }
    Tensor mask = dropout_mask(x.shape, rate, rng);
    if (mask_out) *mask_out = mask;
    return dropout_apply(x, mask, rate);
}

inline void dropout_backward(const Tensor& mask, double rate, const Tensor& d_out,
                             Tensor& d_in) {
    if (mask.data.empty()) {  // was identity
        d_in += d_out;
        return;
    }
    double keep = 1.0 - rate;
    for (std::size_t i = 0; i < d_out.data.size(); ++i) {
        d_in.data[i] += d_out.data[i] * mask.data[i] / keep;
    }
}

// -------- softmax over a vector --------

inline Tensor softmax(const Tensor& x) {
    Tensor::require(x.rank() == 1, "softmax: expects a vector");
    Tensor y = x;
    double mx = y.data[0];
    for (double v : y.data) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : y.data) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : y.data) v /= sum;
    return y;
}

inline void softmax_backward(const Tensor& y, const Tensor& d_out, Tensor& d_in) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) dot += d_out.data[i] * y.data[i];
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        d_in.data[i] += y.data[i] * (d_out.data[i] - dot);
    }
}

// -------- cross entropy with soft targets --------

inline double cross_entropy(const Tensor& pred, const Tensor& target) {
    Tensor::require(pred.same_shape(target), "cross_entropy: shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (target.data[i] != 0.0) {
            loss -= target.data[i] * std::log(std::max(pred.data[i], kLogFloor));
        }
    }
    return loss;
}

inline void cross_entropy_backward(const Tensor& pred, const Tensor& target,
                                   double d_loss, Tensor& d_pred) {
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (target.data[i] != 0.0 && pred.data[i] >= kLogFloor) {
            d_pred.data[i] -= d_loss * target.data[i] / pred.data[i];
        }
    }
}

// -------- LSTM step (gates per Sak et al., diagonal peepholes) --------

struct LstmParams {
    Tensor w_ix, w_ih, p_ic, b_i;
    Tensor w_fx, w_fh, p_fc, b_f;
    Tensor w_cx, w_ch, b_c;
    Tensor w_ox, w_oh, p_oc, b_o;
    bool peepholes = true;

    int input_size() const { return w_ix.dim(1); }
    int hidden_size() const { return w_ix.dim(0); }

    static LstmParams zeros(int input, int hidden, bool peepholes = true) {
        LstmParams p;
        auto mat = [&](int m, int n) { return Tensor::zeros({m, n}); };
        auto vec = [&](int m) { return Tensor::zeros({m}); };
        p.w_ix = mat(hidden, input); p.w_ih = mat(hidden, hidden);
        p.p_ic = vec(hidden); p.b_i = vec(hidden);
        p.w_fx = mat(hidden, input); p.w_fh = mat(hidden, hidden);
        p.p_fc = vec(hidden); p.b_f = vec(hidden);
        p.w_cx = mat(hidden, input); p.w_ch = mat(hidden, hidden);
        p.b_c = vec(hidden);
        p.w_ox = mat(hidden, input); p.w_oh = mat(hidden, hidden);
        p.p_oc = vec(hidden); p.b_o = vec(hidden);
        p.peepholes = peepholes;
        return p;
    }

    std::vector<std::pair<std::string, Tensor*>> tensor_list(const std::string& prefix) {
        return {
            {prefix + ".w_ix", &w_ix}, {prefix + ".w_ih", &w_ih},
            {prefix + ".p_ic", &p_ic}, {prefix + ".b_i", &b_i},
            {prefix + ".w_fx", &w_fx}, {prefix + ".w_fh", &w_fh},
            {prefix + ".p_fc", &p_fc}, {prefix + ".b_f", &b_f},
            {prefix + ".w_cx", &w_cx}, {prefix + ".w_ch", &w_ch},
            {prefix + ".b_c", &b_c},
            {prefix + ".w_ox", &w_ox}, {prefix + ".w_oh", &w_oh},
            {prefix + ".p_oc", &p_oc}, {prefix + ".b_o", &b_o},
        };
    }

    // Everything except the gate biases, in a fixed order.
    std::vector<Tensor*> weight_tensors() {
        return {&w_ix, &w_ih, &p_ic, &w_fx, &w_fh, &p_fc,
                &w_cx, &w_ch, &w_ox, &w_oh, &p_oc};
    }
};

struct LstmState {
    Tensor h, c;
    static LstmState zeros(int hidden) {
        return {Tensor::zeros({hidden}), Tensor::zeros({hidden})};
    }
};

struct LstmStepTrace {
    Tensor x, h_prev, c_prev;
    Tensor i, f, g, o, c, tanh_c;
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline LstmState lstm_step(const LstmParams& p, const Tensor& x,
                           const LstmState& prev, LstmStepTrace* trace = nullptr) {
    Tensor::require(x.rank() == 1 && x.dim(0) == p.input_size(),
                    "lstm_step: input shape");
    Tensor::require(prev.h.dim(0) == p.hidden_size() &&
                        prev.c.dim(0) == p.hidden_size(),
                    "lstm_step: state shape");
    int H = p.hidden_size();

    Tensor a_i = affine(p.w_ix, x, p.b_i);
    Tensor a_f = affine(p.w_fx, x, p.b_f);
    Tensor a_g = affine(p.w_cx, x, p.b_c);
    Tensor a_o = affine(p.w_ox, x, p.b_o);
    {
        Tensor hi = mul_mv(p.w_ih, prev.h), hf = mul_mv(p.w_fh, prev.h);
        Tensor hg = mul_mv(p.w_ch, prev.h), ho = mul_mv(p.w_oh, prev.h);
        for (int j = 0; j < H; ++j) {
            a_i.at(j) += hi.at(j);
            a_f.at(j) += hf.at(j);
            a_g.at(j) += hg.at(j);
            a_o.at(j) += ho.at(j);
        }
    }
    if (p.peepholes) {
        for (int j = 0; j < H; ++j) {
            a_i.at(j) += p.p_ic.at(j) * prev.c.at(j);
            a_f.at(j) += p.p_fc.at(j) * prev.c.at(j);
        }
    }

    Tensor i = Tensor::zeros({H}), f = Tensor::zeros({H}), g = Tensor::zeros({H});
    for (int j = 0; j < H; ++j) {
        i.at(j) = sigmoid(a_i.at(j));
        f.at(j) = sigmoid(a_f.at(j));
        g.at(j) = std::tanh(a_g.at(j));
    }
    Tensor c = Tensor::zeros({H});
    for (int j = 0; j < H; ++j) c.at(j) = f.at(j) * prev.c.at(j) + i.at(j) * g.at(j);

    if (p.peepholes) {
        for (int j = 0; j < H; ++j) a_o.at(j) += p.p_oc.at(j) * c.at(j);
    }
    Tensor o = Tensor::zeros({H}), tanh_c = Tensor::zeros({H}), h = Tensor::zeros({H});
    for (int j = 0; j < H; ++j) {
        o.at(j) = sigmoid(a_o.at(j));
        tanh_c.at(j) = std::tanh(c.at(j));
        h.at(j) = o.at(j) * tanh_c.at(j);
    }

    if (trace) {
        trace->x = x;
        trace->h_prev = prev.h;
        trace->c_prev = prev.c;
        trace->i = i; trace->f = f; trace->g = g; trace->o = o;
        trace->c = c; trace->tanh_c = tanh_c;
    }
    check_finite(h, "lstm_step.h");
    return {h, c};
}

// Gradients accumulate into `grads` (same layout as the parameters) and
// into d_x / d_h_prev / d_c_prev.
inline void lstm_step_backward(const LstmParams& p, const LstmStepTrace& t,
                               const Tensor& d_h, const Tensor& d_c_in,
                               LstmParams& grads, Tensor& d_x,
                               Tensor& d_h_prev, Tensor& d_c_prev) {
    int H = p.hidden_size();
    Tensor d_a_o = Tensor::zeros({H}), d_c = Tensor::zeros({H});
    for (int j = 0; j < H; ++j) {
        double dov = d_h.at(j) * t.tanh_c.at(j);
        d_a_o.at(j) = dov * t.o.at(j) * (1.0 - t.o.at(j));
        d_c.at(j) = d_h.at(j) * t.o.at(j) * (1.0 - t.tanh_c.at(j) * t.tanh_c.at(j)) +
                    d_c_in.at(j);
        if (p.peepholes) d_c.at(j) += p.p_oc.at(j) * d_a_o.at(j);
    }

    Tensor d_a_i = Tensor::zeros({H}), d_a_f = Tensor::zeros({H}),
           d_a_g = Tensor::zeros({H});
    for (int j = 0; j < H; ++j) {
        double di = d_c.at(j) * t.g.at(j);
        double dg = d_c.at(j) * t.i.at(j);
        double df = d_c.at(j) * t.c_prev.at(j);
        d_a_i.at(j) = di * t.i.at(j) * (1.0 - t.i.at(j));
        d_a_g.at(j) = dg * (1.0 - t.g.at(j) * t.g.at(j));
        d_a_f.at(j) = df * t.f.at(j) * (1.0 - t.f.at(j));
        d_c_prev.at(j) += d_c.at(j) * t.f.at(j);
        if (p.peepholes) {
            d_c_prev.at(j) += p.p_ic.at(j) * d_a_i.at(j) + p.p_fc.at(j) * d_a_f.at(j);
            grads.p_ic.at(j) += d_a_i.at(j) * t.c_prev.at(j);
            grads.p_fc.at(j) += d_a_f.at(j) * t.c_prev.at(j);
            grads.p_oc.at(j) += d_a_o.at(j) * t.c.at(j);
        }
    }

    add_outer(grads.w_ix, d_a_i, t.x);  add_outer(grads.w_ih, d_a_i, t.h_prev);
    add_outer(grads.w_fx, d_a_f, t.x);  add_outer(grads.w_fh, d_a_f, t.h_prev);
    add_outer(grads.w_cx, d_a_g, t.x);  add_outer(grads.w_ch, d_a_g, t.h_prev);
    add_outer(grads.w_ox, d_a_o, t.x);  add_outer(grads.w_oh, d_a_o, t.h_prev);
    grads.b_i += d_a_i; grads.b_f += d_a_f; grads.b_c += d_a_g; grads.b_o += d_a_o;

    add_mtv(d_x, p.w_ix, d_a_i); add_mtv(d_x, p.w_fx, d_a_f);
    add_mtv(d_x, p.w_cx, d_a_g); add_mtv(d_x, p.w_ox, d_a_o);
    add_mtv(d_h_prev, p.w_ih, d_a_i); add_mtv(d_h_prev, p.w_fh, d_a_f);
    add_mtv(d_h_prev, p.w_ch, d_a_g); add_mtv(d_h_prev, p.w_oh, d_a_o);
}

}  // namespace langid
