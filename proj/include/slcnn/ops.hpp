#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "slcnn/tensor.hpp"

namespace slcnn {

enum class PadMode { valid, same };
enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// conv1d
//
// Cross-correlation convention (no kernel flip). Weights are (out_ch, in_ch,
// k). valid mode requires T >= k and emits floor((T - k)/stride) + 1 frames;
// same mode is stride-1 only, zero-pads (k-1)/2 left and k/2 right, and
// keeps the time length.
// ---------------------------------------------------------------------------

inline long conv1d_out_length(long T, long k, long stride, PadMode pad) {
    if (pad == PadMode::same) return T;
    return (T - k) / stride + 1;
}

template <typename T>
void conv1d_validate(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                     long stride, PadMode pad) {
    if (in.channels() != w.channels()) {
        throw ShapeError("conv1d: input channel count " + in.shape_str() +
                         " does not match weight in_ch " + w.shape_str());
    }
    if (b.batch() != 1 || b.channels() != w.batch() || b.time() != 1) {
        throw ShapeError("conv1d: bias shape " + b.shape_str() +
                         " must be (1x" + std::to_string(w.batch()) + "x1)");
    }
    if (stride < 1) throw ValueError("conv1d: stride must be >= 1, got " + std::to_string(stride));
    if (pad == PadMode::valid && in.time() < w.time()) {
        throw ShapeError("conv1d: valid mode needs time length >= kernel, got input " +
                         in.shape_str() + " vs kernel " + w.shape_str());
    }
    if (pad == PadMode::same && stride != 1) {
        throw ValueError("conv1d: same padding is defined here for stride 1 only");
    }
}

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                         long stride, PadMode pad) {
    conv1d_validate(in, w, b, stride, pad);
    const long B = in.batch(), Cin = in.channels(), Tin = in.time();
    const long Cout = w.batch(), K = w.time();
    const long pad_left = (pad == PadMode::same) ? (K - 1) / 2 : 0;
    const long Tout = conv1d_out_length(Tin, K, stride, pad);

    Tensor<T> out(B, Cout, Tout);
    for (long bi = 0; bi < B; ++bi) {
        for (long oc = 0; oc < Cout; ++oc) {
            T* orow = out.row(bi, oc);
            const T bias = b.at(0, oc, 0);
            for (long ot = 0; ot < Tout; ++ot) orow[ot] = bias;
            for (long ic = 0; ic < Cin; ++ic) {
                const T* irow = in.row(bi, ic);
                const T* wrow = w.row(oc, ic);
                for (long kk = 0; kk < K; ++kk) {
                    const T wv = wrow[kk];
                    const long shift = kk - pad_left;
                    // clip [ot_lo, ot_hi) so ot*stride + shift stays in range
                    long ot_lo = 0, ot_hi = Tout;
                    if (shift < 0) ot_lo = (-shift + stride - 1) / stride;
                    if (shift > Tin - 1 - (Tout - 1) * stride)
                        ot_hi = (Tin - shift + stride - 1) / stride;
                    for (long ot = ot_lo; ot < ot_hi; ++ot) {
                        orow[ot] += wv * irow[ot * stride + shift];
                    }
                }
            }
        }
    }
    maybe_check_finite(out, "conv1d_forward");
    return out;
}

// Returns d(input); accumulates into dw and db (which must be pre-shaped).
template <typename T>
Tensor<T> conv1d_backward(const Tensor<T>& in, const Tensor<T>& w, long stride, PadMode pad,
                          const Tensor<T>& dout, Tensor<T>& dw, Tensor<T>& db) {
    const long B = in.batch(), Cin = in.channels(), Tin = in.time();
    const long Cout = w.batch(), K = w.time();
    const long pad_left = (pad == PadMode::same) ? (K - 1) / 2 : 0;
    const long Tout = dout.time();

    if (!dw.same_shape(w)) {
        throw ShapeError("conv1d_backward: dw shape " + dw.shape_str() +
                         " does not match weights " + w.shape_str());
    }

    Tensor<T> din(B, Cin, Tin);
    for (long bi = 0; bi < B; ++bi) {
        for (long oc = 0; oc < Cout; ++oc) {
            const T* grow = dout.row(bi, oc);
            T gsum = T(0);
            for (long ot = 0; ot < Tout; ++ot) gsum += grow[ot];
            db.at(0, oc, 0) += gsum;
            for (long ic = 0; ic < Cin; ++ic) {
                const T* irow = in.row(bi, ic);
                T* dirow = din.row(bi, ic);
                const T* wrow = w.row(oc, ic);
                T* dwrow = dw.row(oc, ic);
                for (long kk = 0; kk < K; ++kk) {
                    const long shift = kk - pad_left;
                    long ot_lo = 0, ot_hi = Tout;
                    if (shift < 0) ot_lo = (-shift + stride - 1) / stride;
                    if (shift > Tin - 1 - (Tout - 1) * stride)
                        ot_hi = (Tin - shift + stride - 1) / stride;
                    const T wv = wrow[kk];
                    T wg = T(0);
                    for (long ot = ot_lo; ot < ot_hi; ++ot) {
                        const T g = grow[ot];
                        wg += irow[ot * stride + shift] * g;
                        dirow[ot * stride + shift] += wv * g;
                    }
                    dwrow[kk] += wg;
                }
            }
        }
    }
    maybe_check_finite(din, "conv1d_backward");
    return din;
}

// ---------------------------------------------------------------------------
// maxpool1d / avgpool1d
//
// Pool width must divide the time length (the m^n architecture arithmetic
// guarantees it). Max backward routes gradient to each window's argmax,
// first occurrence on ties. avgpool exists for the smooth-descent
// verification path and is not part of the trained architecture.
// ---------------------------------------------------------------------------

template <typename T>
void pool_validate(const Tensor<T>& in, long pool, const char* op) {
    if (pool < 1) throw ValueError(std::string(op) + ": pool must be >= 1");
    if (in.time() % pool != 0) {
        throw ShapeError(std::string(op) + ": time length " + std::to_string(in.time()) +
                         " not divisible by pool " + std::to_string(pool));
    }
}

template <typename T>
Tensor<T> maxpool1d_forward(const Tensor<T>& in, long pool, std::vector<long>* argmax = nullptr) {
    pool_validate(in, pool, "maxpool1d");
    const long B = in.batch(), C = in.channels(), Tout = in.time() / pool;
    Tensor<T> out(B, C, Tout);
    if (argmax) argmax->assign(static_cast<size_t>(B) * C * Tout, 0);
    size_t ai = 0;
    for (long bi = 0; bi < B; ++bi) {
        for (long c = 0; c < C; ++c) {
            const T* irow = in.row(bi, c);
            T* orow = out.row(bi, c);
            for (long ot = 0; ot < Tout; ++ot) {
                long best = ot * pool;
                T bv = irow[best];
                for (long j = 1; j < pool; ++j) {
                    const long idx = ot * pool + j;
                    if (irow[idx] > bv) { // strict > keeps the first index on ties
                        bv = irow[idx];
                        best = idx;
                    }
                }
                orow[ot] = bv;
                if (argmax) (*argmax)[ai] = best;
                ++ai;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> maxpool1d_backward(long in_time, const std::vector<long>& argmax,
                             const Tensor<T>& dout) {
    const long B = dout.batch(), C = dout.channels(), Tout = dout.time();
    Tensor<T> din(B, C, in_time);
    size_t ai = 0;
    for (long bi = 0; bi < B; ++bi) {
        for (long c = 0; c < C; ++c) {
            const T* grow = dout.row(bi, c);
            T* dirow = din.row(bi, c);
            for (long ot = 0; ot < Tout; ++ot) {
                dirow[argmax[ai]] += grow[ot];
                ++ai;
            }
        }
    }
    return din;
}

template <typename T>
Tensor<T> avgpool1d_forward(const Tensor<T>& in, long pool) {
    pool_validate(in, pool, "avgpool1d");
    const long B = in.batch(), C = in.channels(), Tout = in.time() / pool;
    const T inv = T(1) / static_cast<T>(pool);
    Tensor<T> out(B, C, Tout);
    for (long bi = 0; bi < B; ++bi) {
        for (long c = 0; c < C; ++c) {
            const T* irow = in.row(bi, c);
            T* orow = out.row(bi, c);
            for (long ot = 0; ot < Tout; ++ot) {
                T s = T(0);
                for (long j = 0; j < pool; ++j) s += irow[ot * pool + j];
                orow[ot] = s * inv;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> avgpool1d_backward(long in_time, long pool, const Tensor<T>& dout) {
    const long B = dout.batch(), C = dout.channels(), Tout = dout.time();
    const T inv = T(1) / static_cast<T>(pool);
    Tensor<T> din(B, C, in_time);
    for (long bi = 0; bi < B; ++bi) {
        for (long c = 0; c < C; ++c) {
            const T* grow = dout.row(bi, c);
            T* dirow = din.row(bi, c);
            for (long ot = 0; ot < Tout; ++ot) {
                const T g = grow[ot] * inv;
                for (long j = 0; j < pool; ++j) dirow[ot * pool + j] += g;
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// batchnorm1d
//
// Normalizes per channel over the batch x time population. Train mode uses
// biased batch statistics and updates running stats with momentum 0.9
// (running = 0.9*running + 0.1*batch). Infer mode uses running stats and
// never mutates them. eps defaults to 1e-5 at the call sites.
// ---------------------------------------------------------------------------

template <typename T>
struct BnCache {
    std::vector<T> mean;    // per channel
    std::vector<T> inv_std; // 1/sqrt(var + eps)
    Tensor<T> xhat;
};

template <typename T>
Tensor<T> batchnorm1d_forward(const Tensor<T>& in, const Tensor<T>& gamma, const Tensor<T>& beta,
                              Mode mode, Tensor<T>& running_mean, Tensor<T>& running_var,
                              T eps, T momentum, BnCache<T>* cache = nullptr) {
    const long B = in.batch(), C = in.channels(), Tt = in.time();
    if (gamma.channels() != C || beta.channels() != C) {
        throw ShapeError("batchnorm1d: gamma " + gamma.shape_str() + " / beta " +
                         beta.shape_str() + " do not match input channels " + in.shape_str());
    }
    const long N = B * Tt;
    Tensor<T> out(B, C, Tt);

    if (mode == Mode::train) {
        if (N < 2) {
            throw ValueError("batchnorm1d: train mode needs a per-channel population >= 2, got " +
                             std::to_string(N));
        }
        if (cache) {
            cache->mean.assign(C, T(0));
            cache->inv_std.assign(C, T(0));
            cache->xhat = Tensor<T>(B, C, Tt);
        }
        for (long c = 0; c < C; ++c) {
            T sum = T(0), sq = T(0);
            for (long bi = 0; bi < B; ++bi) {
                const T* irow = in.row(bi, c);
                for (long t = 0; t < Tt; ++t) {
                    sum += irow[t];
                    sq += irow[t] * irow[t];
                }
            }
            const T mean = sum / static_cast<T>(N);
            T var = sq / static_cast<T>(N) - mean * mean;
            if (var < T(0)) var = T(0); // guard fp cancellation
            const T inv_std = T(1) / std::sqrt(var + eps);
            const T g = gamma.at(0, c, 0), be = beta.at(0, c, 0);
            for (long bi = 0; bi < B; ++bi) {
                const T* irow = in.row(bi, c);
                T* orow = out.row(bi, c);
                T* xrow = cache ? cache->xhat.row(bi, c) : nullptr;
                for (long t = 0; t < Tt; ++t) {
                    const T xh = (irow[t] - mean) * inv_std;
                    if (xrow) xrow[t] = xh;
                    orow[t] = g * xh + be;
                }
            }
            running_mean.at(0, c, 0) = momentum * running_mean.at(0, c, 0) + (T(1) - momentum) * mean;
            running_var.at(0, c, 0) = momentum * running_var.at(0, c, 0) + (T(1) - momentum) * var;
            if (cache) {
                cache->mean[c] = mean;
                cache->inv_std[c] = inv_std;
            }
        }
    } else {
        for (long c = 0; c < C; ++c) {
            const T mean = running_mean.at(0, c, 0);
            const T inv_std = T(1) / std::sqrt(running_var.at(0, c, 0) + eps);
            const T g = gamma.at(0, c, 0), be = beta.at(0, c, 0);
            for (long bi = 0; bi < B; ++bi) {
                const T* irow = in.row(bi, c);
                T* orow = out.row(bi, c);
                for (long t = 0; t < Tt; ++t) {
                    orow[t] = g * (irow[t] - mean) * inv_std + be;
                }
            }
        }
    }
    maybe_check_finite(out, "batchnorm1d_forward");
    return out;
}

// Train-mode backward through the batch statistics. Accumulates dgamma and
// dbeta, returns d(input).
template <typename T>
Tensor<T> batchnorm1d_backward(const BnCache<T>& cache, const Tensor<T>& gamma,
                               const Tensor<T>& dout, Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const long B = dout.batch(), C = dout.channels(), Tt = dout.time();
    const long N = B * Tt;
    Tensor<T> din(B, C, Tt);
    for (long c = 0; c < C; ++c) {
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (long bi = 0; bi < B; ++bi) {
            const T* grow = dout.row(bi, c);
            const T* xrow = cache.xhat.row(bi, c);
            for (long t = 0; t < Tt; ++t) {
                sum_dy += grow[t];
                sum_dy_xhat += grow[t] * xrow[t];
            }
        }
        dgamma.at(0, c, 0) += sum_dy_xhat;
        dbeta.at(0, c, 0) += sum_dy;
        const T g = gamma.at(0, c, 0);
        const T scale = g * cache.inv_std[c] / static_cast<T>(N);
        for (long bi = 0; bi < B; ++bi) {
            const T* grow = dout.row(bi, c);
            const T* xrow = cache.xhat.row(bi, c);
            T* dirow = din.row(bi, c);
            for (long t = 0; t < Tt; ++t) {
                dirow[t] = scale * (static_cast<T>(N) * grow[t] - sum_dy - xrow[t] * sum_dy_xhat);
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// dense
//
// Affine map over feature vectors carried as (batch, dim, 1) tensors.
// Weights are (out_dim, in_dim, 1).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b) {
    if (in.channels() != w.channels() || in.time() != 1) {
        throw ShapeError("dense: input " + in.shape_str() + " does not match weights " +
                         w.shape_str() + " (expect (B x in_dim x 1))");
    }
    const long B = in.batch(), D = in.channels(), O = w.batch();
    Tensor<T> out(B, O, 1);
    for (long bi = 0; bi < B; ++bi) {
        const T* x = in.row(bi, 0);
        for (long o = 0; o < O; ++o) {
            const T* wrow = w.row(o, 0);
            T s = b.at(0, o, 0);
            for (long d = 0; d < D; ++d) s += wrow[d] * x[d];
            out.at(bi, o, 0) = s;
        }
    }
    maybe_check_finite(out, "dense_forward");
    return out;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& dout,
                         Tensor<T>& dw, Tensor<T>& db) {
    const long B = in.batch(), D = in.channels(), O = w.batch();
    Tensor<T> din(B, D, 1);
    for (long bi = 0; bi < B; ++bi) {
        const T* x = in.row(bi, 0);
        T* dx = din.row(bi, 0);
        for (long o = 0; o < O; ++o) {
            const T g = dout.at(bi, o, 0);
            const T* wrow = w.row(o, 0);
            T* dwrow = dw.row(o, 0);
            db.at(0, o, 0) += g;
            for (long d = 0; d < D; ++d) {
                dwrow[d] += g * x[d];
                dx[d] += g * wrow[d];
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& in) {
    Tensor<T> out(in.batch(), in.channels(), in.time());
    for (long i = 0; i < in.size(); ++i) out.flat(i) = in.flat(i) > T(0) ? in.flat(i) : T(0);
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& in, const Tensor<T>& dout) {
    Tensor<T> din(in.batch(), in.channels(), in.time());
    for (long i = 0; i < in.size(); ++i) din.flat(i) = in.flat(i) > T(0) ? dout.flat(i) : T(0);
    return din;
}

inline constexpr double kProbClamp = 1e-7;

// Output clamped into [1e-7, 1-1e-7] so downstream logs stay finite even
// when float saturates.
template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& in) {
    const T lo = static_cast<T>(kProbClamp), hi = T(1) - static_cast<T>(kProbClamp);
    Tensor<T> out(in.batch(), in.channels(), in.time());
    for (long i = 0; i < in.size(); ++i) {
        const T s = T(1) / (T(1) + std::exp(-in.flat(i)));
        out.flat(i) = std::min(hi, std::max(lo, s));
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& out, const Tensor<T>& dout) {
    Tensor<T> din(out.batch(), out.channels(), out.time());
    for (long i = 0; i < out.size(); ++i) {
        din.flat(i) = dout.flat(i) * out.flat(i) * (T(1) - out.flat(i));
    }
    return din;
}

// Softmax over the channel axis at each (batch, t), max-subtracted.
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& in) {
    const long B = in.batch(), C = in.channels(), Tt = in.time();
    Tensor<T> out(B, C, Tt);
    for (long bi = 0; bi < B; ++bi) {
        for (long t = 0; t < Tt; ++t) {
            T mx = in.at(bi, 0, t);
            for (long c = 1; c < C; ++c) mx = std::max(mx, in.at(bi, c, t));
            T z = T(0);
            for (long c = 0; c < C; ++c) {
                const T e = std::exp(in.at(bi, c, t) - mx);
                out.at(bi, c, t) = e;
                z += e;
            }
            const T inv = T(1) / z;
            for (long c = 0; c < C; ++c) out.at(bi, c, t) *= inv;
        }
    }
    return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& out, const Tensor<T>& dout) {
    const long B = out.batch(), C = out.channels(), Tt = out.time();
    Tensor<T> din(B, C, Tt);
    for (long bi = 0; bi < B; ++bi) {
        for (long t = 0; t < Tt; ++t) {
            T dot = T(0);
            for (long c = 0; c < C; ++c) dot += out.at(bi, c, t) * dout.at(bi, c, t);
            for (long c = 0; c < C; ++c) {
                din.at(bi, c, t) = out.at(bi, c, t) * (dout.at(bi, c, t) - dot);
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// losses
//
// bce: mean over batch and labels, probabilities clamped to
// [1e-7, 1-1e-7] before the logs. ce: mean over batch of -log p[label].
// ---------------------------------------------------------------------------

template <typename T>
T bce_loss(const Tensor<T>& probs, const Tensor<T>& targets, Tensor<T>* dprobs = nullptr) {
    if (!probs.same_shape(targets)) {
        throw ShapeError("bce: predictions " + probs.shape_str() + " vs targets " +
                         targets.shape_str());
    }
    const T lo = static_cast<T>(kProbClamp), hi = T(1) - static_cast<T>(kProbClamp);
    const long N = probs.size();
    if (dprobs) *dprobs = Tensor<T>(probs.batch(), probs.channels(), probs.time());
    double acc = 0.0;
    for (long i = 0; i < N; ++i) {
        const T y = targets.flat(i);
        if (y != T(0) && y != T(1)) {
            throw ValueError("bce: target at flat index " + std::to_string(i) +
                             " is " + std::to_string(static_cast<double>(y)) +
                             ", must be 0 or 1");
        }
        const T pc = std::min(hi, std::max(lo, probs.flat(i)));
        acc += -(static_cast<double>(y) * std::log(static_cast<double>(pc)) +
                 (1.0 - static_cast<double>(y)) * std::log(1.0 - static_cast<double>(pc)));
        if (dprobs) {
            dprobs->flat(i) = (pc - y) / (pc * (T(1) - pc)) / static_cast<T>(N);
        }
    }
    return static_cast<T>(acc / static_cast<double>(N));
}

template <typename T>
T ce_loss(const Tensor<T>& probs, const std::vector<long>& labels, Tensor<T>* dprobs = nullptr) {
    const long B = probs.batch(), C = probs.channels();
    if (probs.time() != 1) {
        throw ShapeError("ce: expected (B x classes x 1) probabilities, got " + probs.shape_str());
    }
    if (static_cast<long>(labels.size()) != B) {
        throw ShapeError("ce: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(B));
    }
    const T tiny = static_cast<T>(1e-12);
    if (dprobs) *dprobs = Tensor<T>(B, C, 1);
    double acc = 0.0;
    for (long bi = 0; bi < B; ++bi) {
        const long y = labels[bi];
        if (y < 0 || y >= C) {
            throw ValueError("ce: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(C) + ")");
        }
        const T p = std::max(tiny, probs.at(bi, y, 0));
        acc += -std::log(static_cast<double>(p));
        if (dprobs) dprobs->at(bi, y, 0) = -T(1) / (p * static_cast<T>(B));
    }
    return static_cast<T>(acc / static_cast<double>(B));
}

// ---------------------------------------------------------------------------
// sgd
//
// v <- momentum*v + g; step = g + momentum*v (nesterov) or v (classical);
// w <- w - lr*step. Buffers advance even at lr=0; values do not.
// ---------------------------------------------------------------------------

template <typename T>
void sgd_step(const std::vector<Param<T>*>& params, T lr, T momentum, bool nesterov) {
    for (Param<T>* p : params) {
        const long n = p->value.size();
        for (long i = 0; i < n; ++i) {
            const T g = p->grad.flat(i);
            T v = momentum * p->momentum.flat(i) + g;
            p->momentum.flat(i) = v;
            const T step = nesterov ? g + momentum * v : v;
            if (lr != T(0)) p->value.flat(i) -= lr * step;
        }
    }
}

} // namespace slcnn
