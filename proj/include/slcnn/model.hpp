#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slcnn/ops.hpp"
#include "slcnn/rng.hpp"
#include "slcnn/tensor.hpp"

namespace slcnn {

enum class Task { single_label, multi_label };

std::string task_name(Task task);
Task parse_task(const std::string& name);

// Description of one sample-level DCNN: downsampling factor m per stage and
// n hidden conv/pool blocks behind a strided front-end. The "3^9" naming
// means (m=3, n=9); such a model consumes m^(n+1) samples.
struct ModelSpec {
    int m = 3;
    int n = 9;
    long channels = 64;
    long num_outputs = 0;
    Task task = Task::multi_label;

    std::string name() const; // "3^9"
    void validate() const;    // m in [2,5], n >= 1, channels >= 1, num_outputs >= 1
};

// Parses "m^n"; throws ValueError on anything else ("7^2x", "", "3^").
std::pair<int, int> parse_scale_name(const std::string& name);

// m^(n+1), overflow-checked.
long input_length(const ModelSpec& spec);

// Closed-form trainable parameter count (conv weights/biases + bn gamma/beta).
long model_param_count(const ModelSpec& spec);
// Trainable parameters plus batchnorm running statistics; this is what a
// checkpoint stores.
long model_state_count(const ModelSpec& spec);

enum class PoolKind {
    max,
    average, // verification-only: used by the smooth-descent property check
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

template <typename T>
struct ConvLayer {
    Param<T> w; // (out_ch, in_ch, k)
    Param<T> b; // (1, out_ch, 1)
    long stride = 1;
    PadMode pad = PadMode::valid;
};

template <typename T>
struct BnLayer {
    Param<T> gamma; // (1, C, 1)
    Param<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;
};

// Per-call caches the backward pass needs. One tape per forward_train call.
template <typename T>
struct ModelTape {
    Tensor<T> input;
    std::vector<Tensor<T>> conv_in;     // input of each conv (front, blocks, head)
    std::vector<BnCache<T>> bn_cache;   // front + each block
    std::vector<Tensor<T>> relu_in;     // bn output
    std::vector<Tensor<T>> pool_in;     // relu output, per block
    std::vector<std::vector<long>> pool_argmax;
    Tensor<T> head_in;                  // block n output == level -1 tap
    Tensor<T> probs;                    // head activation output
};

// The m^n sample-level DCNN:
//   front: conv(k=m, stride=m, valid) -> bn -> relu
//   n blocks: conv(k=m, stride=1, same) -> bn -> relu -> pool(m)
//   head: conv(k=1) -> sigmoid (multi-label) or softmax (single-label)
template <typename T>
class Model {
public:
    Model() = default;

    static Model build(const ModelSpec& spec, uint64_t seed, PoolKind pool = PoolKind::max) {
        spec.validate();
        Model model;
        model.spec_ = spec;
        model.pool_kind_ = pool;
        Rng rng(seed);

        model.front_ = make_conv(spec.channels, 1, spec.m, spec.m, PadMode::valid, rng);
        model.front_bn_ = make_bn(spec.channels);
        model.blocks_.clear();
        for (int i = 0; i < spec.n; ++i) {
            Block blk;
            blk.conv = make_conv(spec.channels, spec.channels, spec.m, 1, PadMode::same, rng);
            blk.bn = make_bn(spec.channels);
            model.blocks_.push_back(std::move(blk));
        }
        model.head_ = make_conv(spec.num_outputs, spec.channels, 1, 1, PadMode::valid, rng);
        return model;
    }

    const ModelSpec& spec() const { return spec_; }
    PoolKind pool_kind() const { return pool_kind_; }

    // Inference forward; (B, num_outputs, 1) probabilities.
    Tensor<T> forward(const Tensor<T>& segments, Mode mode) {
        return run(segments, mode, nullptr, nullptr, {});
    }

    // Forward that also returns the post-pool activation of the j-th block
    // from the top for each requested level -j.
    std::map<int, Tensor<T>> forward_with_taps(const Tensor<T>& segments,
                                               const std::vector<int>& levels, Mode mode) {
        validate_levels(levels);
        std::map<int, Tensor<T>> taps;
        run(segments, mode, nullptr, &taps, levels);
        return taps;
    }

    // Train-mode forward with caches for backward().
    Tensor<T> forward_train(const Tensor<T>& segments, ModelTape<T>& tape) {
        return run(segments, Mode::train, &tape, nullptr, {});
    }

    // dprobs is dLoss/d(activation output); fills every Param grad and
    // returns dLoss/d(input).
    Tensor<T> backward(const ModelTape<T>& tape, const Tensor<T>& dprobs) {
        Tensor<T> grad = spec_.task == Task::multi_label
                             ? sigmoid_backward(tape.probs, dprobs)
                             : softmax_backward(tape.probs, dprobs);

        size_t conv_idx = tape.conv_in.size() - 1; // head
        grad = conv1d_backward(tape.conv_in[conv_idx], head_.w.value, head_.stride, head_.pad,
                               grad, head_.w.grad, head_.b.grad);

        for (long i = static_cast<long>(blocks_.size()) - 1; i >= 0; --i) {
            Block& blk = blocks_[static_cast<size_t>(i)];
            const size_t li = static_cast<size_t>(i) + 1; // 0 is the front stage
            if (pool_kind_ == PoolKind::max) {
                grad = maxpool1d_backward(tape.pool_in[static_cast<size_t>(i)].time(),
                                          tape.pool_argmax[static_cast<size_t>(i)], grad);
            } else {
                grad = avgpool1d_backward(tape.pool_in[static_cast<size_t>(i)].time(), spec_.m, grad);
            }
            grad = relu_backward(tape.relu_in[li], grad);
            grad = batchnorm1d_backward(tape.bn_cache[li], blk.bn.gamma.value, grad,
                                        blk.bn.gamma.grad, blk.bn.beta.grad);
            grad = conv1d_backward(tape.conv_in[li], blk.conv.w.value, blk.conv.stride,
                                   blk.conv.pad, grad, blk.conv.w.grad, blk.conv.b.grad);
        }

        grad = relu_backward(tape.relu_in[0], grad);
        grad = batchnorm1d_backward(tape.bn_cache[0], front_bn_.gamma.value, grad,
                                    front_bn_.gamma.grad, front_bn_.beta.grad);
        return conv1d_backward(tape.conv_in[0], front_.w.value, front_.stride, front_.pad, grad,
                               front_.w.grad, front_.b.grad);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out{&front_.w, &front_.b, &front_bn_.gamma, &front_bn_.beta};
        for (Block& blk : blocks_) {
            out.push_back(&blk.conv.w);
            out.push_back(&blk.conv.b);
            out.push_back(&blk.bn.gamma);
            out.push_back(&blk.bn.beta);
        }
        out.push_back(&head_.w);
        out.push_back(&head_.b);
        return out;
    }

    void zero_grads() {
        for (Param<T>* p : params()) p->zero_grad();
    }

    // Checkpoint order: front, blocks, head; params interleaved with the
    // running statistics they belong to.
    std::vector<std::pair<std::string, Tensor<T>*>> named_state() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        auto add_conv = [&out](const std::string& prefix, ConvLayer<T>& conv) {
            out.emplace_back(prefix + ".w", &conv.w.value);
            out.emplace_back(prefix + ".b", &conv.b.value);
        };
        auto add_bn = [&out](const std::string& prefix, BnLayer<T>& bn) {
            out.emplace_back(prefix + ".gamma", &bn.gamma.value);
            out.emplace_back(prefix + ".beta", &bn.beta.value);
            out.emplace_back(prefix + ".running_mean", &bn.running_mean);
            out.emplace_back(prefix + ".running_var", &bn.running_var);
        };
        add_conv("front.conv", front_);
        add_bn("front.bn", front_bn_);
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string p = "block" + std::to_string(i);
            add_conv(p + ".conv", blocks_[i].conv);
            add_bn(p + ".bn", blocks_[i].bn);
        }
        add_conv("head.conv", head_);
        return out;
    }

    long param_count() { return model_param_count(spec_); }

    template <typename U>
    Model<U> cast() {
        Model<U> out;
        out.assign_spec(spec_, pool_kind_);
        auto src = named_state();
        auto dst = out.named_state();
        for (size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
        return out;
    }

    // Builds the layer structure with zeroed tensors; checkpoint loading
    // fills them in.
    void assign_spec(const ModelSpec& spec, PoolKind pool = PoolKind::max) {
        spec.validate();
        spec_ = spec;
        pool_kind_ = pool;
        front_ = zero_conv(spec.channels, 1, spec.m, spec.m, PadMode::valid);
        front_bn_ = make_bn(spec.channels);
        blocks_.clear();
        for (int i = 0; i < spec.n; ++i) {
            Block blk;
            blk.conv = zero_conv(spec.channels, spec.channels, spec.m, 1, PadMode::same);
            blk.bn = make_bn(spec.channels);
            blocks_.push_back(std::move(blk));
        }
        head_ = zero_conv(spec.num_outputs, spec.channels, 1, 1, PadMode::valid);
    }

private:
    struct Block {
        ConvLayer<T> conv;
        BnLayer<T> bn;
    };

    void validate_levels(const std::vector<int>& levels) const {
        for (int lvl : levels) {
            if (lvl >= 0 || -lvl > spec_.n) {
                throw ValueError("forward_with_taps: level " + std::to_string(lvl) +
                                 " invalid for " + spec_.name() + " (need -1 >= level >= -" +
                                 std::to_string(spec_.n) + ")");
            }
        }
    }

    // One code path serves plain forward, tapped forward and train forward,
    // so the tapped activations are by construction the tensors the next
    // layer consumes.
    Tensor<T> run(const Tensor<T>& segments, Mode mode, ModelTape<T>* tape,
                  std::map<int, Tensor<T>>* taps, const std::vector<int>& levels) {
        const long want = input_length(spec_);
        if (segments.time() != want) {
            throw ShapeError("forward: expected segments of length " + std::to_string(want) +
                             " for " + spec_.name() + ", got " + segments.shape_str());
        }
        if (segments.channels() != 1) {
            throw ShapeError("forward: expected mono (B x 1 x T) input, got " +
                             segments.shape_str());
        }
        if (tape) {
            *tape = ModelTape<T>{};
            tape->input = segments;
        }

        auto run_stage = [&](const Tensor<T>& x, ConvLayer<T>& conv, BnLayer<T>& bn) {
            if (tape) tape->conv_in.push_back(x);
            Tensor<T> y = conv1d_forward(x, conv.w.value, conv.b.value, conv.stride, conv.pad);
            BnCache<T> cache;
            y = batchnorm1d_forward(y, bn.gamma.value, bn.beta.value, mode, bn.running_mean,
                                    bn.running_var, static_cast<T>(kBnEps),
                                    static_cast<T>(kBnMomentum), tape ? &cache : nullptr);
            if (tape) {
                tape->bn_cache.push_back(std::move(cache));
                tape->relu_in.push_back(y);
            }
            return relu_forward(y);
        };

        Tensor<T> x = run_stage(segments, front_, front_bn_);
        const int n = spec_.n;
        for (int i = 0; i < n; ++i) {
            x = run_stage(x, blocks_[static_cast<size_t>(i)].conv, blocks_[static_cast<size_t>(i)].bn);
            if (tape) {
                tape->pool_in.push_back(x);
                tape->pool_argmax.emplace_back();
            }
            if (pool_kind_ == PoolKind::max) {
                x = maxpool1d_forward(x, spec_.m, tape ? &tape->pool_argmax.back() : nullptr);
            } else {
                x = avgpool1d_forward(x, spec_.m);
            }
            if (taps) {
                const int lvl = -(n - i); // block i (0-based) is level -(n-i)
                for (int want_lvl : levels) {
                    if (want_lvl == lvl) taps->emplace(lvl, x);
                }
            }
        }

        if (tape) {
            tape->head_in = x;
            tape->conv_in.push_back(x);
        }
        Tensor<T> logits = conv1d_forward(x, head_.w.value, head_.b.value, head_.stride, head_.pad);
        Tensor<T> probs = spec_.task == Task::multi_label ? sigmoid_forward(logits)
                                                          : softmax_forward(logits);
        if (tape) tape->probs = probs;
        return probs;
    }

    static ConvLayer<T> make_conv(long out_ch, long in_ch, long k, long stride, PadMode pad,
                                  Rng& rng) {
        ConvLayer<T> layer = zero_conv(out_ch, in_ch, k, stride, pad);
        // He init: zero-mean Gaussian scaled by sqrt(2/fan_in); biases zero.
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * k));
        for (long i = 0; i < layer.w.value.size(); ++i) {
            layer.w.value.flat(i) = static_cast<T>(rng.normal(0.0, stddev));
        }
        return layer;
    }

    static ConvLayer<T> zero_conv(long out_ch, long in_ch, long k, long stride, PadMode pad) {
        ConvLayer<T> layer;
        layer.w = Param<T>(out_ch, in_ch, k);
        layer.b = Param<T>(1, out_ch, 1);
        layer.stride = stride;
        layer.pad = pad;
        return layer;
    }

    static BnLayer<T> make_bn(long channels) {
        BnLayer<T> bn;
        bn.gamma = Param<T>(1, channels, 1);
        bn.gamma.value.fill(T(1));
        bn.beta = Param<T>(1, channels, 1);
        bn.running_mean = Tensor<T>(1, channels, 1);
        bn.running_var = Tensor<T>(1, channels, 1);
        bn.running_var.fill(T(1));
        return bn;
    }

    ModelSpec spec_;
    PoolKind pool_kind_ = PoolKind::max;
    ConvLayer<T> front_;
    BnLayer<T> front_bn_;
    std::vector<Block> blocks_;
    ConvLayer<T> head_;

    template <typename U>
    friend class Model;
};

} // namespace slcnn
