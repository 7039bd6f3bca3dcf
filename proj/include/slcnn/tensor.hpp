#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "slcnn/errors.hpp"

namespace slcnn {

// Rank-3 numeric array laid out row-major as (batch, channel, time).
// Everything in the pipeline moves through this type: waveforms are
// (segments, 1, samples), conv weights are (out_ch, in_ch, kernel),
// per-channel vectors are (1, channels, 1).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(long batch, long channels, long time)
        : b_(batch), c_(channels), t_(time) {
        if (batch < 1 || channels < 1 || time < 1) {
            throw ShapeError("Tensor: all dimensions must be >= 1, got " +
                             dims_str(batch, channels, time));
        }
        v_.assign(static_cast<size_t>(batch) * channels * time, T(0));
    }

    Tensor(long batch, long channels, long time, std::vector<T> values)
        : Tensor(batch, channels, time) {
        if (values.size() != v_.size()) {
            throw ShapeError("Tensor: " + std::to_string(values.size()) +
                             " values do not fill shape " + shape_str());
        }
        v_ = std::move(values);
    }

    long batch() const { return b_; }
    long channels() const { return c_; }
    long time() const { return t_; }
    long size() const { return static_cast<long>(v_.size()); }
    bool empty() const { return v_.empty(); }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }

    T& at(long b, long c, long t) { return v_[index(b, c, t)]; }
    T at(long b, long c, long t) const { return v_[index(b, c, t)]; }

    T& flat(long i) { return v_[static_cast<size_t>(i)]; }
    T flat(long i) const { return v_[static_cast<size_t>(i)]; }

    // Pointer to the contiguous time series at (b, c).
    T* row(long b, long c) { return v_.data() + index(b, c, 0); }
    const T* row(long b, long c) const { return v_.data() + index(b, c, 0); }

    void fill(T x) { std::fill(v_.begin(), v_.end(), x); }
    void zero() { fill(T(0)); }

    bool same_shape(const Tensor& o) const {
        return b_ == o.b_ && c_ == o.c_ && t_ == o.t_;
    }

    std::string shape_str() const { return dims_str(b_, c_, t_); }

    static std::string dims_str(long b, long c, long t) {
        std::ostringstream os;
        os << "(" << b << "x" << c << "x" << t << ")";
        return os.str();
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(b_, c_, t_);
        for (size_t i = 0; i < v_.size(); ++i) out.flat(static_cast<long>(i)) = static_cast<U>(v_[i]);
        return out;
    }

private:
    size_t index(long b, long c, long t) const {
        return (static_cast<size_t>(b) * c_ + c) * t_ + t;
    }

    long b_ = 0, c_ = 0, t_ = 0;
    std::vector<T> v_;
};

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), sizeof(T) * static_cast<size_t>(a.size())) == 0;
}

// Trainable tensor: value plus gradient and momentum buffers of the same
// shape. Gradients accumulate across backward calls until zero_grad().
template <typename T>
struct Param {
    Param() = default;
    Param(long b, long c, long t) : value(b, c, t), grad(b, c, t), momentum(b, c, t) {}
    explicit Param(Tensor<T> v)
        : value(std::move(v)),
          grad(value.batch(), value.channels(), value.time()),
          momentum(value.batch(), value.channels(), value.time()) {}

    void zero_grad() { grad.zero(); }

    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> momentum;
};

// Optional finite-value checking after each kernel. Off by default; tests
// flip it on to catch NaN/Inf escapes.
inline std::atomic<bool>& debug_checks_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}
inline void set_debug_checks(bool on) { debug_checks_flag().store(on); }
inline bool debug_checks() { return debug_checks_flag().load(); }

template <typename T>
void check_finite(const Tensor<T>& t, const char* where) {
    for (long i = 0; i < t.size(); ++i) {
        if (!std::isfinite(static_cast<double>(t.flat(i)))) {
            throw ValueError(std::string(where) + ": non-finite value at flat index " +
                             std::to_string(i));
        }
    }
}

template <typename T>
void maybe_check_finite(const Tensor<T>& t, const char* where) {
    if (debug_checks()) check_finite(t, where);
}

} // namespace slcnn
