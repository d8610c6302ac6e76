#pragma once

// Three-phase signal mathematics: waveform synthesis, Park transforms,
// power computation, moving-average RMS and fundamental-frequency
// dynamic phasors. Everything here is templated on the scalar type and
// operates on caller-owned values.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "phil/errors.hpp"

namespace phil {

using Real = double;
using Complex = std::complex<Real>;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
inline constexpr Scalar kTwoPi = Scalar(2) * std::numbers::pi_v<Scalar>;

template <typename Scalar>
inline constexpr Scalar kPhaseShift = kTwoPi<Scalar> / Scalar(3);

/// Time-stamped instantaneous (a, b, c) triple.
template <typename Scalar>
struct ThreePhase {
    Scalar t = Scalar(0);
    Vector3<Scalar> abc = Vector3<Scalar>::Zero();

    ThreePhase() = default;
    ThreePhase(Scalar time, const Vector3<Scalar>& values) : t(time), abc(values) {}
    ThreePhase(Scalar time, Scalar a, Scalar b, Scalar c) : t(time), abc(a, b, c) {}

    Scalar a() const { return abc(0); }
    Scalar b() const { return abc(1); }
    Scalar c() const { return abc(2); }

    bool finite() const { return abc.allFinite(); }

    bool operator==(const ThreePhase&) const = default;
};

using ThreePhaseSample = ThreePhase<Real>;

/// Rotating-frame projection. `theta` is the transform angle used.
template <typename Scalar>
struct DqFrame {
    Scalar d = Scalar(0);
    Scalar q = Scalar(0);
    Scalar zero = Scalar(0);
    Scalar theta = Scalar(0);

    /// d + jq, the complex amplitude relative to the frame angle.
    std::complex<Scalar> phasor() const { return {d, q}; }
    Scalar magnitude() const { return std::hypot(d, q); }
};

/// Fundamental-frequency complex amplitude (peak convention) such that
/// x(t) = Re{(re + j im) e^{j omega0 t}}.
template <typename Scalar>
struct DynamicPhasor {
    Scalar re = Scalar(0);
    Scalar im = Scalar(0);
    Scalar omega0 = Scalar(0);

    std::complex<Scalar> value() const { return {re, im}; }
    Scalar magnitude() const { return std::abs(value()); }
};

template <typename Scalar>
struct PowerPair {
    Scalar p = Scalar(0);
    Scalar q = Scalar(0);
};

template <typename Scalar>
inline Scalar wrap_angle(Scalar theta) {
    theta = std::fmod(theta, kTwoPi<Scalar>);
    if (theta < Scalar(0))
        theta += kTwoPi<Scalar>;
    return theta;
}

template <typename Scalar>
ThreePhase<Scalar> synth_three_phase(Scalar amplitude_peak, Scalar freq, Scalar phase0, Scalar t) {
    const Scalar angle = kTwoPi<Scalar> * freq * t + phase0;
    return {t, amplitude_peak * std::cos(angle), amplitude_peak * std::cos(angle - kPhaseShift<Scalar>),
            amplitude_peak * std::cos(angle - Scalar(2) * kPhaseShift<Scalar>)};
}

/// Amplitude-invariant Park matrix, cos reference on phase a. A set
/// aligned with theta maps to q = 0; a set leading theta gives q > 0.
template <typename Scalar>
Matrix3<Scalar> park_matrix(Scalar theta) {
    const Scalar k = kPhaseShift<Scalar>;
    Matrix3<Scalar> m;
    m << std::cos(theta), std::cos(theta - k), std::cos(theta + k),
        -std::sin(theta), -std::sin(theta - k), -std::sin(theta + k),
        Scalar(0.5), Scalar(0.5), Scalar(0.5);
    return (Scalar(2) / Scalar(3)) * m;
}

template <typename Scalar>
Matrix3<Scalar> inverse_park_matrix(Scalar theta) {
    const Scalar k = kPhaseShift<Scalar>;
    Matrix3<Scalar> m;
    m << std::cos(theta), -std::sin(theta), Scalar(1),
        std::cos(theta - k), -std::sin(theta - k), Scalar(1),
        std::cos(theta + k), -std::sin(theta + k), Scalar(1);
    return m;
}

template <typename Scalar>
DqFrame<Scalar> park_transform(const ThreePhase<Scalar>& s, Scalar theta) {
    const Vector3<Scalar> dq0 = park_matrix(theta) * s.abc;
    return {dq0(0), dq0(1), dq0(2), theta};
}

template <typename Scalar>
ThreePhase<Scalar> inverse_park(const DqFrame<Scalar>& f, Scalar theta, Scalar t = Scalar(0)) {
    return {t, inverse_park_matrix(theta) * Vector3<Scalar>(f.d, f.q, f.zero)};
}

/// Balanced abc set for a complex amplitude relative to `theta`.
template <typename Scalar>
ThreePhase<Scalar> balanced_from_phasor(std::complex<Scalar> phasor, Scalar theta, Scalar t = Scalar(0)) {
    return inverse_park(DqFrame<Scalar>{phasor.real(), phasor.imag(), Scalar(0), theta}, theta, t);
}

/// p = va ia + vb ib + vc ic. Samples further apart than `max_skew`
/// are rejected.
template <typename Scalar>
Scalar instantaneous_power(const ThreePhase<Scalar>& v, const ThreePhase<Scalar>& i, Scalar max_skew) {
    if (std::abs(v.t - i.t) > max_skew * (Scalar(1) + Scalar(1e-9)))
        throw ConfigError("instantaneous_power: voltage and current timestamps differ by more than one step");
    return v.abc.dot(i.abc);
}

/// P = 3/2 (vd id + vq iq), Q = 3/2 (vq id - vd iq); positive Q is
/// absorbed by a lagging (inductive) current.
template <typename Scalar>
PowerPair<Scalar> pq_from_dq(const DqFrame<Scalar>& v, const DqFrame<Scalar>& i) {
    return {Scalar(1.5) * (v.d * i.d + v.q * i.q), Scalar(1.5) * (v.q * i.d - v.d * i.q)};
}

/// Ring-buffered mean over the trailing `window_len` values. The buffer
/// starts zero-filled, so the mean ramps up over the first window. The
/// running sum is rebuilt from the buffer once per window to bound drift.
template <typename T>
class SlidingMean {
public:
    explicit SlidingMean(std::size_t window_len) : m_buffer(window_len, T(0)) {
        if (window_len == 0)
            throw ConfigError("moving average window must hold at least one sample");
    }

    T push(const T& x) {
        m_sum += x - m_buffer[m_index];
        m_buffer[m_index] = x;
        if (++m_index == m_buffer.size()) {
            m_index = 0;
            m_sum = T(0);
            for (const auto& v : m_buffer)
                m_sum += v;
        }
        ++m_count;
        return mean();
    }

    T mean() const { return m_sum / static_cast<typename Eigen::NumTraits<T>::Real>(m_buffer.size()); }
    T sum() const { return m_sum; }
    std::size_t window_len() const { return m_buffer.size(); }
    std::size_t count() const { return m_count; }
    bool full() const { return m_count >= m_buffer.size(); }

    T buffered_sum() const {
        T s(0);
        for (const auto& v : m_buffer)
            s += v;
        return s;
    }

private:
    std::vector<T> m_buffer;
    T m_sum = T(0);
    std::size_t m_index = 0;
    std::size_t m_count = 0;
};

template <typename Scalar>
struct MovingAverageState {
    explicit MovingAverageState(std::size_t window_len) : squares(window_len) {}

    SlidingMean<Scalar> squares;
    Scalar rms = Scalar(0);
};

/// Pushes x and returns sqrt(mean of the last window_len squared samples).
template <typename Scalar>
Scalar moving_average_rms(MovingAverageState<Scalar>& state, Scalar x) {
    state.rms = std::sqrt(std::max(Scalar(0), state.squares.push(x * x)));
    return state.rms;
}

/// Number of samples in one period of omega0, or a ConfigError when the
/// period is not an integer number of steps.
template <typename Scalar>
std::size_t samples_per_period(Scalar omega0, Scalar dt) {
    if (!(omega0 > Scalar(0)) || !(dt > Scalar(0)))
        throw ConfigError("period window requires omega0 > 0 and dt > 0");
    const Scalar n = kTwoPi<Scalar> / (omega0 * dt);
    const Scalar rounded = std::round(n);
    if (rounded < Scalar(1) || std::abs(n - rounded) > Scalar(1e-6) * rounded)
        throw ConfigError("one fundamental period is not an integer number of steps");
    return static_cast<std::size_t>(rounded);
}

/// Single-bin Fourier coefficient at omega0 of a window that spans exactly
/// one period; `t0` is the timestamp of the first sample.
template <typename Scalar>
DynamicPhasor<Scalar> to_dynamic_phasor(std::span<const Scalar> window, Scalar omega0, Scalar dt, Scalar t0 = Scalar(0)) {
    const std::size_t n = samples_per_period(omega0, dt);
    if (window.size() != n)
        throw ConfigError("dynamic phasor window must span exactly one fundamental period");
    std::complex<Scalar> acc(0);
    for (std::size_t k = 0; k < n; ++k)
        acc += window[k] * std::polar(Scalar(1), -omega0 * (t0 + static_cast<Scalar>(k) * dt));
    acc *= Scalar(2) / static_cast<Scalar>(n);
    return {acc.real(), acc.imag(), omega0};
}

template <typename Scalar>
Scalar from_dynamic_phasor(const DynamicPhasor<Scalar>& p, Scalar t) {
    return std::real(p.value() * std::polar(Scalar(1), p.omega0 * t));
}

/// Positive-sequence component of three per-phase phasors.
template <typename Scalar>
std::complex<Scalar> positive_sequence(std::complex<Scalar> xa, std::complex<Scalar> xb, std::complex<Scalar> xc) {
    const std::complex<Scalar> a = std::polar(Scalar(1), kPhaseShift<Scalar>);
    return (xa + a * xb + a * a * xc) / Scalar(3);
}

/// Recursive one-period single-bin DFT over a three-phase stream. Yields the
/// same coefficient as to_dynamic_phasor on the trailing window; the sum is
/// rebuilt exactly once per window.
template <typename Scalar>
class SlidingPhasor {
public:
    SlidingPhasor(Scalar omega0, Scalar dt)
        : m_omega0(omega0), m_len(samples_per_period(omega0, dt)), m_samples(m_len, Vector3<Scalar>::Zero()),
          m_times(m_len, Scalar(0)) {}

    void push(const ThreePhase<Scalar>& s) {
        const auto rot = std::polar(Scalar(1), -m_omega0 * s.t);
        for (int p = 0; p < 3; ++p)
            m_sum[p] += (s.abc(p) - m_samples[m_index](p)) * rot;
        m_samples[m_index] = s.abc;
        m_times[m_index] = s.t;
        if (++m_index == m_len) {
            m_index = 0;
            rebuild();
        }
        ++m_count;
    }

    bool ready() const { return m_count >= m_len; }
    std::size_t window_len() const { return m_len; }

    DynamicPhasor<Scalar> phase(int p) const {
        const auto v = m_sum[p] * (Scalar(2) / static_cast<Scalar>(m_len));
        return {v.real(), v.imag(), m_omega0};
    }

    DynamicPhasor<Scalar> positive() const {
        const Scalar scale = Scalar(2) / static_cast<Scalar>(m_len);
        const auto v = positive_sequence(m_sum[0] * scale, m_sum[1] * scale, m_sum[2] * scale);
        return {v.real(), v.imag(), m_omega0};
    }

private:
    void rebuild() {
        for (int p = 0; p < 3; ++p) {
            std::complex<Scalar> acc(0);
            for (std::size_t k = 0; k < m_len; ++k)
                acc += m_samples[k](p) * std::polar(Scalar(1), -m_omega0 * m_times[k]);
            m_sum[p] = acc;
        }
    }

    Scalar m_omega0;
    std::size_t m_len;
    std::vector<Vector3<Scalar>> m_samples;
    std::vector<Scalar> m_times;
    std::complex<Scalar> m_sum[3] = {};
    std::size_t m_index = 0;
    std::size_t m_count = 0;
};

/// Balanced abc waveform of a positive-sequence dynamic phasor at time t.
template <typename Scalar>
ThreePhase<Scalar> balanced_from_dynamic_phasor(const DynamicPhasor<Scalar>& p, Scalar t) {
    const auto v = p.value();
    const Scalar wt = p.omega0 * t;
    return {t, std::real(v * std::polar(Scalar(1), wt)), std::real(v * std::polar(Scalar(1), wt - kPhaseShift<Scalar>)),
            std::real(v * std::polar(Scalar(1), wt - Scalar(2) * kPhaseShift<Scalar>))};
}

} // namespace phil
