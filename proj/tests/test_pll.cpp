#include <doctest.h>

#include "phil/pll.hpp"

using namespace phil;

namespace {

constexpr Real kDt = 50e-6;
const Real kPeak = 230.0 * std::numbers::sqrt2;

/// Balanced input whose frequency steps at t_step; phase stays continuous.
struct SteppedSource {
    Real f0 = 50.0;
    Real f1 = 50.0;
    Real t_step = 0.0;
    Real phase = 0.0;

    ThreePhaseSample at(std::size_t k) {
        const Real t = k * kDt;
        const Real f = t < t_step ? f0 : f1;
        const Real angle = phase;
        phase = wrap_angle(phase + kTwoPi<Real> * f * kDt);
        return balanced_from_phasor(Complex(kPeak, 0.0), angle, t);
    }
};

} // namespace

TEST_CASE("locked fixed point") {
    PllState pll(PllParams{}, kDt);
    CHECK(pll.theta == 0.0);
    Real prev = pll.theta;
    for (std::size_t k = 0; k < 20000; ++k) {
        const Real angle = wrap_angle(kTwoPi<Real> * 50.0 * k * kDt);
        const auto v = balanced_from_phasor(Complex(kPeak, 0.0), angle, k * kDt);
        const auto out = pll_step(pll, v, kDt);
        CHECK(out.f_est == doctest::Approx(50.0).epsilon(1e-6 / 50.0));
        CHECK(std::abs(out.error) < 1e-9);
        const Real advance = wrap_angle(pll.theta - prev);
        CHECK(advance == doctest::Approx(kTwoPi<Real> * 50.0 * kDt).epsilon(1e-9));
        prev = pll.theta;
    }
}

TEST_CASE("frequency step 50 to 49.9 Hz") {
    PllState pll(PllParams{}, kDt);
    SteppedSource src{50.0, 49.9, 0.5};
    std::vector<Real> f;
    for (std::size_t k = 0; k < 16000; ++k)
        f.push_back(pll_step(pll, src.at(k), kDt).f_est);
    // 0.2 s after the step: settled.
    for (std::size_t k = 14000; k < 16000; ++k)
        CHECK(f[k] == doctest::Approx(49.9).epsilon(0.01 / 49.9));
    CHECK(pll_lock_check(f, 0.01, 0.1, kDt));
    // Shortly after the step the estimate is still moving.
    CHECK_FALSE(pll_lock_check(std::span<const Real>(f.data(), 10100), 0.01, 0.1, kDt));
}

TEST_CASE("re-lock within 0.5 s for steps within 0.5 Hz") {
    for (Real df : {-0.5, -0.2, 0.1, 0.3, 0.5}) {
        PllState pll(PllParams{}, kDt);
        SteppedSource src{50.0, 50.0 + df, 0.3};
        std::vector<Real> f;
        for (std::size_t k = 0; k < 16000; ++k)
            f.push_back(pll_step(pll, src.at(k), kDt).f_est);
        CHECK(pll_lock_check(f, 0.01, 0.1, kDt));
        CHECK(f.back() == doctest::Approx(50.0 + df).epsilon(1e-3 / 50.0));
    }
}

TEST_CASE("zero burst is tolerated") {
    PllState pll(PllParams{}, kDt);
    SteppedSource src;
    Real before = 0.0;
    for (std::size_t k = 0; k < 10000; ++k)
        before = pll_step(pll, src.at(k), kDt).f_est;
    Real worst = 0.0;
    for (std::size_t k = 10000; k < 14000; ++k) {
        auto v = src.at(k);
        if (k < 10005)
            v.abc.setZero();
        const auto out = pll_step(pll, v, kDt);
        if (k < 10005)
            CHECK(out.error == 0.0);
        worst = std::max(worst, std::abs(out.f_est - before));
    }
    CHECK(worst < 0.05);
}

TEST_CASE("coasts on dead input") {
    PllState pll(PllParams{}, kDt);
    SteppedSource src{50.0, 50.3, 0.0};
    for (std::size_t k = 0; k < 10000; ++k)
        pll_step(pll, src.at(k), kDt);
    const Real f = pll.f_est;
    for (std::size_t k = 0; k < 2000; ++k) {
        const auto out = pll_step(pll, ThreePhaseSample{0.0, Vector3<Real>::Zero()}, kDt);
        CHECK(out.f_est == f);
        CHECK(std::isfinite(out.theta));
    }
}

TEST_CASE("angle path has no buffering") {
    // The angle returned for step k is a function of samples up to k only:
    // perturbing a later sample cannot change it.
    PllState a(PllParams{}, kDt), b(PllParams{}, kDt);
    SteppedSource sa{50.0, 50.2, 0.01}, sb{50.0, 50.2, 0.01};
    for (std::size_t k = 0; k < 1000; ++k) {
        auto va = sa.at(k);
        auto vb = sb.at(k);
        if (k == 999)
            vb.abc *= 0.5;
        const auto oa = pll_step(a, va, kDt);
        const auto ob = pll_step(b, vb, kDt);
        CHECK(oa.theta == ob.theta);
    }
}

TEST_CASE("pll_lock_check") {
    std::vector<Real> constant(4000, 50.0);
    CHECK(pll_lock_check(constant, 0.01, 0.1, kDt));

    std::vector<Real> ramp(4000);
    for (std::size_t k = 0; k < ramp.size(); ++k)
        ramp[k] = 50.0 + 1.0 * k * kDt;
    CHECK_FALSE(pll_lock_check(ramp, 0.01, 0.1, kDt));

    std::vector<Real> short_history(1999, 50.0);
    CHECK_FALSE(pll_lock_check(short_history, 0.01, 0.1, kDt));
    CHECK_THROWS_AS(pll_lock_check(constant, 0.0, 0.1, kDt), ConfigError);
}

TEST_CASE("invalid parameters") {
    PllParams bad;
    bad.kp = 0.0;
    CHECK_THROWS_AS(PllState(bad, kDt), ConfigError);
    CHECK_THROWS_AS(PllState(PllParams{}, 0.0), ConfigError);
}
