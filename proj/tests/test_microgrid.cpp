#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "phil/microgrid.hpp"

using namespace phil;

namespace {

constexpr Real kDt = 50e-6;
const Real kOmega = kTwoPi<Real> * 50.0;

ThreePhaseSample nominal_voltage(Real t, Real rms = 230.0) {
    return balanced_from_phasor(Complex(rms * std::numbers::sqrt2, 0.0), wrap_angle(kOmega * t), t);
}

Real phase_rms(const std::vector<Real>& x) {
    Real s = 0.0;
    for (Real v : x)
        s += v * v;
    return std::sqrt(s / static_cast<Real>(x.size()));
}

/// One-period RMS per phase of f(v, theta, t) for a nominal input.
Vector3<Real> period_rms(const std::function<ThreePhaseSample(const ThreePhaseSample&, Real, Real)>& f,
                         Real rms_v = 230.0) {
    std::array<std::vector<Real>, 3> acc;
    for (int k = 0; k < 400; ++k) {
        const Real t = k * kDt;
        const auto i = f(nominal_voltage(t, rms_v), wrap_angle(kOmega * t), t);
        for (int p = 0; p < 3; ++p)
            acc[p].push_back(i.abc(p));
    }
    return {phase_rms(acc[0]), phase_rms(acc[1]), phase_rms(acc[2])};
}

Real mean_power(const std::function<ThreePhaseSample(const ThreePhaseSample&, Real, Real)>& f) {
    Real p = 0.0;
    for (int k = 0; k < 400; ++k) {
        const Real t = k * kDt;
        const auto v = nominal_voltage(t);
        p += instantaneous_power(v, f(v, wrap_angle(kOmega * t), t), kDt);
    }
    return p / 400.0;
}

} // namespace

TEST_CASE("load bank quantization") {
    CHECK(loadbank_quantize(1000.0, 0.0).p_act == 990.0);
    const auto big = loadbank_quantize(95000.0, 0.0);
    CHECK(big.p_act == 88770.0);
    CHECK(big.p_act == 269 * 330.0);
    const auto zero = loadbank_quantize(0.0, 0.0);
    CHECK(zero.p_act == 0.0);
    CHECK(zero.q_act == 0.0);

    CHECK(quantize_loadbank_value(165.0) == 330.0);  // tie rounds up
    CHECK(quantize_loadbank_value(164.9) == 0.0);
    CHECK(quantize_loadbank_value(-500.0) == 0.0);
    CHECK(quantize_loadbank_value(89000.0) == 88770.0);
    CHECK_THROWS_AS(quantize_loadbank_value(std::nan("")), ConfigError);

    const auto s = loadbank_quantize(60000.0, 20000.0);
    CHECK(s.p_act == 60060.0);
    CHECK(s.q_act == 20130.0);
    CHECK(s.p_phase(1) == doctest::Approx(20020.0));
    CHECK(s.admissible());
}

TEST_CASE("quantization invariant property") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<Real> req(-5e3, 120e3);
    for (int k = 0; k < 5000; ++k) {
        auto s = loadbank_quantize(req(rng), req(rng));
        CHECK(s.admissible());
        s = with_phase_override(s, k % 3, req(rng), req(rng));
        CHECK(s.admissible());
        for (Real v : s.realized_values()) {
            CHECK(v >= 0.0);
            CHECK(v <= kLoadBankMax);
            CHECK(std::fmod(v, kLoadBankStep) == 0.0);
        }
    }
    CHECK_FALSE(is_admissible_loadbank_value(100.0));
    CHECK_FALSE(is_admissible_loadbank_value(89100.0));
    CHECK(is_admissible_loadbank_value(0.0));
}

TEST_CASE("load bank currents") {
    SUBCASE("balanced 20 kW per phase at 230 V") {
        const auto s = loadbank_quantize(60000.0, 0.0);
        const auto rms = period_rms([&](auto& v, Real th, Real) { return loadbank_current(s, v, th); });
        // Ohm's law at the realized per-phase value.
        for (int p = 0; p < 3; ++p)
            CHECK(rms(p) == doctest::Approx(20020.0 / 230.0).epsilon(1e-9));
        CHECK(20000.0 / 230.0 == doctest::Approx(86.96).epsilon(1e-4));
    }
    SUBCASE("phase B to zero") {
        LoadBankSetting s{};
        for (int p = 0; p < 3; ++p)
            s = with_phase_override(s, p, 20000.0);
        const auto before = period_rms([&](auto& v, Real th, Real) { return loadbank_current(s, v, th); });
        const auto off = with_phase_override(s, 1, 0.0);
        const auto after = period_rms([&](auto& v, Real th, Real) { return loadbank_current(off, v, th); });
        CHECK(after(1) == doctest::Approx(0.0));
        CHECK(after(0) == doctest::Approx(before(0)));
        CHECK(after(2) == doctest::Approx(before(2)));
    }
    SUBCASE("phase C to 60 kW") {
        LoadBankSetting s{};
        for (int p = 0; p < 3; ++p)
            s = with_phase_override(s, p, 20000.0);
        const auto before = period_rms([&](auto& v, Real th, Real) { return loadbank_current(s, v, th); });
        const auto up = with_phase_override(s, 2, 60000.0);
        const auto after = period_rms([&](auto& v, Real th, Real) { return loadbank_current(up, v, th); });
        // Constant impedance: ratio of realized values at fixed voltage.
        CHECK(after(2) / before(2) == doctest::Approx(60060.0 / 20130.0));
        CHECK(after(2) / before(2) == doctest::Approx(3.0).epsilon(0.02));
        CHECK(after(0) == doctest::Approx(before(0)));
    }
    SUBCASE("constant impedance scales with voltage") {
        const auto s = loadbank_quantize(30030.0, 9900.0);
        const auto nominal = period_rms([&](auto& v, Real th, Real) { return loadbank_current(s, v, th); });
        const auto low = period_rms([&](auto& v, Real th, Real) { return loadbank_current(s, v, th); }, 207.0);
        CHECK(low(0) / nominal(0) == doctest::Approx(0.9));
    }
    SUBCASE("dead bus") {
        const auto s = loadbank_quantize(30030.0, 0.0);
        CHECK(loadbank_current(s, ThreePhaseSample{}, 0.3).abc.isZero());
    }
    SUBCASE("reactive setting lags") {
        const auto s = loadbank_quantize(0.0, 30030.0);
        const Real theta = 0.0;
        const auto v = nominal_voltage(0.0);
        const auto i = loadbank_current(s, v, theta);
        const auto pq = pq_from_dq(park_transform(v, theta), park_transform(i, theta));
        CHECK(pq.p == doctest::Approx(0.0).scale(1e4));
        CHECK(pq.q == doctest::Approx(30030.0));
    }
}

TEST_CASE("profiles") {
    const auto p = parse_profile_csv("t_s,p_w,q_var\n0,100,10\n10,200,20\n20,300,30\n");
    CHECK(profile_sample(p, -5.0).p == 100.0);
    CHECK(profile_sample(p, 0.0).p == 100.0);
    CHECK(profile_sample(p, 9.999).p == 100.0);
    CHECK(profile_sample(p, 10.0).p == 200.0);
    CHECK(profile_sample(p, 10.0).q == 20.0);
    CHECK(profile_sample(p, 1e6).p == 300.0);

    const auto late = parse_profile_csv("t_s,p_w,q_var\n5,1,2\n");
    CHECK(profile_sample(late, 0.0).p == 1.0);

    CHECK_THROWS_AS(parse_profile_csv("t_s,p_w,q_var\n"), ConfigError);
    CHECK_THROWS_AS(parse_profile_csv("time,p,q\n0,1,2\n"), ConfigError);
    CHECK_THROWS_AS(parse_profile_csv("t_s,p_w,q_var\n0,1,2\n0,3,4\n"), ConfigError);
    CHECK_THROWS_AS(parse_profile_csv("t_s,p_w,q_var\n0,1\n"), ConfigError);
    CHECK_THROWS_AS(parse_profile_csv("t_s,p_w,q_var\n0,abc,2\n"), ConfigError);
    CHECK_THROWS_AS(profile_sample(LoadProfile{}, 0.0), ConfigError);
    CHECK_THROWS_AS(load_profile_csv("/nonexistent/profile.csv"), ConfigError);
}

TEST_CASE("bundled profiles") {
    const std::filesystem::path dir = std::filesystem::path(PHIL_DATA_DIR) / "profiles";
    const auto res = load_profile_csv(dir / "residential.csv");
    Real peak = 0.0, pf_sum = 0.0;
    for (const auto& pt : res.points) {
        const Real s = std::hypot(pt.p, pt.q);
        peak = std::max(peak, s);
        pf_sum += pt.p / s;
    }
    CHECK(peak <= 78e3 + 1.0);
    CHECK(peak >= 70e3);
    CHECK(pf_sum / res.points.size() == doctest::Approx(0.9).epsilon(1e-3));

    const auto hp = load_profile_csv(dir / "hp_house.csv");
    Real hp_peak = 0.0;
    for (const auto& pt : hp.points)
        hp_peak = std::max(hp_peak, pt.p);
    CHECK(hp_peak >= 9e3);
}

TEST_CASE("droop setpoint") {
    DroopParams d;
    auto pq = droop_setpoint(d, d.f_star, d.v_star);
    CHECK(pq.p == 0.0);
    CHECK(pq.q == 0.0);

    d.k_p = 100e3;
    CHECK(droop_setpoint(d, 49.9, 230.0).p == doctest::Approx(10e3));
    d.k_q = 5e3;
    CHECK(droop_setpoint(d, 50.0, 226.0).q == doctest::Approx(20e3));

    // Saturation.
    d = DroopParams{};
    CHECK(droop_setpoint(d, 40.0, 230.0).p == d.p_max);
    CHECK(droop_setpoint(d, 60.0, 230.0).p == -d.p_max);
    CHECK(droop_setpoint(d, 50.0, 100.0).q == d.q_max);

    // Linearity and sign.
    d.k_p = 1e5;
    const Real p1 = droop_setpoint(d, 49.95, 230.0).p;
    d.k_p = 2e5;
    CHECK(droop_setpoint(d, 49.95, 230.0).p == doctest::Approx(2.0 * p1));
    CHECK(p1 > 0.0);

    DroopParams bad;
    bad.k_q = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bess current reference") {
    CHECK(bess_current_ref(0.0, 0.0, 0.4, 230.0).abc.isZero());
    CHECK(bess_current_ref(10e3, 5e3, 0.4, 10.0).abc.isZero());

    const auto rms = period_rms([](auto&, Real th, Real) { return bess_current_ref(10e3, 0.0, th, 230.0); });
    for (int p = 0; p < 3; ++p)
        CHECK(rms(p) == doctest::Approx(10e3 / (3.0 * 230.0)).epsilon(1e-9));

    // In phase with the voltage.
    const auto v = nominal_voltage(0.0);
    const auto i = bess_current_ref(10e3, 0.0, 0.0, 230.0);
    CHECK(i.a() > 0.0);
    CHECK(std::abs(park_transform(i, 0.0).q) < 1e-12);

    // Self-consistency through the power measurement.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<Real> u(-400e3, 400e3), th(0.0, 6.28);
    for (int k = 0; k < 100; ++k) {
        const Real p = u(rng), q = u(rng), theta = th(rng);
        const auto vv = balanced_from_phasor(Complex(230.0 * std::numbers::sqrt2, 0.0), theta);
        const auto s = pq_from_dq(park_transform(vv, theta), park_transform(bess_current_ref(p, q, theta, 230.0), theta));
        CHECK(s.p == doctest::Approx(p).epsilon(5e-3));
        CHECK(s.q == doctest::Approx(q).epsilon(5e-3));
    }
}

TEST_CASE("microgrid step") {
    SUBCASE("no loads, BESS disabled") {
        Microgrid mg(MicrogridConfig{});
        for (int k = 0; k < 50; ++k) {
            const Real t = k * kDt;
            const auto out = mg.step(nominal_voltage(t), wrap_angle(kOmega * t), 50.0, 230.0, t);
            CHECK(out.i_total.abc.isZero());
        }
    }
    SUBCASE("60 kW balanced load, with and without 10 kW BESS") {
        MicrogridConfig cfg;
        cfg.loadbank_initial_p = Vector3<Real>::Constant(20000.0);
        Microgrid passive(cfg);
        const Real realized = 3 * 20130.0;
        const Real p = mean_power([&](auto& v, Real th, Real t) { return passive.step(v, th, 50.0, 230.0, t).i_total; });
        CHECK(p == doctest::Approx(realized).epsilon(1e-9));

        cfg.bess.enabled = true;
        cfg.bess.droop.k_p = 100e3;
        Microgrid support(cfg);
        const Real p2 =
            mean_power([&](auto& v, Real th, Real t) { return support.step(v, th, 49.9, 230.0, t).i_total; });
        CHECK(support.bess().last.p == doctest::Approx(10e3));
        CHECK(p2 == doctest::Approx(realized - 10e3).epsilon(1e-9));
    }
    SUBCASE("disabled BESS is neutral") {
        MicrogridConfig cfg;
        cfg.residential = parse_profile_csv("t_s,p_w,q_var\n0,45000,21000\n");
        cfg.heat_pump = parse_profile_csv("t_s,p_w,q_var\n0,3000,600\n");
        Microgrid plain(cfg);
        cfg.bess.droop.k_p = 5e6;
        cfg.bess.enabled = false;
        Microgrid off(cfg);
        for (int k = 0; k < 400; ++k) {
            const Real t = k * kDt;
            const auto v = nominal_voltage(t, 221.0);
            const auto a = plain.step(v, wrap_angle(kOmega * t), 49.7, 221.0, t);
            const auto b = off.step(v, wrap_angle(kOmega * t), 49.7, 221.0, t);
            CHECK(a.i_total == b.i_total);
            CHECK(b.i_bess.abc.isZero());
        }
    }
    SUBCASE("power bookkeeping") {
        MicrogridConfig cfg;
        cfg.residential = parse_profile_csv("t_s,p_w,q_var\n0,45000,21000\n");
        cfg.heat_pump = parse_profile_csv("t_s,p_w,q_var\n0,3000,600\n");
        cfg.bess.enabled = true;
        Microgrid mg(cfg);
        Real total = 0.0, parts = 0.0;
        for (int k = 0; k < 400; ++k) {
            const Real t = k * kDt;
            const auto v = nominal_voltage(t);
            const auto out = mg.step(v, wrap_angle(kOmega * t), 49.98, 230.0, t);
            total += instantaneous_power(v, out.i_total, kDt);
            parts += instantaneous_power(v, out.i_loadbank, kDt) + instantaneous_power(v, out.i_heat_pump, kDt) -
                     instantaneous_power(v, out.i_bess, kDt);
        }
        CHECK(total == doctest::Approx(parts).epsilon(1e-2));
        CHECK(total / 400.0 == doctest::Approx(44880.0 + 3000.0 - 40e3).epsilon(1e-2));
    }
    SUBCASE("overrides fire at their time") {
        MicrogridConfig cfg;
        cfg.loadbank_initial_p = Vector3<Real>::Constant(20000.0);
        cfg.overrides.push_back(PhaseOverride{0.01, 1, 0.0, 0.0});
        Microgrid mg(cfg);
        for (int k = 0; k < 400; ++k) {
            const Real t = k * kDt;
            mg.step(nominal_voltage(t), wrap_angle(kOmega * t), 50.0, 230.0, t);
            CHECK(mg.loadbank().p_phase(1) == (t < 0.01 - 1e-12 ? 20130.0 : 0.0));
            CHECK(mg.loadbank().admissible());
        }
        CHECK(mg.quantization_violations() == 0);
        MicrogridConfig bad;
        bad.overrides.push_back(PhaseOverride{0.0, 3, 0.0, 0.0});
        CHECK_THROWS_AS(Microgrid{bad}, ConfigError);
    }
    SUBCASE("residential profile drives the load bank") {
        MicrogridConfig cfg;
        cfg.residential = parse_profile_csv("t_s,p_w,q_var\n0,10000,0\n0.005,50000,1000\n");
        Microgrid mg(cfg);
        mg.step(nominal_voltage(0.0), 0.0, 50.0, 230.0, 0.0);
        CHECK(mg.loadbank().p_act == 9900.0);
        mg.step(nominal_voltage(0.005), 0.0, 50.0, 230.0, 0.005);
        CHECK(mg.loadbank().p_act == 50160.0);
        CHECK(mg.loadbank().q_act == 990.0);
        CHECK(microgrid_step(mg, nominal_voltage(0.006), 0.0, 50.0, 230.0, 0.006).i_total.finite());
    }
}
