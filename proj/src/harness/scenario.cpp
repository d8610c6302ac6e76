#include "phil/harness/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <thread>

namespace phil {

std::uint64_t Recording::step_at(Real t) const {
    if (t <= 0.0)
        return 0;
    return static_cast<std::uint64_t>(std::ceil(t / dt - 1e-6));
}

void Recording::reserve(std::uint64_t n) {
    for (auto* ch : {&f_grid, &p_pcc, &q_pcc, &v_rms_pcc, &v_rms_n1, &v_rms_n2, &v_rms_n3, &f_m, &v_m, &p_ref, &q_ref})
        ch->reserve(n);
    for (auto* ch : {&i_abc_pcc, &v_abc_pcc, &v_raw, &v_clean, &i_total, &loadbank_p, &loadbank_q})
        ch->reserve(n);
}

namespace {

// PLL lock required by the end of warm-up.
constexpr Real kLockToleranceHz = 0.05;
constexpr Real kLockHoldS = 0.1;

class Pacer {
public:
    Pacer(bool enabled, Real dt) : m_enabled(enabled), m_dt(dt), m_start(std::chrono::steady_clock::now()) {}

    void wait(std::uint64_t step) const {
        if (!m_enabled)
            return;
        const auto offset = std::chrono::duration<double>(static_cast<double>(step) * m_dt);
        std::this_thread::sleep_until(m_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(offset));
    }

private:
    bool m_enabled;
    Real m_dt;
    std::chrono::steady_clock::time_point m_start;
};

std::uint64_t first_step_at(Real t, Real dt) {
    if (t <= 0.0)
        return 0;
    return static_cast<std::uint64_t>(std::ceil(t / dt - 1e-6));
}

void grid_loop(const ScenarioConfig& c, FrameLink& link, Recording& rec) {
    const Real dt = c.dt;
    const std::uint64_t n = c.total_steps();
    const std::uint64_t warmup_step = first_step_at(c.warmup, dt);
    const bool dp = c.itm == ItmVariant::dynamic_phasor;
    const Real omega0 = kTwoPi<Real> * c.grid.f_nom;

    GridState state = make_grid_state(c.grid);
    PccCurrentEstimator estimator(c.grid.f_nom, dt);
    ExchangeEndpoint endpoint(link, dp ? FrameKind::dp_voltage : FrameKind::voltage,
                              dp ? FrameKind::dp_current : FrameKind::current, c.grid_loss_policy, dt);
    DpEncoder encoder(omega0, dt, FrameKind::dp_voltage);
    DpDecoder decoder(FrameKind::dp_current);
    ItmStabilityGuard guard(c.grid.f_nom, dt, c.guard_window);

    std::vector<std::uint64_t> event_steps;
    for (const auto& e : c.events)
        event_steps.push_back(first_step_at(e.t_event, dt));
    std::vector<bool> fired(c.events.size(), false);

    const Pacer pacer(c.realtime, dt);
    for (std::uint64_t k = 0; k < n; ++k) {
        pacer.wait(k);
        const Real t = static_cast<Real>(k) * dt;
        state.t = t;

        const ThreePhaseSample i_rx = dp ? decoder.decode(endpoint.receive_frame(k), t) : endpoint.receive(k);
        if (c.stability_guard && k < warmup_step)
            guard.push(i_rx, k);
        const Complex i_pos = estimator.push(i_rx, state.theta);

        for (std::size_t e = 0; e < c.events.size(); ++e) {
            if (!fired[e] && k >= event_steps[e]) {
                state = apply_event(state, c.events[e]);
                fired[e] = true;
                rec.event_times.push_back(t);
            }
        }

        const Complex v_ph = pcc_phasor(state, c.grid, i_pos);
        const ThreePhaseSample v = balanced_from_phasor(v_ph, state.theta, t);
        const Complex s = 1.5 * v_ph * std::conj(i_pos);
        const auto nodes = node_voltages(state, c.grid, i_pos);

        if (k == warmup_step)
            state.dispatch = state.p_load + s.real();
        // Warm-up holds the frequency at nominal.
        const Real p_exchange = k < warmup_step ? state.dispatch - state.p_load : s.real();

        rec.f_grid.push_back(c.grid.f_nom + state.delta_f);
        rec.p_pcc.push_back(s.real());
        rec.q_pcc.push_back(s.imag());
        rec.v_rms_pcc.push_back(std::abs(v_ph) / std::numbers::sqrt2);
        rec.v_rms_n1.push_back(nodes[0]);
        rec.v_rms_n2.push_back(nodes[1]);
        rec.v_rms_n3.push_back(nodes[2]);
        rec.i_abc_pcc.push_back(i_rx.abc);
        rec.v_abc_pcc.push_back(v.abc);

        if (dp) {
            auto frame = encoder.encode(v);
            frame.step_index = k;
            endpoint.send_frame(frame);
        } else {
            endpoint.send(v, k);
        }
        state = grid_step(state, c.grid, p_exchange, s.imag(), dt);
    }
    rec.counters.push_back({"grid", link.counters(), endpoint.substituted()});
}

void microgrid_loop(const ScenarioConfig& c, FrameLink& link, Microgrid& mg, Recording& rec) {
    const Real dt = c.dt;
    const std::uint64_t n = c.total_steps();
    const std::uint64_t warmup_step = first_step_at(c.warmup, dt);
    const bool dp = c.itm == ItmVariant::dynamic_phasor;
    const Real omega0 = kTwoPi<Real> * c.grid.f_nom;

    PllParams pll = c.pll;
    pll.f_nominal = c.grid.f_nom;
    pll.v_nominal_peak = c.v_nominal_rms * std::numbers::sqrt2;
    ReconstructorState recon(pll, dt, c.ma_window);
    ExchangeEndpoint endpoint(link, dp ? FrameKind::dp_current : FrameKind::current,
                              dp ? FrameKind::dp_voltage : FrameKind::voltage, c.microgrid_loss_policy, dt);
    DpEncoder encoder(omega0, dt, FrameKind::dp_current);
    DpDecoder decoder(FrameKind::dp_voltage);

    const Pacer pacer(c.realtime, dt);
    for (std::uint64_t k = 0; k < n; ++k) {
        pacer.wait(k);
        const Real t = static_cast<Real>(k) * dt;

        const ThreePhaseSample v_raw = dp ? decoder.decode(endpoint.receive_frame(k), t) : endpoint.receive(k);
        const auto r = reconstruct_voltage(recon, v_raw, dt);
        const ThreePhaseSample& v_use = c.reconstruct ? r.v : v_raw;
        const auto out = mg.step(v_use, r.theta, r.f_est, r.v_rms, t);

        if (k == warmup_step && warmup_step > 0 &&
            !pll_lock_check(std::span<const Real>(rec.f_m.data(), rec.f_m.size()), kLockToleranceHz, kLockHoldS, dt))
            throw RuntimeError("PLL did not lock during warm-up", k);

        rec.f_m.push_back(r.f_est);
        rec.v_m.push_back(r.v_rms);
        rec.p_ref.push_back(out.bess_ref.p);
        rec.q_ref.push_back(out.bess_ref.q);
        rec.v_raw.push_back(v_raw.abc);
        rec.v_clean.push_back(r.v.abc);
        rec.i_total.push_back(out.i_total.abc);
        rec.loadbank_p.push_back(mg.loadbank().p_phase);
        rec.loadbank_q.push_back(mg.loadbank().q_phase);

        if (dp) {
            auto frame = encoder.encode(out.i_total);
            frame.step_index = k;
            endpoint.send_frame(frame);
        } else {
            endpoint.send(out.i_total, k);
        }
    }
    rec.counters.push_back({"microgrid", link.counters(), endpoint.substituted()});
    rec.quantization_violations = mg.quantization_violations();
}

bool is_transport_failure(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const TransportError&) {
        return true;
    } catch (...) {
        return false;
    }
}

} // namespace

Recording run_scenario(const ScenarioConfig& config) {
    config.validate();
    Microgrid mg(build_microgrid_config(config));

    LinkPair links;
    if (config.transport.mode == TransportMode::udp)
        links = make_udp_pair(config.transport, config.dt);
    else
        links = make_in_process_pair(config.transport);

    const std::uint64_t n = config.total_steps();
    Recording grid_rec;
    Recording mg_rec;
    grid_rec.reserve(n);
    mg_rec.reserve(n);

    std::exception_ptr grid_error;
    std::exception_ptr mg_error;
    std::thread grid_thread([&] {
        try {
            grid_loop(config, *links.grid, grid_rec);
        } catch (...) {
            grid_error = std::current_exception();
        }
        links.grid->close();
    });
    std::thread mg_thread([&] {
        try {
            microgrid_loop(config, *links.microgrid, mg, mg_rec);
        } catch (...) {
            mg_error = std::current_exception();
        }
        links.microgrid->close();
    });
    grid_thread.join();
    mg_thread.join();

    // The loop that failed first closes its link, so the peer usually sees a
    // transport error; report the original failure.
    if (grid_error && mg_error) {
        if (is_transport_failure(grid_error) && !is_transport_failure(mg_error))
            std::rethrow_exception(mg_error);
        std::rethrow_exception(grid_error);
    }
    if (grid_error)
        std::rethrow_exception(grid_error);
    if (mg_error)
        std::rethrow_exception(mg_error);

    Recording rec = std::move(grid_rec);
    rec.name = config.name;
    rec.dt = config.dt;
    rec.horizon = config.horizon;
    rec.warmup = config.warmup;
    rec.steps = n;
    rec.decimation = config.recorder.decimation;
    rec.seed = config.seed();
    rec.droop_enabled = config.droop_enabled;
    rec.itm = config.itm;
    rec.channels = config.recorder.channels;
    rec.f_m = std::move(mg_rec.f_m);
    rec.v_m = std::move(mg_rec.v_m);
    rec.p_ref = std::move(mg_rec.p_ref);
    rec.q_ref = std::move(mg_rec.q_ref);
    rec.v_raw = std::move(mg_rec.v_raw);
    rec.v_clean = std::move(mg_rec.v_clean);
    rec.i_total = std::move(mg_rec.i_total);
    rec.loadbank_p = std::move(mg_rec.loadbank_p);
    rec.loadbank_q = std::move(mg_rec.loadbank_q);
    rec.quantization_violations = mg_rec.quantization_violations;
    rec.counters.insert(rec.counters.end(), mg_rec.counters.begin(), mg_rec.counters.end());
    for (const auto& o : config.overrides) {
        if (o.t > 0.0)
            rec.event_times.push_back(rec.time(first_step_at(o.t, config.dt)));
    }
    std::sort(rec.event_times.begin(), rec.event_times.end());
    rec.event_times.erase(std::unique(rec.event_times.begin(), rec.event_times.end()), rec.event_times.end());
    return rec;
}

DelayReport run_benchmark(const ScenarioConfig& config) {
    config.validate();
    return measure_loopback_delay(config.benchmark_probes, config.dt, config.transport);
}

void print_delay_report(std::ostream& out, const DelayReport& report) {
    const auto flags = out.flags();
    out << "loopback delay, dt = " << report.dt * 1e6 << " us\n";
    out << "  probes:   " << report.probe_steps.size() << " (" << report.received << " received, " << report.lost
        << " lost)\n";
    out << std::setprecision(6);
    out << "  min:      " << report.min_steps << " steps = " << report.min_seconds() * 1e6 << " us\n";
    out << "  max:      " << report.max_steps << " steps = " << report.max_seconds() * 1e6 << " us\n";
    out << "  mean:     " << report.mean_steps << " steps = " << report.mean_seconds() * 1e6 << " us\n";
    out << "  variance: " << report.variance_steps << " steps^2\n";
    out.flags(flags);
}

} // namespace phil
