#include "phil/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace phil {

std::string format_real(Real value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

namespace {

std::string location(const YAML::Node& node, const std::string& origin) {
    const auto mark = node.Mark();
    if (mark.line < 0)
        return origin;
    return origin + ":" + std::to_string(mark.line + 1);
}

/// Strict reader over one YAML mapping: every key must be consumed.
class Section {
public:
    Section(YAML::Node node, std::string path, const std::string& origin)
        : m_node(std::move(node)), m_path(std::move(path)), m_origin(origin) {
        if (m_node && !m_node.IsNull() && !m_node.IsMap())
            fail(m_node, "expected a mapping");
    }

    bool has(const char* key) const { return m_node && m_node.IsMap() && m_node[key]; }

    YAML::Node child(const char* key) {
        m_known.insert(key);
        if (!m_node || !m_node.IsMap())
            return YAML::Node(YAML::NodeType::Undefined);
        const YAML::Node& map = m_node;
        return map[key];
    }

    template <typename T>
    void read(const char* key, T& out) {
        auto value = child(key);
        if (!value)
            return;
        out = convert<T>(value, key);
    }

    template <typename T>
    T convert(const YAML::Node& value, const std::string& key) {
        try {
            if constexpr (std::is_same_v<T, Complex>) {
                if (!value.IsSequence() || value.size() != 2)
                    fail(value, key + ": expected [real, imag]");
                return {value[0].as<Real>(), value[1].as<Real>()};
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!value.IsScalar())
                    fail(value, key + ": expected a string");
                return value.as<std::string>();
            } else {
                if (!value.IsScalar())
                    fail(value, key + ": expected a scalar");
                return value.as<T>();
            }
        } catch (const YAML::BadConversion&) {
            fail(value, key + ": invalid value '" + (value.IsScalar() ? value.Scalar() : std::string("...")) + "'");
        }
    }

    template <typename E, typename Parse>
    void read_enum(const char* key, E& out, Parse parse) {
        auto value = child(key);
        if (!value)
            return;
        try {
            out = parse(convert<std::string>(value, key));
        } catch (const ConfigError& e) {
            fail(value, std::string(key) + ": " + e.what());
        }
    }

    void finish() const {
        if (!m_node || !m_node.IsMap())
            return;
        for (const auto& kv : m_node) {
            const auto key = kv.first.as<std::string>();
            if (!m_known.count(key))
                fail(kv.first, "unknown field '" + key + "'");
        }
    }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
        throw ConfigError(location(at, m_origin) + ": " + (m_path.empty() ? "" : m_path + ".") + message);
    }

    const std::string& origin() const { return m_origin; }
    const std::string& path() const { return m_path; }

private:
    YAML::Node m_node;
    std::string m_path;
    const std::string& m_origin;
    std::set<std::string> m_known;
};

int parse_phase(const std::string& name) {
    if (name == "a" || name == "A")
        return 0;
    if (name == "b" || name == "B")
        return 1;
    if (name == "c" || name == "C")
        return 2;
    throw ConfigError("unknown phase '" + name + "' (expected a, b or c)");
}

const char* phase_name(int phase) {
    static const char* names[] = {"a", "b", "c"};
    return names[phase];
}

void read_grid(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("grid"), "grid", root.origin());
    auto& g = cfg.grid;
    s.read("s_base", g.s_base);
    s.read("f_nom", g.f_nom);
    s.read("v_nom_ll", g.v_nom_ll);
    s.read("v_mv_nom_ll", g.v_mv_nom_ll);
    s.read("h", g.h);
    s.read("d_damp", g.d_damp);
    s.read("z_thev", g.z_thev);
    s.read("z_seg", g.z_seg);
    s.read("p_base_load", g.p_base_load);
    s.read("v_source_pu", g.v_source_pu);
    s.finish();
}

void read_events(Section& root, ScenarioConfig& cfg) {
    auto list = root.child("events");
    if (!list || list.IsNull())
        return;
    if (!list.IsSequence())
        root.fail(list, "events: expected a list");
    std::uint32_t id = 0;
    for (const auto& item : list) {
        Section s(item, "events[" + std::to_string(id) + "]", root.origin());
        LoadStepEvent e;
        e.id = id++;
        if (!s.has("t"))
            s.fail(item, "missing field 't'");
        s.read("t", e.t_event);
        s.read("delta_p", e.delta_p);
        s.read("delta_q", e.delta_q);
        s.read_enum("location", e.location, parse_grid_node);
        s.finish();
        cfg.events.push_back(e);
    }
}

void read_droop(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("droop"), "droop", root.origin());
    auto& d = cfg.droop;
    s.read("enabled", cfg.droop_enabled);
    s.read("k_p", d.k_p);
    s.read("k_q", d.k_q);
    s.read("f_star", d.f_star);
    s.read("v_star", d.v_star);
    s.read("p_star", d.p_star);
    s.read("q_star", d.q_star);
    s.read("p_max", d.p_max);
    s.read("q_max", d.q_max);
    s.finish();
}

void read_pll(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("pll"), "pll", root.origin());
    s.read("kp", cfg.pll.kp);
    s.read("ki", cfg.pll.ki);
    s.read("floor_fraction", cfg.pll.floor_fraction);
    s.read("amplitude_window", cfg.pll.amplitude_window);
    s.finish();
}

void read_coupling(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("coupling"), "coupling", root.origin());
    s.read_enum("itm", cfg.itm, parse_itm_variant);
    s.read_enum("grid_loss_policy", cfg.grid_loss_policy, parse_loss_policy);
    s.read_enum("microgrid_loss_policy", cfg.microgrid_loss_policy, parse_loss_policy);
    s.read("reconstruct", cfg.reconstruct);
    s.read("ma_window", cfg.ma_window);
    s.read("stability_guard", cfg.stability_guard);
    s.read("guard_window", cfg.guard_window);
    s.finish();
}

void read_transport(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("transport"), "transport", root.origin());
    auto& t = cfg.transport;
    s.read_enum("mode", t.mode, parse_transport_mode);
    s.read("loss_probability", t.loss_probability);
    s.read("max_loss_burst", t.max_loss_burst);
    s.read("extra_delay_steps", t.extra_delay_steps);
    s.read("seed", t.rng_seed);
    s.read("host", t.host);
    s.read("grid_port", t.grid_port);
    s.read("microgrid_port", t.microgrid_port);
    s.read("deadline_fraction", t.deadline_fraction);
    s.finish();
}

void read_microgrid(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("microgrid"), "microgrid", root.origin());
    if (s.has("residential_profile")) {
        std::string p;
        s.read("residential_profile", p);
        cfg.residential_profile = p;
    }
    if (s.has("heat_pump_profile")) {
        std::string p;
        s.read("heat_pump_profile", p);
        cfg.heat_pump_profile = p;
    }
    s.read("profile_offset_s", cfg.profile_offset_s);
    s.read("v_nominal_rms", cfg.v_nominal_rms);

    if (auto init = s.child("loadbank_initial"); init) {
        if (!init.IsSequence() || init.size() != 3)
            s.fail(init, "loadbank_initial: expected [p_a, p_b, p_c]");
        Vector3<Real> p;
        for (int k = 0; k < 3; ++k)
            p(k) = s.convert<Real>(init[k], "loadbank_initial");
        cfg.loadbank_initial_p = p;
    }

    if (auto list = s.child("overrides"); list && !list.IsNull()) {
        if (!list.IsSequence())
            s.fail(list, "overrides: expected a list");
        std::size_t n = 0;
        for (const auto& item : list) {
            Section o(item, "microgrid.overrides[" + std::to_string(n++) + "]", root.origin());
            PhaseOverride po;
            if (!o.has("t") || !o.has("phase"))
                o.fail(item, "override needs 't' and 'phase'");
            o.read("t", po.t);
            o.read_enum("phase", po.phase, parse_phase);
            o.read("p_w", po.p_w);
            o.read("q_var", po.q_var);
            o.finish();
            cfg.overrides.push_back(po);
        }
    }
    s.finish();
}

void read_recorder(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("recorder"), "recorder", root.origin());
    if (auto list = s.child("channels"); list) {
        if (!list.IsSequence())
            s.fail(list, "channels: expected a list");
        cfg.recorder.channels.clear();
        for (const auto& item : list) {
            const auto name = s.convert<std::string>(item, "channels");
            if (std::find(kRecorderGroups.begin(), kRecorderGroups.end(), name) == kRecorderGroups.end())
                s.fail(item, "channels: unknown channel group '" + name + "'");
            cfg.recorder.channels.push_back(name);
        }
    }
    s.read("decimation", cfg.recorder.decimation);
    s.finish();
}

void read_benchmark(Section& root, ScenarioConfig& cfg) {
    Section s(root.child("benchmark"), "benchmark", root.origin());
    s.read("probes", cfg.benchmark_probes);
    s.finish();
}

} // namespace

std::uint64_t ScenarioConfig::total_steps() const {
    return static_cast<std::uint64_t>(std::llround(horizon / dt));
}

void ScenarioConfig::validate() const {
    if (!(dt > 0.0))
        throw ConfigError("dt must be positive");
    if (!(horizon > 0.0))
        throw ConfigError("horizon must be positive");
    if (std::abs(horizon / dt - std::round(horizon / dt)) > 1e-6)
        throw ConfigError("horizon must be an integer number of steps");
    if (!(warmup >= 0.0) || warmup >= horizon)
        throw ConfigError("warmup must lie in [0, horizon)");
    grid.validate();
    droop.validate();
    transport.validate();
    samples_per_period(kTwoPi<Real> * grid.f_nom, dt);

    std::optional<Real> last_event;
    for (const auto& e : events) {
        if (e.t_event < warmup)
            throw ConfigError("events[" + std::to_string(e.id) + "]: event time precedes the end of warm-up");
        last_event = std::max(last_event.value_or(e.t_event), e.t_event);
    }
    for (const auto& o : overrides) {
        if (o.t < 0.0)
            throw ConfigError("microgrid.overrides: negative override time");
        if (o.t > 0.0)
            last_event = std::max(last_event.value_or(o.t), o.t);
    }
    if (last_event && horizon < *last_event + 1.0)
        throw ConfigError("horizon must extend at least 1 s past the last event");
    if (recorder.decimation == 0)
        throw ConfigError("recorder.decimation must be at least 1");
    if (!(v_nominal_rms > 0.0))
        throw ConfigError("microgrid.v_nominal_rms must be positive");
    if (!(guard_window > 0.0) || guard_window > warmup + 1e-12)
        throw ConfigError("coupling.guard_window must be positive and within the warm-up");
}

ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir, const std::string& origin) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap())
        throw ConfigError(origin + ": scenario file must be a mapping");

    ScenarioConfig cfg;
    cfg.base_dir = base_dir;
    Section s(root, "", origin);
    s.read("name", cfg.name);
    s.read("description", cfg.description);
    s.read("dt", cfg.dt);
    s.read("horizon", cfg.horizon);
    s.read("warmup", cfg.warmup);
    s.read("realtime", cfg.realtime);
    read_grid(s, cfg);
    read_events(s, cfg);
    read_droop(s, cfg);
    read_pll(s, cfg);
    read_coupling(s, cfg);
    read_transport(s, cfg);
    read_microgrid(s, cfg);
    read_recorder(s, cfg);
    read_benchmark(s, cfg);
    s.finish();

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

ScenarioConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(),
                        path.string());
}

namespace {

void emit_real(YAML::Emitter& out, const char* key, Real v) {
    out << YAML::Key << key << YAML::Value << format_real(v);
}

void emit_complex(YAML::Emitter& out, const char* key, Complex z) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << format_real(z.real())
        << format_real(z.imag()) << YAML::EndSeq;
}

} // namespace

std::string to_yaml(const ScenarioConfig& c) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.name;
    out << YAML::Key << "description" << YAML::Value << YAML::DoubleQuoted << c.description;
    emit_real(out, "dt", c.dt);
    emit_real(out, "horizon", c.horizon);
    emit_real(out, "warmup", c.warmup);
    out << YAML::Key << "realtime" << YAML::Value << c.realtime;

    out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    emit_real(out, "s_base", c.grid.s_base);
    emit_real(out, "f_nom", c.grid.f_nom);
    emit_real(out, "v_nom_ll", c.grid.v_nom_ll);
    emit_real(out, "v_mv_nom_ll", c.grid.v_mv_nom_ll);
    emit_real(out, "h", c.grid.h);
    emit_real(out, "d_damp", c.grid.d_damp);
    emit_complex(out, "z_thev", c.grid.z_thev);
    emit_complex(out, "z_seg", c.grid.z_seg);
    emit_real(out, "p_base_load", c.grid.p_base_load);
    emit_real(out, "v_source_pu", c.grid.v_source_pu);
    out << YAML::EndMap;

    out << YAML::Key << "events" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : c.events) {
        out << YAML::BeginMap;
        emit_real(out, "t", e.t_event);
        emit_real(out, "delta_p", e.delta_p);
        emit_real(out, "delta_q", e.delta_q);
        out << YAML::Key << "location" << YAML::Value << to_string(e.location);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "droop" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "enabled" << YAML::Value << c.droop_enabled;
    emit_real(out, "k_p", c.droop.k_p);
    emit_real(out, "k_q", c.droop.k_q);
    emit_real(out, "f_star", c.droop.f_star);
    emit_real(out, "v_star", c.droop.v_star);
    emit_real(out, "p_star", c.droop.p_star);
    emit_real(out, "q_star", c.droop.q_star);
    emit_real(out, "p_max", c.droop.p_max);
    emit_real(out, "q_max", c.droop.q_max);
    out << YAML::EndMap;

    out << YAML::Key << "pll" << YAML::Value << YAML::BeginMap;
    emit_real(out, "kp", c.pll.kp);
    emit_real(out, "ki", c.pll.ki);
    emit_real(out, "floor_fraction", c.pll.floor_fraction);
    out << YAML::Key << "amplitude_window" << YAML::Value << c.pll.amplitude_window;
    out << YAML::EndMap;

    out << YAML::Key << "coupling" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "itm" << YAML::Value << to_string(c.itm);
    out << YAML::Key << "grid_loss_policy" << YAML::Value << to_string(c.grid_loss_policy);
    out << YAML::Key << "microgrid_loss_policy" << YAML::Value << to_string(c.microgrid_loss_policy);
    out << YAML::Key << "reconstruct" << YAML::Value << c.reconstruct;
    out << YAML::Key << "ma_window" << YAML::Value << c.ma_window;
    out << YAML::Key << "stability_guard" << YAML::Value << c.stability_guard;
    emit_real(out, "guard_window", c.guard_window);
    out << YAML::EndMap;

    out << YAML::Key << "transport" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << to_string(c.transport.mode);
    emit_real(out, "loss_probability", c.transport.loss_probability);
    out << YAML::Key << "max_loss_burst" << YAML::Value << c.transport.max_loss_burst;
    out << YAML::Key << "extra_delay_steps" << YAML::Value << c.transport.extra_delay_steps;
    out << YAML::Key << "seed" << YAML::Value << c.transport.rng_seed;
    out << YAML::Key << "host" << YAML::Value << c.transport.host;
    out << YAML::Key << "grid_port" << YAML::Value << c.transport.grid_port;
    out << YAML::Key << "microgrid_port" << YAML::Value << c.transport.microgrid_port;
    emit_real(out, "deadline_fraction", c.transport.deadline_fraction);
    out << YAML::EndMap;

    out << YAML::Key << "microgrid" << YAML::Value << YAML::BeginMap;
    if (c.residential_profile)
        out << YAML::Key << "residential_profile" << YAML::Value << *c.residential_profile;
    if (c.heat_pump_profile)
        out << YAML::Key << "heat_pump_profile" << YAML::Value << *c.heat_pump_profile;
    emit_real(out, "profile_offset_s", c.profile_offset_s);
    emit_real(out, "v_nominal_rms", c.v_nominal_rms);
    if (c.loadbank_initial_p) {
        out << YAML::Key << "loadbank_initial" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (int k = 0; k < 3; ++k)
            out << format_real((*c.loadbank_initial_p)(k));
        out << YAML::EndSeq;
    }
    out << YAML::Key << "overrides" << YAML::Value << YAML::BeginSeq;
    for (const auto& o : c.overrides) {
        out << YAML::BeginMap;
        emit_real(out, "t", o.t);
        out << YAML::Key << "phase" << YAML::Value << phase_name(o.phase);
        emit_real(out, "p_w", o.p_w);
        emit_real(out, "q_var", o.q_var);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;

    out << YAML::Key << "recorder" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "channels" << YAML::Value << YAML::Flow << c.recorder.channels;
    out << YAML::Key << "decimation" << YAML::Value << c.recorder.decimation;
    out << YAML::EndMap;

    out << YAML::Key << "benchmark" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "probes" << YAML::Value << c.benchmark_probes;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::filesystem::path scenario_dir() {
    if (const char* env = std::getenv("PHIL_SCENARIO_DIR"))
        return env;
    return std::filesystem::path(PHIL_DATA_DIR) / "scenarios";
}

std::vector<std::string> bundled_scenarios() {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(scenario_dir(), ec)) {
        if (entry.path().extension() == ".yaml")
            names.push_back(entry.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

ScenarioConfig resolve_config(const std::string& name_or_path) {
    const std::filesystem::path candidate(name_or_path);
    if (std::filesystem::exists(candidate) && std::filesystem::is_regular_file(candidate))
        return load_config_file(candidate);
    for (const auto& name : bundled_scenarios()) {
        if (name == name_or_path || name.rfind(name_or_path + "-", 0) == 0)
            return load_config_file(scenario_dir() / (name + ".yaml"));
    }
    throw ConfigError("no config file or bundled scenario named '" + name_or_path + "'");
}

MicrogridConfig build_microgrid_config(const ScenarioConfig& c) {
    MicrogridConfig m;
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : c.base_dir / path;
    };
    if (c.residential_profile)
        m.residential = load_profile_csv(resolve(*c.residential_profile));
    if (c.heat_pump_profile)
        m.heat_pump = load_profile_csv(resolve(*c.heat_pump_profile));
    m.profile_offset_s = c.profile_offset_s;
    m.v_nominal_rms = c.v_nominal_rms;
    m.loadbank_initial_p = c.loadbank_initial_p;
    m.overrides = c.overrides;
    m.bess.enabled = c.droop_enabled;
    m.bess.droop = c.droop;
    return m;
}

} // namespace phil
