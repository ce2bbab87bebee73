#include "razcert/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace razcert {

// --- value ---------------------------------------------------------------------

double TomlValue::as_number() const {
    if (type == Type::Int) return double(i);
    if (type == Type::Float) return f;
    throw ConfigError("line " + std::to_string(line) + ": expected a number");
}

// --- parser --------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t q = 0; q < s.size(); ++q) {
        if (s[q] == '"') in_str = !in_str;
        if (s[q] == '#' && !in_str) return s.substr(0, q);
    }
    return s;
}

TomlValue parse_value(const std::string& text, int line);

TomlValue parse_array(const std::string& text, int line) {
    TomlValue v;
    v.type = TomlValue::Type::Array;
    v.line = line;
    std::string inner = trim(text.substr(1, text.size() - 2));
    if (inner.empty()) return v;
    // split on top-level commas
    int depth = 0;
    bool in_str = false;
    std::string cur;
    auto flush = [&]() {
        std::string t = trim(cur);
        if (!t.empty()) v.arr.push_back(parse_value(t, line));
        cur.clear();
    };
    for (char ch : inner) {
        if (ch == '"') in_str = !in_str;
        if (!in_str) {
            if (ch == '[') ++depth;
            if (ch == ']') --depth;
            if (ch == ',' && depth == 0) {
                flush();
                continue;
            }
        }
        cur.push_back(ch);
    }
    flush();
    return v;
}

TomlValue parse_value(const std::string& text, int line) {
    TomlValue v;
    v.line = line;
    if (text.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
    if (text.front() == '[') {
        if (text.back() != ']')
            throw ConfigError("line " + std::to_string(line) + ": unterminated array");
        return parse_array(text, line);
    }
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"')
            throw ConfigError("line " + std::to_string(line) + ": unterminated string");
        v.type = TomlValue::Type::Str;
        v.s = text.substr(1, text.size() - 2);
        return v;
    }
    if (text == "true" || text == "false") {
        v.type = TomlValue::Type::Bool;
        v.b = text == "true";
        return v;
    }
    bool is_float = text.find_first_of(".eE") != std::string::npos;
    // a leading sign plus digits only is an integer
    try {
        std::size_t pos = 0;
        if (is_float) {
            v.type = TomlValue::Type::Float;
            v.f = std::stod(text, &pos);
        } else {
            v.type = TomlValue::Type::Int;
            v.i = std::stoll(text, &pos);
        }
        if (pos != text.size())
            throw ConfigError("line " + std::to_string(line) + ": malformed value '" + text + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": malformed value '" + text + "'");
    }
    return v;
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("line " + std::to_string(line) + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(line) + ": empty section name");
            continue;
        }
        std::size_t eq = std::string::npos;
        bool in_str = false;
        for (std::size_t q = 0; q < s.size(); ++q) {
            if (s[q] == '"') in_str = !in_str;
            if (s[q] == '=' && !in_str) {
                eq = q;
                break;
            }
        }
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (table.values.count(full))
            throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + full + "'");
        table.values[full] = parse_value(value, line);
    }
    return table;
}

// --- table accessors ----------------------------------------------------------------

const TomlValue* TomlTable::find(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
    const TomlValue* v = find(key);
    return v ? v->as_number() : fallback;
}

long long TomlTable::get_int(const std::string& key, long long fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->type != TomlValue::Type::Int)
        throw ConfigError("key '" + key + "' must be an integer");
    return v->i;
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->type != TomlValue::Type::Bool) throw ConfigError("key '" + key + "' must be a boolean");
    return v->b;
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->type != TomlValue::Type::Str) throw ConfigError("key '" + key + "' must be a string");
    return v->s;
}

std::string TomlTable::require_string(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) throw ConfigError("missing required key '" + key + "'");
    if (v->type != TomlValue::Type::Str) throw ConfigError("key '" + key + "' must be a string");
    return v->s;
}

std::optional<double> TomlTable::get_optional_double(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    return v->as_number();
}

std::optional<long long> TomlTable::get_optional_int(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    if (v->type != TomlValue::Type::Int)
        throw ConfigError("key '" + key + "' must be an integer");
    return v->i;
}

Vec TomlTable::get_double_array(const std::string& key, const Vec& fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->type != TomlValue::Type::Array)
        throw ConfigError("key '" + key + "' must be an array");
    Vec out;
    for (const auto& e : v->arr) out.push_back(e.as_number());
    return out;
}

std::vector<long long> TomlTable::get_int_array(const std::string& key,
                                                const std::vector<long long>& fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->type != TomlValue::Type::Array)
        throw ConfigError("key '" + key + "' must be an array");
    std::vector<long long> out;
    for (const auto& e : v->arr) {
        if (e.type != TomlValue::Type::Int)
            throw ConfigError("key '" + key + "' must contain integers");
        out.push_back(e.i);
    }
    return out;
}

std::vector<std::vector<long long>> TomlTable::get_int_matrix(const std::string& key) const {
    const TomlValue* v = find(key);
    std::vector<std::vector<long long>> out;
    if (!v) return out;
    if (v->type != TomlValue::Type::Array)
        throw ConfigError("key '" + key + "' must be an array of arrays");
    for (const auto& row : v->arr) {
        if (row.type != TomlValue::Type::Array)
            throw ConfigError("key '" + key + "' must be an array of arrays");
        std::vector<long long> r;
        for (const auto& e : row.arr) {
            if (e.type != TomlValue::Type::Int)
                throw ConfigError("key '" + key + "' must contain integers");
            r.push_back(e.i);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Vec> TomlTable::get_double_matrix(const std::string& key) const {
    const TomlValue* v = find(key);
    std::vector<Vec> out;
    if (!v) return out;
    if (v->type != TomlValue::Type::Array)
        throw ConfigError("key '" + key + "' must be an array of arrays");
    for (const auto& row : v->arr) {
        if (row.type != TomlValue::Type::Array)
            throw ConfigError("key '" + key + "' must be an array of arrays");
        Vec r;
        for (const auto& e : row.arr) r.push_back(e.as_number());
        out.push_back(std::move(r));
    }
    return out;
}

void TomlTable::check_unknown() const {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : values)
        if (!consumed_.count(key))
            unknown.push_back(key + " (line " + std::to_string(value.line) + ")");
    if (!unknown.empty()) {
        std::string msg = "unknown configuration key(s): ";
        for (std::size_t q = 0; q < unknown.size(); ++q)
            msg += (q ? ", " : "") + unknown[q];
        throw ConfigError(msg);
    }
}

// --- run config -----------------------------------------------------------------------

namespace {

std::vector<std::size_t> to_sizes(const std::vector<long long>& in) {
    std::vector<std::size_t> out;
    for (long long v : in) {
        if (v < 1) throw ConfigError("hidden layer widths must be positive");
        out.push_back(std::size_t(v));
    }
    return out;
}

std::vector<int> to_ints(const std::vector<long long>& in) {
    std::vector<int> out;
    for (long long v : in) out.push_back(int(v));
    return out;
}

}  // namespace

RunConfig RunConfig::from_toml(const TomlTable& t) {
    RunConfig c;
    c.env_kind = t.require_string("env.kind");
    if (c.env_kind != "platoon" && c.env_kind != "drone" && c.env_kind != "microgrid" &&
        c.env_kind != "custom")
        throw ConfigError("env.kind must be one of platoon, drone, microgrid, custom");

    // env-specific tables (defaults live in the param structs)
    c.platoon_count = int(t.get_int("platoon.count", 5));
    c.platoon.sample_period = t.get_double("platoon.sample_period", 0.1);
    {
        std::vector<long long> all;
        for (int i = 0; i < c.platoon_count; ++i) all.push_back(i);
        c.platoon.cav_set = to_ints(t.get_int_array("platoon.cavs", all));
        c.platoon.hdv_set = to_ints(t.get_int_array("platoon.hdvs", {}));
    }
    c.platoon.ovm_sensitivity = t.get_double("platoon.ovm_sensitivity", 0.5);
    c.platoon.ovm_vfree = t.get_double("platoon.ovm_vfree", 20.0);
    c.platoon.ovm_shape = t.get_double("platoon.ovm_shape", 0.1);
    c.platoon.ovm_shalf = t.get_double("platoon.ovm_shalf", 20.0);
    c.platoon.eq_spacing = t.get_double("platoon.eq_spacing", 20.0);
    c.platoon.eq_velocity = t.get_double("platoon.eq_velocity", 10.0);
    c.platoon.k_s = t.get_double("platoon.k_s", 0.1);
    c.platoon.k_v = t.get_double("platoon.k_v", 0.5);
    c.platoon.k_p = t.get_double("platoon.k_p", 0.2);
    c.platoon.disturbance_max = t.get_double("platoon.d_max", 1.0);
    c.platoon.delay = int(t.get_int("platoon.delay", 1));

    c.drone.follower_count = int(t.get_int("drone.followers", 3));
    c.drone.sample_period = t.get_double("drone.sample_period", 0.1);
    c.drone.follow_predecessor = t.get_bool("drone.follow_predecessor", true);
    c.drone.offsets = t.get_double_matrix("drone.offsets");
    c.drone.circle_speed = t.get_double("drone.circle_speed", 1.0);
    c.drone.circle_omega = t.get_double("drone.circle_omega", 0.2);
    c.drone.k_p = t.get_double("drone.k_p", 1.0);
    c.drone.k_v = t.get_double("drone.k_v", 1.5);
    c.drone.disturbance_max = t.get_double("drone.d_max", 0.5);
    c.drone.delay = int(t.get_int("drone.delay", 1));

    c.microgrid.inverter_count = int(t.get_int("microgrid.count", 4));
    c.microgrid.sample_period = t.get_double("microgrid.sample_period", 0.01);
    {
        auto lines = t.get_int_matrix("microgrid.lines");
        for (const auto& l : lines) {
            if (l.size() != 2) throw ConfigError("microgrid.lines entries must be [i, j]");
            c.microgrid.lines.push_back({int(l[0]), int(l[1])});
        }
    }
    c.microgrid.susceptance = t.get_double("microgrid.susceptance", 1.0);
    c.microgrid.loads = t.get_double_array("microgrid.loads", {});
    c.microgrid.droop_gain = t.get_double("microgrid.droop", 0.5);
    c.microgrid.time_constant = t.get_double("microgrid.time_constant", 0.1);
    c.microgrid.nominal_frequency = t.get_double("microgrid.omega_star", 0.0);
    c.microgrid.k_omega = t.get_double("microgrid.k_omega", 1.0);
    c.microgrid.k_xi = t.get_double("microgrid.k_xi", 0.2);
    c.microgrid.disturbance_max = t.get_double("microgrid.d_max", 1.0);
    c.microgrid.delay = int(t.get_int("microgrid.delay", 1));

    c.custom.agent_count = int(t.get_int("custom.n", 2));
    c.custom_topology = t.get_string("custom.topology", "pair");
    c.custom.a = t.get_double("custom.a", 0.5);
    c.custom.b = t.get_double("custom.b", 0.1);
    c.custom.c_u = t.get_double("custom.c_u", 1.0);
    c.custom.c_d = t.get_double("custom.c_d", 1.0);
    c.custom.k_feedback = t.get_double("custom.k_feedback", 0.0);
    c.custom.disturbance_max = t.get_double("custom.d_max", 0.1);
    {
        int delay = int(t.get_int("custom.delay", 1));
        auto edges = t.get_int_matrix("custom.edges");
        int n = c.custom.agent_count;
        if (c.custom_topology == "pair") {
            if (n != 2) throw ConfigError("custom.topology pair requires n = 2");
            c.custom.edges = {{0, 1, delay}, {1, 0, delay}};
        } else if (c.custom_topology == "chain") {
            for (int i = 1; i < n; ++i) c.custom.edges.push_back({i, i - 1, delay});
        } else if (c.custom_topology == "ring") {
            for (int i = 0; i < n; ++i) c.custom.edges.push_back({i, (i + n - 1) % n, delay});
        } else if (c.custom_topology == "star") {
            for (int i = 1; i < n; ++i) c.custom.edges.push_back({i, 0, delay});
        } else if (c.custom_topology == "custom") {
            for (const auto& e : edges) {
                if (e.size() != 3) throw ConfigError("custom.edges entries must be [i, j, delay]");
                c.custom.edges.push_back({int(e[0]), int(e[1]), int(e[2])});
            }
        } else {
            throw ConfigError("custom.topology must be pair, chain, ring, star, or custom");
        }
    }

    c.constants.p = t.get_double("constants.p", 1.01);
    c.constants.epsilon = t.get_double("constants.epsilon", 0.05);
    c.constants.psi = t.get_double("constants.psi", 0.1);
    c.constants.a1 = t.get_double("constants.a1", 0.01);
    c.constants.a2 = t.get_double("constants.a2", 10.0);
    c.constants.eps_p = t.get_double("constants.eps_p", 1e-3);
    c.constants.eps_d = t.get_double("constants.eps_d", 1e-6);
    c.R = t.get_double("constants.R", 0.15);
    c.rho_override = t.get_optional_double("constants.rho_override");

    c.weights.imi = t.get_double("weights.imi", 1.0);
    c.weights.p = t.get_double("weights.p", 4000.0);
    c.weights.d = t.get_double("weights.d", 2000.0);

    c.trajectories = int(t.get_int("training.trajectories", 30000));
    c.horizon = int(t.get_int("training.horizon", 50));
    c.epochs = int(t.get_int("training.epochs", 100));
    c.learning_rate = t.get_double("training.lr", 0.001);
    c.batch = int(t.get_int("training.batch", 32));
    c.cegis_cap = int(t.get_int("training.cegis_cap", 100));
    c.seed = std::uint64_t(t.get_int("training.seed", 0));
    c.hidden_v = to_sizes(t.get_int_array("training.hidden_v", {64, 64, 64}));
    c.hidden_pi = to_sizes(t.get_int_array("training.hidden_pi", {64, 64, 64}));
    c.freeze_policy = t.get_bool("training.freeze_policy", false);
    c.cex_weight = int(t.get_int("training.cex_weight", 8));
    c.train_half_width = t.get_double_array("training.init_half_width", {1.0});

    c.reach_samples = int(t.get_int("reach.samples", 4096));
    c.reach_inflation = t.get_double("reach.eta", 0.05);
    c.t_r_override = t.get_optional_int("reach.t_r_override");
    c.s0_half_width = t.get_double_array("reach.s0_half_width", {1.0});

    c.grids.delta_out = t.get_double("grids.delta_out", 0.05);
    c.grids.delta_in = t.get_double("grids.delta_in", 0.01);
    c.grids.delta_classk = t.get_double("grids.delta_classk", 0.01);
    c.grids.point_cap = std::uint64_t(t.get_int("grids.point_cap", 100000000));
    c.grids.slack_multiplier = t.get_double("grids.slack", 1.0);
    c.grids.classk_carve_factor = t.get_double("grids.carve_factor", 1.25);
    c.grids.origin_tolerance = t.get_double("grids.origin_tol", 1e-6);
    c.grids.cex_cap = int(t.get_int("grids.cex_cap", 1024));

    c.reduction = t.get_bool("scalability.reduction", true);
    c.share_by_class = t.get_bool("scalability.share", true);

    t.check_unknown();

    if (c.grids.slack_multiplier < 1.0) throw ConfigError("grids.slack must be >= 1");
    c.constants.validate();
    return c;
}

RunConfig RunConfig::from_text(const std::string& text) { return from_toml(parse_toml(text)); }

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

std::string fmt_array(const Vec& v) {
    std::string s = "[";
    for (std::size_t q = 0; q < v.size(); ++q) s += (q ? ", " : "") + fmt(v[q]);
    return s + "]";
}

template <class T>
std::string fmt_int_array(const std::vector<T>& v) {
    std::string s = "[";
    for (std::size_t q = 0; q < v.size(); ++q)
        s += (q ? ", " : "") + std::to_string((long long)(v[q]));
    return s + "]";
}

}  // namespace

std::string RunConfig::to_toml() const {
    std::ostringstream out;
    out << "[env]\nkind = \"" << env_kind << "\"\n\n";

    if (env_kind == "platoon") {
        out << "[platoon]\n";
        out << "count = " << platoon_count << "\n";
        out << "cavs = " << fmt_int_array(platoon.cav_set) << "\n";
        out << "hdvs = " << fmt_int_array(platoon.hdv_set) << "\n";
        out << "sample_period = " << fmt(platoon.sample_period) << "\n";
        out << "ovm_sensitivity = " << fmt(platoon.ovm_sensitivity) << "\n";
        out << "ovm_vfree = " << fmt(platoon.ovm_vfree) << "\n";
        out << "ovm_shape = " << fmt(platoon.ovm_shape) << "\n";
        out << "ovm_shalf = " << fmt(platoon.ovm_shalf) << "\n";
        out << "eq_spacing = " << fmt(platoon.eq_spacing) << "\n";
        out << "eq_velocity = " << fmt(platoon.eq_velocity) << "\n";
        out << "k_s = " << fmt(platoon.k_s) << "\n";
        out << "k_v = " << fmt(platoon.k_v) << "\n";
        out << "k_p = " << fmt(platoon.k_p) << "\n";
        out << "d_max = " << fmt(platoon.disturbance_max) << "\n";
        out << "delay = " << platoon.delay << "\n\n";
    } else if (env_kind == "drone") {
        out << "[drone]\n";
        out << "followers = " << drone.follower_count << "\n";
        out << "sample_period = " << fmt(drone.sample_period) << "\n";
        out << "follow_predecessor = " << (drone.follow_predecessor ? "true" : "false") << "\n";
        if (!drone.offsets.empty()) {
            out << "offsets = [";
            for (std::size_t q = 0; q < drone.offsets.size(); ++q)
                out << (q ? ", " : "") << fmt_array(drone.offsets[q]);
            out << "]\n";
        }
        out << "circle_speed = " << fmt(drone.circle_speed) << "\n";
        out << "circle_omega = " << fmt(drone.circle_omega) << "\n";
        out << "k_p = " << fmt(drone.k_p) << "\n";
        out << "k_v = " << fmt(drone.k_v) << "\n";
        out << "d_max = " << fmt(drone.disturbance_max) << "\n";
        out << "delay = " << drone.delay << "\n\n";
    } else if (env_kind == "microgrid") {
        out << "[microgrid]\n";
        out << "count = " << microgrid.inverter_count << "\n";
        if (!microgrid.lines.empty()) {
            out << "lines = [";
            for (std::size_t q = 0; q < microgrid.lines.size(); ++q)
                out << (q ? ", " : "") << "[" << microgrid.lines[q][0] << ", "
                    << microgrid.lines[q][1] << "]";
            out << "]\n";
        }
        out << "sample_period = " << fmt(microgrid.sample_period) << "\n";
        out << "susceptance = " << fmt(microgrid.susceptance) << "\n";
        if (!microgrid.loads.empty()) out << "loads = " << fmt_array(microgrid.loads) << "\n";
        out << "droop = " << fmt(microgrid.droop_gain) << "\n";
        out << "time_constant = " << fmt(microgrid.time_constant) << "\n";
        out << "omega_star = " << fmt(microgrid.nominal_frequency) << "\n";
        out << "k_omega = " << fmt(microgrid.k_omega) << "\n";
        out << "k_xi = " << fmt(microgrid.k_xi) << "\n";
        out << "d_max = " << fmt(microgrid.disturbance_max) << "\n";
        out << "delay = " << microgrid.delay << "\n\n";
    } else {
        out << "[custom]\n";
        out << "n = " << custom.agent_count << "\n";
        out << "topology = \"" << custom_topology << "\"\n";
        if (custom_topology == "custom") {
            out << "edges = [";
            for (std::size_t q = 0; q < custom.edges.size(); ++q)
                out << (q ? ", " : "") << "[" << custom.edges[q][0] << ", " << custom.edges[q][1]
                    << ", " << custom.edges[q][2] << "]";
            out << "]\n";
        } else if (!custom.edges.empty()) {
            out << "delay = " << custom.edges.front()[2] << "\n";
        }
        out << "a = " << fmt(custom.a) << "\n";
        out << "b = " << fmt(custom.b) << "\n";
        out << "c_u = " << fmt(custom.c_u) << "\n";
        out << "c_d = " << fmt(custom.c_d) << "\n";
        out << "k_feedback = " << fmt(custom.k_feedback) << "\n";
        out << "d_max = " << fmt(custom.disturbance_max) << "\n\n";
    }

    out << "[constants]\n";
    out << "p = " << fmt(constants.p) << "\n";
    out << "epsilon = " << fmt(constants.epsilon) << "\n";
    out << "psi = " << fmt(constants.psi) << "\n";
    out << "a1 = " << fmt(constants.a1) << "\n";
    out << "a2 = " << fmt(constants.a2) << "\n";
    out << "eps_p = " << fmt(constants.eps_p) << "\n";
    out << "eps_d = " << fmt(constants.eps_d) << "\n";
    out << "R = " << fmt(R) << "\n";
    if (rho_override) out << "rho_override = " << fmt(*rho_override) << "\n";
    out << "\n[weights]\n";
    out << "imi = " << fmt(weights.imi) << "\n";
    out << "p = " << fmt(weights.p) << "\n";
    out << "d = " << fmt(weights.d) << "\n";
    out << "\n[training]\n";
    out << "trajectories = " << trajectories << "\n";
    out << "horizon = " << horizon << "\n";
    out << "epochs = " << epochs << "\n";
    out << "lr = " << fmt(learning_rate) << "\n";
    out << "batch = " << batch << "\n";
    out << "cegis_cap = " << cegis_cap << "\n";
    out << "seed = " << seed << "\n";
    out << "hidden_v = " << fmt_int_array(hidden_v) << "\n";
    out << "hidden_pi = " << fmt_int_array(hidden_pi) << "\n";
    out << "freeze_policy = " << (freeze_policy ? "true" : "false") << "\n";
    out << "cex_weight = " << cex_weight << "\n";
    out << "init_half_width = " << fmt_array(train_half_width) << "\n";
    out << "\n[reach]\n";
    out << "samples = " << reach_samples << "\n";
    out << "eta = " << fmt(reach_inflation) << "\n";
    if (t_r_override) out << "t_r_override = " << *t_r_override << "\n";
    out << "s0_half_width = " << fmt_array(s0_half_width) << "\n";
    out << "\n[grids]\n";
    out << "delta_out = " << fmt(grids.delta_out) << "\n";
    out << "delta_in = " << fmt(grids.delta_in) << "\n";
    out << "delta_classk = " << fmt(grids.delta_classk) << "\n";
    out << "point_cap = " << grids.point_cap << "\n";
    out << "slack = " << fmt(grids.slack_multiplier) << "\n";
    out << "carve_factor = " << fmt(grids.classk_carve_factor) << "\n";
    out << "origin_tol = " << fmt(grids.origin_tolerance) << "\n";
    out << "cex_cap = " << grids.cex_cap << "\n";
    out << "\n[scalability]\n";
    out << "reduction = " << (reduction ? "true" : "false") << "\n";
    out << "share = " << (share_by_class ? "true" : "false") << "\n";
    return out.str();
}

std::string RunConfig::hash() const {
    std::ostringstream out;
    out << std::hex << fnv1a(to_toml());
    return out.str();
}

BuiltEnv RunConfig::build_env() const {
    if (env_kind == "platoon") return build_platoon(platoon, platoon_count);
    if (env_kind == "drone") return build_drone(drone);
    if (env_kind == "microgrid") return build_microgrid(microgrid);
    return build_custom(custom);
}

namespace {

Vec broadcast_half_width(const Vec& hw, int dim, const std::string& key) {
    if (int(hw.size()) == dim) return hw;
    if (hw.size() == 1) return Vec(std::size_t(dim), hw[0]);
    throw ConfigError(key + " must have 1 or state-dimension entries");
}

}  // namespace

std::vector<Box> RunConfig::training_boxes(const InterconnectedSystem& system) const {
    std::vector<Box> boxes;
    for (int i = 0; i < system.agent_count(); ++i) {
        const AgentSpec& a = system.agents[std::size_t(i)];
        Vec hw = broadcast_half_width(train_half_width, a.state_dim, "training.init_half_width");
        Box b(a.equilibrium, a.equilibrium);
        for (std::size_t q = 0; q < b.dim(); ++q) {
            b.lo[q] -= hw[q];
            b.hi[q] += hw[q];
        }
        boxes.push_back(std::move(b));
    }
    return boxes;
}

Box RunConfig::s0_embedded(const InterconnectedSystem& system) const {
    Box out;
    for (int s = 0; s <= system.graph.tau_max; ++s)
        for (int i = 0; i < system.agent_count(); ++i) {
            const AgentSpec& a = system.agents[std::size_t(i)];
            Vec hw = broadcast_half_width(s0_half_width, a.state_dim, "reach.s0_half_width");
            Box b(a.equilibrium, a.equilibrium);
            for (std::size_t q = 0; q < b.dim(); ++q) {
                b.lo[q] -= hw[q];
                b.hi[q] += hw[q];
            }
            out.append(b);
        }
    return out;
}

VerifyOptions RunConfig::verify_options(const InterconnectedSystem& system, ExecMode exec) const {
    VerifyOptions v;
    v.R = R;
    v.grids = grids;
    v.s0 = s0_embedded(system);
    v.reach_samples = reach_samples;
    v.reach_inflation = reach_inflation;
    v.t_r_override = t_r_override;
    v.rho_override = rho_override;
    v.reduction = reduction;
    v.seed = derive_seed(seed, "verify", 0);
    v.exec = exec;
    return v;
}

CegisOptions RunConfig::cegis_options(const InterconnectedSystem& system, ExecMode exec) const {
    CegisOptions c;
    c.iteration_cap = cegis_cap;
    c.cex_weight = cex_weight;
    c.trajectories = trajectories;
    c.horizon = horizon;
    c.initial_boxes = training_boxes(system);
    c.weights = weights;
    c.train.epochs = epochs;
    c.train.learning_rate = learning_rate;
    c.train.batch_size = batch;
    c.train.freeze_policy = freeze_policy;
    c.train.exec = exec;
    c.verify = verify_options(system, exec);
    c.seed = seed;
    return c;
}

}  // namespace razcert
