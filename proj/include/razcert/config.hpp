#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "razcert/cegis.hpp"
#include "razcert/envs.hpp"
#include "razcert/synthesis.hpp"
#include "razcert/verify.hpp"

namespace razcert {

// --- TOML-subset parsing ---------------------------------------------------------

struct TomlValue {
    enum class Type { Bool, Int, Float, Str, Array };
    Type type = Type::Int;
    bool b = false;
    long long i = 0;
    double f = 0.0;
    std::string s;
    std::vector<TomlValue> arr;
    int line = 0;

    double as_number() const;
};

/// Flat table of "section.key" -> value. Unknown keys are hard errors: every
/// lookup marks its key consumed and check_unknown() reports the rest.
class TomlTable {
  public:
    std::map<std::string, TomlValue> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    std::optional<double> get_optional_double(const std::string& key) const;
    std::optional<long long> get_optional_int(const std::string& key) const;
    Vec get_double_array(const std::string& key, const Vec& fallback) const;
    std::vector<long long> get_int_array(const std::string& key,
                                         const std::vector<long long>& fallback) const;
    std::vector<std::vector<long long>> get_int_matrix(const std::string& key) const;
    std::vector<Vec> get_double_matrix(const std::string& key) const;

    void check_unknown() const;

  private:
    const TomlValue* find(const std::string& key) const;
    mutable std::set<std::string> consumed_;
};

TomlTable parse_toml(const std::string& text);

// --- resolved run configuration ------------------------------------------------------

struct RunConfig {
    // [env]
    std::string env_kind;

    // env parameter tables
    PlatoonParams platoon;
    int platoon_count = 5;
    DroneParams drone;
    MicrogridParams microgrid;
    CustomParams custom;
    std::string custom_topology = "pair";

    // [constants]
    CertificateConstants constants;
    double R = 0.15;
    std::optional<double> rho_override;

    // [weights]
    LossWeights weights;

    // [training]
    int trajectories = 30000;
    int horizon = 50;
    int epochs = 100;
    double learning_rate = 0.001;
    int batch = 32;
    int cegis_cap = 100;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_v{64, 64, 64};
    std::vector<std::size_t> hidden_pi{64, 64, 64};
    bool freeze_policy = false;
    int cex_weight = 8;
    Vec train_half_width{1.0};  // per-coordinate initial box half-widths (broadcast)

    // [reach]
    int reach_samples = 4096;
    double reach_inflation = 0.05;
    std::optional<long long> t_r_override;
    Vec s0_half_width{1.0};

    // [grids]
    GridSpec grids;

    // [scalability]
    bool reduction = true;
    bool share_by_class = true;

    static RunConfig from_toml(const TomlTable& table);
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    /// Canonical dump with every default filled; re-parses to an equal config.
    std::string to_toml() const;
    std::string hash() const;

    BuiltEnv build_env() const;
    std::vector<Box> training_boxes(const InterconnectedSystem& system) const;
    Box s0_embedded(const InterconnectedSystem& system) const;
    VerifyOptions verify_options(const InterconnectedSystem& system, ExecMode exec) const;
    CegisOptions cegis_options(const InterconnectedSystem& system, ExecMode exec) const;
};

}  // namespace razcert
