#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "razcert/certificate.hpp"
#include "razcert/parallel.hpp"
#include "razcert/reach.hpp"

namespace razcert {

// --- closed-form constants ----------------------------------------------------

/// rho = max{exp(-ln p / (tau_max+1)), 1-eps}, c = p. Requires p > 1 and
/// eps in (0,1) so that rho < 1.
std::pair<double, double> compute_rho_c(double p, double epsilon, int tau_max);

/// T_R = ceil(ln(R/(c Vmax0)) / ln rho), clamped at 0; returns 0 when
/// R >= c * Vmax0.
long long compute_tr(double R, double c, double vmax0, double rho);

// --- grids and margins ----------------------------------------------------------

struct GridSpec {
    double delta_out = 0.05;
    double delta_in = 0.01;
    double delta_classk = 0.01;
    std::uint64_t point_cap = 100000000;  // per (i,k) task
    double slack_multiplier = 1.0;        // >= 1 scales every margin
    double classk_carve_factor = 1.25;    // origin exclusion radius multiplier
    double origin_tolerance = 1e-6;
    int cex_cap = 1024;                   // per task
};

/// Uniform grid over a box: per-coordinate realized steps (never larger than
/// the requested delta), lazily enumerated through a flat index.
struct GridAxes {
    Vec lo;
    Vec step;
    std::vector<std::uint64_t> count;

    static GridAxes make(const Box& box, double delta);
    std::uint64_t total_points() const;  // saturates at uint64 max
    /// Half the Euclidean norm of the realized step vector (cover radius).
    double cover_radius() const;
    void decode(std::uint64_t index, Vec& out) const;
};

struct Margins {
    std::vector<double> l_v;       // per agent, class-resolved network bound
    std::vector<double> l_f;       // per agent, closed-loop effective bound
    std::vector<double> l_h_upper; // p L_Vi + max_j L_Vj
    std::vector<double> l_r_upper; // L_Vi L_fi + sum_j |gamma_ij| L_Vj + psi
};

/// Theorem-style margin constants from the Lipschitz data. l_f entries must
/// already account for the controller (closed loop).
Margins compute_margins(const CertificateConstants& constants, const Matrix& gamma,
                        const std::vector<double>& l_v, const std::vector<double>& l_f,
                        const InterconnectionGraph& graph);

// --- results ----------------------------------------------------------------------

struct Counterexample {
    enum class Kind { Stage1Logic, Stage2Decrement, ClassKLower, ClassKUpper };
    int agent = 0;
    int k = -1;  // time index; -1 for time-invariant checks
    Vec z;       // raw coordinates in the agent's local layout
    Kind kind = Kind::Stage1Logic;
    double residual = 0.0;
};

std::string cex_kind_name(Counterexample::Kind kind);

struct ClassKResult {
    int class_id = 0;
    int representative = 0;
    std::uint64_t points = 0;
    std::uint64_t carved = 0;
    double margin = 0.0;
    double carve_radius = 0.0;
    double claim_radius = 0.0;
    double origin_value = 0.0;
    double worst_lower_slack = 0.0;
    double worst_upper_slack = 0.0;
    bool origin_ok = true;
    bool cap_hit = false;
    bool containment_ok = true;  // claim radius fits inside the R/a1 box
    std::vector<Counterexample> cex;

    bool passed() const { return cex.empty() && origin_ok && !cap_hit && containment_ok; }
};

/// Margined class-K sweep on a box in equilibrium-shifted coordinates.
/// Outside the carve radius each grid point must satisfy
///   a1|x| + m <= V(x) <= a2|x| - m,   m = (L_V + max(a1,a2)) * cover * slack;
/// inside it the check falls back to the exact origin anchor |V(0)| <= tol
/// plus the Lipschitz band. claim_radius reports where the continuous bounds
/// are certified from.
ClassKResult classk_check(const LyapunovNet& v, const Box& domain, double a1, double a2,
                          double delta, double l_v, const GridSpec& grids, ExecMode mode);

struct Stage1Stats {
    int agent = 0;
    int k = 0;
    std::uint64_t points = 0;
    std::uint64_t skipped_inside = 0;
    std::uint64_t premise_pass = 0;
    std::uint64_t checked = 0;
    double eps_out = 0.0;
    double delta_out = 0.0;
    double worst_slack = 0.0;  // max over checked of residual + delta_out
    bool cap_hit = false;
    std::vector<Counterexample> cex;
};

struct Stage2Stats {
    int agent = 0;
    std::uint64_t points = 0;
    std::uint64_t via_decrement = 0;
    std::uint64_t via_invariance = 0;
    double eps_in = 0.0;
    double delta_in = 0.0;
    double delta_level = 0.0;
    double worst_slack = 0.0;
    bool cap_hit = false;
    std::vector<Counterexample> cex;
};

enum class Verdict { Verified, Refuted, InconclusiveCap };
std::string verdict_name(Verdict verdict);

struct VerificationReport {
    Verdict verdict = Verdict::InconclusiveCap;
    CertificateConstants constants;
    double R = 0.0;
    double rho = 0.0;
    double c = 0.0;
    double vmax0_upper = 0.0;
    long long t_r = 0;
    bool reduction = true;
    bool envelope_caveat = true;  // reach sets are sampled, not guaranteed
    std::vector<ClassKResult> classk;
    std::vector<Stage1Stats> stage1;
    std::vector<Stage2Stats> stage2;
    std::vector<Counterexample> counterexamples;
    std::vector<std::string> notes;

    std::uint64_t cex_count() const;
    int exit_code() const;  // 0 verified, 1 refuted, 2 inconclusive-cap
};

std::string report_json(const VerificationReport& report);
std::string report_digest(const VerificationReport& report);

// --- stage drivers -------------------------------------------------------------------

/// Members/rep of one verification class (equivalence class, or a singleton
/// when reduction is off).
struct VerifyClass {
    int representative = 0;
    std::vector<int> members;
    std::vector<std::vector<int>> slot_map;  // per member: rep slot -> member's agent
};

Stage1Stats stage1_verify(const Certificate& cert, const InterconnectedSystem& system,
                          const ReachEnvelope& envelope, int k, const VerifyClass& cls,
                          const GridSpec& grids, const Margins& margins, double R, ExecMode mode);

Stage2Stats stage2_verify(const Certificate& cert, const InterconnectedSystem& system,
                          const VerifyClass& cls, double R, const GridSpec& grids,
                          const Margins& margins, ExecMode mode);

// --- driver -----------------------------------------------------------------------------

struct VerifyOptions {
    double R = 0.15;
    GridSpec grids;
    Box s0;  // initial delay-embedded box
    int reach_samples = 4096;
    double reach_inflation = 0.05;
    std::optional<long long> t_r_override;
    std::optional<double> rho_override;
    bool reduction = true;
    std::uint64_t seed = 0;
    ExecMode exec = ExecMode::Parallel;
};

/// Runs the full pipeline: class-K per representative, reach envelope, outside
/// stage for k = 0..T_R, inside stage, and aggregates the report. Requires
/// R >= (psi/eps) * dbar; below that the minimal admissible R is reported in
/// the error.
VerificationReport verify_certificate(const Certificate& cert, const InterconnectedSystem& system,
                                      const VerifyOptions& options);

}  // namespace razcert
