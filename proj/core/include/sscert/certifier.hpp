#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sscert/bounds.hpp"
#include "sscert/model.hpp"
#include "sscert/network.hpp"

namespace sscert {

enum class ObjectiveKind { loadability, robustness, chance };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(std::string_view s);

/// Certificate quality function. Vectors are indexed by model input.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::robustness;
    Eigen::VectorXd direction;  // loadability: signed stress direction
    Eigen::VectorXd weights;    // robustness: lu+- = floor + lambda * weights
    Eigen::VectorXd std_devs;   // chance: per-input standard deviation

    static Objective loadability(Eigen::VectorXd direction);
    static Objective robustness(Eigen::VectorXd weights);
    static Objective chance(Eigen::VectorXd std_devs);
    void validate(std::size_t inputs) const;
};

/// Probability mass of the input box under independent zero-mean normals:
/// 1/2 sum_k erf(lu+_k / (sqrt2 s_k)) - erf(-lu-_k / (sqrt2 s_k)).
double chance_score(const BoundPair& lu, const Eigen::VectorXd& std_devs);

/// How load coordinates that the objective does not vary are represented.
/// Constant-power coordinates get a floor: the admittance spread their base
/// power produces over the voltage band. Varied coordinates always do.
enum class LoadModel {
    constant_power,
    // non-varied coordinates keep their base admittance (no floor)
    constant_admittance,
};

std::string_view to_string(LoadModel m);

struct ProblemOptions {
    double band = 0.01;       // relative voltage band around base
    double theta_cap = 0.5;   // rad, edge angle cap
    LoadModel load_model = LoadModel::constant_power;
    std::vector<bool> varied;  // per input; empty means all
};

/// Fixed data of one certification run: state limits, relaxation caps and the
/// input floor every certified box must cover.
struct CertificationProblem {
    BoundPair lx_max;
    RelaxationCaps caps;
    BoundPair lu_floor;
    Eigen::VectorXd v_min;
    Eigen::VectorXd v_max;
    ProblemOptions options;
};

CertificationProblem build_problem(const PowerNetwork& network, const FixedPointModel& model,
                                   const ProblemOptions& options = {});

/// Constraint-side evaluation at (lx, lu).
struct SlackReport {
    bool holds = false;
    Eigen::VectorXd slack_hi;  // >= 0 when the row holds
    Eigen::VectorXd slack_lo;
    [[nodiscard]] double min_slack() const;
};

/// lx -/+ sigma(lu) -/+ tau(lx) >= 0 with exact residual bounds.
SlackReport self_map_holds(const FixedPointModel& model, const BoundPair& lx, const BoundPair& lu);
/// -(D+ lu+ + D- lu- + E+ d2f+ + E- d2f- + h*) >= 0 rowwise (slack_hi only).
SlackReport operational_holds(const FixedPointModel& model, const BoundPair& lx, const BoundPair& lu);
/// Same with the linear relaxation of the residual bounds.
SlackReport operational_holds_linear(const FixedPointModel& model, const BoundPair& lx, const BoundPair& lu,
                                     const RelaxationCaps& caps);

enum class BoundMode { exact, linear };

struct CertifierOptions {
    bool lp_only = false;
    double rel_tol = 1e-3;
    int max_iterations = 200;
    int max_iterations_linear = 2000;
    double convergence_tol = 1e-10;
    double inflate = 1e-6;  // relative inflation of the least fixed point before exact verification
    double chance_min_gain = 1e-4;
    int max_doublings = 60;
    // the relaxed search is repeated with the angle caps scaled by each factor
    // (tighter caps give tighter secants); the best level wins
    std::vector<double> cap_scales{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
};

struct FixedUResult {
    bool certified = false;
    BoundPair lx;
    int iterations = 0;
    std::string reason;  // empty when certified
    int failed_row = -1;
};

/// Least self-mapped box for a fixed input box by monotone iteration.
FixedUResult certify_fixed_u(const FixedPointModel& model, const BoundPair& lu, const CertificationProblem& problem,
                             BoundMode mode = BoundMode::exact, const CertifierOptions& options = {});

/// Cone spectral radius of the homogeneous relaxed map l -> tau_linear(l),
/// estimated by power iteration.
double relaxation_spectral_radius(const FixedPointModel& model, const CertificationProblem& problem,
                                  int iterations = 60);

enum class CertificateStatus { certified_nonlinear, certified_linear_relaxation, zero };

std::string_view to_string(CertificateStatus s);

/// Admissible per-bus power range derived from an admittance box. A held
/// coordinate is a fixed admittance; its range is the power that admittance
/// draws over the voltage band, not a constant-power allowance.
struct InjectionRange {
    std::size_t bus = 0;
    double p_min = 0.0, p_max = 0.0;
    double q_min = 0.0, q_max = 0.0;
    bool p_held = false;
    bool q_held = false;
    [[nodiscard]] bool empty() const { return p_min > p_max || q_min > q_max; }
};

/// Per-input mask of the coordinates kept at their base admittance.
std::vector<bool> held_inputs(const ProblemOptions& options, std::size_t inputs);

struct CertificateDiagnostics {
    int probes = 0;
    int iterations = 0;
    double spectral_radius = 0.0;
    double theta_cap = 0.0;  // angle cap of the relaxed search
    double value_linear = 0.0;  // objective value of the relaxed search
    double self_map_slack = 0.0;
    double operational_slack = 0.0;
    std::vector<std::string> binding;  // what stopped the search above the returned value
    double seconds = 0.0;
};

struct Certificate {
    BoundPair lu;
    BoundPair lx;
    Objective objective;
    double value = 0.0;
    std::vector<InjectionRange> injection_box;
    CertificateStatus status = CertificateStatus::zero;
    CertificateDiagnostics diagnostics;
};

class ZeroCertificate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input box for an objective at scalar level s (lambda or t), floor included.
BoundPair objective_box(const Objective& objective, const CertificationProblem& problem, double level);

/// The problem with every edge angle cap lowered to `theta_cap` and the angle
/// limits clamped to match. A relaxed certificate holds for the cap it was
/// found with (its diagnostics.theta_cap), not necessarily for wider ones.
CertificationProblem with_angle_cap(const CertificationProblem& problem, double theta_cap);

/// Largest certified level of `objective` with linear bounds only.
Certificate lp_relaxation_init(const FixedPointModel& model, const Objective& objective,
                               const CertificationProblem& problem, const CertifierOptions& options = {});

/// Relaxed search, then exact refinement unless options.lp_only. The result
/// is re-verified before return. Throws ZeroCertificate when not even the
/// floor box can be certified.
Certificate maximize(const FixedPointModel& model, const Objective& objective, const CertificationProblem& problem,
                     const CertifierOptions& options = {});

/// Power ranges of the load buses implied by `lu` when every load voltage
/// stays in [v_min, v_max]. Generator injections are fixed at base.
std::vector<InjectionRange> injection_box(const FixedPointModel& model, const BoundPair& lu,
                                          const Eigen::VectorXd& v_min, const Eigen::VectorXd& v_max,
                                          const std::vector<bool>& held = {});
/// Same with the band and held mask of `problem`.
std::vector<InjectionRange> injection_box(const FixedPointModel& model, const BoundPair& lu,
                                          const CertificationProblem& problem);

struct BrouwerReport {
    int samples = 0;
    int vertices = 0;
    int excursions = 0;      // iterate left A(lx)
    int nonconverged = 0;    // iteration did not settle
    double worst_residual = 0.0;
    double worst_excursion = 0.0;  // max over rows of (|A x| / lx) - 1, <= 0 when inside
};

/// Runs the fixed-point iteration from 0 for box vertices and random interior
/// inputs and reports whether iterates stay in A(lx).
BrouwerReport verify_brouwer(const FixedPointModel& model, const Certificate& certificate, int n_samples,
                             std::uint64_t seed);

/// Uniform double in [0, 1) from a 64-bit Mersenne twister draw (53-bit mantissa).
double unit_uniform(std::uint64_t draw);

}  // namespace sscert
