#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sscert/network.hpp"

namespace sscert {

/// Solved (or initial) bus voltages and net injections, all per unit.
struct OperatingPoint {
    Eigen::VectorXd v;      // magnitude
    Eigen::VectorXd theta;  // angle, slack = 0
    Eigen::VectorXd rho;    // ln v
    Eigen::VectorXd p;
    Eigen::VectorXd q;

    [[nodiscard]] Eigen::VectorXcd complex_voltage() const;
};

/// Scheduled net injections. The admittance parts model voltage-dependent
/// injections: p_k(V) = p_k + p_admittance_k * V_k^2 (same for q).
struct InjectionSchedule {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
    Eigen::VectorXd p_admittance;
    Eigen::VectorXd q_admittance;

    static InjectionSchedule zeros(std::size_t buses);
};

InjectionSchedule base_schedule(const PowerNetwork& network);

/// Base-case voltages from the case file with setpoints at slack/generator buses.
OperatingPoint flat_start(const PowerNetwork& network);

struct SolverOptions {
    double tolerance = 1e-10;
    int max_iterations = 30;
};

struct PowerFlowResult {
    bool converged = false;
    OperatingPoint point;
    int iterations = 0;
    std::vector<double> mismatch_history;
    std::string failure;
};

class NoConvergence : public std::runtime_error {
public:
    NoConvergence(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    [[nodiscard]] const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

/// Polar Newton-Raphson. Voltage magnitudes at slack and generator buses are
/// taken from `init`, the slack angle is pinned to init's slack angle.
PowerFlowResult solve_power_flow(const PowerNetwork& network, const InjectionSchedule& schedule,
                                 const OperatingPoint& init, const SolverOptions& options = {});

/// Base case from file schedule; throws NoConvergence.
OperatingPoint solve_base(const PowerNetwork& network,
                          const std::optional<OperatingPoint>& init = std::nullopt,
                          const SolverOptions& options = {});

/// Solve with overridden injections at non-slack buses, warm-started from init.
PowerFlowResult solve_at_injection(const PowerNetwork& network, const InjectionSchedule& u,
                                   const OperatingPoint& init, const SolverOptions& options = {});

/// Largest absolute active/reactive mismatch of `point` against `schedule`
/// over the equations the solver enforces.
double max_mismatch(const PowerNetwork& network, const InjectionSchedule& schedule,
                    const OperatingPoint& point);

/// Complex power flows at both terminals of every branch.
struct BranchFlows {
    Eigen::VectorXcd from;
    Eigen::VectorXcd to;
};

BranchFlows branch_flows(const PowerNetwork& network, const OperatingPoint& point);

// ---------------------------------------------------------------------------
// Operational feasibility

enum class ConstraintKind { voltage, angle_difference, p_gen, q_gen, thermal };

std::string_view to_string(ConstraintKind kind);

/// The active operational limit set. Per-bus voltage bounds replace the
/// case-file limits (e.g. a band around the base point); s_max entries that
/// are unset disable the thermal check of that branch.
struct OperationalLimits {
    Eigen::VectorXd v_min;
    Eigen::VectorXd v_max;
    std::vector<std::optional<double>> s_max;
    bool voltage = true;
    bool angle_difference = true;
    bool p_gen = true;
    bool q_gen = true;
    bool thermal = true;
    double tolerance = 1e-9;
};

/// Voltage band of +-`band` (relative) around the base voltages, thermal
/// limits from the case file.
OperationalLimits band_limits(const PowerNetwork& network, const OperatingPoint& base, double band);

struct Violation {
    ConstraintKind kind;
    std::size_t element;
    double value;
    double limit;
    double margin;  // amount by which the limit is exceeded (> 0)
};

struct FeasibilityReport {
    bool feasible = true;
    std::vector<Violation> violations;
};

FeasibilityReport check_point_feasible(const PowerNetwork& network, const OperatingPoint& point,
                                       const OperationalLimits& limits);

/// Removes every limit the base point already violates (generator p/q limits
/// from the network, thermal and angle limits per branch) and returns the
/// violations that were removed.
std::vector<Violation> relax_base_violations(PowerNetwork& network, OperationalLimits& limits,
                                             const OperatingPoint& base);

// ---------------------------------------------------------------------------
// Boundary tracing

struct RayOptions {
    double rel_tol = 1e-3;
    double initial_step = 0.05;
    int max_doublings = 40;
    bool warm_start = true;
    SolverOptions solver{};
};

struct RayProbe {
    double t;
    bool feasible;
};

struct RayResult {
    double t_max = 0.0;
    OperatingPoint boundary_point;
    std::vector<RayProbe> history;
};

/// Largest t such that the power flow at base + t * direction converges and
/// satisfies `limits`, found by doubling then bisection. Non-convergence
/// counts as infeasible. Throws std::invalid_argument on a zero direction and
/// std::domain_error when the base point is infeasible.
RayResult ray_boundary(const PowerNetwork& network, const OperatingPoint& base,
                       const InjectionSchedule& base_injection, const InjectionSchedule& direction,
                       const OperationalLimits& limits, const RayOptions& options = {});

}  // namespace sscert
