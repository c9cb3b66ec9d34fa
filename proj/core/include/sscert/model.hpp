#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "sscert/network.hpp"
#include "sscert/powerflow.hpp"

namespace sscert {

/// Admittance-domain input coordinates: g = p/V^2 - Re(y_d), b = -q/V^2 - Im(y_d).
enum class InputKind { g, b };

std::string_view to_string(InputKind kind);

struct InputCoordinate {
    std::size_t bus;
    InputKind kind;

    bool operator==(const InputCoordinate&) const = default;
};

/// Every g and b coordinate of every load bus.
std::vector<InputCoordinate> all_load_inputs(const PowerNetwork& network);

/// Per-edge data of the primitive layout, referenced to the base point.
struct EdgeLayout {
    std::size_t from;
    std::size_t to;
    double rho_base;    // rho*_from - rho*_to
    double theta_base;  // theta*_from - theta*_to
    Complex yt_hat;     // to-side transfer admittance scaled by exp(rho*_e + j theta*_e)
    Complex yf_hat;     // from-side transfer admittance scaled by exp(-rho*_e - j theta*_e)
};

/// Positive and negative parts of a matrix: F = plus - minus, both >= 0,
/// elementwise min(plus, minus) = 0.
struct SignSplit {
    Eigen::MatrixXd plus;
    Eigen::MatrixXd minus;
};

SignSplit split_pm(const Eigen::MatrixXd& f);

/// plus * a + minus * b for the sign split of `f`, without materialising it.
Eigen::VectorXd split_apply(const Eigen::MatrixXd& f, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

enum class ConstraintRowKind { thermal_from_p, thermal_from_q, thermal_to_p, thermal_to_q, reactive_gen };

std::string_view to_string(ConstraintRowKind kind);

struct ConstraintRow {
    ConstraintRowKind kind;
    std::size_t element;  // branch or bus index
    int sign;             // +1: upper limit row, -1: lower limit row
};

/// Allocation of an apparent-power limit to separate p and q limits with
/// lp^2 + lq^2 = s_max^2: proportional to the base flow, equal (s_max/sqrt2),
/// or equal margin above the base |p|, |q|.
enum class ThermalSplit { proportional, square, equal_margin };

/// Operational rows to encode as h(x) = T f(x) - limit <= 0.
struct ConstraintOptions {
    bool thermal = true;
    bool reactive = true;
    // per branch apparent power limit; unset entries produce no rows
    std::vector<std::optional<double>> s_max;
    // worst-case voltage band used to move power limits into the admittance domain
    Eigen::VectorXd v_min;
    Eigen::VectorXd v_max;
    ThermalSplit split = ThermalSplit::equal_margin;
};

enum class ConstraintBlockKind { thermal_from, thermal_to, reactive_gen };

struct ConstraintBlock {
    Eigen::SparseMatrix<double> T;  // rows x 4|E|
    Eigen::VectorXd hstar;          // T f* - limit
    std::vector<ConstraintRow> rows;
};

class SingularJacobian : public std::runtime_error {
public:
    SingularJacobian(const std::string& what, Eigen::VectorXd null_vector)
        : std::runtime_error(what), null_vector_(std::move(null_vector)) {}
    [[nodiscard]] const Eigen::VectorXd& null_vector() const { return null_vector_; }

private:
    Eigen::VectorXd null_vector_;
};

/// Admittance-form fixed-point model of the power flow around a solved base
/// point. States are x = (theta_G, theta_L, rho_L); equations and inputs are
/// the nodal admittances (g_G, g_L, b_L); rows of A are [dtheta_e; drho_e;
/// rho_k for loads].
class FixedPointModel {
public:
    FixedPointModel(const PowerNetwork& network, const OperatingPoint& base,
                    std::vector<InputCoordinate> inputs, const ConstraintOptions& constraints);
    ~FixedPointModel();
    FixedPointModel(FixedPointModel&&) noexcept;
    FixedPointModel& operator=(FixedPointModel&&) noexcept;

    [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
    [[nodiscard]] std::size_t primitive_count() const { return 4 * edges_.size(); }
    [[nodiscard]] std::size_t state_count() const { return state_count_; }
    [[nodiscard]] std::size_t equation_count() const { return state_count_; }
    [[nodiscard]] std::size_t input_count() const { return inputs_.size(); }
    [[nodiscard]] std::size_t row_count() const { return static_cast<std::size_t>(A_.rows()); }
    [[nodiscard]] std::size_t constraint_count() const { return constraint_rows_.size(); }
    [[nodiscard]] std::size_t load_count() const { return loads_.size(); }

    [[nodiscard]] const std::vector<EdgeLayout>& edges() const { return edges_; }
    [[nodiscard]] const std::vector<InputCoordinate>& inputs() const { return inputs_; }
    [[nodiscard]] const std::vector<std::size_t>& load_buses() const { return loads_; }
    [[nodiscard]] const std::vector<std::size_t>& generator_buses() const { return generators_; }
    /// State index of theta/rho at a bus, -1 when fixed.
    [[nodiscard]] int theta_state(std::size_t bus) const { return theta_index_[bus]; }
    [[nodiscard]] int rho_state(std::size_t bus) const { return rho_index_[bus]; }
    /// Equation row of the g/b admittance at a bus, -1 when absent.
    [[nodiscard]] int g_equation(std::size_t bus) const { return g_row_[bus]; }
    [[nodiscard]] int b_equation(std::size_t bus) const { return b_row_[bus]; }

    // Row layout of A.
    [[nodiscard]] std::size_t theta_row(std::size_t edge) const { return edge; }
    [[nodiscard]] std::size_t rho_edge_row(std::size_t edge) const { return edges_.size() + edge; }
    [[nodiscard]] std::size_t load_rho_row(std::size_t load) const { return 2 * edges_.size() + load; }

    [[nodiscard]] const Eigen::SparseMatrix<double>& M() const { return M_; }
    [[nodiscard]] const Eigen::SparseMatrix<double>& R() const { return R_; }
    [[nodiscard]] const Eigen::SparseMatrix<double>& A() const { return A_; }
    [[nodiscard]] const Eigen::SparseMatrix<double>& L() const { return L_; }
    [[nodiscard]] const Eigen::SparseMatrix<double>& Jstar() const { return J_; }
    [[nodiscard]] const Eigen::SparseMatrix<double>& T() const { return T_; }
    /// Signed certificate matrices; their sign splits are B+/B-, C+/C-, ...
    [[nodiscard]] const Eigen::MatrixXd& B() const { return B_; }
    [[nodiscard]] const Eigen::MatrixXd& C() const { return C_; }
    [[nodiscard]] const Eigen::MatrixXd& D() const { return D_; }
    [[nodiscard]] const Eigen::MatrixXd& E() const { return E_; }
    [[nodiscard]] const Eigen::VectorXd& hstar() const { return hstar_; }
    /// Base admittance vector u* = M f*.
    [[nodiscard]] const Eigen::VectorXd& ustar() const { return ustar_; }
    [[nodiscard]] const std::vector<ConstraintRow>& constraint_rows() const { return constraint_rows_; }

    /// Jstar^{-1} rhs using the cached factorization.
    [[nodiscard]] Eigen::VectorXd solve_jstar(const Eigen::VectorXd& rhs) const;

    /// Edge differences (dtheta_e, drho_e) induced by a state deviation.
    [[nodiscard]] Eigen::VectorXd edge_theta(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd edge_rho(const Eigen::VectorXd& x) const;

    [[nodiscard]] Eigen::VectorXd primitives(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd base_primitives() const;
    [[nodiscard]] Eigen::VectorXd residual2(const Eigen::VectorXd& x) const;
    /// x - Jstar^{-1} R u - phi(x), phi(x) = -Jstar^{-1} M residual2(x).
    [[nodiscard]] Eigen::VectorXd fixed_point_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
    /// Right-hand side of the fixed-point map, F(x; u).
    [[nodiscard]] Eigen::VectorXd fixed_point_map(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

    /// State deviation of a full operating point from the base.
    [[nodiscard]] Eigen::VectorXd state_deviation(const OperatingPoint& point) const;
    /// Input deviation (admittance domain) of a full operating point from the base.
    [[nodiscard]] Eigen::VectorXd input_deviation(const OperatingPoint& point) const;
    /// Equation-row admittances (g_G, g_L, b_L) of a full operating point.
    [[nodiscard]] Eigen::VectorXd nodal_admittances(const OperatingPoint& point) const;

    [[nodiscard]] const OperatingPoint& base() const { return base_; }

    /// Builds one operational block; exposed for inspection and tests.
    [[nodiscard]] ConstraintBlock build_T(const PowerNetwork& network, ConstraintBlockKind kind,
                                          const ConstraintOptions& options) const;

private:
    struct Factorization;

    OperatingPoint base_;
    std::vector<EdgeLayout> edges_;
    std::vector<InputCoordinate> inputs_;
    std::vector<std::size_t> loads_;
    std::vector<std::size_t> generators_;
    std::vector<int> theta_index_;
    std::vector<int> rho_index_;
    std::vector<int> g_row_;
    std::vector<int> b_row_;
    std::size_t state_count_ = 0;
    Eigen::VectorXcd y_d_;

    Eigen::SparseMatrix<double> M_, R_, A_, L_, J_, T_;
    Eigen::MatrixXd B_, C_, D_, E_;
    Eigen::VectorXd hstar_, ustar_;
    std::vector<ConstraintRow> constraint_rows_;
    std::unique_ptr<Factorization> lu_;
};

}  // namespace sscert
