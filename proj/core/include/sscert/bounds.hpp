#pragma once

#include <cstddef>
#include <string_view>

#include <Eigen/Core>

namespace sscert {

class FixedPointModel;

enum class BoundRole { state, input, residual, map_output };

std::string_view to_string(BoundRole role);

/// Two-sided nonnegative bound: -lo <= z <= hi componentwise.
struct BoundPair {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    BoundRole role = BoundRole::state;

    static BoundPair zeros(Eigen::Index n, BoundRole role);
    static BoundPair symmetric(const Eigen::VectorXd& v, BoundRole role);
    [[nodiscard]] Eigen::Index size() const { return hi.size(); }
    [[nodiscard]] bool nonnegative() const;
    [[nodiscard]] bool contains(const Eigen::VectorXd& z, double tol = 0.0) const;
    [[nodiscard]] BoundPair scaled(double s) const;
    /// Elementwise max(lo), max(hi) against another pair.
    [[nodiscard]] bool dominated_by(const BoundPair& other, double tol = 0.0) const;
};

/// Scalar two-sided span: the quantity lies in [-lo, hi].
struct Span {
    double lo = 0.0;
    double hi = 0.0;
};

/// Deviation spans (first order: f - f*) and second-order residual spans of
/// the scalar primitives over an edge box dtheta in [-tlo, thi], drho in [-rlo, rhi].
struct UnivariateResidualBounds {
    Span d_cos, d2_cos;
    Span d_sin, d2_sin;
    Span d_cosh, d2_cosh;
    Span d_sinh, d2_sinh;
};

/// Per-edge box caps used by the linear relaxation.
struct RelaxationCaps {
    Eigen::VectorXd theta;  // in (0, pi/2]
    Eigen::VectorXd rho;    // in (0, 1]

    static RelaxationCaps uniform(std::size_t edges, double theta_cap, double rho_cap);
    void validate() const;
};

UnivariateResidualBounds univariate_bounds(Span theta, Span rho);

/// Residual span of f*g given the univariate spans of f and g and base values
/// f*, g* >= 0.
Span product_bounds(Span df, Span d2f, Span dg, Span d2g, double fstar, double gstar);

/// Residual bounds over all 4|E| primitives for a state box laid out like the
/// rows of A (theta rows, then rho rows, then nodal rows which are ignored).
BoundPair delta2_bounds(const BoundPair& lx, std::size_t edges);

/// Linear (secant + McCormick) over-estimate of delta2_bounds on the caps.
BoundPair linear_bounds(const BoundPair& lx, std::size_t edges, const RelaxationCaps& caps);

/// Image bounds of the nonlinear correction: C+ d2f+- + C- d2f-+.
BoundPair tau(const BoundPair& lx, const FixedPointModel& model);
/// Same with the linear relaxation in place of the exact residual bounds.
BoundPair tau_linear(const BoundPair& lx, const FixedPointModel& model, const RelaxationCaps& caps);
/// Image bounds of the input box: B+ lu+- + B- lu-+.
BoundPair sigma(const BoundPair& lu, const FixedPointModel& model);

/// Signed-split product: returns (F+ a + F- b, F+ b + F- a) in one pass.
BoundPair split_product(const Eigen::MatrixXd& f, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        BoundRole role);

/// Affine plane a*x + b*y + c.
struct AffinePlane {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    [[nodiscard]] double operator()(double x, double y) const { return a * x + b * y + c; }
};

struct McCormickEnvelope {
    AffinePlane upper1, upper2;  // xy <= min(upper1, upper2)
    AffinePlane lower1, lower2;  // xy >= max(lower1, lower2)
    [[nodiscard]] double upper(double x, double y) const;
    [[nodiscard]] double lower(double x, double y) const;
};

McCormickEnvelope mccormick(double xl, double xu, double yl, double yu);

}  // namespace sscert
