#ifndef BTQ_SEMICLASSICS_HPP
#define BTQ_SEMICLASSICS_HPP

#include <vector>

#include "btq/geometry.hpp"
#include "btq/symbols.hpp"

namespace btq {

/// Truncated star-product series sum_j N^{-j} h_j as coefficient trees.
/// Each h_j touches derivatives of total order at most 2j of either input;
/// input_orders records the orders actually used. With delta-scaled inputs
/// the j-th term sits in the N^(2 delta j) class.
struct StarSeries {
    std::vector<SymbolExpr> terms;
    std::vector<std::pair<int, int>> input_orders; // (f order, g order) per term
    double delta = 0.0;

    int order() const { return static_cast<int>(terms.size()) - 1; }
    double class_power(int j) const { return 2.0 * delta * j; }
    /// Evaluate sum_j N^{-j} h_j(z).
    Complex eval(Complex z, double N) const;
};

/// The inverse metric 1/H as an expression: 1 on the plane, (1+|z|^2)^2 on CP1.
SymbolExpr inverse_metric_expr(const ModelGeometry& geometry);

/// j-th bidifferential star coefficient. j = 0 gives f g on any model,
/// j = 1 gives -H^{-1} df d̄g on any model; j >= 2 is available on the
/// Bargmann model only, through the diagonal recursion.
SymbolExpr star_term(const SymbolExpr& f, const SymbolExpr& g,
                     const ModelGeometry& geometry, int j);

/// Full star series on the Bargmann model to order J. Off-diagonal middle
/// arguments are realized by polarized evaluation of the coefficient trees
/// (holomorphic in the first slot, anti-holomorphic in the second), which
/// collapses the recursion to single-variable tree algebra:
///   h_j = sum_{a+b+d=j} (a! b! d!)^{-1} d̄^d (dd̄)^a f * d^d (dd̄)^b g
///         - sum_{d=1..j} (d!)^{-1} (dd̄)^d h_{j-d}.
StarSeries star_series_bargmann(const SymbolExpr& f, const SymbolExpr& g, int J);

/// Star series on either model: general geometry to J <= 1, Bargmann to any J.
StarSeries star_series(const SymbolExpr& f, const SymbolExpr& g,
                       const ModelGeometry& geometry, int J);

/// (iH)^{-1} (df d̄g - dg d̄f).
SymbolExpr poisson_bracket(const SymbolExpr& f, const SymbolExpr& g,
                           const ModelGeometry& geometry);

/// Bargmann prediction for the weighted diagonal kernel of T_f:
/// (N/2pi) sum_{j<=J} N^{-j} (dd̄)^j f(x) / j!.
Complex diagonal_kernel_expansion(const SymbolExpr& f, Complex x, int J,
                                  const ModelGeometry& geometry, double N);

/// Near-diagonal Bargmann prediction for the weighted kernel of T_f at
/// (x, conj y): Gaussian prefactor times the polarized expansion at the
/// midpoint. Pairs must satisfy |x - y| <= window_factor / sqrt(N).
Complex offdiagonal_kernel_expansion(const SymbolExpr& f, Complex x, Complex y_conj,
                                     int J, const ModelGeometry& geometry, double N,
                                     double window_factor = 3.0);

} // namespace btq

#endif
