#ifndef BTQ_SYMBOLS_HPP
#define BTQ_SYMBOLS_HPP

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "btq/geometry.hpp"

namespace btq {

/// Interface for a smooth one-variable profile that can appear inside an
/// expression tree (cutoff functions applied to a real-valued inner symbol).
class RealProfile {
public:
    virtual ~RealProfile() = default;
    virtual Complex value(double x) const = 0;
    virtual std::shared_ptr<const RealProfile> derivative() const = 0;
    virtual std::string label() const = 0;
};

namespace detail {
struct Node;
using NodePtr = std::shared_ptr<const Node>;
} // namespace detail

/// Immutable expression tree in the variables z, conj(z). Supports exact
/// mixed Wirtinger derivatives; evaluation either on the diagonal
/// (conj_z = conj(z)) or polarized with independent first/second arguments.
class SymbolExpr {
public:
    SymbolExpr() = default;

    static SymbolExpr constant(Complex c);
    static SymbolExpr constant(double c) { return constant(Complex(c, 0.0)); }
    static SymbolExpr z();
    static SymbolExpr conj_z();
    /// Radial C-infinity bump exp(1 - 1/(1 - s)) of s = |z-center|^2/radius^2,
    /// supported in |z-center| <= radius, peak value 1. Profile derivatives
    /// are materialized on demand up to derivative_cap.
    static SymbolExpr bump(Complex center, double radius, int derivative_cap = 8);
    static SymbolExpr exp_of(const SymbolExpr& a);
    static SymbolExpr inv_of(const SymbolExpr& a);
    static SymbolExpr pow_of(const SymbolExpr& a, int n);
    static SymbolExpr compose1d(std::shared_ptr<const RealProfile> profile,
                                const SymbolExpr& inner);

    friend SymbolExpr operator+(const SymbolExpr& a, const SymbolExpr& b);
    friend SymbolExpr operator-(const SymbolExpr& a, const SymbolExpr& b);
    friend SymbolExpr operator*(const SymbolExpr& a, const SymbolExpr& b);
    friend SymbolExpr operator-(const SymbolExpr& a);

    bool valid() const { return node_ != nullptr; }

    Complex eval(Complex z) const;
    /// Evaluate with independent holomorphic/anti-holomorphic arguments
    /// (z -> x, conj(z) -> y_conj). Non-analytic factors (bump profiles,
    /// 1d profiles) are evaluated at the midpoint (x + conj(y_conj))/2.
    Complex eval_polarized(Complex x, Complex y_conj) const;

    SymbolExpr d_z() const;
    SymbolExpr d_zbar() const;

    std::string print() const;
    bool structurally_equal(const SymbolExpr& other) const;

    /// True when the tree is invariant under z <-> conj(z) with conjugated
    /// constants, so evaluation on the diagonal is real.
    bool is_conjugation_symmetric() const;

    /// Radius R with expr(z) = 0 for |z| > R when provable from the tree
    /// structure; +infinity otherwise ("oracle-grade" symbol, support-based
    /// checks are skipped by the harness).
    double support_radius() const;

    /// Largest angular Fourier mode the symbol can carry, when finite
    /// (polynomial content); -1 when unbounded. Used to pick angular node
    /// counts that keep polynomial quadrature alias-free.
    int max_angular_degree() const;

    const detail::NodePtr& node() const { return node_; }
    explicit SymbolExpr(detail::NodePtr n) : node_(std::move(n)) {}

private:
    detail::NodePtr node_;
};

/// Exact symbolic mixed derivative d^a d̄^b.
SymbolExpr differentiate(const SymbolExpr& expr, int a, int b);

/// Rebuilds the tree with every bump radius multiplied by `factor`. This is
/// how delta sweeps realize N^delta-scale features: shrinking the support by
/// N^{-delta} makes each derivative order cost a factor N^delta.
SymbolExpr dilate_bump_radii(const SymbolExpr& expr, double factor);

/// Parses the symbol grammar: identifiers z, conj(z); operators + - * ^;
/// functions exp(...), bump(center, radius), inv(...), complex(re, im);
/// decimal literals. Throws ParseError with the failing offset.
SymbolExpr parse_symbol(std::string_view text);

/// An N-aware symbol N^power * expr with its class parameters.
struct Symbol {
    SymbolExpr expr;
    double delta = 0.0;
    double power = 0.0;
    int max_derivative_order = 8;

    Complex eval(Complex z, double N) const {
        return std::pow(N, power) * expr.eval(z);
    }
};

/// A positive N-dependent weight. The canonical shape is
/// N^(2 delta) * base + 1; arbitrary evaluators are allowed for
/// negative-control tests.
struct OrderFunction {
    double delta = 0.0;
    std::function<double(Complex, double)> value;
    std::string description;

    static OrderFunction constant_one();
    static OrderFunction scaled_plus_one(const SymbolExpr& base, double delta);
};

/// f = N^delta * g together with the candidate order function
/// m = N^(2 delta) * g + 1.
std::pair<Symbol, OrderFunction> scale_symbol(const SymbolExpr& g, double delta);

/// Deterministic n x n evaluation grid on [-half_width, half_width]^2,
/// clipped to the chart.
std::vector<Complex> make_chart_grid(const ModelGeometry& geometry,
                                     double half_width, int n = 41);

struct OrderFunctionCertificate {
    bool certified = false;
    double C = 0.0;
    int M0 = -1;
    // Worst pair at the smallest failing exponent, for violation reports.
    Complex witness_x{}, witness_y{};
    double witness_N = 0.0;
    double witness_ratio = 0.0;
};

/// Searches M0 in [0, M0_max] for the smallest exponent whose fitted
/// constant is stable across the top of the N list (not still growing);
/// otherwise reports the violation witness.
OrderFunctionCertificate check_order_function(
    const OrderFunction& m, const ModelGeometry& geometry,
    std::span<const double> N_list,
    std::span<const std::pair<Complex, Complex>> sample_pairs,
    int M0_max = 6);

struct SymbolClassCertificate {
    bool certified = false;
    std::map<std::pair<int, int>, double> C_alpha; // (a, b) -> constant
    std::pair<int, int> violation_alpha{-1, -1};
    double violation_growth = 0.0; // C(top N) / C(second N) at the violation
};

/// Certifies |d^a d̄^b f| <= C_alpha N^(delta(a+b)) m on the grid for all N,
/// requiring the per-alpha constant to have stopped growing across the two
/// largest N (within 10%).
SymbolClassCertificate check_symbol_class(
    const Symbol& f, const OrderFunction& m, const ModelGeometry& geometry,
    std::span<const double> N_list, int max_alpha,
    std::span<const Complex> grid);

} // namespace btq

#endif
