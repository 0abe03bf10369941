#ifndef BTQ_QUANTUM_HPP
#define BTQ_QUANTUM_HPP

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "btq/geometry.hpp"

namespace btq {

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n);

/// Orthogonal monomial section basis z^k at level N with exact squared norms
/// under <u,v> = int u conj(v) e^{-N phi} mu dm, kept in the log domain.
///   bargmann: ||z^k||^2 = 2 pi k! / N^(k+1), truncation D = ceil(2 N R^2)+16
///   cp1:      ||z^k||^2 = 2 pi k! (N-k)! / (N+1)!, D = N+1 exactly
class QuantumBasis {
public:
    static QuantumBasis build(const ModelGeometry& geometry, int N,
                              double support_radius = 1.0, int dim_cap = 2048);

    const ModelGeometry& geometry() const { return geometry_; }
    int level() const { return N_; }
    int dimension() const { return dim_; }
    double support_radius() const { return support_radius_; }

    double log_squared_norm(int k) const { return log_sq_norms_[k]; }
    double squared_norm(int k) const;

    /// Bergman kernel Pi(x, conj y) by closed form.
    Complex kernel_closed_form(Complex x, Complex y_conj) const;
    /// Same kernel by the truncated basis sum (cross-validation path).
    Complex kernel_basis_sum(Complex x, Complex y_conj) const;
    /// Gauge-invariant weighted kernel e^{-(N/2)(phi(x)+phi(y))} Pi(x, conj y);
    /// bounded by (N + O(1))/(2 pi), safe for large N.
    Complex weighted_kernel(Complex x, Complex y_conj) const;
    /// False when the Bargmann truncated sum cannot resolve exp(N x conj y).
    bool truncation_tail_ok(Complex x, Complex y_conj) const;

private:
    QuantumBasis(ModelGeometry g, int N, int dim, double support_radius,
                 std::vector<double> log_norms)
        : geometry_(std::move(g)), N_(N), dim_(dim),
          support_radius_(support_radius), log_sq_norms_(std::move(log_norms)) {}
    ModelGeometry geometry_;
    int N_;
    int dim_;
    double support_radius_;
    std::vector<double> log_sq_norms_;
};

struct QuadratureCertification {
    double max_norm_rel_err = 0.0;
    int worst_monomial = -1;
    double total_mass_rel_err = 0.0;
    bool aliasing_risk = false;
    double worst_aliased_gram = 0.0;
    int radial_nodes = 0;
    int angular_nodes = 0;
    bool converged = false;
    int refinement_rounds = 0;
};

/// Tensor quadrature (substituted radial Gauss-Legendre x uniform angles)
/// for the weighted inner product. Radial weights carry e^{-N phi} mu and
/// the substitution Jacobian and are stored as logs: far nodes underflow
/// in linear arithmetic for N in the hundreds.
///   bargmann: t = N r^2 on [0, t_max], weight e^{-t}/N
///   cp1:      t = r^2/(1+r^2) on [0, 1], weight (1-t)^N
class QuadratureRule {
public:
    /// Builds the rule and auto-refines the radial direction (panel halving)
    /// until monomial norms of `basis` reproduce to rel 1e-10 or the node cap
    /// is hit. radial_nodes/angular_nodes <= 0 pick defaults (angular 2D+4).
    static QuadratureRule build(const QuantumBasis& basis, int radial_nodes = 0,
                                int angular_nodes = 0, int radial_cap = 16384);

    const QuantumBasis& basis() const { return basis_; }
    const QuadratureCertification& certification() const { return cert_; }

    int radial_count() const { return static_cast<int>(radius_.size()); }
    int angular_count() const { return angular_; }
    double radius(int i) const { return radius_[i]; }
    double log_radial_weight(int i) const { return log_weight_[i]; }
    /// log weight with the e^{-N phi} factor removed (plain mu dm measure).
    double log_plain_radial_weight(int i) const;
    double angle(int a) const { return 2.0 * M_PI * a / angular_; }
    double angular_weight() const { return 2.0 * M_PI / angular_; }

    /// Sum of all node weights; equals int e^{-N phi} mu dm.
    double total_mass() const;

private:
    QuadratureRule(QuantumBasis basis) : basis_(std::move(basis)) {}
    QuantumBasis basis_;
    std::vector<double> radius_;
    std::vector<double> log_weight_;
    int angular_ = 0;
    QuadratureCertification cert_;
};

struct ReproducingReport {
    double max_gram_diag_err = 0.0;
    double max_gram_offdiag = 0.0;
    double max_idempotence_rel_err = 0.0;
};

/// Checks the Gram matrix of normalized monomials is the identity and that
/// the kernel reproduces itself through the quadrature at sample pairs.
ReproducingReport verify_reproducing(const QuantumBasis& basis,
                                     const QuadratureRule& rule,
                                     std::span<const std::pair<Complex, Complex>> pairs);

struct OffDiagonalDecayReport {
    double C = 0.0;            // prefactor of the sqrt(N)-exponential bound
    double c = 0.0;            // fitted exponential rate, positive on success
    double gaussian_slope = 0.0; // slope of log|K| against N|x-y|^2
};

OffDiagonalDecayReport verify_offdiagonal_decay(
    const QuantumBasis& basis,
    std::span<const std::pair<Complex, Complex>> pairs);

/// int f mu dm over the model by a fixed high-order rule (N-independent).
/// For bargmann the integral is truncated at `radius`, which must cover the
/// support of f.
double integrate_volume(const ModelGeometry& geometry,
                        const std::function<double(Complex)>& f,
                        double radius = 12.0, int radial = 512, int angular = 512);

} // namespace btq

#endif
