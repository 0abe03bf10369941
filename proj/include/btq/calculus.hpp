#ifndef BTQ_CALCULUS_HPP
#define BTQ_CALCULUS_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "btq/semiclassics.hpp"
#include "btq/symbols.hpp"
#include "btq/toeplitz.hpp"

namespace btq {

/// Compactly supported smooth function of one real variable, held as a
/// window [a, b], spectral (trigonometric) coefficients resolved from
/// samples, and optionally a closed-form evaluator. Implements RealProfile
/// so it can be composed into symbol trees.
class RealProfile1D : public RealProfile,
                      public std::enable_shared_from_this<RealProfile1D> {
public:
    /// chi(x) = exp(1 - 1/(1-s)), s = ((x-center)/width)^2: support width
    /// |x - center| <= width, peak 1.
    static std::shared_ptr<const RealProfile1D> bump(double center, double width);
    /// Flat top on |x - center| <= width/2, smooth decay to 0 at width.
    static std::shared_ptr<const RealProfile1D> plateau(double center, double width);
    static std::shared_ptr<const RealProfile1D> from_function(
        const std::function<Complex(double)>& fn, double center, double halfspan,
        const std::string& label, int samples = 2048);
    static std::shared_ptr<const RealProfile1D> shaped(const std::string& shape,
                                                       double center, double width);

    Complex value(double x) const override;
    std::shared_ptr<const RealProfile> derivative() const override;
    std::string label() const override { return label_; }

    double window_lo() const { return a_; }
    double window_hi() const { return b_; }
    double support_lo() const { return support_lo_; }
    double support_hi() const { return support_hi_; }
    /// Largest tail coefficient relative to the peak (resolution gauge).
    double spectral_tail() const;
    int mode_count() const { return static_cast<int>(modes_.size()); }
    bool is_real() const { return real_; }

    // spectral data, used by the strip extension
    double frequency(int i) const { return 2.0 * M_PI * mode_index_[i] / (b_ - a_); }
    Complex coefficient(int i) const { return modes_[i]; }

private:
    RealProfile1D() = default;
    void resolve_from_samples(const std::vector<Complex>& samples);
    double a_ = 0.0, b_ = 0.0;
    double support_lo_ = 0.0, support_hi_ = 0.0;
    std::vector<Complex> modes_;
    std::vector<int> mode_index_;
    double tail_ = 0.0;
    bool real_ = true;
    std::string label_;
    std::function<Complex(double)> closed_form_;
};

struct DbarDecayFit {
    double slope = 0.0;     // log-log slope of max_x |dbar chi(x+iy)| in y
    double C_M = 0.0;       // constant of the |y|^M bound for the declared M
    int points_used = 0;
    bool floored = false;   // fit window clipped at the 1e-13 noise floor
};

/// Almost analytic extension of a compactly supported profile to the strip
/// |Im z| <= Y, built mode by mode as
///   chi~(x+iy) = psi(x) sum_k c_k e^{i xi_k (z-a)} sigma(xi_k y)
/// with sigma a smooth plateau cutoff (1 on [-1/2,1/2], support [-1,1]); the
/// zero-frequency mode is cut off by sigma(y/Y) directly so the extension is
/// compactly supported in the closed strip and the Cauchy-Pompeiu identity
/// holds without boundary terms. The strip half-width is widened to
/// (b-a)/(2 pi) when needed so every mode's cutoff band fits inside.
/// dbar decays to the order the profile's spectral smoothness affords; the
/// measured rate is stored, not assumed.
class AlmostAnalyticExtension {
public:
    enum class Mode { spectral, naive, entire };

    static AlmostAnalyticExtension build(std::shared_ptr<const RealProfile1D> chi,
                                         double Y, int M_target);
    /// Negative control: chi~(x+iy) := chi(x), dbar = chi'(x)/2.
    static AlmostAnalyticExtension naive(std::shared_ptr<const RealProfile1D> chi,
                                         double Y);
    /// Entire positive control: polynomial p(x+iy), dbar identically 0.
    static AlmostAnalyticExtension entire_polynomial(std::vector<double> coeffs,
                                                     double lo, double hi, double Y);

    Complex value(Complex z) const;
    Complex dbar(Complex z) const;

    double strip_halfwidth() const { return Y_; }
    double window_lo() const;
    double window_hi() const;
    int decay_order() const { return M_target_; }
    bool profile_real() const;
    const DbarDecayFit& measured_decay() const { return fit_; }

    /// max_x |dbar(x+iy)| on a log-spaced y grid, slope fit above the noise
    /// floor; runs over y in [y_lo, y_hi].
    DbarDecayFit measure_dbar_decay(double y_lo = 1e-3, double y_hi = 1e-1,
                                    int y_points = 17, int x_points = 161) const;

private:
    AlmostAnalyticExtension() = default;
    Complex mode_sum_sigma(double x, double y) const;
    Complex mode_sum_sigma_prime(double x, double y) const;
    Mode mode_ = Mode::spectral;
    std::shared_ptr<const RealProfile1D> chi_;
    std::shared_ptr<const RealProfile> chi_prime_; // naive mode
    std::vector<double> poly_; // entire mode
    // dense coefficient table over the uniform frequency grid k*dxi,
    // k in [k_lo, k_lo + size): evaluation steps a rotor across the band
    std::vector<Complex> dense_coeff_;
    double dxi_ = 0.0;
    int k_lo_ = 0;
    Complex dc_{};
    double lo_ = 0.0, hi_ = 0.0;
    double Y_ = 0.0;
    int M_target_ = 4;
    DbarDecayFit fit_;
};

struct HsGridSpec {
    double floor = 1e-4;       // excluded band |Im z| < floor
    int x_panels = 8;          // panel count of the topmost band
    int x_order = 8;           // Gauss-Legendre nodes per x panel
    int y_order = 16;          // per geometric band (ratio 1/2 toward the axis)
    int x_panel_cap = 8192;       // bands needing more panels are mass-budgeted
    double band_threshold = 2e-8; // bands whose |dbar| mass is below this are skipped
    double skip_threshold = 1e-13; // per-node contribution bound for skipping
};

struct HsResult {
    Eigen::MatrixXcd matrix;
    double floor_band_bound = 0.0;  // a-priori bound on the dropped band
    double quadrature_estimate = 0.0; // fine-vs-coarse pass difference
    double skipped_bound = 0.0;     // measured mass of skipped bands and nodes
    int nodes_used = 0;
    int nodes_skipped = 0;

    double error_budget() const {
        return floor_band_bound + quadrature_estimate + skipped_bound;
    }
};

/// chi(A) by the resolvent strip integral -(1/pi) int dbar(chi~) (z-A)^{-1}.
/// A must be Hermitian to 1e-8. Each surviving node is an independent
/// resolvent solve through a one-time Householder tridiagonalization (an
/// exact orthogonal similarity, no spectral data); x panels shrink with the
/// band height (the integrand and resolvent both vary at scale |Im z|),
/// deep bands whose dbar mass is negligible are skipped with their mass
/// added to the budget, and for real profiles the lower half-strip is the
/// adjoint of the upper half.
HsResult hs_function_of_operator(const ToeplitzMatrix& A,
                                 const AlmostAnalyticExtension& ext,
                                 const HsGridSpec& spec);

/// Eigendecomposition route: chi applied to the spectrum. Independent
/// oracle for the strip integral.
Eigen::MatrixXcd spectral_function_oracle(const ToeplitzMatrix& A,
                                          const std::function<Complex(double)>& chi);

struct HypothesisCertificate {
    bool ok = false;
    double constant = 0.0;
    std::string detail;
};

/// Checks f is real-valued, nonnegative on the grid, and |f| >= m/C - C
/// holds with a moderate C across the N list.
HypothesisCertificate certify_funcalc_hypotheses(const Symbol& f, const OrderFunction& m,
                                                 std::span<const Complex> grid,
                                                 std::span<const double> N_list,
                                                 double C_cap = 1e4);

/// Checks the ellipticity |f - z| >= c m with c bounded away from zero.
HypothesisCertificate certify_parametrix_hypotheses(const Symbol& f, Complex z,
                                                    const OrderFunction& m,
                                                    std::span<const Complex> grid,
                                                    std::span<const double> N_list,
                                                    double c_min = 0.02);

/// Order-0 prediction chi(f) for the functional calculus; hypotheses must
/// certify or the call refuses.
SymbolExpr functional_calculus_symbol(const Symbol& f,
                                      std::shared_ptr<const RealProfile1D> chi,
                                      const OrderFunction& m,
                                      std::span<const Complex> grid,
                                      std::span<const double> N_list);

/// s1(z, x) = (z - f(x))^{-1} as a tree. Requires Im z != 0 or a certified
/// elliptic estimate.
SymbolExpr resolvent_symbol(const Symbol& f, Complex z, const OrderFunction& m,
                            std::span<const Complex> grid,
                            std::span<const double> N_list);

struct ResolventBoundReport {
    bool ok = false;
    std::map<std::pair<int, int>, double> C_alpha;
    double worst = 0.0;
};

/// Fits the constants of |d^a d̄^b s1| <= C |Im z|^{-1-|a|-|b|} N^{delta |a|+|b|} / m
/// on the grid, orders up to max_alpha.
ResolventBoundReport verify_resolvent_bounds(const Symbol& f, Complex z,
                                             const OrderFunction& m,
                                             std::span<const Complex> grid,
                                             std::span<const double> N_list,
                                             int max_alpha = 3, double C_cap = 1e6);

struct ParametrixResult {
    StarSeries right; // T_{f-z} T_right = 1 + O(N^{-(J+1)})
    StarSeries left;  // T_left T_{f-z} = 1 + O(N^{-(J+1)})
};

/// Inverse symbol series: s1 = (f-z)^{-1}, Neumann inversion of the star
/// defect, truncated at order J.
ParametrixResult parametrix_symbol(const Symbol& f, Complex z, int J,
                                   const ModelGeometry& geometry,
                                   const OrderFunction& m,
                                   std::span<const Complex> grid,
                                   std::span<const double> N_list);

} // namespace btq

#endif
