#include "btq/calculus.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

#include "btq/errors.hpp"

namespace btq {

namespace {

// smooth 0->1 transition on [0,1]: B(t)/(B(t)+B(1-t)), B(t) = e^{-1/t};
// used for plateau-shaped profiles
double transition(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double b0 = std::exp(-1.0 / t);
    const double b1 = std::exp(-1.0 / (1.0 - t));
    return b0 / (b0 + b1);
}

// Beta-smoothstep transition: polynomial inside (0,1) with C^8 contact at the
// ends. The strip cutoffs use this shape so the quadrature only ever meets
// finite-order contact points, which panelwise Gauss nodes handle; the
// infinitely flat e^{-1/t} shape stalls them.
constexpr int kStepOrder = 8;

// 1/B(9,9) = 17!/(8!)^2
constexpr double kStepNorm = 218790.0;

double beta_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    // I_t(p+1, p+1): sum_j C(p,j) (-1)^j t^{p+j+1}/(p+j+1)
    double acc = 0.0;
    double coeff = 1.0;
    double tp = 1.0;
    for (int i = 0; i <= kStepOrder; ++i) tp *= t; // t^{p+1}
    for (int j = 0; j <= kStepOrder; ++j) {
        acc += coeff * tp / (kStepOrder + j + 1);
        tp *= t;
        coeff *= -(double(kStepOrder) - j) / (j + 1.0);
    }
    return acc * kStepNorm;
}

inline double beta_step_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double u = t * (1.0 - t);
    const double u2 = u * u;
    const double u4 = u2 * u2;
    return kStepNorm * u4 * u4; // u^8
}

// sigma: 1 on [-1/2,1/2], 0 beyond [-1,1]
double sigma_cutoff(double u) {
    const double a = std::abs(u);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    return beta_step(2.0 * (1.0 - a));
}

double sigma_cutoff_deriv(double u) {
    const double a = std::abs(u);
    if (a <= 0.5 || a >= 1.0) return 0.0;
    const double sgn = u > 0.0 ? 1.0 : -1.0;
    return -2.0 * sgn * beta_step_deriv(2.0 * (1.0 - a));
}

// psi: 1 on [lo, hi], support [lo - margin, hi + margin]
double psi_plateau(double x, double lo, double hi, double margin) {
    if (x >= lo && x <= hi) return 1.0;
    if (x < lo) return beta_step((x - lo + margin) / margin);
    return beta_step((hi + margin - x) / margin);
}

double psi_plateau_deriv(double x, double lo, double hi, double margin) {
    if (x >= lo && x <= hi) return 0.0;
    if (x < lo) return beta_step_deriv((x - lo + margin) / margin) / margin;
    return -beta_step_deriv((hi + margin - x) / margin) / margin;
}

double bump_1d(double x, double center, double width) {
    const double s = ((x - center) / width) * ((x - center) / width);
    if (s >= 1.0 - 1e-14) return 0.0;
    const double v = 1.0 / (1.0 - s);
    return v > 600.0 ? 0.0 : std::exp(1.0 - v);
}

std::string fmt_num(double v) {
    std::string s = std::to_string(v);
    for (auto& c : s)
        if (c == '.' || c == '-') c = '_';
    return s;
}

} // namespace

// ---- RealProfile1D -----------------------------------------------------------

void RealProfile1D::resolve_from_samples(const std::vector<Complex>& samples) {
    const int n = static_cast<int>(samples.size());
    real_ = true;
    for (const auto& v : samples)
        if (std::abs(v.imag()) > 1e-14) real_ = false;
    Eigen::FFT<double> fft;
    std::vector<Complex> freq(n);
    std::vector<Complex> in(samples);
    fft.fwd(freq, in);
    double peak = 0.0;
    for (const auto& c : freq) peak = std::max(peak, std::abs(c) / n);
    // tail gauge over the top decile of frequencies
    double tail = 0.0;
    for (int k = n * 9 / 20; k <= n * 11 / 20 && k < n; ++k)
        tail = std::max(tail, std::abs(freq[k]) / n);
    tail_ = peak > 0.0 ? tail / peak : 0.0;
    const double keep = 1e-18 * peak;
    for (int k = 0; k < n; ++k) {
        const Complex c = freq[k] / double(n);
        if (std::abs(c) <= keep) continue;
        modes_.push_back(c);
        mode_index_.push_back(k <= n / 2 ? k : k - n);
    }
}

std::shared_ptr<const RealProfile1D> RealProfile1D::from_function(
    const std::function<Complex(double)>& fn, double center, double halfspan,
    const std::string& label, int samples) {
    auto p = std::shared_ptr<RealProfile1D>(new RealProfile1D());
    p->a_ = center - halfspan;
    p->b_ = center + halfspan;
    p->label_ = label;
    p->closed_form_ = fn;
    std::vector<Complex> vals(samples);
    double peak = 0.0;
    for (int i = 0; i < samples; ++i) {
        vals[i] = fn(p->a_ + (p->b_ - p->a_) * i / samples);
        peak = std::max(peak, std::abs(vals[i]));
    }
    p->resolve_from_samples(vals);
    // support read off the samples, so the x cutoff gets honest margins
    int first = 0, last = samples - 1;
    while (first < samples && std::abs(vals[first]) <= 1e-15 * peak) ++first;
    while (last > first && std::abs(vals[last]) <= 1e-15 * peak) --last;
    const double step = (p->b_ - p->a_) / samples;
    p->support_lo_ = p->a_ + step * std::max(0, first - 1);
    p->support_hi_ = p->a_ + step * std::min(samples - 1, last + 1);
    return p;
}

std::shared_ptr<const RealProfile1D> RealProfile1D::bump(double center, double width) {
    const double halfspan = 2.0 * width + 1.0;
    auto p = from_function(
        [=](double x) { return Complex(bump_1d(x, center, width), 0.0); }, center,
        halfspan, "chi_bump_" + fmt_num(center) + "_" + fmt_num(width));
    auto* mut = const_cast<RealProfile1D*>(p.get());
    mut->support_lo_ = center - width;
    mut->support_hi_ = center + width;
    return p;
}

std::shared_ptr<const RealProfile1D> RealProfile1D::plateau(double center, double width) {
    const double halfspan = 2.0 * width + 1.0;
    auto p = from_function(
        [=](double x) {
            const double a = std::abs(x - center);
            if (a <= 0.5 * width) return Complex(1.0, 0.0);
            if (a >= width) return Complex(0.0, 0.0);
            return Complex(transition(2.0 * (1.0 - a / width)), 0.0);
        },
        center, halfspan, "chi_plateau_" + fmt_num(center) + "_" + fmt_num(width));
    auto* mut = const_cast<RealProfile1D*>(p.get());
    mut->support_lo_ = center - width;
    mut->support_hi_ = center + width;
    return p;
}

std::shared_ptr<const RealProfile1D> RealProfile1D::shaped(const std::string& shape,
                                                           double center, double width) {
    if (shape == "bump") return bump(center, width);
    if (shape == "plateau") return plateau(center, width);
    throw ConfigError("unknown chi shape: " + shape + " (expected bump|plateau)");
}

Complex RealProfile1D::value(double x) const {
    if (x < a_ || x > b_) return Complex(0.0);
    if (closed_form_) return closed_form_(x);
    Complex acc(0.0);
    for (std::size_t i = 0; i < modes_.size(); ++i)
        acc += modes_[i] * std::polar(1.0, frequency(static_cast<int>(i)) * (x - a_));
    return acc;
}

std::shared_ptr<const RealProfile> RealProfile1D::derivative() const {
    auto p = std::shared_ptr<RealProfile1D>(new RealProfile1D());
    p->a_ = a_;
    p->b_ = b_;
    p->support_lo_ = support_lo_;
    p->support_hi_ = support_hi_;
    p->label_ = label_ + "_prime";
    p->tail_ = tail_;
    p->mode_index_ = mode_index_;
    p->modes_.resize(modes_.size());
    for (std::size_t i = 0; i < modes_.size(); ++i)
        p->modes_[i] = modes_[i] * Complex(0.0, frequency(static_cast<int>(i)));
    return p;
}

double RealProfile1D::spectral_tail() const { return tail_; }

// ---- AlmostAnalyticExtension --------------------------------------------------

AlmostAnalyticExtension AlmostAnalyticExtension::build(
    std::shared_ptr<const RealProfile1D> chi, double Y, int M_target) {
    if (chi->spectral_tail() > 1e-12)
        throw Error("extension: profile is under-resolved (spectral tail " +
                    std::to_string(chi->spectral_tail()) + ")");
    if (!(Y > 0.0) || Y > 1.5)
        throw Error("extension: strip half-width must lie in (0, 1.5]");
    AlmostAnalyticExtension ext;
    ext.mode_ = Mode::spectral;
    ext.chi_ = chi;
    // the lowest nonzero mode's cutoff band must fit inside the strip
    ext.Y_ = std::max(Y, (chi->window_hi() - chi->window_lo()) / (2.0 * M_PI));
    ext.M_target_ = M_target;
    ext.lo_ = chi->window_lo();
    ext.hi_ = chi->window_hi();
    // dense mode table over the uniform frequency grid
    ext.dxi_ = 2.0 * M_PI / (chi->window_hi() - chi->window_lo());
    int k_min = 0, k_max = 0;
    std::vector<std::pair<int, Complex>> modes;
    for (int i = 0; i < chi->mode_count(); ++i) {
        const double xi = chi->frequency(i);
        const int k = static_cast<int>(std::lround(xi / ext.dxi_));
        if (k == 0) {
            ext.dc_ += chi->coefficient(i);
            continue;
        }
        modes.emplace_back(k, chi->coefficient(i));
        k_min = std::min(k_min, k);
        k_max = std::max(k_max, k);
    }
    ext.k_lo_ = k_min;
    ext.dense_coeff_.assign(static_cast<std::size_t>(k_max - k_min + 1), Complex(0.0));
    for (const auto& [k, c] : modes) ext.dense_coeff_[k - k_min] += c;
    ext.fit_ = ext.measure_dbar_decay();
    return ext;
}

AlmostAnalyticExtension AlmostAnalyticExtension::naive(
    std::shared_ptr<const RealProfile1D> chi, double Y) {
    AlmostAnalyticExtension ext;
    ext.mode_ = Mode::naive;
    ext.chi_ = chi;
    ext.chi_prime_ = chi->derivative();
    ext.Y_ = Y;
    ext.M_target_ = 0;
    ext.lo_ = chi->window_lo();
    ext.hi_ = chi->window_hi();
    ext.fit_ = ext.measure_dbar_decay();
    return ext;
}

AlmostAnalyticExtension AlmostAnalyticExtension::entire_polynomial(
    std::vector<double> coeffs, double lo, double hi, double Y) {
    AlmostAnalyticExtension ext;
    ext.mode_ = Mode::entire;
    ext.poly_ = std::move(coeffs);
    ext.Y_ = Y;
    ext.M_target_ = 0;
    ext.lo_ = lo;
    ext.hi_ = hi;
    return ext;
}

double AlmostAnalyticExtension::window_lo() const { return lo_; }
double AlmostAnalyticExtension::window_hi() const { return hi_; }

bool AlmostAnalyticExtension::profile_real() const {
    switch (mode_) {
        case Mode::entire: return true;
        case Mode::naive:
        case Mode::spectral: return chi_ && chi_->is_real();
    }
    return false;
}

namespace {
// plateau margins for the x cutoff: 1 beyond the support, off at the window
struct PsiWindow {
    double lo, hi, margin;
};
PsiWindow psi_window(const RealProfile1D& chi) {
    const double slack =
        std::min(chi.support_lo() - chi.window_lo(), chi.window_hi() - chi.support_hi());
    const double margin =
        std::max(0.45 * slack, 1e-3 * (chi.window_hi() - chi.window_lo()));
    return {chi.support_lo() - margin, chi.support_hi() + margin, margin};
}
} // namespace

Complex AlmostAnalyticExtension::value(Complex z) const {
    const double x = z.real(), y = z.imag();
    switch (mode_) {
        case Mode::naive:
            return chi_->value(x);
        case Mode::entire: {
            Complex acc(0.0);
            for (auto it = poly_.rbegin(); it != poly_.rend(); ++it) acc = acc * z + *it;
            return acc;
        }
        case Mode::spectral: {
            const auto w = psi_window(*chi_);
            const double psi = psi_plateau(x, w.lo, w.hi, w.margin);
            if (psi == 0.0) return Complex(0.0);
            return psi * mode_sum_sigma(x, y);
        }
    }
    return {};
}

// sum over a contiguous index range of c_k f(xi_k y) e^{-xi_k y} e^{i xi_k (x-a)}
// with a rotor/decay recurrence along the uniform frequency grid
template <typename Fn>
static Complex mode_range_sum(const std::vector<Complex>& coeff, int k_lo, double dxi,
                              double x_rel, double y, int ka, int kb, Fn&& factor) {
    if (ka > kb) return Complex(0.0);
    const Complex rot_step = std::polar(1.0, dxi * x_rel);
    const double dec_step = std::exp(-dxi * y);
    Complex rot = std::polar(1.0, dxi * ka * x_rel);
    double dec = std::exp(-dxi * ka * y);
    Complex acc(0.0);
    for (int k = ka; k <= kb; ++k) {
        if (k != 0) {
            const Complex& c = coeff[static_cast<std::size_t>(k - k_lo)];
            if (c != Complex(0.0)) {
                const double f = factor(dxi * k * y, dxi * k);
                if (f != 0.0) acc += c * (f * dec) * rot;
            }
        }
        rot *= rot_step;
        dec *= dec_step;
    }
    return acc;
}

// sum c_k sigma e^{-xi y} e^{i xi (x-a)}: sigma cuts modes past |xi y| = 1
Complex AlmostAnalyticExtension::mode_sum_sigma(double x, double y) const {
    Complex acc = dc_ * sigma_cutoff(y / Y_);
    const int k_hi = k_lo_ + static_cast<int>(dense_coeff_.size()) - 1;
    int ka = k_lo_, kb = k_hi;
    const double ay = std::abs(y);
    if (ay > 0.0) {
        const int cap = static_cast<int>(1.0 / (dxi_ * ay)) + 1;
        ka = std::max(ka, -cap);
        kb = std::min(kb, cap);
    }
    return acc + mode_range_sum(dense_coeff_, k_lo_, dxi_, x - lo_, y, ka, kb,
                                [](double u, double) { return sigma_cutoff(u); });
}

// sum c_k d/dy[cutoff] e^{-xi y} e^{i xi (x-a)}: support 1/2 <= |xi y| <= 1
Complex AlmostAnalyticExtension::mode_sum_sigma_prime(double x, double y) const {
    Complex acc = dc_ * sigma_cutoff_deriv(y / Y_) / Y_;
    const double ay = std::abs(y);
    const int k_hi = k_lo_ + static_cast<int>(dense_coeff_.size()) - 1;
    if (ay == 0.0) return acc;
    const auto dfactor = [](double u, double xi) { return xi * sigma_cutoff_deriv(u); };
    const int lo_band = static_cast<int>(0.5 / (dxi_ * ay));
    const int cap = static_cast<int>(1.0 / (dxi_ * ay)) + 1;
    acc += mode_range_sum(dense_coeff_, k_lo_, dxi_, x - lo_, y,
                          std::max(k_lo_, -cap), std::min(k_hi, -lo_band), dfactor);
    acc += mode_range_sum(dense_coeff_, k_lo_, dxi_, x - lo_, y,
                          std::max(k_lo_, lo_band), std::min(k_hi, cap), dfactor);
    return acc;
}

Complex AlmostAnalyticExtension::dbar(Complex z) const {
    const double x = z.real(), y = z.imag();
    switch (mode_) {
        case Mode::naive:
            return 0.5 * chi_prime_->value(x);
        case Mode::entire:
            return Complex(0.0);
        case Mode::spectral: {
            const auto w = psi_window(*chi_);
            const double psi = psi_plateau(x, w.lo, w.hi, w.margin);
            const double dpsi = psi_plateau_deriv(x, w.lo, w.hi, w.margin);
            if (psi == 0.0 && dpsi == 0.0) return Complex(0.0);
            // dbar[mode * g(y)] = mode * (i/2) g'(y): the mode factor
            // e^{i xi (z-a)} is holomorphic
            Complex acc(0.0);
            if (psi != 0.0)
                acc += psi * Complex(0.0, 0.5) * mode_sum_sigma_prime(x, y);
            if (dpsi != 0.0) acc += 0.5 * dpsi * mode_sum_sigma(x, y);
            return acc;
        }
    }
    return {};
}

DbarDecayFit AlmostAnalyticExtension::measure_dbar_decay(double y_lo, double y_hi,
                                                         int y_points, int x_points) const {
    DbarDecayFit fit;
    const int M = std::max(1, M_target_);
    std::vector<double> logy, logv;
    for (int i = 0; i < y_points; ++i) {
        const double y = y_lo * std::pow(y_hi / y_lo, double(i) / (y_points - 1));
        double peak = 0.0;
        for (int j = 0; j < x_points; ++j) {
            const double x = lo_ + (hi_ - lo_) * j / (x_points - 1);
            peak = std::max(peak, std::abs(dbar(Complex(x, y))));
        }
        fit.C_M = std::max(fit.C_M, peak / std::pow(y, M));
        if (peak > 1e-13) {
            logy.push_back(std::log(y));
            logv.push_back(std::log(peak));
        } else {
            fit.floored = true;
        }
    }
    fit.points_used = static_cast<int>(logy.size());
    if (logy.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < logy.size(); ++i) {
            sx += logy[i];
            sy += logv[i];
            sxx += logy[i] * logy[i];
            sxy += logy[i] * logv[i];
        }
        const double n = static_cast<double>(logy.size());
        fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return fit;
}

// ---- Helffer-Sjostrand quadrature ---------------------------------------------

namespace {

void require_hermitian(const Eigen::MatrixXcd& A, double tol, const char* who) {
    const double dev = (A - A.adjoint()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if (dev > tol * scale)
        throw CertificationError(std::string(who) + ": operator is not Hermitian to " +
                                 std::to_string(tol));
}

// Householder tridiagonalization of a Hermitian matrix: (z-A)^{-1} =
// Q (z-T)^{-1} Q^H with T tridiagonal, so each node costs O(D^2) through a
// Thomas solve instead of a dense LU. The shifted pivots satisfy
// Im(pivot) >= Im(z), so elimination without pivoting is stable here.
class TridiagonalResolvent {
public:
    explicit TridiagonalResolvent(const Eigen::MatrixXcd& A) {
        Eigen::Tridiagonalization<Eigen::MatrixXcd> tri(A);
        Q_ = tri.matrixQ();
        const Eigen::MatrixXcd T = tri.matrixT();
        diag_ = T.diagonal();
        sub_ = T.diagonal(-1);
    }

    const Eigen::MatrixXcd& Q() const { return Q_; }

    // dense (z - T)^{-1} into a reused buffer
    void resolvent_into(Complex z, Eigen::MatrixXcd& X) {
        const int n = static_cast<int>(diag_.size());
        pivot_.resize(n);
        work_.resize(n);
        pivot_(0) = z - diag_(0);
        for (int i = 1; i < n; ++i) {
            const Complex l = -sub_(i - 1) / pivot_(i - 1);
            work_(i - 1) = l; // elimination multipliers
            pivot_(i) = (z - diag_(i)) - l * (-std::conj(sub_(i - 1)));
        }
        X.resize(n, n);
        for (int col = 0; col < n; ++col) {
            auto c = X.col(col);
            for (int i = 0; i < col; ++i) c(i) = Complex(0.0);
            c(col) = Complex(1.0);
            for (int i = col + 1; i < n; ++i) c(i) = -work_(i - 1) * c(i - 1);
            c(n - 1) /= pivot_(n - 1);
            for (int i = n - 2; i >= 0; --i)
                c(i) = (c(i) + std::conj(sub_(i)) * c(i + 1)) / pivot_(i);
        }
    }

private:
    Eigen::MatrixXcd Q_;
    Eigen::VectorXcd diag_, sub_;
    Eigen::VectorXcd pivot_, work_;
};

struct StripNode {
    Complex z;
    double weight;
    Complex dbar;
};

// Panel width over height for a relative Gauss-Legendre accuracy target,
// from the Bernstein-ellipse rate (1 + 2 y/width)^{-2n} of a pole at
// distance y from a panel of that width.
double width_factor_for(double rel_tol, int x_order) {
    const double rho = std::pow(rel_tol, -1.0 / (2.0 * x_order));
    return std::clamp(2.0 / (rho - 1.0), 0.4, 12.0);
}

// One geometric band [y0, y1] of the upper half-strip, x-resolved to the
// band height: the dbar factor oscillates and the resolvent peaks at scale y.
std::vector<StripNode> band_nodes(const AlmostAnalyticExtension& ext,
                                  const HsGridSpec& spec, double y0, double y1,
                                  double rel_tol, int x_order, int y_order) {
    const double lo = ext.window_lo(), hi = ext.window_hi();
    const double base_width = (hi - lo) / spec.x_panels;
    const double width = std::min(base_width, width_factor_for(rel_tol, x_order) * y0);
    const int panels = std::min(
        spec.x_panel_cap,
        static_cast<int>(std::ceil((hi - lo) / width)));
    const auto& [gx, gw] = gauss_legendre(x_order);
    const auto& [hy, hw] = gauss_legendre(y_order);
    std::vector<StripNode> nodes;
    nodes.reserve(static_cast<std::size_t>(panels) * x_order * y_order);
    for (int p = 0; p < panels; ++p) {
        const double xa = lo + (hi - lo) * p / panels;
        const double xb = lo + (hi - lo) * (p + 1) / panels;
        for (int i = 0; i < x_order; ++i) {
            const double x = 0.5 * (xa + xb) + 0.5 * (xb - xa) * gx[i];
            const double wx = 0.5 * (xb - xa) * gw[i];
            for (int j = 0; j < y_order; ++j) {
                const double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * hy[j];
                const double wy = 0.5 * (y1 - y0) * hw[j];
                StripNode node{Complex(x, y), wx * wy, Complex(0.0)};
                node.dbar = ext.dbar(node.z);
                nodes.push_back(node);
            }
        }
    }
    return nodes;
}

bool band_is_resolved(const AlmostAnalyticExtension& ext, const HsGridSpec& spec,
                      double y0, double rel_tol, int x_order) {
    const double lo = ext.window_lo(), hi = ext.window_hi();
    const double width =
        std::min((hi - lo) / spec.x_panels, width_factor_for(rel_tol, x_order) * y0);
    return std::ceil((hi - lo) / width) <= spec.x_panel_cap;
}

// cheap |dbar| mass estimate on a probe grid, used to skip whole bands
double band_mass_probe(const AlmostAnalyticExtension& ext, double y0, double y1) {
    const double lo = ext.window_lo(), hi = ext.window_hi();
    const int nx = 384, ny = 3;
    double acc = 0.0;
    for (int j = 0; j < ny; ++j) {
        const double y = y0 + (y1 - y0) * (j + 0.5) / ny;
        double strip = 0.0;
        for (int i = 0; i < nx; ++i) {
            const double x = lo + (hi - lo) * (i + 0.5) / nx;
            strip = std::max(strip, std::abs(ext.dbar(Complex(x, y))));
        }
        acc += strip * (hi - lo) * (y1 - y0) / (ny * y);
    }
    return 2.0 / M_PI * acc;
}

struct StripPass {
    Eigen::MatrixXcd matrix;
    double skipped = 0.0;
    int used = 0, skipped_nodes = 0;
};

StripPass strip_integral(const Eigen::MatrixXcd& A, TridiagonalResolvent& solver,
                         const AlmostAnalyticExtension& ext, const HsGridSpec& spec,
                         int x_order, int y_order) {
    const int D = static_cast<int>(A.rows());
    const bool symmetric = ext.profile_real(); // lower half = adjoint of upper half
    StripPass pass;
    Eigen::MatrixXcd upper = Eigen::MatrixXcd::Zero(D, D);
    Eigen::MatrixXcd lower = Eigen::MatrixXcd::Zero(D, D);
    Eigen::MatrixXcd resolvent(D, D);

    std::vector<std::pair<double, double>> bands;
    double top = ext.strip_halfwidth();
    while (top > spec.floor) {
        const double bottom = std::max(spec.floor, 0.5 * top);
        bands.emplace_back(bottom, top);
        top = bottom;
    }

    for (const auto& [y0, y1] : bands) {
        // probe first: deep bands of a smooth profile carry negligible mass
        const double probe = band_mass_probe(ext, y0, y1);
        // a band only needs relative accuracy proportional to its own mass
        const double rel_tol =
            std::clamp(spec.band_threshold / std::max(probe, 1e-300), 1e-9, 0.05);
        if (!band_is_resolved(ext, spec, y0, rel_tol, x_order) ||
            4.0 * probe < spec.band_threshold) {
            pass.skipped += probe;
            continue;
        }
        const auto nodes = band_nodes(ext, spec, y0, y1, rel_tol, x_order, y_order);
        double mass = 0.0;
        for (const auto& node : nodes)
            mass += std::abs(node.dbar) * node.weight / node.z.imag();
        mass *= 2.0 / M_PI;
        if (mass < spec.band_threshold) {
            pass.skipped += mass;
            pass.skipped_nodes += static_cast<int>(nodes.size());
            continue;
        }
        for (const auto& node : nodes) {
            const double bound = std::abs(node.dbar) * node.weight / node.z.imag();
            if (bound < spec.skip_threshold) {
                pass.skipped += 2.0 * bound / M_PI;
                pass.skipped_nodes += 1;
                continue;
            }
            pass.used += 1;
            solver.resolvent_into(node.z, resolvent);
            upper.noalias() += (node.weight * node.dbar) * resolvent;
            if (!symmetric) {
                const Complex zbar = std::conj(node.z);
                solver.resolvent_into(zbar, resolvent);
                lower.noalias() += (node.weight * ext.dbar(zbar)) * resolvent;
            }
        }
    }
    if (symmetric) lower = upper.adjoint();
    // back to the original basis: (z-A)^{-1} = Q (z-T)^{-1} Q^H
    pass.matrix = solver.Q() * ((-1.0 / M_PI) * (upper + lower)) * solver.Q().adjoint();
    return pass;
}

} // namespace

HsResult hs_function_of_operator(const ToeplitzMatrix& A,
                                 const AlmostAnalyticExtension& ext,
                                 const HsGridSpec& spec) {
    require_hermitian(A.entries, 1e-8, "hs_function_of_operator");
    if (!(spec.floor > 0.0))
        throw ConfigError("hs_function_of_operator: floor must be positive");
    if (spec.floor >= ext.strip_halfwidth())
        throw ConfigError("hs_function_of_operator: floor reaches the strip top");
    HsResult result;
    TridiagonalResolvent solver(A.entries);

    const StripPass fine =
        strip_integral(A.entries, solver, ext, spec, spec.x_order, spec.y_order);
    result.matrix = fine.matrix;
    result.skipped_bound = fine.skipped;
    result.nodes_used = fine.used;
    result.nodes_skipped = fine.skipped_nodes;

    const StripPass coarse = strip_integral(A.entries, solver, ext, spec,
                                            std::max(3, spec.x_order - 2),
                                            std::max(4, spec.y_order - 6));
    result.quadrature_estimate =
        operator_norm(fine.matrix - coarse.matrix) + std::abs(coarse.skipped - fine.skipped);

    // dropped band |Im z| < floor: |dbar| <= C_M |y|^M and the resolvent
    // costs 1/|y|, integrated over both signs and the x window
    const int M = std::max(1, ext.decay_order());
    const double C_M = ext.measured_decay().C_M;
    result.floor_band_bound = (2.0 / M_PI) * C_M * (ext.window_hi() - ext.window_lo()) *
                              std::pow(spec.floor, M) / M;
    return result;
}

Eigen::MatrixXcd spectral_function_oracle(const ToeplitzMatrix& A,
                                          const std::function<Complex(double)>& chi) {
    require_hermitian(A.entries, 1e-8, "spectral_function_oracle");
    const Eigen::MatrixXcd sym = 0.5 * (A.entries + A.entries.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(sym);
    if (eig.info() != Eigen::Success)
        throw Error("spectral_function_oracle: eigendecomposition failed");
    const int D = static_cast<int>(sym.rows());
    Eigen::VectorXcd vals(D);
    for (int i = 0; i < D; ++i) vals(i) = chi(eig.eigenvalues()(i));
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().adjoint();
}

// ---- hypotheses ---------------------------------------------------------------

HypothesisCertificate certify_funcalc_hypotheses(const Symbol& f, const OrderFunction& m,
                                                 std::span<const Complex> grid,
                                                 std::span<const double> N_list,
                                                 double C_cap) {
    HypothesisCertificate cert;
    if (!f.expr.is_conjugation_symmetric()) {
        cert.detail = "symbol is not structurally real-valued";
        return cert;
    }
    double C = 1.0;
    for (const double N : N_list) {
        for (const Complex zpt : grid) {
            const Complex v = f.eval(zpt, N);
            if (v.real() < -1e-10) {
                cert.detail = "symbol is negative on the grid";
                return cert;
            }
            // smallest C with |f| >= m/C - C at this point
            const double fv = std::abs(v);
            const double mv = m.value(zpt, N);
            C = std::max(C, 0.5 * (-fv + std::sqrt(fv * fv + 4.0 * mv)));
        }
    }
    cert.ok = C <= C_cap;
    cert.constant = C;
    if (!cert.ok) cert.detail = "lower-bound constant exceeds cap";
    return cert;
}

HypothesisCertificate certify_parametrix_hypotheses(const Symbol& f, Complex z,
                                                    const OrderFunction& m,
                                                    std::span<const Complex> grid,
                                                    std::span<const double> N_list,
                                                    double c_min) {
    HypothesisCertificate cert;
    double c = std::numeric_limits<double>::infinity();
    for (const double N : N_list)
        for (const Complex zpt : grid)
            c = std::min(c, std::abs(f.eval(zpt, N) - z) / m.value(zpt, N));
    cert.constant = c;
    cert.ok = c >= c_min;
    if (!cert.ok) cert.detail = "ellipticity constant below threshold";
    return cert;
}

SymbolExpr functional_calculus_symbol(const Symbol& f,
                                      std::shared_ptr<const RealProfile1D> chi,
                                      const OrderFunction& m,
                                      std::span<const Complex> grid,
                                      std::span<const double> N_list) {
    const auto cert = certify_funcalc_hypotheses(f, m, grid, N_list);
    if (!cert.ok)
        throw CertificationError("functional_calculus_symbol: " + cert.detail);
    return SymbolExpr::compose1d(chi, f.expr);
}

SymbolExpr resolvent_symbol(const Symbol& f, Complex z, const OrderFunction& m,
                            std::span<const Complex> grid,
                            std::span<const double> N_list) {
    if (z.imag() == 0.0) {
        const auto cert = certify_parametrix_hypotheses(f, z, m, grid, N_list);
        if (!cert.ok)
            throw CertificationError("resolvent_symbol: real z without ellipticity: " +
                                     cert.detail);
    }
    return SymbolExpr::inv_of(SymbolExpr::constant(z) - f.expr);
}

ResolventBoundReport verify_resolvent_bounds(const Symbol& f, Complex z,
                                             const OrderFunction& m,
                                             std::span<const Complex> grid,
                                             std::span<const double> N_list,
                                             int max_alpha, double C_cap) {
    ResolventBoundReport report;
    const double abs_im = std::abs(z.imag());
    if (abs_im == 0.0) throw CertificationError("verify_resolvent_bounds: Im z = 0");
    const double delta = f.delta;
    for (const double N : N_list) {
        // bake the N-power into the tree so derivatives see the scaled symbol
        const SymbolExpr scaled =
            SymbolExpr::constant(std::pow(N, f.power)) * f.expr;
        const SymbolExpr s1 = SymbolExpr::inv_of(SymbolExpr::constant(z) - scaled);
        for (int a = 0; a <= max_alpha; ++a) {
            for (int b = 0; a + b <= max_alpha; ++b) {
                const SymbolExpr deriv = differentiate(s1, a, b);
                const double dscale = std::pow(N, delta * (a + b));
                double C = report.C_alpha.count({a, b}) ? report.C_alpha[{a, b}] : 0.0;
                for (const Complex zpt : grid) {
                    const double lhs = std::abs(deriv.eval(zpt));
                    const double rhs =
                        std::pow(abs_im, -1.0 - (a + b)) * dscale / m.value(zpt, N);
                    C = std::max(C, lhs / rhs);
                }
                report.C_alpha[{a, b}] = C;
                report.worst = std::max(report.worst, C);
            }
        }
    }
    report.ok = report.worst <= C_cap;
    return report;
}

// ---- parametrix ---------------------------------------------------------------

namespace {

StarSeries series_one(int J) {
    StarSeries s;
    s.terms.assign(static_cast<std::size_t>(J) + 1, SymbolExpr::constant(0.0));
    s.terms[0] = SymbolExpr::constant(1.0);
    s.input_orders.assign(static_cast<std::size_t>(J) + 1, {0, 0});
    return s;
}

StarSeries series_add_scaled(const StarSeries& u, double alpha, const StarSeries& v) {
    StarSeries out = u;
    for (std::size_t j = 0; j < out.terms.size() && j < v.terms.size(); ++j)
        out.terms[j] = out.terms[j] + SymbolExpr::constant(alpha) * v.terms[j];
    return out;
}

// star product of two truncated series, coefficient-wise to order J
StarSeries series_star(const StarSeries& u, const StarSeries& v,
                       const ModelGeometry& geometry, int J) {
    StarSeries out;
    for (int j = 0; j <= J; ++j) {
        SymbolExpr acc = SymbolExpr::constant(0.0);
        for (int a = 0; a <= j && a < static_cast<int>(u.terms.size()); ++a) {
            for (int b = 0; a + b <= j && b < static_cast<int>(v.terms.size()); ++b) {
                const int c = j - a - b;
                acc = acc + star_term(u.terms[a], v.terms[b], geometry, c);
            }
        }
        out.terms.push_back(acc);
        out.input_orders.emplace_back(2 * j, 2 * j);
    }
    return out;
}

} // namespace

ParametrixResult parametrix_symbol(const Symbol& f, Complex z, int J,
                                   const ModelGeometry& geometry,
                                   const OrderFunction& m,
                                   std::span<const Complex> grid,
                                   std::span<const double> N_list) {
    const auto cert = certify_parametrix_hypotheses(f, z, m, grid, N_list);
    if (!cert.ok)
        throw CertificationError("parametrix_symbol: " + cert.detail +
                                 " (c = " + std::to_string(cert.constant) + ")");
    if (geometry.id() != ModelId::bargmann_plane && J > 1)
        throw Error("parametrix_symbol: star terms beyond order 1 need the Bargmann model");
    if (f.power != 0.0)
        throw Error("parametrix_symbol: N-power symbols are not supported here");

    const SymbolExpr shifted = f.expr - SymbolExpr::constant(z);
    const SymbolExpr s1 = SymbolExpr::inv_of(shifted);

    // defect of the one-term inverse: (f-z) star s1 = 1 + sum_{j>=1} N^{-j} rho_j
    const auto defect_series = [&](const SymbolExpr& u, const SymbolExpr& v) {
        StarSeries rho;
        rho.terms.push_back(SymbolExpr::constant(0.0)); // exact cancellation at j=0
        rho.input_orders.emplace_back(0, 0);
        for (int j = 1; j <= J; ++j) {
            rho.terms.push_back(star_term(u, v, geometry, j));
            rho.input_orders.emplace_back(2 * j, 2 * j);
        }
        return rho;
    };

    const auto neumann = [&](const StarSeries& rho) {
        StarSeries acc = series_one(J);
        StarSeries power = series_one(J);
        for (int k = 1; k <= J; ++k) {
            power = series_star(power, rho, geometry, J);
            acc = series_add_scaled(acc, (k % 2 == 0) ? 1.0 : -1.0, power);
        }
        return acc;
    };

    StarSeries s1_series;
    s1_series.terms.push_back(s1);
    s1_series.input_orders.emplace_back(0, 0);

    ParametrixResult out;
    out.right = series_star(s1_series, neumann(defect_series(shifted, s1)), geometry, J);
    out.left = series_star(neumann(defect_series(s1, shifted)), s1_series, geometry, J);
    return out;
}

} // namespace btq
