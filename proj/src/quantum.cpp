#include "btq/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "btq/errors.hpp"

namespace btq {

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev initial guess, Newton on the Legendre recurrence.
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double deriv = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = t;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2 * k + 1) * t * p1 - k * p0) / (k + 1);
                p0 = p1;
                p1 = p2;
            }
            deriv = n * (t * p1 - p0) / (t * t - 1.0);
            const double step = p1 / deriv;
            t -= step;
            if (std::abs(step) < 1e-15) break;
        }
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * deriv * deriv);
    }
    return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

// ---- basis ------------------------------------------------------------------

QuantumBasis QuantumBasis::build(const ModelGeometry& geometry, int N,
                                 double support_radius, int dim_cap) {
    if (N < 1) throw ConfigError("basis: N must be >= 1");
    int dim = 0;
    switch (geometry.id()) {
        case ModelId::bargmann_plane: {
            if (!(support_radius > 0.0))
                throw ConfigError("basis: support radius must be positive");
            dim = static_cast<int>(std::ceil(2.0 * N * support_radius * support_radius)) + 16;
            break;
        }
        case ModelId::projective_line:
            dim = N + 1;
            break;
    }
    if (dim > dim_cap)
        throw DimensionError("basis dimension " + std::to_string(dim) +
                             " exceeds cap " + std::to_string(dim_cap));
    std::vector<double> log_norms(dim);
    const double log2pi = std::log(2.0 * M_PI);
    for (int k = 0; k < dim; ++k) {
        switch (geometry.id()) {
            case ModelId::bargmann_plane:
                log_norms[k] = log2pi + std::lgamma(k + 1.0) - (k + 1.0) * std::log(double(N));
                break;
            case ModelId::projective_line:
                log_norms[k] = log2pi + std::lgamma(k + 1.0) + std::lgamma(N - k + 1.0) -
                               std::lgamma(N + 2.0);
                break;
        }
    }
    return QuantumBasis(geometry, N, dim, support_radius, std::move(log_norms));
}

double QuantumBasis::squared_norm(int k) const { return std::exp(log_sq_norms_[k]); }

Complex QuantumBasis::kernel_closed_form(Complex x, Complex y_conj) const {
    const double N = N_;
    switch (geometry_.id()) {
        case ModelId::bargmann_plane:
            return (N / (2.0 * M_PI)) * std::exp(N * x * y_conj);
        case ModelId::projective_line: {
            const Complex base = 1.0 + x * y_conj;
            Complex p(1.0);
            Complex b = base;
            int e = N_;
            while (e > 0) { // integer power keeps the branch exact
                if (e & 1) p *= b;
                b *= b;
                e >>= 1;
            }
            return ((N + 1.0) / (2.0 * M_PI)) * p;
        }
    }
    return {};
}

Complex QuantumBasis::kernel_basis_sum(Complex x, Complex y_conj) const {
    const double N = N_;
    const Complex u = x * y_conj;
    Complex term, acc;
    switch (geometry_.id()) {
        case ModelId::bargmann_plane:
            term = N / (2.0 * M_PI);
            acc = term;
            for (int k = 0; k + 1 < dim_; ++k) {
                term *= u * (N / (k + 1.0));
                acc += term;
            }
            return acc;
        case ModelId::projective_line:
            term = (N + 1.0) / (2.0 * M_PI);
            acc = term;
            for (int k = 0; k + 1 < dim_; ++k) {
                term *= u * ((N - k) / (k + 1.0));
                acc += term;
            }
            return acc;
    }
    return {};
}

Complex QuantumBasis::weighted_kernel(Complex x, Complex y_conj) const {
    const double N = N_;
    const Complex y = std::conj(y_conj);
    switch (geometry_.id()) {
        case ModelId::bargmann_plane: {
            const Complex arg = x * y_conj - 0.5 * (std::norm(x) + std::norm(y));
            return (N / (2.0 * M_PI)) * std::exp(N * arg);
        }
        case ModelId::projective_line: {
            // (1 + x conj y)^N is a polynomial: single-valued for integer N,
            // so magnitude and phase are split instead of taking a log branch
            const Complex base = 1.0 + x * y_conj;
            const double mag = std::abs(base);
            if (mag == 0.0) return Complex(0.0);
            const double logmag = N * std::log(mag) -
                                  0.5 * N * (std::log1p(std::norm(x)) +
                                             std::log1p(std::norm(y)));
            return ((N + 1.0) / (2.0 * M_PI)) *
                   std::polar(std::exp(logmag), N * std::arg(base));
        }
    }
    return {};
}

bool QuantumBasis::truncation_tail_ok(Complex x, Complex y_conj) const {
    if (geometry_.id() != ModelId::bargmann_plane) return true;
    return std::abs(double(N_) * x * y_conj) < double(dim_);
}

// ---- quadrature -------------------------------------------------------------

namespace {

struct RadialGrid {
    std::vector<double> radius;
    std::vector<double> log_weight;
};

// Panels of Gauss-Legendre nodes over the substituted radial variable.
RadialGrid radial_grid(const QuantumBasis& basis, int panels, int nodes_per_panel) {
    RadialGrid g;
    const auto& [gx, gw] = gauss_legendre(nodes_per_panel);
    const double N = basis.level();
    switch (basis.geometry().id()) {
        case ModelId::bargmann_plane: {
            const double D = basis.dimension();
            const double t_max = D + 12.0 * std::sqrt(D + 4.0) + 60.0;
            for (int p = 0; p < panels; ++p) {
                const double lo = t_max * p / panels, hi = t_max * (p + 1) / panels;
                for (int i = 0; i < nodes_per_panel; ++i) {
                    const double t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[i];
                    g.radius.push_back(std::sqrt(t / N));
                    g.log_weight.push_back(std::log(0.5 * (hi - lo) * gw[i] / N) - t);
                }
            }
            break;
        }
        case ModelId::projective_line: {
            for (int p = 0; p < panels; ++p) {
                const double lo = double(p) / panels, hi = double(p + 1) / panels;
                for (int i = 0; i < nodes_per_panel; ++i) {
                    const double t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[i];
                    g.radius.push_back(std::sqrt(t / (1.0 - t)));
                    g.log_weight.push_back(std::log(0.5 * (hi - lo) * gw[i]) +
                                           N * std::log1p(-t));
                }
            }
            break;
        }
    }
    return g;
}

double norm_reproduction_err(const QuantumBasis& basis, const RadialGrid& g, int& worst_k) {
    double worst = 0.0;
    worst_k = -1;
    for (int k = 0; k < basis.dimension(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.radius.size(); ++i)
            acc += std::exp(g.log_weight[i] + 2.0 * k * std::log(g.radius[i]) -
                            basis.log_squared_norm(k));
        const double err = std::abs(2.0 * M_PI * acc - 1.0);
        if (err > worst) {
            worst = err;
            worst_k = k;
        }
    }
    return worst;
}

} // namespace

QuadratureRule QuadratureRule::build(const QuantumBasis& basis, int radial_nodes,
                                     int angular_nodes, int radial_cap) {
    const int per_panel = 24;
    int panels = 0;
    if (radial_nodes > 0) {
        panels = std::max(1, (radial_nodes + per_panel - 1) / per_panel);
    } else {
        switch (basis.geometry().id()) {
            case ModelId::bargmann_plane: {
                const double t_max =
                    basis.dimension() + 12.0 * std::sqrt(basis.dimension() + 4.0) + 60.0;
                panels = std::max(2, static_cast<int>(std::ceil(t_max / 32.0)));
                break;
            }
            case ModelId::projective_line:
                panels = std::max(2, basis.level() / 40 + 2);
                break;
        }
    }
    const int D = basis.dimension();
    const int angular = angular_nodes > 0 ? angular_nodes : 2 * D + 4;

    QuadratureRule rule(basis);
    rule.angular_ = angular;
    rule.cert_.angular_nodes = angular;

    int rounds = 0;
    for (;;) {
        RadialGrid g = radial_grid(basis, panels, per_panel);
        int worst_k = -1;
        const double err = norm_reproduction_err(basis, g, worst_k);
        rule.cert_.max_norm_rel_err = err;
        rule.cert_.worst_monomial = worst_k;
        rule.cert_.radial_nodes = static_cast<int>(g.radius.size());
        rule.cert_.refinement_rounds = rounds;
        if (err <= 1e-10) {
            rule.radius_ = std::move(g.radius);
            rule.log_weight_ = std::move(g.log_weight);
            rule.cert_.converged = true;
            break;
        }
        if (2 * panels * per_panel > radial_cap) {
            throw QuadratureError(
                "quadrature failed to reproduce norms at cap; worst monomial k=" +
                std::to_string(worst_k) + " rel err " + std::to_string(err));
        }
        panels *= 2;
        ++rounds;
    }

    // total mass against the closed forms 2 pi / N resp. 2 pi / (N+1)
    const double mass = rule.total_mass();
    const double exact = basis.geometry().id() == ModelId::bargmann_plane
                             ? 2.0 * M_PI / basis.level()
                             : 2.0 * M_PI / (basis.level() + 1.0);
    rule.cert_.total_mass_rel_err = std::abs(mass - exact) / exact;

    if (angular < D + 1) {
        rule.cert_.aliasing_risk = true;
        // worst Gram entry among pairs folded together by the angle sum
        double worst = 0.0;
        for (int j = 0; j < D; ++j) {
            for (int k = j + angular; k < D; k += angular) {
                double acc = 0.0;
                for (int i = 0; i < rule.radial_count(); ++i) {
                    const double r = rule.radius_[i];
                    acc += std::exp(rule.log_weight_[i] + (j + k) * std::log(r) -
                                    0.5 * basis.log_squared_norm(j) -
                                    0.5 * basis.log_squared_norm(k));
                }
                worst = std::max(worst, std::abs(2.0 * M_PI * acc));
            }
        }
        rule.cert_.worst_aliased_gram = worst;
    }
    return rule;
}

double QuadratureRule::log_plain_radial_weight(int i) const {
    // direct formulas: quadrature nodes legitimately reach past the chart bound
    const double r2 = radius_[i] * radius_[i];
    const double pot = basis_.geometry().id() == ModelId::bargmann_plane
                           ? r2
                           : std::log1p(r2);
    return log_weight_[i] + basis_.level() * pot;
}

double QuadratureRule::total_mass() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < radius_.size(); ++i) acc += std::exp(log_weight_[i]);
    return acc * 2.0 * M_PI;
}

// ---- verification -----------------------------------------------------------

ReproducingReport verify_reproducing(const QuantumBasis& basis,
                                     const QuadratureRule& rule,
                                     std::span<const std::pair<Complex, Complex>> pairs) {
    ReproducingReport report;
    const int D = basis.dimension();
    const int A = rule.angular_count();
    // Gram entries vanish identically unless (j - k) is a multiple of the
    // angular count, so only those bands are summed.
    const auto gram_entry = [&](int j, int k) {
        double acc = 0.0;
        for (int i = 0; i < rule.radial_count(); ++i) {
            acc += std::exp(rule.log_radial_weight(i) +
                            (j + k) * std::log(rule.radius(i)) -
                            0.5 * basis.log_squared_norm(j) -
                            0.5 * basis.log_squared_norm(k));
        }
        return 2.0 * M_PI * acc;
    };
    for (int j = 0; j < D; ++j) {
        report.max_gram_diag_err =
            std::max(report.max_gram_diag_err, std::abs(gram_entry(j, j) - 1.0));
        for (int k = j + A; k < D; k += A)
            report.max_gram_offdiag =
                std::max(report.max_gram_offdiag, std::abs(gram_entry(j, k)));
    }

    // nodes past the chart bound carry weight (1-t)^N ~ 0 and are skipped
    const double reach = basis.geometry().chart_bound() * 0.99;
    for (const auto& [x, y] : pairs) {
        const Complex direct = basis.weighted_kernel(x, std::conj(y));
        Complex acc(0.0);
        for (int i = 0; i < rule.radial_count(); ++i) {
            if (rule.radius(i) > reach) continue;
            // plain weight is the full mu dm measure at the node
            const double lw = rule.log_plain_radial_weight(i);
            for (int a = 0; a < rule.angular_count(); ++a) {
                const Complex w = std::polar(rule.radius(i), rule.angle(a));
                acc += std::exp(lw) * rule.angular_weight() *
                       basis.weighted_kernel(x, std::conj(w)) *
                       basis.weighted_kernel(w, std::conj(y));
            }
        }
        const double rel = std::abs(acc - direct) / std::abs(direct);
        report.max_idempotence_rel_err = std::max(report.max_idempotence_rel_err, rel);
    }
    return report;
}

OffDiagonalDecayReport verify_offdiagonal_decay(
    const QuantumBasis& basis,
    std::span<const std::pair<Complex, Complex>> pairs) {
    OffDiagonalDecayReport report;
    const double N = basis.level();
    double peak = 0.0;
    std::vector<double> us, vs; // N|x-y|^2 against log|K|
    for (const auto& [x, y] : pairs) {
        const double mag = std::abs(basis.weighted_kernel(x, std::conj(y)));
        peak = std::max(peak, mag / N);
        if (std::norm(x - y) > 1e-20 && mag > 1e-280) {
            us.push_back(N * std::norm(x - y));
            vs.push_back(std::log(mag));
        }
    }
    report.C = 1.01 * peak;
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto& [x, y] : pairs) {
        const double dist = basis.geometry().distance(x, y);
        if (dist < 1e-12) continue;
        const double mag = std::abs(basis.weighted_kernel(x, std::conj(y)));
        const double logmag = mag > 1e-280 ? std::log(mag) : std::log(1e-280);
        cmin = std::min(cmin, (std::log(report.C * N) - logmag) / (std::sqrt(N) * dist));
    }
    report.c = std::isfinite(cmin) ? cmin : 0.0;

    if (us.size() >= 2) { // least squares for the Gaussian exponent
        double su = 0, sv = 0, suu = 0, suv = 0;
        for (std::size_t i = 0; i < us.size(); ++i) {
            su += us[i];
            sv += vs[i];
            suu += us[i] * us[i];
            suv += us[i] * vs[i];
        }
        const double n = static_cast<double>(us.size());
        report.gaussian_slope = (n * suv - su * sv) / (n * suu - su * su);
    }
    return report;
}

double integrate_volume(const ModelGeometry& geometry,
                        const std::function<double(Complex)>& f,
                        double radius, int radial, int angular) {
    const auto& [gx, gw] = gauss_legendre(std::min(radial, 512));
    double acc = 0.0;
    switch (geometry.id()) {
        case ModelId::projective_line: {
            // t = r^2/(1+r^2): int f mu dm = int_0^1 int f dt dtheta
            for (std::size_t i = 0; i < gx.size(); ++i) {
                const double t = 0.5 + 0.5 * gx[i];
                const double r = std::sqrt(t / (1.0 - t));
                double ang = 0.0;
                for (int a = 0; a < angular; ++a)
                    ang += f(std::polar(r, 2.0 * M_PI * a / angular));
                acc += 0.5 * gw[i] * ang * (2.0 * M_PI / angular);
            }
            return acc;
        }
        case ModelId::bargmann_plane: {
            // mu = 2: int f mu dm = int_0^R int f 2 r dr dtheta
            for (std::size_t i = 0; i < gx.size(); ++i) {
                const double r = 0.5 * radius * (1.0 + gx[i]);
                double ang = 0.0;
                for (int a = 0; a < angular; ++a)
                    ang += f(std::polar(r, 2.0 * M_PI * a / angular));
                acc += 0.5 * radius * gw[i] * 2.0 * r * ang * (2.0 * M_PI / angular);
            }
            return acc;
        }
    }
    return acc;
}

} // namespace btq
