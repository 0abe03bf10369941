#include "btq/semiclassics.hpp"

#include <cmath>

#include "btq/errors.hpp"

namespace btq {

namespace {

double factorial(int n) {
    double acc = 1.0;
    for (int i = 2; i <= n; ++i) acc *= i;
    return acc;
}

SymbolExpr laplace_power(const SymbolExpr& u, int j) {
    SymbolExpr cur = u;
    for (int i = 0; i < j; ++i) cur = cur.d_z().d_zbar();
    return cur;
}

} // namespace

Complex StarSeries::eval(Complex z, double N) const {
    Complex acc(0.0);
    double scale = 1.0;
    for (const auto& term : terms) {
        acc += scale * term.eval(z);
        scale /= N;
    }
    return acc;
}

SymbolExpr inverse_metric_expr(const ModelGeometry& geometry) {
    switch (geometry.id()) {
        case ModelId::bargmann_plane:
            return SymbolExpr::constant(1.0);
        case ModelId::projective_line:
            return SymbolExpr::pow_of(
                SymbolExpr::constant(1.0) + SymbolExpr::z() * SymbolExpr::conj_z(), 2);
    }
    return SymbolExpr::constant(1.0);
}

SymbolExpr star_term(const SymbolExpr& f, const SymbolExpr& g,
                     const ModelGeometry& geometry, int j) {
    if (j < 0) throw Error("star_term: negative order");
    if (j == 0) return f * g;
    if (j == 1) return -(inverse_metric_expr(geometry) * (f.d_z() * g.d_zbar()));
    if (geometry.id() != ModelId::bargmann_plane)
        throw Error("star_term: order >= 2 is only available on the Bargmann model");
    return star_series_bargmann(f, g, j).terms.back();
}

StarSeries star_series_bargmann(const SymbolExpr& f, const SymbolExpr& g, int J) {
    StarSeries series;
    // cache of d̄^d (dd̄)^a applied to each input
    const auto mixed = [](const SymbolExpr& u, int a, int d, bool bar_first) {
        SymbolExpr cur = laplace_power(u, a);
        for (int i = 0; i < d; ++i) cur = bar_first ? cur.d_zbar() : cur.d_z();
        return cur;
    };
    for (int j = 0; j <= J; ++j) {
        SymbolExpr acc = SymbolExpr::constant(0.0);
        int f_order = 0, g_order = 0;
        for (int a = 0; a <= j; ++a) {
            for (int b = 0; a + b <= j; ++b) {
                const int d = j - a - b;
                const SymbolExpr fa = mixed(f, a, d, true);   // d̄^d (dd̄)^a f
                const SymbolExpr gb = mixed(g, b, d, false);  // d^d (dd̄)^b g
                const double coeff =
                    1.0 / (factorial(a) * factorial(b) * factorial(d));
                acc = acc + SymbolExpr::constant(coeff) * (fa * gb);
                f_order = std::max(f_order, 2 * a + d);
                g_order = std::max(g_order, 2 * b + d);
            }
        }
        for (int d = 1; d <= j; ++d) {
            const SymbolExpr corr = laplace_power(series.terms[j - d], d);
            acc = acc - SymbolExpr::constant(1.0 / factorial(d)) * corr;
            f_order = std::max(f_order, series.input_orders[j - d].first + 2 * d);
            g_order = std::max(g_order, series.input_orders[j - d].second + 2 * d);
        }
        series.terms.push_back(j == 0 ? f * g : acc);
        series.input_orders.emplace_back(f_order, g_order);
    }
    return series;
}

StarSeries star_series(const SymbolExpr& f, const SymbolExpr& g,
                       const ModelGeometry& geometry, int J) {
    if (geometry.id() == ModelId::bargmann_plane) return star_series_bargmann(f, g, J);
    if (J > 1)
        throw Error("star_series: orders >= 2 need the Bargmann model");
    StarSeries series;
    series.terms.push_back(star_term(f, g, geometry, 0));
    series.input_orders.emplace_back(0, 0);
    if (J >= 1) {
        series.terms.push_back(star_term(f, g, geometry, 1));
        series.input_orders.emplace_back(1, 1);
    }
    return series;
}

SymbolExpr poisson_bracket(const SymbolExpr& f, const SymbolExpr& g,
                           const ModelGeometry& geometry) {
    const SymbolExpr skew = f.d_z() * g.d_zbar() - g.d_z() * f.d_zbar();
    // 1/(i H) = -i H^{-1}
    return SymbolExpr::constant(Complex(0.0, -1.0)) * (inverse_metric_expr(geometry) * skew);
}

Complex diagonal_kernel_expansion(const SymbolExpr& f, Complex x, int J,
                                  const ModelGeometry& geometry, double N) {
    if (geometry.id() != ModelId::bargmann_plane)
        throw Error("diagonal_kernel_expansion: Bargmann model only");
    Complex acc(0.0);
    double scale = 1.0;
    for (int j = 0; j <= J; ++j) {
        acc += scale / factorial(j) * laplace_power(f, j).eval(x);
        scale /= N;
    }
    return (N / (2.0 * M_PI)) * acc;
}

Complex offdiagonal_kernel_expansion(const SymbolExpr& f, Complex x, Complex y_conj,
                                     int J, const ModelGeometry& geometry, double N,
                                     double window_factor) {
    if (geometry.id() != ModelId::bargmann_plane)
        throw Error("offdiagonal_kernel_expansion: Bargmann model only");
    const Complex y = std::conj(y_conj);
    if (std::abs(x - y) > window_factor / std::sqrt(N))
        throw Error("offdiagonal_kernel_expansion: pair outside the near-diagonal window");
    Complex acc(0.0);
    double scale = 1.0;
    for (int j = 0; j <= J; ++j) {
        acc += scale / factorial(j) * laplace_power(f, j).eval_polarized(x, y_conj);
        scale /= N;
    }
    const Complex phase = N * (x * y_conj - 0.5 * (std::norm(x) + std::norm(y)));
    return std::exp(phase) * (N / (2.0 * M_PI)) * acc;
}

} // namespace btq
