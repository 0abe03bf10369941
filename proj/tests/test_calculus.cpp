#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "btq/calculus.hpp"
#include "btq/errors.hpp"

using btq::AlmostAnalyticExtension;
using btq::Complex;
using btq::ModelGeometry;
using btq::RealProfile1D;

namespace {

btq::ToeplitzMatrix wrap(Eigen::MatrixXcd m) {
    btq::ToeplitzMatrix T;
    T.level = 0;
    T.entries = std::move(m);
    T.hermitian_expected = true;
    return T;
}

Eigen::MatrixXcd random_hermitian(int n, double lo, double hi, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd G(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) G(j, k) = Complex(gauss(rng), gauss(rng));
    Eigen::MatrixXcd H = 0.5 * (G + G.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(H);
    Eigen::VectorXd v = eig.eigenvalues();
    const double vmin = v.minCoeff(), vmax = v.maxCoeff();
    for (int i = 0; i < n; ++i) v(i) = lo + (hi - lo) * (v(i) - vmin) / (vmax - vmin);
    return eig.eigenvectors() * v.asDiagonal() *
           eig.eigenvectors().adjoint();
}

} // namespace

TEST_SUITE("calculus") {

TEST_CASE("profiles evaluate and resolve") {
    const auto chi = RealProfile1D::bump(2.0, 0.5);
    CHECK(chi->value(2.0).real() == doctest::Approx(1.0));
    CHECK(std::abs(chi->value(2.6)) == 0.0);
    CHECK(chi->spectral_tail() < 1e-12);
    const auto flat = RealProfile1D::plateau(0.0, 1.0);
    CHECK(flat->value(0.3).real() == doctest::Approx(1.0));
    CHECK(std::abs(flat->value(1.2)) == 0.0);
    CHECK(flat->value(0.75).real() > 0.0);
    CHECK(flat->value(0.75).real() < 1.0);
    // spectral derivative against finite differences
    const auto dchi = chi->derivative();
    const double h = 1e-6;
    for (double x : {1.7, 2.0, 2.3}) {
        const double fd = (chi->value(x + h).real() - chi->value(x - h).real()) / (2.0 * h);
        CHECK(std::abs(dchi->value(x).real() - fd) < 1e-5);
    }
}

TEST_CASE("extension restricts to the profile on the real axis") {
    const auto chi = RealProfile1D::bump(0.0, 1.0);
    const auto ext = AlmostAnalyticExtension::build(chi, 0.5, 4);
    for (int i = 0; i <= 40; ++i) {
        const double x = -2.0 + 4.0 * i / 40.0;
        CHECK(std::abs(ext.value(Complex(x, 0.0)) - chi->value(x)) < 1e-10);
    }
}

TEST_CASE("dbar decay of the spectral extension") {
    const auto chi = RealProfile1D::bump(0.0, 1.0);
    const auto ext = AlmostAnalyticExtension::build(chi, 0.5, 4);
    const auto fit = ext.measured_decay();
    CHECK(fit.slope >= 3.7); // declared order 4
    CHECK(fit.C_M > 0.0);
}

TEST_CASE("naive extension is the rejected negative control") {
    const auto chi = RealProfile1D::bump(0.0, 1.0);
    const auto naive = AlmostAnalyticExtension::naive(chi, 0.5);
    CHECK(naive.measured_decay().slope < 1.0);
    // dbar = chi'(x)/2 regardless of height
    const Complex a = naive.dbar(Complex(0.5, 1e-3));
    const Complex b = naive.dbar(Complex(0.5, 1e-1));
    CHECK(std::abs(a - b) < 1e-14);
}

TEST_CASE("entire extension has identically vanishing dbar") {
    const auto ext = AlmostAnalyticExtension::entire_polynomial({1.0, 0.0, -2.0}, -1, 1, 0.5);
    CHECK(ext.dbar(Complex(0.3, 0.2)) == Complex(0.0));
    CHECK(std::abs(ext.value(Complex(0.5, 0.0)) - Complex(1.0 - 2.0 * 0.25)) < 1e-14);
}

TEST_CASE("under-resolved profiles are rejected") {
    // 48 samples over a wide window cannot resolve a narrow bump
    const auto bad = RealProfile1D::from_function(
        [](double x) { return Complex(std::abs(x) < 0.02 ? std::exp(1.0 - 1.0 / (1.0 - x * x / 4e-4)) : 0.0, 0.0); },
        0.0, 4.0, "narrow", 48);
    CHECK(bad->spectral_tail() > 1e-12);
    CHECK_THROWS_AS((void)AlmostAnalyticExtension::build(bad, 0.5, 4), btq::Error);
}

TEST_CASE("strip integral: spectral mapping sanity") {
    std::mt19937_64 rng(23);
    btq::HsGridSpec spec;
    spec.floor = 1e-5;
    SUBCASE("chi identically 1 near the spectrum reproduces the identity") {
        const auto A = wrap(random_hermitian(12, 1.8, 2.2, rng));
        const auto chi = RealProfile1D::plateau(2.0, 1.0); // 1 on [1.5, 2.5]
        const auto ext = AlmostAnalyticExtension::build(chi, 0.5, 4);
        const auto hs = btq::hs_function_of_operator(A, ext, spec);
        const double dev =
            btq::operator_norm(hs.matrix - Eigen::MatrixXcd::Identity(12, 12));
        CHECK(dev < std::max(hs.error_budget(), 1e-7));
    }
    SUBCASE("chi supported away from the spectrum gives zero") {
        const auto A = wrap(random_hermitian(12, 4.8, 5.2, rng));
        const auto chi = RealProfile1D::bump(2.0, 0.5);
        const auto ext = AlmostAnalyticExtension::build(chi, 0.5, 4);
        const auto hs = btq::hs_function_of_operator(A, ext, spec);
        CHECK(btq::operator_norm(hs.matrix) < std::max(hs.error_budget(), 1e-7));
    }
}

TEST_CASE("strip integral against the eigendecomposition oracle with budgets") {
    std::mt19937_64 rng(31);
    btq::HsGridSpec spec;
    spec.floor = 1e-5;
    const auto chi = RealProfile1D::bump(2.0, 0.6);
    const auto ext = AlmostAnalyticExtension::build(chi, 0.5, 4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto A = wrap(random_hermitian(10 + trial, 1.2, 2.8, rng));
        const auto hs = btq::hs_function_of_operator(A, ext, spec);
        const auto oracle =
            btq::spectral_function_oracle(A, [&](double x) { return chi->value(x); });
        const double dev = btq::operator_norm(hs.matrix - oracle);
        CHECK(dev <= hs.error_budget());
        // result is Hermitian for a real profile
        CHECK((hs.matrix - hs.matrix.adjoint()).cwiseAbs().maxCoeff() <=
              hs.error_budget() + 1e-12);
    }
}

TEST_CASE("strip integral is linear in the profile") {
    std::mt19937_64 rng(37);
    const auto A = wrap(random_hermitian(10, 1.5, 2.5, rng));
    btq::HsGridSpec spec;
    spec.floor = 1e-5;
    spec.skip_threshold = 0.0; // same node set for both runs
    spec.band_threshold = 0.0;
    // both profiles through the same constructor so the support metadata and
    // hence the x cutoff agree exactly
    const auto base = RealProfile1D::bump(2.0, 0.6);
    const auto chi = RealProfile1D::from_function(
        [&](double x) { return base->value(x); }, 2.0, 2.2, "chi_once");
    const auto scaled = RealProfile1D::from_function(
        [&](double x) { return 2.0 * base->value(x); }, 2.0, 2.2, "twice_chi");
    const auto e1 = AlmostAnalyticExtension::build(chi, 0.5, 4);
    const auto e2 = AlmostAnalyticExtension::build(scaled, 0.5, 4);
    const auto h1 = btq::hs_function_of_operator(A, e1, spec);
    const auto h2 = btq::hs_function_of_operator(A, e2, spec);
    CHECK(btq::operator_norm(h2.matrix - 2.0 * h1.matrix) < 1e-10);
}

TEST_CASE("strip integral refuses non-hermitian input") {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(4, 4);
    M(0, 1) = 1.0;
    const auto chi = RealProfile1D::bump(0.0, 1.0);
    const auto ext = AlmostAnalyticExtension::build(chi, 0.5, 4);
    CHECK_THROWS_AS((void)btq::hs_function_of_operator(wrap(M), ext, btq::HsGridSpec{}),
                    btq::CertificationError);
}

TEST_CASE("eigendecomposition oracle basics") {
    SUBCASE("diagonal matrices map entrywise") {
        Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(3, 3);
        D(0, 0) = 1.0;
        D(1, 1) = 2.0;
        D(2, 2) = 3.0;
        const auto out =
            btq::spectral_function_oracle(wrap(D), [](double x) { return Complex(x * x); });
        CHECK(std::abs(out(1, 1) - Complex(4.0)) < 1e-12);
        CHECK(std::abs(out(0, 1)) < 1e-12);
    }
    SUBCASE("calculus is a homomorphism: chi(A)^2 = chi^2(A)") {
        std::mt19937_64 rng(41);
        const auto A = wrap(random_hermitian(14, 0.5, 3.0, rng));
        const auto chi = RealProfile1D::plateau(1.5, 1.0);
        const auto one = btq::spectral_function_oracle(
            A, [&](double x) { return chi->value(x); });
        const auto two = btq::spectral_function_oracle(
            A, [&](double x) { return chi->value(x) * chi->value(x); });
        CHECK(btq::operator_norm(one * one - two) < 1e-12);
    }
    SUBCASE("cp1 height operator has the exact spectrum") {
        const auto geometry = ModelGeometry::projective_line();
        const int N = 20;
        const auto basis = btq::QuantumBasis::build(geometry, N);
        const auto rule = btq::QuadratureRule::build(basis);
        const auto Th = btq::assemble_expr(
            btq::parse_symbol("(1-z*conj(z))*inv(1+z*conj(z))"), basis, rule);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
            0.5 * (Th.entries + Th.entries.adjoint()));
        for (int k = 0; k <= N; ++k) {
            const double expected = (N - 2.0 * (N - k)) / (N + 2.0); // ascending order
            CHECK(std::abs(eig.eigenvalues()(k) - expected) < 1e-9);
        }
    }
}

TEST_CASE("hypothesis certificates") {
    const auto geometry = ModelGeometry::projective_line();
    const auto grid = btq::make_chart_grid(geometry, 2.0, 21);
    const std::vector<double> Ns = {32, 64};
    const auto m = btq::OrderFunction::constant_one();
    SUBCASE("shifted bump certifies") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("bump(0,1)+2");
        const auto cert = btq::certify_funcalc_hypotheses(f, m, grid, Ns);
        CHECK(cert.ok);
    }
    SUBCASE("negative symbols are refused") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("bump(0,1)-5");
        const auto cert = btq::certify_funcalc_hypotheses(f, m, grid, Ns);
        CHECK_FALSE(cert.ok);
        CHECK_THROWS_AS((void)btq::functional_calculus_symbol(
                            f, RealProfile1D::bump(2.0, 0.5), m, grid, Ns),
                        btq::CertificationError);
    }
    SUBCASE("non-real symbols are refused") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("z");
        CHECK_FALSE(btq::certify_funcalc_hypotheses(f, m, grid, Ns).ok);
    }
    SUBCASE("ellipticity for the parametrix") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("bump(0,1)+2");
        CHECK(btq::certify_parametrix_hypotheses(f, Complex(0, 0), m, grid, Ns).ok);
        // z in the range of f: no ellipticity
        CHECK_FALSE(btq::certify_parametrix_hypotheses(f, Complex(2.5, 0), m, grid, Ns).ok);
    }
}

TEST_CASE("resolvent symbol") {
    const auto geometry = ModelGeometry::bargmann();
    const auto grid = btq::make_chart_grid(geometry, 1.6, 21);
    const std::vector<double> Ns = {64, 256};
    SUBCASE("zero symbol gives 1/z") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("0");
        const auto s1 = btq::resolvent_symbol(f, Complex(0, 2), btq::OrderFunction::constant_one(),
                                              grid, Ns);
        CHECK(std::abs(s1.eval(Complex(0.4, 0.1)) - Complex(0, -0.5)) < 1e-14);
    }
    SUBCASE("unit imaginary part bounds the reciprocal") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("bump(0,1)");
        const auto s1 = btq::resolvent_symbol(f, Complex(0, 1), btq::OrderFunction::constant_one(),
                                              grid, Ns);
        for (const Complex zpt : grid) CHECK(std::abs(s1.eval(zpt)) <= 1.0 + 1e-12);
    }
    SUBCASE("derivative bounds certify for the scaled bump") {
        const auto [f, m] = btq::scale_symbol(btq::parse_symbol("bump(0,1)"), 0.25);
        const auto report =
            btq::verify_resolvent_bounds(f, Complex(2, 1), m, grid, Ns, 3);
        CHECK(report.ok);
        CHECK(report.C_alpha.at({0, 0}) > 0.0);
    }
    SUBCASE("real z without ellipticity is refused") {
        btq::Symbol f;
        f.expr = btq::parse_symbol("bump(0,1)");
        CHECK_THROWS_AS((void)btq::resolvent_symbol(f, Complex(0.5, 0),
                                                    btq::OrderFunction::constant_one(),
                                                    grid, Ns),
                        btq::CertificationError);
    }
}

TEST_CASE("parametrix series") {
    const auto geometry = ModelGeometry::bargmann();
    const auto grid = btq::make_chart_grid(geometry, 1.6, 21);
    const std::vector<double> Ns = {16, 32};
    btq::Symbol f;
    f.expr = btq::parse_symbol("bump(0,1)+2");
    const auto m = btq::OrderFunction::constant_one();
    const auto par = btq::parametrix_symbol(f, Complex(0, 0), 1, geometry, m, grid, Ns);
    REQUIRE(par.right.terms.size() == 2);
    SUBCASE("order zero is the reciprocal") {
        for (const Complex zpt : {Complex(0.2, 0.1), Complex(0.8, -0.3)}) {
            const Complex expect = 1.0 / f.expr.eval(zpt);
            CHECK(std::abs(par.right.terms[0].eval(zpt) - expect) < 1e-13);
            CHECK(std::abs(par.left.terms[0].eval(zpt) - expect) < 1e-13);
        }
    }
    SUBCASE("one-term inverse defect shrinks like 1/N") {
        std::vector<double> residuals;
        for (const int N : {16, 32}) {
            const auto basis = btq::QuantumBasis::build(geometry, N, 1.2);
            const auto rule = btq::QuadratureRule::build(basis);
            const auto Tf = btq::assemble_expr(f.expr, basis, rule);
            const auto Tg = btq::assemble_expr(par.right.terms[0], basis, rule);
            const Eigen::MatrixXcd eye =
                Eigen::MatrixXcd::Identity(basis.dimension(), basis.dimension());
            residuals.push_back(btq::operator_norm(Tf.entries * Tg.entries - eye));
        }
        CHECK(residuals[1] < 0.65 * residuals[0]); // ~ halves per N doubling
    }
    SUBCASE("hypothesis failure refuses construction") {
        CHECK_THROWS_AS((void)btq::parametrix_symbol(f, Complex(2.5, 0), 1, geometry, m,
                                                     grid, Ns),
                        btq::CertificationError);
    }
}

} // TEST_SUITE
