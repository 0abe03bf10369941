#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "btq/errors.hpp"
#include "btq/quantum.hpp"

using btq::Complex;
using btq::ModelGeometry;
using btq::QuadratureRule;
using btq::QuantumBasis;

namespace {
const double kPi = M_PI;

// Gamma/Beta closed forms recomputed here, independent of the basis path.
double bargmann_norm(int k, int N) {
    return 2.0 * kPi * std::exp(std::lgamma(k + 1.0) - (k + 1.0) * std::log(double(N)));
}
double cp1_norm(int k, int N) {
    return 2.0 * kPi *
           std::exp(std::lgamma(k + 1.0) + std::lgamma(N - k + 1.0) - std::lgamma(N + 2.0));
}
} // namespace

TEST_SUITE("quantum") {

TEST_CASE("monomial norms from closed forms") {
    const auto plane = QuantumBasis::build(ModelGeometry::bargmann(), 4, 1.0);
    CHECK(plane.squared_norm(2) == doctest::Approx(kPi / 16.0).epsilon(1e-13));
    const auto sphere = QuantumBasis::build(ModelGeometry::projective_line(), 2);
    CHECK(sphere.dimension() == 3);
    CHECK(sphere.squared_norm(1) == doctest::Approx(kPi / 3.0).epsilon(1e-13));
    for (int k = 0; k < plane.dimension(); ++k)
        CHECK(plane.squared_norm(k) ==
              doctest::Approx(bargmann_norm(k, 4)).epsilon(1e-12));
    for (int k = 0; k < sphere.dimension(); ++k)
        CHECK(sphere.squared_norm(k) == doctest::Approx(cp1_norm(k, 2)).epsilon(1e-12));
}

TEST_CASE("dimension rules and caps") {
    const auto sphere = QuantumBasis::build(ModelGeometry::projective_line(), 31);
    CHECK(sphere.dimension() == 32);
    const auto plane = QuantumBasis::build(ModelGeometry::bargmann(), 10, 1.0);
    CHECK(plane.dimension() == 2 * 10 + 16);
    CHECK_THROWS_AS(QuantumBasis::build(ModelGeometry::bargmann(), 2000, 1.0, 2048),
                    btq::DimensionError);
}

TEST_CASE("quadrature reproduces norms and the total mass") {
    for (int N : {10, 40}) {
        const auto basis = QuantumBasis::build(ModelGeometry::bargmann(), N, 1.0);
        const auto rule = QuadratureRule::build(basis);
        CHECK(rule.certification().converged);
        CHECK(rule.certification().max_norm_rel_err < 1e-10);
        CHECK(rule.certification().total_mass_rel_err < 1e-9);
        CHECK(std::abs(rule.total_mass() - 2.0 * kPi / N) < 1e-9 * (2.0 * kPi / N));
    }
    const auto basis = QuantumBasis::build(ModelGeometry::projective_line(), 20);
    const auto rule = QuadratureRule::build(basis);
    CHECK(rule.certification().max_norm_rel_err < 1e-10);
    CHECK(std::abs(rule.total_mass() - 2.0 * kPi / 21.0) < 1e-9);
    // plain-measure weights integrate the volume: sum = 2 pi
    double plain = 0.0;
    for (int i = 0; i < rule.radial_count(); ++i)
        plain += std::exp(rule.log_plain_radial_weight(i));
    CHECK(std::abs(plain * 2.0 * kPi - 2.0 * kPi) < 1e-9);
}

TEST_CASE("under-resolved angular direction raises the aliasing diagnostic") {
    const auto basis = QuantumBasis::build(ModelGeometry::projective_line(), 20);
    const auto rule = QuadratureRule::build(basis, 0, 8);
    CHECK(rule.certification().aliasing_risk);
    CHECK(rule.certification().worst_aliased_gram > 1e-3); // orthogonality broken
    const auto fine = QuadratureRule::build(basis);
    CHECK_FALSE(fine.certification().aliasing_risk);
}

TEST_CASE("kernel values at the origin") {
    const auto plane = QuantumBasis::build(ModelGeometry::bargmann(), 8, 1.0);
    CHECK(plane.kernel_closed_form(Complex(0, 0), Complex(0, 0)).real() ==
          doctest::Approx(4.0 / kPi).epsilon(1e-14));
    const auto sphere = QuantumBasis::build(ModelGeometry::projective_line(), 3);
    CHECK(sphere.kernel_closed_form(Complex(0, 0), Complex(0, 0)).real() ==
          doctest::Approx(2.0 / kPi).epsilon(1e-14));
}

TEST_CASE("basis sum agrees with the closed forms at random pairs") {
    // angles restricted so Re(x conj y) >= 0: the comparison is then free of
    // catastrophic cancellation in the binomial/exponential sums
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uangle(-kPi / 4.0, kPi / 4.0);
    std::uniform_real_distribution<double> uradius(0.0, 1.1);
    const auto plane = QuantumBasis::build(ModelGeometry::bargmann(), 12, 1.3);
    const auto sphere = QuantumBasis::build(ModelGeometry::projective_line(), 24);
    for (int i = 0; i < 50; ++i) {
        const Complex x = std::polar(uradius(rng), uangle(rng));
        const Complex yc = std::polar(uradius(rng), uangle(rng));
        REQUIRE(plane.truncation_tail_ok(x, yc));
        const Complex a = plane.kernel_basis_sum(x, yc);
        const Complex b = plane.kernel_closed_form(x, yc);
        CHECK(std::abs(a - b) / std::abs(b) < 1e-10);
        const Complex c = sphere.kernel_basis_sum(x, yc);
        const Complex d = sphere.kernel_closed_form(x, yc);
        CHECK(std::abs(c - d) / std::abs(d) < 1e-10);
    }
}

TEST_CASE("cp1 amplitude identity: 1 + 1/N exactly") {
    const auto sphere = QuantumBasis::build(ModelGeometry::projective_line(), 16);
    const auto geometry = sphere.geometry();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uangle(-kPi / 4.0, kPi / 4.0);
    std::uniform_real_distribution<double> uradius(0.0, 0.7);
    for (int i = 0; i < 24; ++i) {
        const Complex x = std::polar(uradius(rng), uangle(rng));
        const Complex yc = std::polar(uradius(rng), uangle(rng));
        const Complex amp = sphere.kernel_basis_sum(x, yc) * (2.0 * kPi / 16.0) *
                            std::exp(-16.0 * geometry.extension(x, yc));
        CHECK(std::abs(amp - Complex(17.0 / 16.0)) < 1e-12);
    }
}

TEST_CASE("truncation tail detector") {
    const auto plane = QuantumBasis::build(ModelGeometry::bargmann(), 16, 1.0);
    CHECK(plane.truncation_tail_ok(Complex(0.5, 0), Complex(0.5, 0)));
    CHECK_FALSE(plane.truncation_tail_ok(Complex(2, 0), Complex(2, 0)));
    const auto sphere = QuantumBasis::build(ModelGeometry::projective_line(), 16);
    CHECK(sphere.truncation_tail_ok(Complex(3, 0), Complex(3, 0)));
}

TEST_CASE("reproducing identities through the quadrature") {
    std::vector<std::pair<Complex, Complex>> pairs = {
        {Complex(0.1, 0.2), Complex(0.1, 0.2)},
        {Complex(0.3, 0.0), Complex(0.2, 0.1)},
        {Complex(-0.2, 0.2), Complex(0.0, -0.3)},
    };
    for (const auto& geometry :
         {ModelGeometry::bargmann(), ModelGeometry::projective_line()}) {
        const auto basis = QuantumBasis::build(geometry, 24, 1.0);
        const auto rule = QuadratureRule::build(basis);
        const auto report = verify_reproducing(basis, rule, pairs);
        CHECK(report.max_gram_diag_err < 1e-10);
        CHECK(report.max_gram_offdiag < 1e-10);
        CHECK(report.max_idempotence_rel_err < 1e-8);
    }
}

TEST_CASE("weighted kernel is Gaussian on the plane") {
    const auto plane = QuantumBasis::build(ModelGeometry::bargmann(), 32, 1.0);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (int i = 0; i < 20; ++i) {
        const Complex x(u(rng), u(rng)), y(u(rng), u(rng));
        // independent route: truncated basis sum with the gauge weight
        const Complex via_sum =
            plane.kernel_basis_sum(x, std::conj(y)) *
            std::exp(-16.0 * (std::norm(x) + std::norm(y))); // (N/2)=16
        const double expected = (32.0 / (2.0 * kPi)) * std::exp(-16.0 * std::norm(x - y));
        CHECK(std::abs(std::abs(via_sum) - expected) < 1e-9 * expected + 1e-12);
        CHECK(std::abs(plane.weighted_kernel(x, std::conj(y))) ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    // diagonal value
    CHECK(std::abs(plane.weighted_kernel(Complex(0.4, 0.1), std::conj(Complex(0.4, 0.1)))) ==
          doctest::Approx(32.0 / (2.0 * kPi)).epsilon(1e-13));
}

TEST_CASE("off-diagonal decay bound fits with positive rate") {
    for (const auto& geometry :
         {ModelGeometry::bargmann(), ModelGeometry::projective_line()}) {
        for (int N : {16, 32, 64}) {
            const auto basis = QuantumBasis::build(geometry, N, 1.0);
            std::vector<std::pair<Complex, Complex>> pairs;
            for (int i = 0; i < 12; ++i) {
                const Complex x = std::polar(0.25, 0.5 * i);
                pairs.emplace_back(x, x + std::polar(0.05 + 0.045 * i, 1.1 * i));
            }
            pairs.emplace_back(Complex(0.2, 0), Complex(0.2, 0));
            const auto report = verify_offdiagonal_decay(basis, pairs);
            CHECK(report.c > 0.0);
            CHECK(report.C > 0.0);
            if (geometry.id() == btq::ModelId::bargmann_plane)
                CHECK(report.gaussian_slope == doctest::Approx(-0.5).epsilon(1e-9));
            else
                CHECK(report.gaussian_slope < -0.05);
        }
    }
}

TEST_CASE("weighted kernel is uniformly small past a fixed separation") {
    for (const auto& geometry :
         {ModelGeometry::bargmann(), ModelGeometry::projective_line()}) {
        const auto basis = QuantumBasis::build(geometry, 64, 1.0);
        double worst = 0.0;
        for (int i = 0; i < 16; ++i) {
            const Complex x = std::polar(0.2, 0.4 * i);
            const Complex y = x + std::polar(0.5 + 0.05 * i, 0.7 * i);
            worst = std::max(worst,
                             std::abs(basis.weighted_kernel(x, std::conj(y))) /
                                 (64.0 / (2.0 * kPi)));
        }
        // the cp1 Gaussian rate carries the (1+|x|^2)(1+|y|^2) denominator, so
        // its far field is an order larger than the flat model at the same gap
        CHECK(worst < (geometry.id() == btq::ModelId::bargmann_plane ? 1e-3 : 1e-2));
    }
}

} // TEST_SUITE
