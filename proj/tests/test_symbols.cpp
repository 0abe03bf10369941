#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "btq/errors.hpp"
#include "btq/symbols.hpp"

using btq::Complex;
using btq::OrderFunction;
using btq::SymbolExpr;

namespace {

// numeric Wirtinger derivatives as the independent cross-check
using Field = std::function<Complex(Complex)>;

Field fd_dz(const Field& f, double h) {
    return [f, h](Complex z) {
        return ((f(z + Complex(h, 0)) - f(z - Complex(h, 0))) -
                Complex(0, 1) * (f(z + Complex(0, h)) - f(z - Complex(0, h)))) /
               (4.0 * h);
    };
}

Field fd_dzbar(const Field& f, double h) {
    return [f, h](Complex z) {
        return ((f(z + Complex(h, 0)) - f(z - Complex(h, 0))) +
                Complex(0, 1) * (f(z + Complex(0, h)) - f(z - Complex(0, h)))) /
               (4.0 * h);
    };
}

SymbolExpr random_tree(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 3 : 8);
    std::uniform_real_distribution<double> uc(-2.0, 2.0);
    switch (pick(rng)) {
        case 0: return SymbolExpr::constant(uc(rng));
        case 1: return SymbolExpr::z();
        case 2: return SymbolExpr::conj_z();
        case 3: return SymbolExpr::bump(Complex(0.25 * std::round(uc(rng)), 0), 1.0 + 0.5 * std::abs(uc(rng)));
        case 4: return random_tree(rng, depth - 1) + random_tree(rng, depth - 1);
        case 5: return random_tree(rng, depth - 1) * random_tree(rng, depth - 1);
        case 6: return -random_tree(rng, depth - 1);
        case 7: return SymbolExpr::pow_of(random_tree(rng, depth - 1), 2);
        default: return SymbolExpr::exp_of(SymbolExpr::constant(0.2) * random_tree(rng, depth - 1));
    }
}

} // namespace

TEST_SUITE("symbols") {

TEST_CASE("parser basics") {
    const auto t = btq::parse_symbol("z*conj(z)");
    CHECK(t.structurally_equal(SymbolExpr::z() * SymbolExpr::conj_z()));
    CHECK(t.eval(Complex(0.3, -0.4)).real() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(t.eval(Complex(0.3, -0.4)).imag() == 0.0);

    const auto b = btq::parse_symbol("bump(0,2)");
    CHECK(b.support_radius() == 2.0);
    CHECK(b.eval(Complex(0, 0)) == Complex(1.0));
    CHECK(b.eval(Complex(2.5, 0)) == Complex(0.0));
    CHECK(std::abs(b.eval(Complex(1.0, 0))) > 0.0);
}

TEST_CASE("parser rejects malformed input with offsets") {
    try {
        (void)btq::parse_symbol("z**");
        FAIL("expected a parse error");
    } catch (const btq::ParseError& e) {
        CHECK(e.offset == 2);
    }
    CHECK_THROWS_AS((void)btq::parse_symbol("w+1"), btq::ParseError);
    CHECK_THROWS_AS((void)btq::parse_symbol("bump(0)"), btq::ParseError);
    CHECK_THROWS_AS((void)btq::parse_symbol("z^-2"), btq::ParseError);
    CHECK_THROWS_AS((void)btq::parse_symbol("exp(z"), btq::ParseError);
}

TEST_CASE("print/parse round trip on generated trees") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const SymbolExpr t = random_tree(rng, 3);
        const SymbolExpr back = btq::parse_symbol(t.print());
        CHECK(back.structurally_equal(t));
    }
}

TEST_CASE("exact derivatives: simple closed forms") {
    const auto zz = btq::parse_symbol("z*conj(z)");
    const auto one = btq::differentiate(zz, 1, 1);
    CHECK(one.structurally_equal(SymbolExpr::constant(1.0)));

    // d(z^2 conj z) = 2 z conj z
    const auto t = btq::parse_symbol("z^2*conj(z)");
    const auto dt = t.d_z();
    for (int i = 0; i < 6; ++i) {
        const Complex z = std::polar(0.4 + 0.2 * i, 1.1 * i);
        CHECK(std::abs(dt.eval(z) - 2.0 * z * std::conj(z)) < 1e-14);
    }
}

TEST_CASE("derivatives agree with central differences") {
    const std::vector<std::string> cases = {
        "exp(-z*conj(z))", "bump(0,1.5)", "z^3+conj(z)^2*z", "exp(0.3*(z+conj(z)))"};
    for (const auto& text : cases) {
        const SymbolExpr f = btq::parse_symbol(text);
        const Field base = [&](Complex z) { return f.eval(z); };
        // first order at the advertised step
        const SymbolExpr first = f.d_z();
        const Field num1 = fd_dz(base, 1e-4);
        // third order needs a wider step to stay above the stencil noise floor
        const SymbolExpr third = btq::differentiate(f, 2, 1);
        const Field num3 = fd_dz(fd_dz(fd_dzbar(base, 4e-4), 4e-4), 4e-4);
        for (const Complex z : {Complex(0.3, 0.2), Complex(-0.5, 0.1), Complex(0.2, -0.6)}) {
            const double s1 = std::max(1.0, std::abs(first.eval(z)));
            CHECK(std::abs(first.eval(z) - num1(z)) / s1 < 1e-6);
            const double s3 = std::max(1.0, std::abs(third.eval(z)));
            CHECK(std::abs(third.eval(z) - num3(z)) / s3 < 1e-6);
        }
    }
}

TEST_CASE("differentiate is linear and satisfies the product rule") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const SymbolExpr f = random_tree(rng, 2);
        const SymbolExpr g = random_tree(rng, 2);
        const SymbolExpr sum_rule = (f + g).d_z();
        const SymbolExpr prod_rule = (f * g).d_zbar();
        for (int i = 0; i < 4; ++i) {
            const Complex z = std::polar(0.2 + 0.15 * i, 0.9 * i + 0.1 * trial);
            const Complex lin = f.d_z().eval(z) + g.d_z().eval(z);
            CHECK(std::abs(sum_rule.eval(z) - lin) <=
                  1e-12 * std::max(1.0, std::abs(lin)));
            const Complex leib = f.d_zbar().eval(z) * g.eval(z) + f.eval(z) * g.d_zbar().eval(z);
            CHECK(std::abs(prod_rule.eval(z) - leib) <=
                  1e-11 * std::max(1.0, std::abs(leib)));
        }
    }
}

TEST_CASE("bump profile derivative cap") {
    SymbolExpr b = SymbolExpr::bump(Complex(0, 0), 1.0, 3);
    b = b.d_z().d_zbar().d_z(); // order 3 reached
    CHECK_THROWS_AS((void)b.d_z(), btq::DerivativeOrderError);
}

TEST_CASE("conjugation symmetry is structural") {
    CHECK(btq::parse_symbol("z*conj(z)").is_conjugation_symmetric());
    CHECK(btq::parse_symbol("z+conj(z)").is_conjugation_symmetric());
    CHECK(btq::parse_symbol("bump(0.5,1)+2").is_conjugation_symmetric());
    CHECK_FALSE(btq::parse_symbol("z").is_conjugation_symmetric());
    CHECK_FALSE(btq::parse_symbol("z*z").is_conjugation_symmetric());
}

TEST_CASE("support radius and oracle-grade detection") {
    CHECK(btq::parse_symbol("bump(1,0.5)").support_radius() == doctest::Approx(1.5));
    CHECK(btq::parse_symbol("bump(0,1)*(z+conj(z))").support_radius() == doctest::Approx(1.0));
    CHECK(std::isinf(btq::parse_symbol("z*conj(z)").support_radius()));
    CHECK(std::isinf(btq::parse_symbol("bump(0,1)+2").support_radius()));
}

TEST_CASE("scale_symbol produces the canonical pair") {
    const auto bump = btq::parse_symbol("bump(0,1)");
    SUBCASE("delta = 0 collapse") {
        const auto [f, m] = btq::scale_symbol(bump, 0.0);
        CHECK(f.power == 0.0);
        CHECK(m.value(Complex(0, 0), 1000.0) == doctest::Approx(2.0)); // bump(0)=1 -> 1+1
    }
    SUBCASE("delta = 0.25 at N = 100") {
        const auto [f, m] = btq::scale_symbol(bump, 0.25);
        CHECK(f.power == doctest::Approx(0.25));
        CHECK(m.value(Complex(0, 0), 100.0) == doctest::Approx(11.0).epsilon(1e-12));
    }
    SUBCASE("negative seed is rejected") {
        CHECK_THROWS_AS(btq::scale_symbol(btq::parse_symbol("bump(0,1)-1"), 0.1), btq::Error);
    }
    SUBCASE("delta out of range") {
        CHECK_THROWS_AS(btq::scale_symbol(bump, 0.5), btq::Error);
        CHECK_THROWS_AS(btq::scale_symbol(bump, -0.1), btq::Error);
    }
}

TEST_CASE("order function certification") {
    const auto geometry = btq::ModelGeometry::bargmann();
    const auto grid = btq::make_chart_grid(geometry, 1.6, 17);
    std::vector<std::pair<Complex, Complex>> pairs;
    for (std::size_t i = 0; i < grid.size(); i += 7)
        for (std::size_t j = 3; j < grid.size(); j += 11) pairs.emplace_back(grid[i], grid[j]);
    const std::vector<double> Ns = {64, 128, 256, 512};

    SUBCASE("constant weight certifies at (1, 0)") {
        const auto cert =
            btq::check_order_function(OrderFunction::constant_one(), geometry, Ns, pairs);
        REQUIRE(cert.certified);
        CHECK(cert.M0 == 0);
        CHECK(cert.C == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("scaled bump certifies with exponent 2") {
        const auto m =
            OrderFunction::scaled_plus_one(btq::parse_symbol("bump(0,1)"), 0.25);
        const auto cert = btq::check_order_function(m, geometry, Ns, pairs);
        REQUIRE(cert.certified);
        CHECK(cert.M0 == 2);
    }
    SUBCASE("exponential weight violates every exponent") {
        OrderFunction m;
        m.delta = 0.25;
        m.value = [](Complex zpt, double N) { return std::exp(N * zpt.real()); };
        m.description = "exp(N Re z)";
        const auto cert = btq::check_order_function(m, geometry, Ns, pairs);
        CHECK_FALSE(cert.certified);
        CHECK(cert.witness_ratio > 1.0);
    }
}

TEST_CASE("symbol class certification") {
    const auto geometry = btq::ModelGeometry::bargmann();
    const auto grid = btq::make_chart_grid(geometry, 1.6, 21);
    const std::vector<double> Ns = {64, 128, 256};
    const auto bump = btq::parse_symbol("bump(0,1)");

    SUBCASE("constant symbol against the unit weight") {
        btq::Symbol f;
        f.expr = SymbolExpr::constant(3.0);
        const auto cert = btq::check_symbol_class(f, OrderFunction::constant_one(),
                                                  geometry, Ns, 4, grid);
        REQUIRE(cert.certified);
        CHECK(cert.C_alpha.at({0, 0}) == doctest::Approx(3.0));
        CHECK(cert.C_alpha.at({1, 1}) < 1e-12);
    }
    SUBCASE("N^delta bump sits in its canonical class") {
        const auto [f, m] = btq::scale_symbol(bump, 0.25);
        const auto cert = btq::check_symbol_class(f, m, geometry, Ns, 4, grid);
        CHECK(cert.certified);
    }
    SUBCASE("N bump violates at order zero") {
        const auto [f0, m] = btq::scale_symbol(bump, 0.25);
        btq::Symbol f = f0;
        f.power = 1.0; // N * bump grows past N^{2 delta} bump + 1
        const auto cert = btq::check_symbol_class(f, m, geometry, Ns, 4, grid);
        CHECK_FALSE(cert.certified);
        CHECK(cert.violation_alpha == std::pair<int, int>{0, 0});
        CHECK(cert.violation_growth > 1.1);
    }
}

TEST_CASE("rescaled family has N-uniform bounds") {
    // g_N(x) = f(N^{-delta} x) measured against m(N^{-delta} x)
    const double delta = 0.25;
    const auto [f, m] = btq::scale_symbol(btq::parse_symbol("bump(0,1)"), delta);
    const auto geometry = btq::ModelGeometry::bargmann();
    const auto grid = btq::make_chart_grid(geometry, 1.4, 21);
    std::vector<double> worst;
    for (const double N : {64.0, 256.0, 1024.0}) {
        const double shrink = std::pow(N, -delta);
        double w = 0.0;
        for (int a = 0; a <= 2; ++a) {
            for (int b = 0; a + b <= 2; ++b) {
                const auto deriv = btq::differentiate(f.expr, a, b);
                const double scale = std::pow(N, f.power) * std::pow(N, -delta * (a + b));
                for (const Complex zpt : grid) {
                    const Complex arg = shrink * zpt;
                    w = std::max(w, scale * std::abs(deriv.eval(arg)) / m.value(arg, N));
                }
            }
        }
        worst.push_back(w);
    }
    CHECK(worst[2] <= 1.1 * std::max(worst[0], worst[1]));
}

TEST_CASE("bump dilation") {
    const auto f = btq::parse_symbol("bump(0,1)*(z+conj(z))");
    const auto g = btq::dilate_bump_radii(f, 0.5);
    CHECK(g.support_radius() == doctest::Approx(0.5));
    CHECK(std::abs(g.eval(Complex(0.2, 0)) - f.eval(Complex(0.4, 0)) * 0.5) < 1e-12);
}

TEST_CASE("polarized evaluation") {
    // polynomial trees polarize exactly: z -> x, conj(z) -> y_conj
    const auto t = btq::parse_symbol("z^2*conj(z)+conj(z)");
    const Complex x(0.3, 0.7), yc(-0.2, 0.4);
    CHECK(std::abs(t.eval_polarized(x, yc) - (x * x * yc + yc)) < 1e-14);
    // diagonal polarization is plain evaluation
    const Complex z(0.5, -0.2);
    CHECK(std::abs(t.eval_polarized(z, std::conj(z)) - t.eval(z)) < 1e-14);
    // bump factors read the midpoint
    const auto b = btq::parse_symbol("bump(0,1)");
    const Complex mid = 0.5 * (x + std::conj(yc));
    CHECK(b.eval_polarized(x, yc) == b.eval(mid));
}

} // TEST_SUITE
