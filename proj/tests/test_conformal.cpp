#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "iforge/conformal.hpp"
#include "support/oracles.hpp"

using namespace iforge;
using testsupport::ex1_map;

TEST_CASE("identity-like map evaluates to w", "[conformal]") {
    ConformalMap m = ConformalMap::disk(1.0);
    CHECK(m.eval(Complex(2.0, 0.0)) == Complex(2.0, 0.0));
    CHECK(m.derivative(Complex(0.3, 1.7)) == Complex(1.0, 0.0));
}

TEST_CASE("series evaluation matches direct substitution", "[conformal]") {
    ConformalMap m = ex1_map();
    CHECK_THAT(m.eval(Complex(1.0, 0.0)).real(), Catch::Matchers::WithinAbs(1.475, 1e-15));
    CHECK_THAT(m.eval(Complex(1.0, 0.0)).imag(), Catch::Matchers::WithinAbs(0.0, 1e-15));

    ConformalMap ell = testsupport::ellipse_map();
    const Complex v = ell.eval(Complex(0.0, 1.0));  // i + 0.5/i = 0.5 i
    CHECK_THAT(v.real(), Catch::Matchers::WithinAbs(0.0, 1e-15));
    CHECK_THAT(v.imag(), Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("derivative matches substitution and finite differences", "[conformal]") {
    ConformalMap ell = testsupport::ellipse_map();
    CHECK_THAT(ell.derivative(Complex(1.0, 0.0)).real(), Catch::Matchers::WithinAbs(0.5, 1e-15));

    ConformalMap m = ex1_map();
    CHECK_THAT(m.derivative(Complex(1.0, 0.0)).real(), Catch::Matchers::WithinAbs(0.2, 1e-14));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> rad(1.0, 3.0), ang(0.0, 2 * kPi);
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
        const Complex w = std::polar(rad(rng), ang(rng));
        const Complex fd = (m.eval(w * (1.0 + h)) - m.eval(w * (1.0 - h))) / (2.0 * h * w);
        REQUIRE_THAT(std::abs(fd - m.derivative(w)), Catch::Matchers::WithinAbs(0.0, 1e-8 * std::abs(m.derivative(w))));
    }
}

TEST_CASE("w = 0 is rejected", "[conformal]") {
    ConformalMap m = ex1_map();
    CHECK_THROWS_AS(m.eval(Complex(0.0, 0.0)), ConfigError);
    CHECK_THROWS_AS(m.derivative(Complex(0.0, 0.0)), ConfigError);
}

TEST_CASE("scale factor", "[conformal]") {
    CHECK_THAT(ConformalMap::disk(1.0).scale_factor(0.0, 1.3), Catch::Matchers::WithinAbs(1.0, 1e-15));
    // disk of radius 2: h = gamma on the boundary
    ConformalMap d2 = ConformalMap::disk(2.0);
    CHECK_THAT(d2.scale_factor(std::log(2.0), 0.7), Catch::Matchers::WithinAbs(2.0, 1e-14));
    // ellipse at theta = 0: |1 - 0.5| = 0.5
    CHECK_THAT(testsupport::ellipse_map().scale_factor(0.0, 0.0), Catch::Matchers::WithinAbs(0.5, 1e-15));
    // identity family: h(rho, theta) = e^rho for every theta
    for (double rho : {0.0, 0.3, 1.0})
        for (double th : {0.1, 2.0, 4.4})
            CHECK_THAT(ConformalMap::disk(1.0).scale_factor(rho, th),
                       Catch::Matchers::WithinAbs(std::exp(rho), 1e-13 * std::exp(rho)));
}

TEST_CASE("point classification", "[conformal]") {
    ConformalMap disk = ConformalMap::disk(1.0);
    CHECK(disk.classify(Complex(0.0, 0.0)) == PointClass::interior);
    CHECK(disk.classify(Complex(3.0, 0.0)) == PointClass::exterior);

    ConformalMap m = ex1_map();
    CHECK(m.classify(m.eval(Complex(2.0, 0.0))) == PointClass::exterior);

    // exterior for all sampled |w| > gamma (1 + 1e-3)
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(0.0, 2 * kPi);
    for (int i = 0; i < 50; ++i) {
        const Complex w = std::polar(1.0 + 1e-3 + 0.2 * i / 50.0, ang(rng));
        REQUIRE(m.classify(m.eval(w)) == PointClass::exterior);
    }

    // interior classification invariant under polyline refinement
    for (int i = 0; i < 20; ++i) {
        const Complex z = std::polar(0.04 * i, ang(rng));
        REQUIRE(m.classify(z, 2048) == m.classify(z, 4096));
    }
}

TEST_CASE("inverse map by Newton iteration", "[conformal]") {
    ConformalMap m = ex1_map();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> rad(1.02, 12.0), ang(0.0, 2 * kPi);
    for (int i = 0; i < 200; ++i) {
        const Complex w = std::polar(rad(rng), ang(rng));
        const Complex z = m.eval(w);
        const Complex wi = m.invert(z);
        REQUIRE_THAT(std::abs(wi - w), Catch::Matchers::WithinAbs(0.0, 1e-9 * std::abs(w)));
    }
}

TEST_CASE("shape JSON round trip and validation", "[conformal]") {
    ConformalMap m = ex1_map();
    ConformalMap back = ConformalMap::from_json(m.to_json());
    CHECK(back.gamma() == m.gamma());
    REQUIRE(back.coeffs().size() == m.coeffs().size());
    for (std::size_t k = 0; k < m.coeffs().size(); ++k) CHECK(back.coeffs()[k] == m.coeffs()[k]);

    CHECK_THROWS_AS(ConformalMap::from_json(nlohmann::json{{"coeffs", {{0.0, 0.0}}}}), ConfigError);
    CHECK_THROWS_AS(ConformalMap(-1.0, {Complex(0, 0)}), ConfigError);
    CHECK_THROWS_AS(ConformalMap(1.0, {}), ConfigError);
}

TEST_CASE("self-intersecting boundary is rejected", "[conformal]") {
    // a_1 far beyond the univalence range folds the boundary over itself
    CHECK_THROWS_AS(ConformalMap(1.0, {Complex(0, 0), Complex(1.8, 0)}), ConfigError);
}
