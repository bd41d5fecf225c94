#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unfold/biseries.hpp"

using namespace unfold;

namespace {

// Lagrange inversion oracle for a one-variable series f = y + a2 y^2 + ...:
// g_n = (1/n) [w^{n-1}] (w / f(w))^n.
std::vector<cplx> lagrange_inverse_1d(const std::vector<cplx>& f, int order) {
    std::vector<cplx> g(std::size_t(order) + 1, cplx(0));
    if (order >= 1) g[1] = 1;
    for (int n = 2; n <= order; ++n) {
        std::vector<cplx> denom(std::size_t(order) + 1, cplx(0));
        for (int k = 0; k <= order; ++k)
            denom[std::size_t(k)] = (k + 1 < int(f.size())) ? f[std::size_t(k) + 1] : cplx(0);
        std::vector<cplx> inv(std::size_t(order) + 1, cplx(0));
        inv[0] = 1.0 / denom[0];
        for (int k = 1; k <= order; ++k) {
            cplx acc = 0;
            for (int j = 1; j <= k; ++j) acc += denom[std::size_t(j)] * inv[std::size_t(k - j)];
            inv[std::size_t(k)] = -acc / denom[0];
        }
        std::vector<cplx> pw(std::size_t(order) + 1, cplx(0));
        pw[0] = 1;
        for (int rep = 0; rep < n; ++rep) {
            std::vector<cplx> nx(std::size_t(order) + 1, cplx(0));
            for (int a = 0; a <= order; ++a)
                for (int b = 0; a + b <= order; ++b)
                    nx[std::size_t(a + b)] += pw[std::size_t(a)] * inv[std::size_t(b)];
            pw = nx;
        }
        g[std::size_t(n)] = pw[std::size_t(n - 1)] / double(n);
    }
    return g;
}

}  // namespace

TEST_CASE("series_inverse_y: identity") {
    BiSeries f = BiSeries::var_y(10);
    BiSeries g = series_inverse_y(f);
    CHECK((g - BiSeries::var_y(10)).max_abs() == 0.0);
}

TEST_CASE("series_inverse_y: y + y^2 against Lagrange oracle") {
    const int D = 12;
    BiSeries f = BiSeries::var_y(D);
    f.set(0, 2, 1.0);
    BiSeries g = series_inverse_y(f);
    std::vector<cplx> f1d{0, 1, 1};
    auto oracle = lagrange_inverse_1d(f1d, D);
    for (int n = 1; n <= D; ++n)
        CHECK(std::abs(g.get(0, n) - oracle[std::size_t(n)]) <
              1e-10 * (1 + std::abs(oracle[std::size_t(n)])));
    // leading terms y - y^2 + 2y^3 - 5y^4 + 14 y^5
    CHECK(std::abs(g.get(0, 2) + 1.0) < 1e-12);
    CHECK(std::abs(g.get(0, 3) - 2.0) < 1e-12);
    CHECK(std::abs(g.get(0, 4) + 5.0) < 1e-12);
    CHECK(std::abs(g.get(0, 5) - 14.0) < 1e-12);
}

TEST_CASE("series_inverse_y: y + xy equals y/(1+x)") {
    const int D = 10;
    BiSeries f = BiSeries::var_y(D);
    f.set(1, 1, 1.0);
    BiSeries g = series_inverse_y(f);
    for (int k = 0; k + 1 <= D; ++k) {
        double expect = (k % 2 == 0) ? 1.0 : -1.0;  // y (-x)^k
        CHECK(std::abs(g.get(k, 1) - expect) < 1e-12);
    }
    CHECK(std::abs(g.get(0, 2)) < 1e-14);
}

TEST_CASE("series_inverse_y is an involution mod D") {
    Rng rng(3);
    const int D = 9;
    for (int trial = 0; trial < 10; ++trial) {
        BiSeries f = BiSeries::var_y(D);
        for (int i = 0; i <= D; ++i)
            for (int j = (i == 0 ? 2 : 1); i + j <= D; ++j) f.set(i, j, 0.3 * rng.disk());
        BiSeries g = series_inverse_y(f);
        BiSeries back = series_inverse_y(g);
        CHECK((back - f).max_abs() < 1e-9 * (1 + f.max_abs()));
        BiSeries comp = f.substitute_y(g);
        CHECK((comp - BiSeries::var_y(D)).max_abs() < 1e-9);
    }
}

TEST_CASE("exp_field_apply: flow of y^2 d/dy is y/(1-y)") {
    const int D = 14;
    BiSeries g(D);
    g.set(0, 2, 1.0);
    BiSeries flow = exp_field_apply(g);
    for (int n = 1; n <= D; ++n) CHECK(std::abs(flow.get(0, n) - 1.0) < 1e-10);
    for (int i = 1; i <= D; ++i)
        for (int j = 0; i + j <= D; ++j) CHECK(std::abs(flow.get(i, j)) < 1e-12);
}

TEST_CASE("infinitesimal generator closes under re-exponentiation") {
    const int D = 12;
    BiSeries f(D);
    f.set(0, 2, 1.0);
    f.set(0, 3, 1.0);  // map y -> y + y^2 + y^3
    BiSeries g = infinitesimal_generator_series(f);
    BiSeries rebuilt = exp_field_apply(g) - BiSeries::var_y(D);
    CHECK((rebuilt - f).max_abs() < 1e-10);
    CHECK(std::abs(g.get(0, 2) - 1.0) < 1e-12);
    // x^0 slice equals the 1-d generator of the restriction
    BiSeries fx(D);
    fx.set(0, 2, 1.0);
    fx.set(0, 3, 1.0);
    BiSeries gx = infinitesimal_generator_series(fx);
    for (int j = 0; j <= D; ++j) CHECK(std::abs(g.get(0, j) - gx.get(0, j)) < 1e-12);
}

TEST_CASE("infinitesimal generator of a flow is the field") {
    const int D = 12;
    BiSeries g0(D);
    g0.set(0, 2, 1.0);
    g0.set(1, 2, -0.5);
    BiSeries f = exp_field_apply(g0) - BiSeries::var_y(D);
    BiSeries g = infinitesimal_generator_series(f);
    CHECK((g - g0).max_abs() < 1e-10);
}

TEST_CASE("divide_by_y_monic round trip") {
    Rng rng(5);
    const int D = 10;
    // P = y^2 - x y  (monic, lower coefficients vanish at x=0)
    BiSeries P(D);
    P.set(0, 2, 1.0);
    P.set(1, 1, -1.0);
    BiSeries f(D);
    for (int i = 0; i <= D; ++i)
        for (int j = 0; i + j <= D; ++j) f.set(i, j, rng.disk());
    auto [q, r] = divide_by_y_monic(f, P, 2);
    for (int i = 0; i <= D; ++i)
        for (int j = 2; i + j <= D; ++j) CHECK(std::abs(r.get(i, j)) < 1e-12);
    BiSeries rec = q * P + r;
    CHECK((rec - f).max_abs() < 1e-9);
}

TEST_CASE("unit inverse") {
    const int D = 8;
    BiSeries u = BiSeries::constant(D, 2.0);
    u.set(1, 0, 0.3);
    u.set(0, 1, -0.1);
    u.set(1, 1, 0.05);
    BiSeries v = u.unit_inverse();
    BiSeries prod = u * v;
    CHECK(std::abs(prod.get(0, 0) - 1.0) < 1e-12);
    prod.set(0, 0, 0.0);
    CHECK(prod.max_abs() < 1e-12);
}

TEST_CASE("substitute_y requires vanishing constant term") {
    BiSeries f = BiSeries::var_y(5);
    BiSeries g = BiSeries::constant(5, 1.0);
    CHECK_THROWS_AS(f.substitute_y(g), numerical_error);
}
