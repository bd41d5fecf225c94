#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unfold/complex_poly.hpp"

using namespace unfold;

namespace {

ComplexPoly poly(std::initializer_list<cplx> asc) { return ComplexPoly(std::vector<cplx>(asc)); }

const RootCluster* find_root(const std::vector<RootCluster>& rts, cplx r) {
    for (auto& rc : rts)
        if (std::abs(rc.root - r) < 1e-7) return &rc;
    return nullptr;
}

}  // namespace

TEST_CASE("roots: w^2 - 1") {
    auto rts = roots(poly({-1, 0, 1}));
    REQUIRE(rts.size() == 2);
    auto* a = find_root(rts, -1.0);
    auto* b = find_root(rts, 1.0);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->multiplicity == 1);
    CHECK(b->multiplicity == 1);
    CHECK(std::abs(a->root + 1.0) < 1e-12);
    CHECK(std::abs(b->root - 1.0) < 1e-12);
}

TEST_CASE("roots: w^2 repeated") {
    auto rts = roots(poly({0, 0, 1}));
    REQUIRE(rts.size() == 1);
    CHECK(rts[0].multiplicity == 2);
    CHECK(std::abs(rts[0].root) < 1e-8);
}

TEST_CASE("roots: w^3 - 2w^2 + w = w(w-1)^2") {
    // oracle: expand w(w-1)^2 = w^3 - 2w^2 + w
    auto rts = roots(poly({0, 1, -2, 1}));
    REQUIRE(rts.size() == 2);
    auto* a = find_root(rts, 0.0);
    auto* b = find_root(rts, 1.0);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->multiplicity == 1);
    CHECK(b->multiplicity == 2);
}

TEST_CASE("roots: random reconstruction") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        int deg = rng.uniform_int(1, 8);
        std::vector<cplx> c(std::size_t(deg) + 1);
        for (auto& v : c) v = rng.disk(2.0);
        c.back() += 1.0;  // keep the degree
        ComplexPoly p(c);
        if (p.degree() < 1) continue;
        auto rts = roots(p);
        int total = 0;
        std::vector<std::pair<cplx, int>> pairs;
        for (auto& rc : rts) {
            total += rc.multiplicity;
            pairs.push_back({rc.root, rc.multiplicity});
        }
        CHECK(total == p.degree());
        auto rec = ComplexPoly::from_roots(pairs, p.lead());
        CHECK((rec - p).coeff_norm() / p.coeff_norm() < 1e-10);
    }
}

TEST_CASE("residue: w^2 at 0 has no 1/w term") {
    CHECK(std::abs(residue(poly({0, 0, 1}), 0.0, 2)) < 1e-14);
}

TEST_CASE("residue: w(w-1)") {
    // oracle: 1/(w(w-1)) = -1/w + 1/(w-1)
    ComplexPoly p = poly({0, -1, 1});
    CHECK(std::abs(residue(p, 0.0, 1) - cplx(-1)) < 1e-13);
    CHECK(std::abs(residue(p, 1.0, 1) - cplx(1)) < 1e-13);
}

TEST_CASE("residue: multiplicity mismatch is an error") {
    CHECK_THROWS_AS(residue(poly({0, -1, 1}), 0.0, 2), numerical_error);
    CHECK_THROWS_AS(residue(poly({0, 0, 1}), 0.0, 1), numerical_error);
}

TEST_CASE("partial fractions: w^2") {
    auto pf = partial_fractions(poly({0, 0, 1}));
    REQUIRE(pf.size() == 2);
    // 1/w^2: coefficient 1 at order 2, 0 at order 1
    bool seen2 = false;
    for (auto& t : pf) {
        if (t.order == 2) {
            CHECK(std::abs(t.coeff - cplx(1)) < 1e-13);
            seen2 = true;
        } else {
            CHECK(std::abs(t.coeff) < 1e-13);
        }
    }
    CHECK(seen2);
}

TEST_CASE("partial fractions: w(w-1) and w^2(w-1)") {
    auto pf = partial_fractions(poly({0, -1, 1}));
    REQUIRE(pf.size() == 2);
    for (auto& t : pf) {
        if (std::abs(t.root) < 1e-9) CHECK(std::abs(t.coeff - cplx(-1)) < 1e-12);
        else CHECK(std::abs(t.coeff - cplx(1)) < 1e-12);
    }

    // oracle: 1/(w^2(w-1)) = -1/w^2 - 1/w + 1/(w-1)
    auto pf2 = partial_fractions(poly({0, 0, -1, 1}));
    REQUIRE(pf2.size() == 3);
    for (auto& t : pf2) {
        if (std::abs(t.root) < 1e-9 && t.order == 2) CHECK(std::abs(t.coeff + 1.0) < 1e-11);
        if (std::abs(t.root) < 1e-9 && t.order == 1) CHECK(std::abs(t.coeff + 1.0) < 1e-11);
        if (std::abs(t.root - 1.0) < 1e-9) CHECK(std::abs(t.coeff - 1.0) < 1e-11);
    }
}

TEST_CASE("partial fractions: random round trip") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        int deg = rng.uniform_int(2, 8);
        std::vector<cplx> c(std::size_t(deg) + 1);
        for (auto& v : c) v = rng.disk(1.5);
        c.back() += 1.0;
        ComplexPoly p(c);
        if (p.degree() < 2) continue;
        auto pf = partial_fractions(p);
        for (int s = 0; s < 20; ++s) {
            cplx w = rng.disk(3.0);
            if (std::abs(p.eval(w)) < 1e-3) continue;  // keep away from poles
            cplx direct = 1.0 / p.eval(w);
            cplx viaPF = eval_partial_fractions(pf, w);
            CHECK(std::abs(direct - viaPF) < 1e-9 * (1.0 + std::abs(direct)));
        }
    }
}

TEST_CASE("residue sum over all roots vanishes for deg >= 2") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        int deg = rng.uniform_int(2, 8);
        std::vector<cplx> c(std::size_t(deg) + 1);
        for (auto& v : c) v = rng.disk(1.5);
        c.back() += 1.0;
        ComplexPoly p(c);
        if (p.degree() < 2) continue;
        auto rts = roots(p);
        cplx sum = 0;
        for (auto& rc : rts) sum += residue(p, rc.root, rc.multiplicity);
        CHECK(std::abs(sum) < 1e-10);
    }
}

TEST_CASE("taylor_at shifts correctly") {
    ComplexPoly p = poly({1, 2, 3});  // 1 + 2w + 3w^2
    auto t = detail::taylor_at(p, cplx(1.0));
    // p(1+s) = 6 + 8s + 3s^2
    CHECK(std::abs(t[0] - cplx(6)) < 1e-14);
    CHECK(std::abs(t[1] - cplx(8)) < 1e-14);
    CHECK(std::abs(t[2] - cplx(3)) < 1e-14);
}
