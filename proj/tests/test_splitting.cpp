#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unfold/samples.hpp"
#include "unfold/splitting.hpp"

using namespace unfold;

namespace {

bool poly_close(const ComplexPoly& a, const ComplexPoly& b, double tol = 1e-11) {
    return (a - b).coeff_norm() <= tol * (1 + std::max(a.coeff_norm(), b.coeff_norm()));
}

void walk(const SplitNode& n, const std::function<void(const SplitNode&)>& f) {
    f(n);
    for (auto& c : n.children) walk(c, f);
}

}  // namespace

TEST_CASE("cascade example: exponents and polynomial fields") {
    auto tree = build_splitting(samples::cascade());
    const SplitNode& root = tree.root;
    CHECK(root.e == 0);
    CHECK(root.nu == 2);
    REQUIRE(!root.terminal);
    CHECK(root.iota() == 2);
    CHECK(root.compact_e() == 2);

    // X_0(lambda=1) = w^2 (w - 1)
    ComplexPoly expect0({0, 0, -1, 1});  // w^2(w-1) = -w^2 + w^3
    CHECK(poly_close(root.poly_field(1.0), expect0));
    // lambda scaling: coefficients scale by lambda^{e(C)}
    cplx lam = unit(0.7);
    CHECK(poly_close(root.poly_field(lam), std::pow(lam, 2) * expect0));

    REQUIRE(root.children.size() == 2);
    const SplitNode& child0 = root.children[0];  // slope 0
    const SplitNode& child1 = root.children[1];  // slope 1
    CHECK(child0.e == 2);
    CHECK(child1.e == 2);
    CHECK(child1.terminal);
    CHECK(child1.nu == 0);
    REQUIRE(!child0.terminal);
    CHECK(child0.nu == 1);
    CHECK(child0.iota() == 3);
    CHECK(child0.compact_e() == 3);
    // X_00(lambda) = -lambda^3 w'(w'-1)
    ComplexPoly expect00 = cplx(-1.0) * ComplexPoly({0, -1, 1});
    CHECK(poly_close(child0.poly_field(1.0), expect00));

    REQUIRE(child0.children.size() == 2);
    CHECK(child0.children[0].terminal);
    CHECK(child0.children[1].terminal);
    CHECK(child0.children[0].e == 3);
    CHECK(child0.children[1].e == 3);

    CHECK(tree.compact_nodes.size() == 2);
}

TEST_CASE("quadratic: single terminal node") {
    auto tree = build_splitting(samples::quadratic());
    CHECK(tree.root.terminal);
    CHECK(tree.root.nu == 1);
    CHECK(tree.root.e == 0);
    CHECK(tree.root.iota() == 0);
    CHECK(tree.compact_nodes.empty());
}

TEST_CASE("gate: one split, polynomial field w(w-1)") {
    auto tree = build_splitting(samples::gate());
    const SplitNode& root = tree.root;
    REQUIRE(!root.terminal);
    CHECK(root.e == 0);
    CHECK(root.nu == 1);
    CHECK(root.compact_e() == 1);
    CHECK(poly_close(root.poly_field(1.0), ComplexPoly({0, -1, 1})));
    REQUIRE(root.children.size() == 2);
    CHECK(root.children[0].terminal);
    CHECK(root.children[1].terminal);
}

TEST_CASE("exponent ladder along root-to-leaf paths") {
    auto tree = build_splitting(samples::cascade());
    std::function<void(const SplitNode&)> rec = [&](const SplitNode& n) {
        if (!n.terminal) {
            for (auto& c : n.children) {
                CHECK(c.e == n.e + n.nu);  // strict increase by nu at each split
                CHECK(c.e >= n.e);
                rec(c);
            }
        }
    };
    rec(tree.root);
}

TEST_CASE("poly_field degree and roots") {
    auto tree = build_splitting(samples::cascade());
    for (auto* c : tree.compact_nodes) {
        ComplexPoly p = c->poly_field(1.0);
        CHECK(p.degree() == c->nu + 1);
        auto rts = roots(p);
        REQUIRE(rts.size() == c->slopes.size());
        for (std::size_t k = 0; k < rts.size(); ++k) {
            bool matched = false;
            for (std::size_t m = 0; m < c->slopes.size(); ++m)
                if (std::abs(rts[k].root - c->slopes[m]) < 1e-8 &&
                    rts[k].multiplicity == c->slope_mults[m])
                    matched = true;
            CHECK(matched);
        }
    }
}

TEST_CASE("locate: basic membership") {
    auto tree = build_splitting(samples::cascade());
    double eps = tree.config.epsilon;

    // x = 0 slice belongs to the root exterior
    auto loc = locate(tree, 0.0, eps / 2);
    CHECK(loc.node == &tree.root);
    CHECK(loc.kind == BasicSetKind::exterior);

    // |w| = rho/2, outside the child disks -> compact-like C_0
    cplx x = 0.004;
    cplx w_test = tree.root.rho / 2.0;
    auto loc2 = locate(tree, x, x * w_test);
    CHECK(loc2.node == &tree.root);
    CHECK(loc2.kind == BasicSetKind::compact_like);
    CHECK(std::abs(loc2.adapted - w_test) < 1e-12);

    // w near slope 1 within the child radius -> child seed (terminal exterior)
    double eta01 = tree.root.children[1].eta;
    auto loc3 = locate(tree, x, x * (1.0 + eta01 / 2));
    CHECK(loc3.node == &tree.root.children[1]);
    CHECK(loc3.kind == BasicSetKind::exterior);
}

TEST_CASE("locate: partition property on random samples") {
    auto tree = build_splitting(samples::cascade());
    Rng rng(99);
    double delta = tree.recommended_delta;
    int off_sing = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        cplx x = rng.disk(delta);
        if (std::abs(x) < 1e-6) continue;
        cplx y = rng.disk(tree.config.epsilon);
        // skip points on the singular set
        bool sing = false;
        for (auto& c : samples::cascade().curves.curves)
            if (std::abs(y - c.gamma.eval(x)) < 1e-10) sing = true;
        if (sing) continue;
        ++off_sing;
        auto loc = locate(tree, x, y);  // never throws off Sing X: total cover
        CHECK(loc.node != nullptr);
        // membership is reproducible (pure function)
        auto loc2 = locate(tree, x, y);
        CHECK(loc.node == loc2.node);
        CHECK(loc.kind == loc2.kind);
    }
    CHECK(off_sing > 900);
}

TEST_CASE("unit vanishing in a seed is rejected") {
    VectorFieldUnfolding X;
    const int D = 8;
    X.unit = BiSeries::constant(D, 1.0);
    X.unit.set(0, 1, -3.0);  // unit 1 - 3y vanishes at y = 1/3 inside epsilon = 0.4
    X.curves.curves.push_back({ComplexPoly({0.0}), 2});
    SplittingConfig cfg;
    cfg.epsilon = 0.4;
    CHECK_THROWS_AS(build_splitting(X, cfg), numerical_error);
}
