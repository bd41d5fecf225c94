#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unfold/directions.hpp"
#include "unfold/samples.hpp"

using namespace unfold;

TEST_CASE("in_x_infinity basics") {
    // w^2: single residue 0 -> stable
    CHECK(in_x_infinity(ComplexPoly({0, 0, 1})));
    // w(w-1): subset sums {-1, 1, 0}; 2 pi i (+-1) not real -> stable
    CHECK(in_x_infinity(ComplexPoly({0, -1, 1})));
    // i w(w-1): residues -+i; 2 pi i (-+i) = +-2pi real nonzero -> unstable
    CHECK_FALSE(in_x_infinity(cplx(0, 1) * ComplexPoly({0, -1, 1})));
}

TEST_CASE("unstable curves of the gate node") {
    auto tree = build_splitting(samples::gate());
    auto curves = unstable_curves(tree.root);
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].level == 1);
    CHECK(dist_mod_pi(curves[0].offset, pi / 2) < 1e-12);
    // scaling the field scalar rotates the offset by -arg c (mod pi)
    SplitNode scaled = tree.root;
    cplx c = unit(0.4);
    scaled.v00 *= c;
    auto curves2 = unstable_curves(scaled);
    REQUIRE(curves2.size() == 1);
    CHECK(dist_mod_pi(curves2[0].offset, pi / 2 - 0.4) < 1e-10);
}

TEST_CASE("unstable curves: residue zero means empty") {
    auto tree = build_splitting(samples::quadratic());
    CHECK(tree.compact_nodes.empty());
    // a double-slope node: collapse gate's two curves into slope-0 pair
    // P = w^2 has residue 0 -> no curves; emulate via a direct profile
    auto rp = ResidueProfile::of(ComplexPoly({0, 0, 1}));
    CHECK(rp.subset_sums.empty());
}

TEST_CASE("direction atlas: empty for y^2") {
    auto tree = build_splitting(samples::quadratic());
    auto atlas = direction_atlas(tree);
    CHECK(atlas.empty());
    CHECK(atlas.q() == 0);
}

TEST_CASE("direction atlas: gate has level 1 with +-1 singular") {
    auto tree = build_splitting(samples::gate());
    auto atlas = direction_atlas(tree);
    REQUIRE(atlas.q() == 1);
    CHECK(atlas.levels[0] == 1);
    REQUIRE(atlas.singular_directions[0].size() == 2);
    CHECK(std::abs(atlas.singular_directions[0][0] - cplx(1)) < 1e-9);
    CHECK(std::abs(atlas.singular_directions[0][1] + cplx(1)) < 1e-9);
}

TEST_CASE("direction atlas: cascade has levels {2,3}") {
    auto tree = build_splitting(samples::cascade());
    auto atlas = direction_atlas(tree);
    REQUIRE(atlas.q() == 2);
    CHECK(atlas.levels[0] == 2);
    CHECK(atlas.levels[1] == 3);
    // level 2 from w^2(w-1): residues -1,+1 -> offsets pi/2; lambda solving
    // 2 arg(lambda) = 0 mod pi: 4 directions
    CHECK(atlas.singular_directions[0].size() == 4);
    // level 3 from -w(w-1): 6 directions
    CHECK(atlas.singular_directions[1].size() == 6);
}

TEST_CASE("rotation symmetry of singular direction sets") {
    auto tree = build_splitting(samples::cascade());
    auto atlas = direction_atlas(tree);
    for (int k = 0; k < atlas.q(); ++k) {
        int e = atlas.levels[std::size_t(k)];
        cplx rot = unit(pi / e);
        for (auto& lam : atlas.singular_directions[std::size_t(k)]) {
            cplx rl = lam * rot;
            bool found = false;
            for (auto& other : atlas.singular_directions[std::size_t(k)])
                if (std::abs(other - rl) < 1e-9) found = true;
            CHECK(found);
        }
    }
}

TEST_CASE("stable classes have no unstable pair off the curves") {
    auto tree = build_splitting(samples::gate());
    auto curves = unstable_curves(tree.root);
    // (lambda, mu) on the curve: level*arg(lambda)+arg(mu) = pi/2 mod pi
    CHECK(curves[0].contains(unit(0.3), unit(pi / 2 - 0.3)));
    CHECK_FALSE(curves[0].contains(unit(0.3), unit(pi / 2)));
}

TEST_CASE("build_aleph: empty atlas gives the constant i") {
    auto tree = build_splitting(samples::quadratic());
    auto atlas = direction_atlas(tree);
    AdmissibleTuple L;
    auto md = build_aleph(atlas, L, unit(0.3), 0);
    CHECK(std::abs(md.mu_for_exponent(5, 0.3) - cplx(0, 1)) < 1e-12);
}

TEST_CASE("build_aleph: gate level, pinned at i, avoids curves") {
    auto tree = build_splitting(samples::gate());
    auto atlas = direction_atlas(tree);
    AdmissibleTuple L;
    L.lambda = {unit(pi / 4)};
    auto md = build_aleph(atlas, L, unit(pi / 4), 1);
    // pinned: theta(arg lambda_1) = pi/2
    CHECK(std::abs(md.theta(0, pi / 4) - pi / 2) < 1e-12);
    // decreasing, in (0, pi), and off the unstable curves
    auto curves = unstable_curves(tree.root);
    double prev = 1e300;
    for (int i = 0; i <= 1000; ++i) {
        double u = md.u0 + (md.u1 - md.u0) * i / 1000.0;
        double th = md.theta(0, u);
        CHECK(th < prev + 1e-12);
        prev = th;
        CHECK(th > 0);
        CHECK(th < pi);
        for (auto& c : curves) CHECK_FALSE(c.contains(unit(u), unit(th), 1e-7));
    }
}

TEST_CASE("build_aleph rejects singular base directions") {
    auto tree = build_splitting(samples::gate());
    auto atlas = direction_atlas(tree);
    AdmissibleTuple L;
    L.lambda = {cplx(1, 0)};  // 1 is a singular direction of level 1
    CHECK_THROWS_AS(build_aleph(atlas, L, cplx(1, 0), 1), numerical_error);
}

TEST_CASE("aleph_star: values and blending") {
    auto tree = build_splitting(samples::cascade());
    auto atlas = direction_atlas(tree);
    AdmissibleTuple L;
    L.lambda = {unit(pi / 8), unit(pi / 8 + 0.05)};
    cplx lam = unit(pi / 8);
    auto md = build_aleph(atlas, L, lam, 2);

    // root exterior deep outside: constant i
    cplx x = 1e-3 * lam;
    cplx far = aleph_star(md, tree, x, tree.config.epsilon / 2);
    CHECK(std::abs(far - cplx(0, 1)) < 1e-12);

    // on the magnifying-glass boundary |t| = rho |x| the blend hits the
    // compact-like value exactly
    double rho = tree.root.rho;
    cplx y_boundary = x * rho;  // w = rho, real positive, outside child disks
    cplx v_boundary = aleph_star(md, tree, x, y_boundary);
    cplx mu_c = md.mu_for_exponent(tree.root.compact_e(), std::arg(x));
    CHECK(std::abs(v_boundary - mu_c) < 1e-12);

    // |t| >= 2 rho |x|: exactly the exterior value
    cplx v_out = aleph_star(md, tree, x, x * (2.1 * rho));
    CHECK(std::abs(v_out - cplx(0, 1)) < 1e-12);

    // image lies in the open upper semicircle everywhere off Sing X
    Rng rng(17);
    for (int i = 0; i < 300; ++i) {
        cplx xx = rng.disk(tree.recommended_delta);
        if (std::arg(xx) < md.u0 || std::arg(xx) > md.u1) {
            double u = rng.uniform(md.u0, md.u1);
            xx = std::abs(xx) * unit(u);
        }
        if (std::abs(xx) < 1e-9) continue;
        cplx yy = rng.disk(tree.config.epsilon);
        bool sing = false;
        for (auto& c : samples::cascade().curves.curves)
            if (std::abs(yy - c.gamma.eval(xx)) < 1e-9) sing = true;
        if (sing) continue;
        cplx v = aleph_star(md, tree, xx, yy);
        CHECK(v.imag() > 0);
        CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);
    }
}

TEST_CASE("multi-direction validity: sampled pairs avoid unstable curves") {
    auto tree = build_splitting(samples::cascade());
    auto atlas = direction_atlas(tree);
    AdmissibleTuple L;
    L.lambda = {unit(pi / 8), unit(pi / 8 + 0.05)};
    auto md = build_aleph(atlas, L, unit(pi / 8), 2);
    for (auto& [node, curves] : atlas.node_curves) {
        if (curves.empty()) continue;
        for (int i = 0; i < 1000; ++i) {
            double u = md.u0 + (md.u1 - md.u0) * i / 999.0;
            cplx mu = md.mu_for_exponent(node->compact_e(), u);
            for (auto& c : curves) CHECK_FALSE(c.contains(unit(u), mu, 1e-7));
        }
    }
}
