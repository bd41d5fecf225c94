#pragma once

#include <memory>

#include "unfold/vector_field.hpp"

namespace unfold {

enum class BasicSetKind { exterior, compact_like };

struct SplittingConfig {
    double delta = 0.05;      // |x| bound of the seed
    double epsilon = 0.4;     // |y| bound of the root seed
    double slope_tol = 1e-10; // dedup tolerance for grouping curve slopes
};

// One seed of the recursion together with its exterior set and, when the
// seed splits, the compact-like set and the child seeds.
struct SplitNode {
    std::vector<cplx> beta;      // slope labels from the root
    VectorFieldUnfolding field;  // X in the adapted coordinate (x, t)
    int e = 0;                   // exterior exponent
    int nu = 0;                  // nu of the node
    bool terminal = true;
    double eta = 0;              // seed radius in the adapted coordinate

    // compact-like data (non-terminal nodes)
    double rho = 0;
    cplx v00 = 0;
    std::vector<cplx> slopes;          // distinct slopes, one per child
    std::vector<int> slope_mults;      // grouped multiplicities
    std::vector<SplitNode> children;

    int iota() const { return terminal ? e : e + nu; }
    int compact_e() const { return e + nu; }

    // lambda^{e(C)} v(0,0) prod (w - zeta_k)^{s_k}
    ComplexPoly poly_field(cplx lambda) const {
        if (terminal) throw numerical_error("poly_field: node is terminal");
        std::vector<std::pair<cplx, int>> rts;
        for (std::size_t k = 0; k < slopes.size(); ++k) rts.push_back({slopes[k], slope_mults[k]});
        return (std::pow(lambda, compact_e()) * v00) * ComplexPoly::from_roots(rts);
    }

    // Monic part only (residue combinatorics folds v00 in separately).
    ComplexPoly poly_monic() const {
        if (terminal) throw numerical_error("poly_monic: node is terminal");
        std::vector<std::pair<cplx, int>> rts;
        for (std::size_t k = 0; k < slopes.size(); ++k) rts.push_back({slopes[k], slope_mults[k]});
        return ComplexPoly::from_roots(rts);
    }
};

struct LocatedPoint {
    const SplitNode* node = nullptr;
    BasicSetKind kind = BasicSetKind::exterior;
    cplx adapted;  // t on exterior sets, w on compact-like sets
};

struct SplittingTree {
    SplitNode root;
    SplittingConfig config;
    double recommended_delta = 0;  // largest |x| at which every set is nonempty
    std::vector<const SplitNode*> compact_nodes;  // C_1..C_q in build order

    int nu0() const { return root.nu; }
};

namespace detail {

inline void check_unit_on_seed(const BiSeries& u, double delta, double eta) {
    // The unit must stay away from zero on the whole seed; test the zeros of
    // its fiber restriction at a few parameter samples.
    for (int ix = 0; ix < 9; ++ix) {
        cplx x = (ix == 0) ? cplx(0) : delta * unit(2 * pi * (ix - 1) / 8.0);
        std::vector<cplx> c;
        for (int j = 0; j <= u.order(); ++j) {
            cplx acc = 0;
            for (int i = 0; i + j <= u.order(); ++i) acc += u.get(i, j) * std::pow(x, i);
            c.push_back(acc);
        }
        ComplexPoly uy{std::vector<cplx>(c)};
        if (uy.degree() < 1) continue;
        for (auto& rc : roots(uy, 1e-9))
            if (std::abs(rc.root) <= eta * 1.05)
                throw numerical_error(
                    "build_splitting: unit vanishes inside a seed; retry with "
                    "smaller radii (delta/epsilon)");
    }
}

inline SplitNode build_node(const VectorFieldUnfolding& X, std::vector<cplx> beta, double eta,
                            const SplittingConfig& cfg, double& min_delta) {
    SplitNode node;
    node.beta = std::move(beta);
    node.field = X;
    node.e = X.x_exponent;
    node.nu = X.nu();
    node.eta = eta;
    check_unit_on_seed(X.unit, cfg.delta, eta);

    const auto& curves = X.curves.curves;
    if (curves.size() == 1) {
        node.terminal = true;
        return node;
    }
    node.terminal = false;

    // Group the curves by slope at the origin.
    std::vector<cplx> slope_of(curves.size());
    for (std::size_t j = 0; j < curves.size(); ++j) slope_of[j] = curves[j].gamma.coeff(1);
    std::vector<cplx> distinct;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t j = 0; j < curves.size(); ++j) {
        bool found = false;
        for (std::size_t k = 0; k < distinct.size(); ++k)
            if (std::abs(slope_of[j] - distinct[k]) < cfg.slope_tol) {
                groups[k].push_back(j);
                found = true;
                break;
            }
        if (!found) {
            distinct.push_back(slope_of[j]);
            groups.push_back({j});
        }
    }
    // Deterministic child order.
    std::vector<std::size_t> order(distinct.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (distinct[a].real() != distinct[b].real()) return distinct[a].real() < distinct[b].real();
        return distinct[a].imag() < distinct[b].imag();
    });

    double max_slope = 0, min_gap = 1e300;
    for (auto& s : distinct) max_slope = std::max(max_slope, std::abs(s));
    for (std::size_t a = 0; a < distinct.size(); ++a)
        for (std::size_t b = a + 1; b < distinct.size(); ++b)
            min_gap = std::min(min_gap, std::abs(distinct[a] - distinct[b]));
    node.rho = 4.0 * (max_slope + 1.0);
    node.v00 = X.unit.get(0, 0);
    min_delta = std::min(min_delta, eta / (2.0 * node.rho));

    const int D = X.unit.order();
    const int eC = node.compact_e();
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        std::size_t k = order[oi];
        cplx zeta = distinct[k];
        node.slopes.push_back(zeta);
        int mult = 0;
        for (auto j : groups[k]) mult += curves[j].multiplicity;
        node.slope_mults.push_back(mult);

        // Child field in the coordinate t' = t/x - zeta.
        VectorFieldUnfolding child;
        child.x_exponent = eC;
        for (auto j : groups[k]) {
            // gamma_j(x)/x - zeta, with the forced zero constant term
            const ComplexPoly& g = curves[j].gamma;
            std::vector<cplx> shifted;
            for (int i = 1; i <= g.degree(); ++i) shifted.push_back(g.coeff(i));
            ComplexPoly gt{std::vector<cplx>(shifted)};
            gt = gt - ComplexPoly::constant(zeta);
            if (std::abs(gt.coeff(0)) > cfg.slope_tol * 10)
                throw numerical_error("build_splitting: slope grouping inconsistent");
            gt.set_coeff(0, 0.0);
            child.curves.curves.push_back({gt, curves[j].multiplicity});
        }
        // unit: u(x, x(t'+zeta)) * prod_{j not in group} ((t'+zeta) - gamma_j(x)/x)^{n_j}
        BiSeries sub = BiSeries::var_x(D) * BiSeries::var_y(D);  // x t'
        {
            BiSeries zx = BiSeries::var_x(D);
            zx *= zeta;
            sub += zx;
        }
        BiSeries h = X.unit.substitute_y(sub);
        for (std::size_t kk = 0; kk < distinct.size(); ++kk) {
            if (kk == k) continue;
            for (auto j : groups[kk]) {
                const ComplexPoly& g = curves[j].gamma;
                std::vector<cplx> shifted;  // gamma_j / x
                for (int i = 1; i <= g.degree(); ++i) shifted.push_back(g.coeff(i));
                ComplexPoly offs = ComplexPoly::constant(zeta) - ComplexPoly(std::move(shifted));
                BiSeries factor = BiSeries::var_y(D) + BiSeries::from_x_poly(D, offs);
                for (int m = 0; m < curves[j].multiplicity; ++m) h = h * factor;
            }
        }
        child.unit = h;
        if (std::abs(h.get(0, 0)) < 1e-14)
            throw numerical_error("build_splitting: child unit vanishes at origin");

        double child_eta =
            (distinct.size() > 1) ? std::min(eta / 2.0, 0.25 * min_gap) : eta / 2.0;
        std::vector<cplx> cb = node.beta;
        cb.push_back(zeta);
        node.children.push_back(build_node(child, std::move(cb), child_eta, cfg, min_delta));
    }
    return node;
}

inline void collect_compacts(const SplitNode& n, std::vector<const SplitNode*>& out) {
    if (!n.terminal) {
        out.push_back(&n);
        for (auto& c : n.children) collect_compacts(c, out);
    }
}

}  // namespace detail

inline SplittingTree build_splitting(const VectorFieldUnfolding& X, SplittingConfig cfg = {}) {
    X.validate();
    if (X.x_exponent != 0)
        throw numerical_error("build_splitting: root field must carry no x factor");
    SplittingTree tree;
    tree.config = cfg;
    double min_delta = cfg.delta;
    tree.root = detail::build_node(X, {}, cfg.epsilon, cfg, min_delta);
    tree.recommended_delta = min_delta;
    detail::collect_compacts(tree.root, tree.compact_nodes);
    return tree;
}

// Membership: walks the recursion, preferring exterior sets on their closed
// boundary so that every point gets exactly one basic set.
inline LocatedPoint locate(const SplittingTree& tree, cplx x, cplx y) {
    if (std::abs(y) > tree.config.epsilon * (1 + 1e-12))
        throw numerical_error("locate: point outside the root seed");
    const SplitNode* cur = &tree.root;
    cplx t = y;
    for (;;) {
        if (cur->terminal) {
            // terminal exterior: verify off the singular curve
            cplx g = cur->field.curves.curves[0].gamma.eval(x);
            if (std::abs(t - g) < 1e-13) throw numerical_error("locate: point on Sing X");
            return {cur, BasicSetKind::exterior, t};
        }
        if (std::abs(x) == 0.0) {
            if (std::abs(t) < 1e-13) throw numerical_error("locate: point on Sing X");
            return {cur, BasicSetKind::exterior, t};
        }
        if (std::abs(t) >= cur->rho * std::abs(x)) return {cur, BasicSetKind::exterior, t};
        cplx w = t / x;
        bool descended = false;
        for (std::size_t k = 0; k < cur->children.size(); ++k) {
            if (std::abs(w - cur->slopes[k]) <= cur->children[k].eta) {
                t = w - cur->slopes[k];
                cur = &cur->children[k];
                descended = true;
                break;
            }
        }
        if (!descended) return {cur, BasicSetKind::compact_like, w};
    }
}

}  // namespace unfold
