#pragma once

#include "unfold/splitting.hpp"

namespace unfold {

// Residues of the time form of P(w) d/dw at its singular points, together
// with every nonzero subset sum.
struct ResidueProfile {
    std::vector<cplx> residues;     // one per singular point (with multiplicity grouping)
    std::vector<cplx> subset_sums;  // all nonzero sums over nonempty subsets

    static ResidueProfile of(const ComplexPoly& P, double tol = tol_algebraic) {
        ResidueProfile rp;
        auto pf = partial_fractions(P, tol);
        // order-1 coefficients are the residues
        std::vector<std::pair<cplx, cplx>> seen;  // root -> residue
        for (auto& t : pf) {
            if (t.order != 1) continue;
            rp.residues.push_back(t.coeff);
        }
        if (rp.residues.size() > 12)
            throw numerical_error("ResidueProfile: more than 12 singular points");
        std::size_t n = rp.residues.size();
        for (std::size_t mask = 1; mask < (std::size_t(1) << n); ++mask) {
            cplx s = 0;
            for (std::size_t k = 0; k < n; ++k)
                if (mask & (std::size_t(1) << k)) s += rp.residues[k];
            if (std::abs(s) > 1e-9) rp.subset_sums.push_back(s);
        }
        return rp;
    }
};

// Membership in the stable class: no subset of residues has 2*pi*i * sum in
// R \ {0}. Equivalently no subset sum is (numerically) real-nonzero after
// multiplication by i.
inline bool in_x_infinity(const ComplexPoly& P, double tol = 1e-9) {
    if (P.degree() < 2) throw numerical_error("in_x_infinity: need nu >= 1");
    auto rp = ResidueProfile::of(P);
    for (auto& s : rp.subset_sums) {
        // 2 pi i s real and nonzero <=> Re(s) ~ 0 and |s| > 0
        if (std::abs(s.real()) * 2 * pi < tol && std::abs(s) > tol) return false;
    }
    return true;
}

// {(lambda, mu): e arg(lambda) + arg(mu) = offset (mod pi)} on the torus.
struct UnstableCurve {
    int level = 1;     // e(C_j)
    double offset = 0; // in [0, pi)

    bool contains(cplx lambda, cplx mu, double tol = 1e-9) const {
        double a = norm_angle_pi(level * std::arg(lambda) + std::arg(mu));
        return dist_mod_pi(a, offset) < tol;
    }
};

// Unstable torus curves of a compact-like node: one offset class per nonzero
// subset sum r, at angle arg(r) + pi/2 (mod pi). The node scalar v(0,0) is
// folded into the polynomial before taking residues.
inline std::vector<UnstableCurve> unstable_curves(const SplitNode& node,
                                                  double dedup_tol = 1e-9) {
    if (node.terminal) throw numerical_error("unstable_curves: node is terminal");
    ComplexPoly P = node.v00 * node.poly_monic();
    if (P.degree() < 2) return {};
    auto rp = ResidueProfile::of(P);
    std::vector<UnstableCurve> out;
    for (auto& s : rp.subset_sums) {
        double off = norm_angle_pi(std::arg(s) + pi / 2);
        bool dup = false;
        for (auto& c : out)
            if (dist_mod_pi(c.offset, off) < dedup_tol) dup = true;
        if (!dup) out.push_back({node.compact_e(), off});
    }
    std::sort(out.begin(), out.end(),
              [](const UnstableCurve& a, const UnstableCurve& b) { return a.offset < b.offset; });
    return out;
}

struct DirectionAtlas {
    // levels e~_1 < ... < e~_q, only those carrying instability
    std::vector<int> levels;
    // singular directions per level, as unit complex numbers
    std::vector<std::vector<cplx>> singular_directions;
    // per level, the union of unstable offsets of the contributing nodes
    std::vector<std::vector<double>> level_offsets;
    // every compact-like node with its curves (may be empty)
    std::vector<std::pair<const SplitNode*, std::vector<UnstableCurve>>> node_curves;

    int q() const { return int(levels.size()); }
    int level_index(int e) const {
        for (std::size_t k = 0; k < levels.size(); ++k)
            if (levels[k] == e) return int(k);
        return -1;
    }
    bool empty() const { return levels.empty(); }
};

inline DirectionAtlas direction_atlas(const SplittingTree& tree) {
    DirectionAtlas atlas;
    for (auto* node : tree.compact_nodes) {
        auto curves = unstable_curves(*node);
        atlas.node_curves.push_back({node, curves});
        if (curves.empty()) continue;
        if (atlas.level_index(node->compact_e()) < 0) atlas.levels.push_back(node->compact_e());
    }
    std::sort(atlas.levels.begin(), atlas.levels.end());
    atlas.singular_directions.resize(atlas.levels.size());
    atlas.level_offsets.resize(atlas.levels.size());
    for (auto& [node, curves] : atlas.node_curves) {
        if (curves.empty()) continue;
        int k = atlas.level_index(node->compact_e());
        int e = atlas.levels[std::size_t(k)];
        for (auto& c : curves) {
            double base = c.offset;  // offsets store arg(r)+pi/2 mod pi
            bool seen_off = false;
            for (double o : atlas.level_offsets[std::size_t(k)])
                if (dist_mod_pi(o, base) < 1e-9) seen_off = true;
            if (!seen_off) atlas.level_offsets[std::size_t(k)].push_back(base);
            // lambda with (lambda, i) on the curve: e arg(lambda) = offset - pi/2 (mod pi)
            for (int m = 0; m < 2 * e; ++m) {
                double a = norm_angle((base - pi / 2 + m * pi) / e);
                cplx lam = unit(a);
                bool dup = false;
                for (auto& ex : atlas.singular_directions[std::size_t(k)])
                    if (std::abs(ex - lam) < 1e-9) dup = true;
                if (!dup) atlas.singular_directions[std::size_t(k)].push_back(lam);
            }
        }
        std::sort(atlas.singular_directions[std::size_t(k)].begin(),
                  atlas.singular_directions[std::size_t(k)].end(),
                  [](cplx a, cplx b) { return norm_angle(std::arg(a)) < norm_angle(std::arg(b)); });
    }
    return atlas;
}

// Admissible tuple: lambda_k off the level-k singular set, with nested arcs
// I_{j+1}(lambda_{j+1},0) inside I_j(lambda_j,0).
struct AdmissibleTuple {
    std::vector<cplx> lambda;  // one per level of the atlas
    double upsilon = 0;        // half-width margin, computed by build_aleph

    void validate(const DirectionAtlas& atlas, double tol = 1e-9) const {
        if (int(lambda.size()) != atlas.q())
            throw numerical_error("AdmissibleTuple: one direction per level required");
        for (int k = 0; k < atlas.q(); ++k) {
            for (auto& xi : atlas.singular_directions[std::size_t(k)])
                if (std::abs(xi - lambda[std::size_t(k)]) < tol)
                    throw numerical_error("AdmissibleTuple: lambda_k is a singular direction");
        }
        for (int j = 0; j + 1 < atlas.q(); ++j) {
            double cj = std::arg(lambda[std::size_t(j)]);
            double cn = std::arg(lambda[std::size_t(j) + 1]);
            double half_j = pi / (2.0 * atlas.levels[std::size_t(j)]);
            double half_n = pi / (2.0 * atlas.levels[std::size_t(j) + 1]);
            if (dist_mod_2pi(cj, cn) > half_j - half_n + tol)
                throw numerical_error("AdmissibleTuple: arcs are not nested");
        }
    }
};

// Stable multi-direction on an arc: per level, a piecewise-linear decreasing
// angle function theta~_k with values in (0, pi).
struct MultiDirection {
    double u0 = 0, u1 = 0;                      // arc arg-range
    std::vector<std::vector<double>> knots_u;   // per level
    std::vector<std::vector<double>> knots_th;  // per level, decreasing
    std::vector<int> levels;                    // atlas levels

    double theta(int level_idx, double u) const {
        const auto& ku = knots_u[std::size_t(level_idx)];
        const auto& kt = knots_th[std::size_t(level_idx)];
        if (u <= ku.front()) return kt.front();
        if (u >= ku.back()) return kt.back();
        for (std::size_t i = 0; i + 1 < ku.size(); ++i)
            if (u <= ku[i + 1]) {
                double s = (u - ku[i]) / (ku[i + 1] - ku[i]);
                return kt[i] + s * (kt[i + 1] - kt[i]);
            }
        return kt.back();
    }

    // mu for a node of exterior-compact exponent e: the level value if e is a
    // summability level, i at unlisted exponents.
    cplx mu_for_exponent(int e, double u) const {
        for (std::size_t k = 0; k < levels.size(); ++k)
            if (levels[k] == e) return unit(theta(int(k), u));
        return cplx(0, 1);
    }
};

namespace detail {

// Forbidden values (mod pi) for sigma = theta + e*u at a given level.
inline std::vector<double> level_forbidden(const DirectionAtlas& atlas, int level_idx) {
    return atlas.level_offsets[std::size_t(level_idx)];
}

}  // namespace detail

// The stable multi-direction aleph_{k,Lambda,lambda}: levels 1..k vary
// (decreasing through i at lambda_j), levels above k are frozen at constants
// in e^{i[pi/4,3pi/4]} clear of the unstable offsets.
namespace detail {

inline MultiDirection build_aleph_at_margin(const DirectionAtlas& atlas,
                                            const AdmissibleTuple& Lambda, cplx lambda,
                                            int k_index, double upsilon) {
    MultiDirection md;
    md.levels = atlas.levels;
    double lam_arg = std::arg(lambda);
    md.u0 = lam_arg - upsilon;
    md.u1 = lam_arg + upsilon;

    for (int j = 0; j < atlas.q(); ++j) {
        int e = atlas.levels[std::size_t(j)];
        if (j < k_index) {
            // Varying level: theta(u) = sigma(u) - e u with sigma nondecreasing
            // inside the forbidden-value gap around sigma_j, pinned so that
            // theta(arg lambda_j) = pi/2.
            double theta_j = std::arg(Lambda.lambda[std::size_t(j)]);
            // arc of interest: I_j(lambda_j, upsilon) intersected with our arc
            double a0 = md.u0, a1 = md.u1;
            double sj = pi / 2 + e * theta_j;  // unreduced lift
            // forbidden classes as lifts near sj
            double lo = -1e300, hi = 1e300;
            for (double off : detail::level_forbidden(atlas, j)) {
                // nearest lift of `off` strictly below and above sj
                double base = off + pi * std::floor((sj - off) / pi);
                lo = std::max(lo, base);
                hi = std::min(hi, base + pi);
            }
            if (lo == -1e300) {  // no forbidden classes at this level
                lo = sj - pi / 2;
                hi = sj + pi / 2;
            }
            // sigma rises linearly with slope e/2 (so theta has slope -e/2,
            // decreasing), clamped to the open gap (lo, hi).
            double margin = 0.25 * std::min(sj - lo, hi - sj);
            std::vector<double> ku, kt;
            int nknots = 33;
            for (int i = 0; i < nknots; ++i) {
                double u = a0 + (a1 - a0) * i / double(nknots - 1);
                double sigma = sj + 0.5 * e * (u - theta_j);
                sigma = std::min(std::max(sigma, lo + margin), hi - margin);
                double th = sigma - e * u;
                ku.push_back(u);
                kt.push_back(th);
            }
            // theta must stay in (0, pi); the admissibility margins guarantee
            // it on I_j(lambda_j, upsilon) which contains our small arc
            for (double th : kt)
                if (th <= 1e-9 || th >= pi - 1e-9)
                    throw numerical_error("build_aleph: angle function left (0, pi)");
            md.knots_u.push_back(ku);
            md.knots_th.push_back(kt);
        } else {
            // Frozen level: constant in [pi/4, 3pi/4] clear of the moving
            // forbidden angles over the whole arc.
            std::vector<std::pair<double, double>> bad;  // intervals in [0, pi)
            for (double off : detail::level_forbidden(atlas, j)) {
                // theta = off - e u (mod pi), u in [u0, u1]
                double c0 = off - e * md.u1, c1 = off - e * md.u0;
                bad.push_back({c0, c1});
            }
            double best = pi / 2, best_gap = -1;
            int ncand = 721;
            for (int i = 0; i < ncand; ++i) {
                double th = pi / 4 + (pi / 2) * i / double(ncand - 1);
                double gap = 1e300;
                for (auto& [c0, c1] : bad) {
                    // distance from th to the swept interval, mod pi
                    double mid = (c0 + c1) / 2, half = (c1 - c0) / 2;
                    double d = dist_mod_pi(th, mid) - half;
                    gap = std::min(gap, d);
                }
                if (gap > best_gap) {
                    best_gap = gap;
                    best = th;
                }
            }
            if (best_gap <= 1e-9)
                throw numerical_error("build_aleph: no admissible frozen constant (tolerance collision)");
            md.knots_u.push_back({md.u0, md.u1});
            md.knots_th.push_back({best, best});
        }
    }
    return md;
}

}  // namespace detail

inline MultiDirection build_aleph(const DirectionAtlas& atlas, const AdmissibleTuple& Lambda,
                                  cplx lambda, int k_index) {
    Lambda.validate(atlas);
    if (k_index < 0 || k_index > atlas.q())
        throw numerical_error("build_aleph: level index out of range");

    // Margin from the distance of each varying level's base angle to its
    // forbidden classes.
    double upsilon = pi / 8;
    for (int j = 0; j < k_index; ++j) {
        int e = atlas.levels[std::size_t(j)];
        double sj = norm_angle_pi(pi / 2 + e * std::arg(Lambda.lambda[std::size_t(j)]));
        double gap = pi;
        for (double off : detail::level_forbidden(atlas, j))
            gap = std::min(gap, dist_mod_pi(sj, off));
        if (gap < 1e-9)
            throw numerical_error("build_aleph: admissible direction touches a singular class");
        upsilon = std::min(upsilon, 0.45 * gap / e);
    }
    if (k_index >= 1) {
        int e = atlas.levels[std::size_t(k_index) - 1];
        double half = pi / (2.0 * e) + upsilon;
        if (dist_mod_2pi(std::arg(lambda), std::arg(Lambda.lambda[std::size_t(k_index) - 1])) >
            half + 1e-12)
            throw numerical_error("build_aleph: base direction outside I_k(lambda_k, upsilon)");
    }

    for (int attempt = 0; attempt < 24; ++attempt) {
        try {
            return detail::build_aleph_at_margin(atlas, Lambda, lambda, k_index, upsilon);
        } catch (const numerical_error&) {
            upsilon *= 0.5;
            if (upsilon < 1e-8) break;
        }
    }
    throw numerical_error("build_aleph: no stable multi-direction found at any margin");
}

// Quintic smoothstep: 1 on (-inf, 1.25], 0 on [1.75, inf).
inline double blend_sigma(double s) {
    if (s <= 1.25) return 1.0;
    if (s >= 1.75) return 0.0;
    double t = (s - 1.25) / 0.5;
    return 1.0 - t * t * t * (t * (6 * t - 15) + 10);
}

// The interpolated direction function aleph^* evaluated at a point.
inline cplx aleph_star(const MultiDirection& md, const SplittingTree& tree, cplx x, cplx y) {
    double u = std::arg(x);
    if (std::abs(x) == 0.0) u = (md.u0 + md.u1) / 2;
    auto loc = locate(tree, x, y);
    const SplitNode* n = loc.node;
    if (loc.kind == BasicSetKind::compact_like) return md.mu_for_exponent(n->compact_e(), u);
    // exterior set of node n
    if (n->terminal) {
        // aleph_E = aleph_{C_father}; the father's compact exponent equals e(E)
        if (n->beta.empty()) return cplx(0, 1);  // terminal root: constant i
        return md.mu_for_exponent(n->e, u);
    }
    // non-terminal exterior: blend between the node's own value and the
    // sibling compact-like value with the smoothstep in |t| / (rho |x|)
    cplx own = n->beta.empty() ? cplx(0, 1) : md.mu_for_exponent(n->e, u);
    cplx compact = md.mu_for_exponent(n->compact_e(), u);
    if (std::abs(x) == 0.0) return own;
    double s = std::abs(loc.adapted) / (n->rho * std::abs(x));
    double th0 = std::arg(own), th1 = std::arg(compact);
    return unit(th0 + (th1 - th0) * blend_sigma(s));
}

}  // namespace unfold
