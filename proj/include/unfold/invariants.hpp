#pragma once

#include "unfold/fatou.hpp"

namespace unfold {

// ---------------------------------------------------------------------------
// Horn maps: xi_j = psi_{j+1} o psi_j^{-1} sampled on one period deep in the
// overlap between adjacent petals.

struct HornMapSample {
    int petal_j = 0;
    int s = 1;                    // orientation of petal j
    cplx x = 0;
    std::vector<cplx> a;          // Fourier coefficients a[0..L]; a[0] translates
    std::vector<double> noise;    // per-coefficient noise floor estimate
    double periodicity_residual = 0;
    double sampling_height = 0;   // |Im z| of the sampling line
    double value_residual = 0;    // worst orbit-sum residual among samples
};

struct HornConfig {
    int L = 8;
    int grid = 256;
    double height_offset = 2.0;  // sample at M + offset
    double min_height = 1.0;
    double max_height = 12.0;
    double transit_tol = 1e-8;   // acceptable periodicity residual
    OrbitConfig orbit;
};

namespace detail {

// psi of petal (j+1) evaluated in the overlap sector between petals j and
// j+1: the frame comes from the (j+1) anchor clockwise through the horn.
inline FatouValue adjacent_psi(const FatouEvaluator& ev_next, cplx P) {
    FatouFrame fr = ev_next.frame_at(P, -1);
    auto v = ev_next.orbit_value(fr);
    return {v.psi - ev_next.anchor_offset(), v.residual, v.iterations};
}

}  // namespace detail

// One horn-map evaluation xi_j(z) for z on the sampling line.
inline FatouValue horn_value(const FatouEvaluator& ev_j, const FatouEvaluator& ev_next, cplx z,
                             cplx* point_out = nullptr) {
    cplx P = ev_j.invert(z, +1);
    if (point_out) *point_out = P;
    auto v = detail::adjacent_psi(ev_next, P);
    return v;
}

namespace detail {

// Real-part base of the sampling window: centers one period on the mid-horn
// ray so that the window stays inside the domain at small heights.
inline double window_base(const FatouEvaluator& ev_j, double height) {
    int j = ev_j.petal();
    double a0 = ev_j.anchor_angle(j);
    double a1 = ev_j.anchor_angle(j + 1);
    double span = norm_angle(a1 - a0);
    if (span == 0) span = 2 * pi / ev_j.anchor_count();
    double mid = a0 + span / 2;
    // bisection on the radius for |Im psi| ~ height along the mid-horn ray
    double eps = ev_j.domain_eps();
    double r_hi = 0.95 * eps, r_lo = 0.05 * eps;
    auto im_at = [&](double r) {
        auto v = ev_j.psi(r * unit(mid), +1);
        return std::make_pair(std::fabs(v.psi.imag()), v.psi.real());
    };
    auto [ih, re_hi] = im_at(r_hi);
    double re_mid = re_hi;
    if (ih >= height) return re_hi - 0.5;
    for (int it = 0; it < 14; ++it) {
        double rm = std::sqrt(r_hi * r_lo);
        auto [im, re] = im_at(rm);
        re_mid = re;
        if (std::fabs(im - height) < 0.05 * (1 + height)) return re - 0.5;
        if (im < height) r_hi = rm;
        else r_lo = rm;
    }
    return re_mid - 0.5;
}

}  // namespace detail

inline HornMapSample horn_map(const ParabolicMap& map, const VectorFieldUnfolding& Xk,
                              const PetalSystem& ps, int petal_j, cplx x, HornConfig cfg = {}) {
    FatouEvaluator ev_j(map, Xk, petal_j, x, ps, cfg.orbit);
    FatouEvaluator ev_next(map, Xk, petal_j + 1, x, ps, cfg.orbit);
    const int s = ev_j.orientation();

    HornMapSample out;
    out.petal_j = ev_j.petal();
    out.s = s;
    out.x = x;

    // Calibrate the transit height M: the smallest line depth at which the
    // overlap evaluation succeeds at probe points across the period. Probes
    // run on a reduced budget so failed heights fail fast.
    OrbitConfig probe_cfg = cfg.orbit;
    probe_cfg.budget = std::max<long>(20000, cfg.orbit.budget / 8);
    FatouEvaluator pv_j(map, Xk, petal_j, x, ps, probe_cfg);
    FatouEvaluator pv_next(map, Xk, petal_j + 1, x, ps, probe_cfg);
    double M = -1;
    double base = 0;
    for (double h = cfg.min_height; h <= cfg.max_height; h += 0.5) {
        bool ok = true;
        double tb;
        try {
            tb = detail::window_base(pv_j, h);
        } catch (const numerical_error&) {
            continue;
        }
        for (double t : {0.0, 0.37, 0.74}) {
            try {
                cplx z = tb + t - cplx(0, 1) * double(s) * h;
                auto v0 = horn_value(pv_j, pv_next, z);
                auto v1 = horn_value(pv_j, pv_next, z + 1.0);
                if (std::abs(v1.psi - v0.psi - 1.0) > cfg.transit_tol) ok = false;
            } catch (const numerical_error&) {
                ok = false;
            }
            if (!ok) break;
        }
        if (ok) {
            M = h;
            base = tb;
            break;
        }
    }
    if (M < 0) throw numerical_error("horn_map: no transit height found (orbit fails to cross)");

    double h = M + cfg.height_offset;
    if (cfg.height_offset > 0.0) base = detail::window_base(pv_j, h);
    const int N = cfg.grid;
    std::vector<cplx> xi(std::size_t(N), cplx(0));
    std::vector<double> ts(std::size_t(N), 0.0);
    std::vector<double> res(std::size_t(N), 0.0);
    parallel_for(std::size_t(N), [&](std::size_t i) {
        double t = base + (double(i) + 0.5) / N;
        cplx z = t - cplx(0, 1) * double(s) * h;
        cplx P = ev_j.invert(z, +1);
        auto v = detail::adjacent_psi(ev_next, P);
        xi[i] = v.psi - z;
        ts[i] = t;
        res[i] = v.residual;
    });
    double worst_res = 0;
    for (double r : res) worst_res = std::max(worst_res, r);
    out.value_residual = worst_res;
    out.sampling_height = h;

    {
        cplx z = base + 0.25 - cplx(0, 1) * double(s) * h;
        auto v0 = horn_value(ev_j, ev_next, z);
        auto v1 = horn_value(ev_j, ev_next, z + 1.0);
        out.periodicity_residual = std::abs(v1.psi - v0.psi - 1.0);
        if (out.periodicity_residual > cfg.transit_tol)
            throw numerical_error("horn_map: periodicity residual above tolerance");
    }

    // Fourier extraction: xi(z) - z = a_0 + sum_{l>=1} a_l e^{-2 pi i s l z}.
    // On the line Im z = -s h the l-th mode appears damped by e^{-2 pi l h}.
    auto raw_mode = [&](int l) {
        cplx acc = 0;
        for (int i = 0; i < N; ++i)
            acc += xi[std::size_t(i)] * std::exp(cplx(0, 1) * (2 * pi * s * l * ts[std::size_t(i)]));
        return acc / double(N);
    };
    // noise floor from the top half of the raw spectrum (modes beyond L are
    // dominated by sampling noise once the geometric decay has set in)
    double sigma = 1e-16;
    {
        std::vector<double> tail;
        for (int l = N / 4; l < N / 2; ++l) tail.push_back(std::abs(raw_mode(l)));
        std::sort(tail.begin(), tail.end());
        if (!tail.empty()) sigma = std::max(sigma, tail[tail.size() / 2]);
    }
    out.a.resize(std::size_t(cfg.L) + 1);
    out.noise.resize(std::size_t(cfg.L) + 1);
    for (int l = 0; l <= cfg.L; ++l) {
        double damp = std::exp(2 * pi * l * h);
        out.a[std::size_t(l)] = raw_mode(l) * damp;
        out.noise[std::size_t(l)] = 3.0 * sigma * damp;
    }
    return out;
}

// Re-bases the psi-ddot-anchored horn data of one fiber (all petals, ccw
// order) to the homogeneous summable system psi_j = psi-ddot_j - sum_{k<j}
// a_{k,0} + (j-1) zeta. Every translation constant becomes zeta and the
// higher coefficients pick up unimodular-in-Re phase factors, cancelling the
// per-map anchor normalizations.
inline void rebase_homogeneous(std::vector<HornMapSample>& petals, cplx zeta_value) {
    std::size_t n = petals.size();
    std::vector<cplx> alpha(n, cplx(0));
    for (std::size_t j = 1; j < n; ++j)
        alpha[j] = alpha[j - 1] - petals[j - 1].a[0] + zeta_value;
    for (std::size_t j = 0; j < n; ++j) {
        auto& hs = petals[j];
        // a0 -> a0 + alpha_{j+1} - alpha_j; the cyclic wrap closes because
        // sum_k a_{k,0} = 2 nu zeta
        cplx alpha_out = (j + 1 < n) ? alpha[j + 1] : alpha[0];
        hs.a[0] += alpha_out - alpha[j];
        for (std::size_t l = 1; l < hs.a.size(); ++l) {
            cplx factor = std::exp(cplx(0, 1) * 2.0 * pi * double(hs.s) * double(l) * alpha[j]);
            hs.a[l] *= factor;
            hs.noise[l] *= std::abs(factor);
        }
    }
}

// ---------------------------------------------------------------------------
// zeta: residue formula against horn-map average

// Sign/power convention for zeta resolved empirically against the identity
// sum_j a_{j,0} = 2 nu zeta over all petals (see the selftest criterion):
// zeta(x) = -(pi i / nu) * sum of fiber residues.
inline constexpr double zeta_power_of_nu = -1.0;  // exponent of nu
inline constexpr double zeta_sign = -1.0;

struct ZetaValue {
    cplx x = 0;
    cplx residue_sum = 0;
    cplx zeta_residue = 0;   // from the residue formula
    cplx zeta_horn = 0;      // average of horn translation constants
    double discrepancy = 0;  // |zeta_residue - zeta_horn| when both present
    bool has_horn = false;
};

inline cplx fiber_residue_sum(const VectorFieldUnfolding& X, cplx x) {
    ComplexPoly Q = X.fiber_poly(x);
    cplx sum = 0;
    for (auto& c : X.curves.curves) sum += residue(Q, c.gamma.eval(x), c.multiplicity);
    return sum;
}

inline ZetaValue zeta(const VectorFieldUnfolding& X, cplx x,
                      const std::vector<HornMapSample>* horn_samples = nullptr) {
    ZetaValue z;
    z.x = x;
    z.residue_sum = fiber_residue_sum(X, x);
    double nu = double(X.nu());
    z.zeta_residue = zeta_sign * pi * cplx(0, 1) * std::pow(nu, zeta_power_of_nu) * z.residue_sum;
    if (horn_samples && !horn_samples->empty()) {
        cplx acc = 0;
        for (auto& hs : *horn_samples) acc += hs.a[0];
        z.zeta_horn = acc / double(horn_samples->size());
        z.has_horn = true;
        z.discrepancy = std::abs(z.zeta_residue - z.zeta_horn);
    }
    return z;
}

// ---------------------------------------------------------------------------
// Exponential flatness fit

struct DirectionConfig {
    AdmissibleTuple Lambda;
    cplx lambda = 1.0;

    bool same_as(const DirectionConfig& o, double tol = 1e-12) const {
        if (Lambda.lambda.size() != o.Lambda.lambda.size()) return false;
        for (std::size_t i = 0; i < Lambda.lambda.size(); ++i)
            if (std::abs(Lambda.lambda[i] - o.Lambda.lambda[i]) > tol) return false;
        return std::abs(lambda - o.lambda) <= tol;
    }
};

// d_Lambda^lambda: deepest level whose closed arc I_j(lambda_j, 0) still
// contains lambda (levels are nested, so the first failure stops the count).
inline int direction_depth(const AdmissibleTuple& Lambda, cplx lambda,
                           const DirectionAtlas& atlas) {
    int depth = 0;
    for (int k = 0; k < atlas.q(); ++k) {
        double half = pi / (2.0 * atlas.levels[std::size_t(k)]);
        if (dist_mod_2pi(std::arg(lambda), std::arg(Lambda.lambda[std::size_t(k)])) <= half + 1e-12)
            depth = k + 1;
        else
            break;
    }
    return depth;
}

// d for a pair of configs: zero for distinct tuples, else the minimum depth.
inline int agreement_depth(const DirectionConfig& a, const DirectionConfig& b,
                           const DirectionAtlas& atlas) {
    for (std::size_t k = 0; k < a.Lambda.lambda.size(); ++k)
        if (std::abs(a.Lambda.lambda[k] - b.Lambda.lambda[k]) > 1e-9) return 0;
    return std::min(direction_depth(a.Lambda, a.lambda, atlas),
                    direction_depth(b.Lambda, b.lambda, atlas));
}

struct FlatnessFit {
    double e_hat = 0;       // fitted exponent
    double K_hat = 0;       // fitted decay constant (positive when flat)
    double amplitude = 0;   // fitted prefactor
    double r2 = 0;
    int predicted_level = 0;
    bool vacuous = false;
    std::vector<double> radii;
    std::vector<double> differences;
};

namespace detail {

// least squares of ln W = ln A - K / r^e at fixed e; returns (A, K, r2)
struct ExpFit {
    double A = 0, K = 0, r2 = -1;
};

inline ExpFit fit_at_exponent(const std::vector<double>& r, const std::vector<double>& W,
                              double e) {
    std::size_t n = r.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double xi = -1.0 / std::pow(r[i], e);
        double yi = std::log(W[i]);
        sx += xi;
        sy += yi;
        sxx += xi * xi;
        sxy += xi * yi;
    }
    double denom = double(n) * sxx - sx * sx;
    if (std::fabs(denom) < 1e-300) return {};
    double K = (double(n) * sxy - sx * sy) / denom;
    double lnA = (sy - K * sx) / double(n);
    double ss_res = 0, ss_tot = 0, mean = sy / double(n);
    for (std::size_t i = 0; i < n; ++i) {
        double fit = lnA + K * (-1.0 / std::pow(r[i], e));
        double yi = std::log(W[i]);
        ss_res += sq(yi - fit);
        ss_tot += sq(yi - mean);
    }
    ExpFit out;
    out.A = std::exp(lnA);
    out.K = K;
    out.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

}  // namespace detail

struct FlatnessRay {
    double r0 = 0.2;
    double q = 0.7;
    int count = 8;
    cplx lambda0 = 1.0;
};

// Measures the z-dependent part of the horn transition at mid-gate depth
// along a parameter ray and fits its decay exponent. The two direction
// configurations fix the construction pair being compared; identical configs
// short-circuit to a vacuous fit.
inline FlatnessFit flatness_fit(const ParabolicMap& map, const VectorFieldUnfolding& Xk,
                                const PetalSystem& ps, int petal_j, const DirectionConfig& cfgA,
                                const DirectionConfig& cfgB, const FlatnessRay& ray,
                                const DirectionAtlas& atlas, int n_phase = 16,
                                OrbitConfig orbit = {}) {
    FlatnessFit fit;
    if (cfgA.same_as(cfgB)) {
        fit.vacuous = true;
        fit.predicted_level = 0;
        return fit;
    }
    cfgA.Lambda.validate(atlas);
    cfgB.Lambda.validate(atlas);
    int d = agreement_depth(cfgA, cfgB, atlas);
    if (d >= atlas.q()) {
        // agree at every level: the difference is flat to all orders
        fit.vacuous = true;
        fit.predicted_level = 0;
        return fit;
    }
    fit.predicted_level = atlas.levels[std::size_t(d)];

    for (int m = 0; m < ray.count; ++m) {
        double r = ray.r0 * std::pow(ray.q, m);
        cplx x = r * ray.lambda0;
        FatouEvaluator ev_j(map, Xk, petal_j, x, ps, orbit);
        FatouEvaluator ev_next(map, Xk, petal_j + 1, x, ps, orbit);
        int s = ev_j.orientation();
        // gate depth: the psi-height of the mid-gate point between the two
        // singular values bounding the transition
        std::vector<cplx> sing;
        for (auto& c : map.fixed_curves().curves) sing.push_back(c.gamma.eval(x));
        cplx gate_mid = 0;
        double best = 1e300;
        for (std::size_t i = 0; i < sing.size(); ++i)
            for (std::size_t j2 = i + 1; j2 < sing.size(); ++j2) {
                double dd = std::abs(sing[i] - sing[j2]);
                if (dd > 1e-12 && dd < best) {
                    best = dd;
                    gate_mid = (sing[i] + sing[j2]) / 2.0;
                }
            }
        if (best == 1e300) throw numerical_error("flatness_fit: no gate between singular points");
        FatouFrame fr = ev_j.frame_at(gate_mid, +1);
        double gate_height = std::fabs((fr.value - ev_j.anchor_offset()).imag());
        double h_mid = 0.55 * gate_height;
        // wiggle of the transition map over one period at mid depth
        double mean_norm = 0;
        std::vector<cplx> vals(std::size_t(n_phase), cplx(0));
        for (int i = 0; i < n_phase; ++i) {
            double t = (i + 0.5) / n_phase;
            cplx z = t - cplx(0, 1) * double(s) * h_mid;
            auto v = horn_value(ev_j, ev_next, z);
            vals[std::size_t(i)] = v.psi - z;
        }
        cplx mean = 0;
        for (auto& v : vals) mean += v;
        mean /= double(n_phase);
        double wiggle = 0;
        for (auto& v : vals) wiggle = std::max(wiggle, std::abs(v - mean));
        mean_norm = std::abs(mean);
        (void)mean_norm;
        fit.radii.push_back(r);
        fit.differences.push_back(wiggle);
    }

    // keep points above the numerical floor
    std::vector<double> r_ok, w_ok;
    for (std::size_t i = 0; i < fit.radii.size(); ++i)
        if (fit.differences[i] > 1e-13) {
            r_ok.push_back(fit.radii[i]);
            w_ok.push_back(fit.differences[i]);
        }
    if (r_ok.size() < 4) {
        fit.vacuous = true;
        return fit;
    }

    // candidate exponents: the levels and nu, then a golden refinement
    std::vector<double> candidates;
    for (int e : atlas.levels) candidates.push_back(double(e));
    candidates.push_back(double(ps.nu));
    double best_e = candidates[0], best_r2 = -2;
    for (double e : candidates) {
        auto f = detail::fit_at_exponent(r_ok, w_ok, e);
        if (f.r2 > best_r2) {
            best_r2 = f.r2;
            best_e = e;
        }
    }
    double lo = best_e * 0.5, hi = best_e * 2.0;
    for (int it = 0; it < 60; ++it) {
        double m1 = lo + (hi - lo) * 0.382, m2 = lo + (hi - lo) * 0.618;
        double r1 = detail::fit_at_exponent(r_ok, w_ok, m1).r2;
        double r2v = detail::fit_at_exponent(r_ok, w_ok, m2).r2;
        if (r1 < r2v) lo = m1;
        else hi = m2;
    }
    fit.e_hat = (lo + hi) / 2;
    auto f = detail::fit_at_exponent(r_ok, w_ok, fit.e_hat);
    fit.K_hat = f.K;
    fit.amplitude = f.A;
    fit.r2 = f.r2;
    return fit;
}

// ---------------------------------------------------------------------------
// Conjugacy translation action

struct ConjugacyWitness {
    std::vector<cplx> x_samples;
    std::vector<cplx> c;            // translation constant per sample
    double max_residual = 0;        // relative consistency across (j, l)
    double translation_residual = 0; // |a0^eta - a0^phi| worst case
    bool undetermined = false;      // no usable nonvanishing coefficient
};

// Solves for c(x) from the best-conditioned nonvanishing coefficient ratio
// and validates a^eta_{j,l} = a^phi_{j,l} e^{2 pi i s l c} on the rest.
inline ConjugacyWitness conjugacy_translation(
    const std::vector<std::vector<HornMapSample>>& phi_samples,
    const std::vector<std::vector<HornMapSample>>& eta_samples) {
    if (phi_samples.size() != eta_samples.size())
        throw numerical_error("conjugacy_translation: sample grids differ");
    ConjugacyWitness w;
    for (std::size_t ix = 0; ix < phi_samples.size(); ++ix) {
        const auto& sp = phi_samples[ix];
        const auto& se = eta_samples[ix];
        if (sp.size() != se.size())
            throw numerical_error("conjugacy_translation: petal sets differ");
        // pick the best-SNR low-l coefficient
        double best_snr = 0;
        std::size_t bj = 0;
        int bl = 0;
        for (std::size_t j = 0; j < sp.size(); ++j) {
            for (int l = 1; l < int(sp[j].a.size()); ++l) {
                double snr = std::abs(sp[j].a[std::size_t(l)]) /
                             std::max(sp[j].noise[std::size_t(l)], 1e-300);
                double snr_e = std::abs(se[j].a[std::size_t(l)]) /
                               std::max(se[j].noise[std::size_t(l)], 1e-300);
                snr = std::min(snr, snr_e) / (1.0 + l);
                if (snr > best_snr) {
                    best_snr = snr;
                    bj = j;
                    bl = l;
                }
            }
        }
        if (best_snr < 30) {
            w.undetermined = true;
            w.x_samples.push_back(sp.empty() ? cplx(0) : sp[0].x);
            w.c.push_back(0);
            continue;
        }
        int s = sp[bj].s;
        cplx ratio = se[bj].a[std::size_t(bl)] / sp[bj].a[std::size_t(bl)];
        // c = log(ratio) / (2 pi i s l), branch of minimal modulus
        cplx c0 = std::log(ratio) / (cplx(0, 1) * 2.0 * pi * double(s) * double(bl));
        cplx best_c = c0;
        for (int k = -bl; k <= bl; ++k) {
            cplx cand = c0 + double(k) / double(bl);
            if (std::abs(cand) < std::abs(best_c)) best_c = cand;
        }
        // refine by SNR-weighted least squares over every usable coefficient:
        // each (j,l) contributes a phase measurement log(ratio)/(2 pi i s l)
        // near best_c
        {
            cplx acc = 0;
            double wsum = 0;
            for (std::size_t j = 0; j < sp.size(); ++j)
                for (int l = 1; l < int(sp[j].a.size()); ++l) {
                    double mag = std::abs(sp[j].a[std::size_t(l)]);
                    double nz = std::max(
                        {sp[j].noise[std::size_t(l)], se[j].noise[std::size_t(l)], 1e-300});
                    double snr = mag / nz;
                    if (snr < 100) continue;
                    cplx r = se[j].a[std::size_t(l)] / sp[j].a[std::size_t(l)];
                    cplx cjl =
                        std::log(r) / (cplx(0, 1) * 2.0 * pi * double(sp[j].s) * double(l));
                    // lattice-correct toward best_c
                    double korr = std::round(((cjl - best_c) * double(l)).real());
                    cjl -= korr / double(l);
                    double wt = snr * snr;
                    acc += wt * cjl;
                    wsum += wt;
                }
            if (wsum > 0) best_c = acc / wsum;
        }
        w.x_samples.push_back(sp[bj].x);
        w.c.push_back(best_c);
        // validate across all stored coefficients with usable SNR
        for (std::size_t j = 0; j < sp.size(); ++j) {
            // translation constants must agree outright
            w.translation_residual =
                std::max(w.translation_residual, std::abs(se[j].a[0] - sp[j].a[0]));
            for (int l = 1; l < int(sp[j].a.size()); ++l) {
                double mag = std::abs(sp[j].a[std::size_t(l)]);
                double floor_lvl =
                    30 * std::max(sp[j].noise[std::size_t(l)], se[j].noise[std::size_t(l)]);
                if (mag < floor_lvl) continue;
                cplx predicted =
                    sp[j].a[std::size_t(l)] *
                    std::exp(cplx(0, 1) * 2.0 * pi * double(sp[j].s) * double(l) * best_c);
                double resid = std::abs(se[j].a[std::size_t(l)] - predicted) / mag;
                w.max_residual = std::max(w.max_residual, resid);
            }
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// Cauchy-Heine transform

struct CauchyHeineResult {
    std::vector<cplx> h_flat;  // h_n^flat for n = 0..nmax
    double quad_error = 0;
};

namespace detail {

inline cplx adaptive_simpson(const std::function<cplx(double)>& f, double a, double b, cplx fa,
                             cplx fm, cplx fb, double tol, int depth, double* err_acc) {
    double m = (a + b) / 2;
    double lm = (a + m) / 2, rm = (m + b) / 2;
    cplx flm = f(lm), frm = f(rm);
    cplx whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    cplx left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    cplx right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    cplx delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) < 15 * tol) {
        if (err_acc) *err_acc += std::abs(delta) / 15;
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, tol / 2, depth - 1, err_acc) +
           adaptive_simpson(f, m, b, fm, frm, fb, tol / 2, depth - 1, err_acc);
}

inline cplx integrate_ray(const std::function<cplx(double)>& f, double a, double b, double tol,
                          double* err_acc) {
    cplx fa = f(a), fb = f(b), fm = f((a + b) / 2);
    return adaptive_simpson(f, a, b, fa, fm, fb, tol, 48, err_acc);
}

}  // namespace detail

// h_n^flat = (1/2 pi i) sum_k int_0^{c lambda_k'} (h_k - h_{k-1})(w) w^{-(n+1)} dw.
// The integrand vanishes to all orders at 0, so the quadrature starts where
// it rises above the underflow floor.
inline CauchyHeineResult cauchy_heine(const std::vector<std::function<cplx(cplx)>>& diffs,
                                      const std::vector<cplx>& ray_dirs, double c, int nmax,
                                      double tol = 1e-13) {
    if (diffs.size() != ray_dirs.size())
        throw numerical_error("cauchy_heine: one direction per difference required");
    CauchyHeineResult out;
    out.h_flat.assign(std::size_t(nmax) + 1, cplx(0));
    for (std::size_t k = 0; k < diffs.size(); ++k) {
        cplx dir = ray_dirs[k] / std::abs(ray_dirs[k]);
        for (int n = 0; n <= nmax; ++n) {
            auto integrand = [&](double t) -> cplx {
                if (t <= 0) return 0;
                cplx w = t * dir;
                return diffs[k](w) * std::pow(w, -(n + 1));
            };
            // find where the integrand emerges from the underflow floor
            double t_lo = c;
            for (double t = c; t > 1e-8; t *= 0.7) {
                if (std::abs(integrand(t)) < 1e-32) {
                    t_lo = t;
                    break;
                }
                t_lo = t;
            }
            double err = 0;
            cplx val = detail::integrate_ray(integrand, t_lo, c, tol, &err) * dir;
            out.h_flat[std::size_t(n)] += val / (2.0 * pi * cplx(0, 1));
            out.quad_error = std::max(out.quad_error, err);
        }
    }
    return out;
}

}  // namespace unfold
