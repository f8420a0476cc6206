#include "selgrad/setfield.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace selgrad {

namespace {

// Closest point to the origin on the segment [a, b], with weights.
MinNormResult segment_min(const Vec& a, const Vec& b) {
    const Vec ab = vsub(b, a);
    const double denom = dot(ab, ab);
    double t = denom > 0.0 ? -dot(a, ab) / denom : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    Vec v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[i] = a[i] + t * ab[i];
    return {v, norm2(v), {1.0 - t, t}};
}

// Closest point to the origin on the triangle (a, b, c). The boundary is
// covered by the three edge projections; the interior candidate is added
// only when the barycentric test puts the projection strictly inside, which
// also keeps degenerate (collinear) triangles correct.
MinNormResult triangle_min(const Vec& a, const Vec& b, const Vec& c) {
    const MinNormResult on_ab = segment_min(a, b);
    const MinNormResult on_ac = segment_min(a, c);
    const MinNormResult on_bc = segment_min(b, c);

    MinNormResult best{on_ab.point, on_ab.norm, {on_ab.weights[0], on_ab.weights[1], 0.0}};
    if (on_ac.norm < best.norm) best = {on_ac.point, on_ac.norm, {on_ac.weights[0], 0.0, on_ac.weights[1]}};
    if (on_bc.norm < best.norm) best = {on_bc.point, on_bc.norm, {0.0, on_bc.weights[0], on_bc.weights[1]}};

    const Vec ab = vsub(b, a);
    const Vec ac = vsub(c, a);
    const Vec ap = vscale(a, -1.0);
    const Vec bp = vscale(b, -1.0);
    const Vec cp = vscale(c, -1.0);
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    const double va = d3 * d6 - d5 * d4;
    const double vb = d5 * d2 - d1 * d6;
    const double vc = d1 * d4 - d3 * d2;
    if (va > 0.0 && vb > 0.0 && vc > 0.0) {
        const double denom = va + vb + vc;
        const double v = vb / denom, w = vc / denom;
        Vec pt(a.size());
        for (size_t i = 0; i < a.size(); ++i) pt[i] = a[i] + ab[i] * v + ac[i] * w;
        const double nn = norm2(pt);
        if (nn < best.norm) best = {pt, nn, {1.0 - v - w, v, w}};
    }
    return best;
}

// Affine minimizer of |sum alpha_i g_i| with sum alpha = 1 over the corral.
bool affine_minimizer(const std::vector<Vec>& gens, const std::vector<int>& corral, Vec& alpha) {
    const int k = static_cast<int>(corral.size());
    Mat kkt(k + 1, k + 1);
    Vec rhs(k + 1, 0.0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) kkt(i, j) = dot(gens[corral[i]], gens[corral[j]]);
        kkt(i, k) = 1.0;
        kkt(k, i) = 1.0;
    }
    rhs[k] = 1.0;
    Vec sol;
    if (!solve_linear(kkt, rhs, sol)) {
        // Degenerate gram matrix (affinely dependent corral): tiny ridge.
        double tr = 0.0;
        for (int i = 0; i < k; ++i) tr += kkt(i, i);
        const double ridge = 1e-12 * (1.0 + tr / std::max(1, k));
        for (int i = 0; i < k; ++i) kkt(i, i) += ridge;
        if (!solve_linear(kkt, rhs, sol)) return false;
    }
    alpha.assign(sol.begin(), sol.begin() + k);
    return true;
}

Vec combination(const std::vector<Vec>& gens, const std::vector<int>& corral, const Vec& w) {
    Vec v(gens[0].size(), 0.0);
    for (size_t i = 0; i < corral.size(); ++i)
        for (size_t c = 0; c < v.size(); ++c) v[c] += w[i] * gens[corral[i]][c];
    return v;
}

MinNormResult wolfe(const std::vector<Vec>& gens) {
    const int n = static_cast<int>(gens.size());
    int best = 0;
    double best_norm = dot(gens[0], gens[0]);
    for (int i = 1; i < n; ++i) {
        const double s = dot(gens[i], gens[i]);
        if (s < best_norm) {
            best_norm = s;
            best = i;
        }
    }
    std::vector<int> corral{best};
    Vec lambda{1.0};
    Vec v = gens[best];

    const int max_major = 16 * n + 64;
    for (int major = 0; major < max_major; ++major) {
        // Most improving vertex outside the corral.
        int j = -1;
        double bestdot = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (std::find(corral.begin(), corral.end(), i) != corral.end()) continue;
            const double s = dot(v, gens[i]);
            if (s < bestdot) {
                bestdot = s;
                j = i;
            }
        }
        const double vv = dot(v, v);
        if (j < 0 || bestdot >= vv - 1e-14 * (1.0 + vv)) break;
        corral.push_back(j);
        lambda.push_back(0.0);

        for (int minor = 0; minor < 4 * n + 16; ++minor) {
            Vec alpha;
            if (!affine_minimizer(gens, corral, alpha)) {
                corral.pop_back();
                lambda.pop_back();
                break;
            }
            const double amin = *std::min_element(alpha.begin(), alpha.end());
            if (amin >= -1e-12) {
                for (double& a : alpha) a = std::max(a, 0.0);
                double s = 0.0;
                for (double a : alpha) s += a;
                for (double& a : alpha) a /= s;
                lambda = alpha;
                break;
            }
            // Step toward alpha until the first weight hits zero.
            double theta = 1.0;
            for (size_t i = 0; i < alpha.size(); ++i)
                if (alpha[i] < 0.0) theta = std::min(theta, lambda[i] / (lambda[i] - alpha[i]));
            for (size_t i = 0; i < alpha.size(); ++i) lambda[i] = (1.0 - theta) * lambda[i] + theta * alpha[i];
            // Drop vanished vertices.
            for (int i = static_cast<int>(corral.size()) - 1; i >= 0; --i)
                if (lambda[i] <= 1e-14) {
                    corral.erase(corral.begin() + i);
                    lambda.erase(lambda.begin() + i);
                }
        }
        v = combination(gens, corral, lambda);
    }

    MinNormResult out;
    out.point = v;
    out.norm = norm2(v);
    out.weights.assign(n, 0.0);
    for (size_t i = 0; i < corral.size(); ++i) out.weights[corral[i]] = lambda[i];
    return out;
}

}  // namespace

MinNormResult min_norm_point(const std::vector<Vec>& generators) {
    assert(!generators.empty());
    // Exact duplicates collapse onto their first occurrence.
    std::vector<int> rep;
    std::vector<Vec> unique;
    for (const Vec& g : generators) {
        int found = -1;
        for (size_t u = 0; u < unique.size(); ++u)
            if (unique[u] == g) {
                found = static_cast<int>(u);
                break;
            }
        if (found < 0) {
            found = static_cast<int>(unique.size());
            unique.push_back(g);
        }
        rep.push_back(found);
    }

    MinNormResult inner;
    switch (unique.size()) {
        case 1: inner = {unique[0], norm2(unique[0]), {1.0}}; break;
        case 2: inner = segment_min(unique[0], unique[1]); break;
        case 3: inner = triangle_min(unique[0], unique[1], unique[2]); break;
        default: inner = wolfe(unique); break;
    }

    MinNormResult out;
    out.point = inner.point;
    out.norm = inner.norm;
    out.weights.assign(generators.size(), 0.0);
    std::vector<bool> used(unique.size(), false);
    for (size_t i = 0; i < generators.size(); ++i) {
        const int u = rep[i];
        if (!used[u]) {
            used[u] = true;
            out.weights[i] = inner.weights[u];
        }
    }
    return out;
}

double hull_distance(const std::vector<Vec>& generators, const Vec& v) {
    std::vector<Vec> shifted;
    shifted.reserve(generators.size());
    for (const Vec& g : generators) shifted.push_back(vsub(g, v));
    return min_norm_point(shifted).norm;
}

CloudResult clarke_sample(const PiecewiseScalar& f, const Vec& x, double radius, int n_samples, CounterRng& rng,
                          double fd_rel_tol, double fd_step) {
    assert(radius > 0.0);
    const int p = f.dim();
    const double h = fd_step > 0.0 ? fd_step : radius / 100.0;

    CloudResult out;
    out.radius = radius;
    for (int s = 0; s < n_samples; ++s) {
        Vec y = vadd(x, rng.in_ball(p, radius));
        ++out.tried;
        try {
            const Vec g = f.sel_gradient(y);
            bool ok = true;
            Vec probe = y;
            for (int c = 0; c < p && ok; ++c) {
                probe[c] = y[c] + h;
                const double fp = f.value(probe);
                probe[c] = y[c] - h;
                const double fm = f.value(probe);
                probe[c] = y[c];
                const double fd = (fp - fm) / (2.0 * h);
                if (std::fabs(fd - g[c]) > fd_rel_tol * (1.0 + norm_inf(g))) ok = false;
            }
            if (!ok) continue;
            ++out.certified;
            out.gradients.push_back(g);
        } catch (const DomainFault&) {
            continue;
        }
    }
    out.enough = out.certified >= 10;
    return out;
}

const char* criticality_name(Criticality c) {
    switch (c) {
        case Criticality::NonCritical: return "non-critical";
        case Criticality::ClarkeCritical: return "Clarke-critical";
        case Criticality::ArtificialCritical: return "artificial-critical";
    }
    return "?";
}

CriticalityReport classify(const PiecewiseScalar& f, const Vec& x, const ClassifyOptions& opts) {
    CriticalityReport rep;
    rep.x = x;
    rep.tol_D = opts.tol_D;
    rep.tol_C = opts.tol_C;
    rep.tol_active = opts.tol_active;
    rep.cloud_radius = opts.clarke_radius;

    const GeneratorSet gens = f.generators(x, opts.tol_active, opts.cap);
    rep.generator_count = static_cast<int>(gens.gradients.size());
    rep.truncated = gens.truncated;
    const MinNormResult mn = min_norm_point(gens.gradients);
    rep.set_min_norm = mn.norm;
    rep.weights = mn.weights;

    CounterRng rng(CounterRng::derive_key(opts.seed, 0));
    const CloudResult cloud = clarke_sample(f, x, opts.clarke_radius, opts.clarke_samples, rng);
    rep.cloud_size = cloud.certified;
    rep.cloud_ok = cloud.enough;
    rep.clarke_min_norm =
        cloud.gradients.empty() ? std::numeric_limits<double>::infinity() : min_norm_point(cloud.gradients).norm;

    if (rep.set_min_norm > opts.tol_D)
        rep.cls = Criticality::NonCritical;
    else if (rep.clarke_min_norm <= opts.tol_C)
        rep.cls = Criticality::ClarkeCritical;
    else
        rep.cls = Criticality::ArtificialCritical;
    return rep;
}

std::string CriticalityReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["point"] = x;
    j["set_min_norm"] = set_min_norm;
    j["clarke_min_norm"] = clarke_min_norm;
    j["classification"] = criticality_name(cls);
    j["weights"] = weights;
    j["generator_count"] = generator_count;
    j["truncated"] = truncated;
    j["cloud"] = {{"size", cloud_size}, {"radius", cloud_radius}, {"enough", cloud_ok}};
    j["tolerances"] = {{"tol_D", tol_D}, {"tol_C", tol_C}, {"tol_active", tol_active}};
    return j.dump(2);
}

double closed_graph_probe(const PiecewiseScalar& f, const Vec& xbar, const std::vector<Vec>& approach,
                          double tol_active, size_t cap) {
    assert(!approach.empty());
    const GeneratorSet at_bar = f.generators(xbar, tol_active, cap);

    const Vec& last = approach.back();
    std::vector<Vec> candidates = f.generators(last, tol_active, cap).gradients;
    candidates.push_back(f.sel_gradient(last));

    double worst = 0.0;
    for (const Vec& v : candidates) worst = std::max(worst, hull_distance(at_bar.gradients, v));
    return worst;
}

}  // namespace selgrad
