#include "selgrad/verify.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "json.hpp"

namespace selgrad {

const std::vector<std::pair<double, double>>& gauss_legendre_16() {
    static const std::vector<std::pair<double, double>> table = [] {
        // Newton iteration on the Legendre polynomial, the usual gauleg.
        const int n = 16;
        std::vector<std::pair<double, double>> out(n);
        const int mid = (n + 1) / 2;
        for (int i = 0; i < mid; ++i) {
            double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j + 1.0) * x * p2 - j * p3) / (j + 1.0);
                }
                pp = n * (x * p1 - p2) / (x * x - 1.0);
                const double dx = p1 / pp;
                x -= dx;
                if (std::fabs(dx) < 1e-15) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * pp * pp);
            out[i] = {-x, w};
            out[n - 1 - i] = {x, w};
        }
        return out;
    }();
    return table;
}

SwitchScan detect_switch_points(const PiecewiseScalar& f, const Vec& x, const Vec& y, int grid, double param_tol) {
    SwitchScan scan;
    const Vec dir = vsub(y, x);
    auto at = [&](double t) {
        Vec pt(x.size());
        for (size_t i = 0; i < x.size(); ++i) pt[i] = x[i] + t * dir[i];
        return pt;
    };

    std::vector<int> prev = f.signature(at(0.0));
    for (int i = 1; i <= grid; ++i) {
        const double t = static_cast<double>(i) / grid;
        std::vector<int> cur = f.signature(at(t));
        if (cur != prev) {
            // Bisect down to the boundary parameter.
            double lo = static_cast<double>(i - 1) / grid, hi = t;
            std::vector<int> lo_sig = prev;
            while (hi - lo > param_tol) {
                const double mid = 0.5 * (lo + hi);
                if (f.signature(at(mid)) == lo_sig)
                    lo = mid;
                else
                    hi = mid;
            }
            scan.params.push_back(0.5 * (lo + hi));
        }
        prev = std::move(cur);
    }
    scan.overflow = scan.params.size() > 10000;
    return scan;
}

const char* rule_name(SelectionRule r) {
    switch (r) {
        case SelectionRule::SelectionGradient: return "selection";
        case SelectionRule::MinNorm: return "minnorm";
        case SelectionRule::RandomVertex: return "random";
        case SelectionRule::MaxInner: return "maxinner";
        case SelectionRule::MinInner: return "mininner";
    }
    return "?";
}

SelectionRule rule_from_name(const std::string& name) {
    if (name == "selection") return SelectionRule::SelectionGradient;
    if (name == "minnorm") return SelectionRule::MinNorm;
    if (name == "random") return SelectionRule::RandomVertex;
    if (name == "maxinner") return SelectionRule::MaxInner;
    if (name == "mininner") return SelectionRule::MinInner;
    throw std::invalid_argument("unknown selection rule '" + name + "' (selection|minnorm|random|maxinner|mininner)");
}

namespace {

Vec pick_vector(const PiecewiseScalar& f, const Vec& pt, const Vec& dir, SelectionRule rule, const IntegrateOptions& opts,
                CounterRng& rng) {
    if (rule == SelectionRule::SelectionGradient) return f.sel_gradient(pt);
    const GeneratorSet gens = f.generators(pt, opts.tol_active, opts.cap);
    const auto& g = gens.gradients;
    switch (rule) {
        case SelectionRule::MinNorm: return min_norm_point(g).point;
        case SelectionRule::RandomVertex: return g[rng.below(g.size())];
        case SelectionRule::MaxInner: {
            size_t best = 0;
            double bv = dot(g[0], dir);
            for (size_t i = 1; i < g.size(); ++i) {
                const double v = dot(g[i], dir);
                if (v > bv) {
                    bv = v;
                    best = i;
                }
            }
            return g[best];
        }
        case SelectionRule::MinInner: {
            size_t best = 0;
            double bv = dot(g[0], dir);
            for (size_t i = 1; i < g.size(); ++i) {
                const double v = dot(g[i], dir);
                if (v < bv) {
                    bv = v;
                    best = i;
                }
            }
            return g[best];
        }
        default: return f.sel_gradient(pt);
    }
}

}  // namespace

namespace {

struct SegmentIntegrator {
    const PiecewiseScalar& f;
    const Vec& a;
    const Vec dir;
    SelectionRule rule;
    const IntegrateOptions& opts;
    CounterRng& rng;
    int panels = 0;

    Vec at(double t) const {
        Vec pt(a.size());
        for (size_t i = 0; i < a.size(); ++i) pt[i] = a[i] + t * dir[i];
        return pt;
    }

    double panel(double t0, double t1) {
        const double c = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
        double acc = 0.0;
        for (const auto& [xi, w] : gauss_legendre_16())
            acc += w * dot(dir, pick_vector(f, at(c + half * xi), dir, rule, opts, rng));
        return acc * half;
    }

    // Bisect until the two half-panels reproduce the parent estimate; this
    // localizes any kink the switch scan missed. Order 16 throughout.
    double adaptive(double t0, double t1, double whole, int depth) {
        const double mid = 0.5 * (t0 + t1);
        const double left = panel(t0, mid);
        const double right = panel(mid, t1);
        const double sum = left + right;
        if (depth >= 40 || std::fabs(sum - whole) <= 1e-13 * (1.0 + std::fabs(sum))) {
            panels += 2;
            return sum;
        }
        return adaptive(t0, mid, left, depth + 1) + adaptive(mid, t1, right, depth + 1);
    }

    double piece(double lo, double hi) {
        double total = 0.0;
        const int base = std::max(1, static_cast<int>(std::ceil((hi - lo) * opts.max_panels)));
        for (int pnl = 0; pnl < base; ++pnl) {
            const double t0 = lo + (hi - lo) * pnl / base;
            const double t1 = lo + (hi - lo) * (pnl + 1) / base;
            total += adaptive(t0, t1, panel(t0, t1), 0);
        }
        return total;
    }
};

}  // namespace

QuadratureReport integrate_selection_gradient(const PiecewiseScalar& f, const PiecewisePath& path, SelectionRule rule,
                                              const IntegrateOptions& opts) {
    assert(path.segments() >= 1);
    QuadratureReport rep;
    CounterRng rng(CounterRng::derive_key(opts.seed, 17));
    const int nseg = path.segments();

    double total = 0.0;
    for (int s = 0; s < nseg; ++s) {
        const Vec& a = path.vertices[s];
        const Vec& b = path.vertices[s + 1];
        if (a == b) continue;  // degenerate segment contributes nothing
        const SwitchScan scan = detect_switch_points(f, a, b, opts.grid);
        rep.switch_overflow = rep.switch_overflow || scan.overflow;
        for (double t : scan.params) rep.switches.push_back((s + t) / nseg);

        SegmentIntegrator seg{f, a, vsub(b, a), rule, opts, rng};
        std::vector<double> cuts{0.0};
        cuts.insert(cuts.end(), scan.params.begin(), scan.params.end());
        cuts.push_back(1.0);
        for (size_t piece = 0; piece + 1 < cuts.size(); ++piece)
            if (cuts[piece + 1] > cuts[piece]) total += seg.piece(cuts[piece], cuts[piece + 1]);
        rep.panels += seg.panels;
    }

    rep.integral = total;
    rep.difference = f.value(path.vertices.back()) - f.value(path.vertices.front());
    rep.residual = std::fabs(rep.integral - rep.difference);
    std::sort(rep.switches.begin(), rep.switches.end());
    return rep;
}

std::string QuadratureReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["integral"] = integral;
    j["difference"] = difference;
    j["residual"] = residual;
    j["panels"] = panels;
    j["switches"] = switches;
    j["switch_overflow"] = switch_overflow;
    return j.dump(2);
}

double check_chain_rule(const SelectionFunction& outer, const std::vector<SelectionFunction>& inner, const Vec& x,
                        size_t cap) {
    const SelectionFunction composed = compose(outer, inner, cap);
    const Mat lhs = composed.jacobian(x);

    Vec fx(inner.size());
    for (size_t i = 0; i < inner.size(); ++i) fx[i] = inner[i].value1(x);
    const Mat rhs = matmul(outer.jacobian(fx), selection_jacobian(inner, x));
    return max_abs_diff(lhs, rhs);
}

AeFailure certify_boundary(const PiecewiseScalar& f, const Vec& x, const Vec& ad_grad, const Vec& fd_grad, double h) {
    AeFailure fail;
    fail.x = x;
    fail.ad_grad = ad_grad;
    fail.fd_grad = fd_grad;
    const int p = f.dim();
    for (int c = 0; c < p && !fail.certified; ++c) {
        Vec lo_pt = x, hi_pt = x;
        lo_pt[c] -= h;
        hi_pt[c] += h;
        const std::vector<int> lo_sig = f.signature(lo_pt);
        if (f.signature(hi_pt) == lo_sig) continue;
        double lo = -h, hi = h;
        while (hi - lo > 1e-15 * std::max(1.0, std::fabs(x[c]))) {
            const double mid = 0.5 * (lo + hi);
            Vec pt = x;
            pt[c] += mid;
            if (f.signature(pt) == lo_sig)
                lo = mid;
            else
                hi = mid;
        }
        fail.certified = true;
        fail.boundary_point = x;
        fail.boundary_point[c] += 0.5 * (lo + hi);
        fail.boundary_dist = std::fabs(0.5 * (lo + hi));
    }
    return fail;
}

AeReport check_gradient_ae(const PiecewiseScalar& f, const Box& domain, int n_points, CounterRng& rng,
                           const AeOptions& opts) {
    assert(domain.dim() == f.dim());
    AeReport rep;
    rep.samples = n_points;
    const int p = f.dim();
    for (int s = 0; s < n_points; ++s) {
        Vec x(p);
        for (int c = 0; c < p; ++c) x[c] = rng.uniform(domain.lo[c], domain.hi[c]);
        try {
            const Vec g = f.sel_gradient(x);
            Vec fd(p);
            bool ok = true;
            Vec probe = x;
            for (int c = 0; c < p; ++c) {
                probe[c] = x[c] + opts.h;
                const double fp = f.value(probe);
                probe[c] = x[c] - opts.h;
                const double fm = f.value(probe);
                probe[c] = x[c];
                fd[c] = (fp - fm) / (2.0 * opts.h);
                if (std::fabs(fd[c] - g[c]) > opts.rel_tol * (1.0 + norm_inf(g))) ok = false;
            }
            if (ok) continue;
            AeFailure fail = certify_boundary(f, x, g, fd, opts.h);
            if (!fail.certified) ++rep.uncertified;
            rep.failures.push_back(std::move(fail));
        } catch (const DomainFault&) {
            continue;  // outside the open domain, not a differentiability failure
        }
    }
    rep.failure_fraction = static_cast<double>(rep.failures.size()) / std::max(1, n_points);
    return rep;
}

}  // namespace selgrad
