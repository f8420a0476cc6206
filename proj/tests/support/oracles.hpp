#pragma once

// Test-side oracles, independent of the library's differentiation paths:
// central finite differences and rejection-sampled in-domain points for the
// random expression grammar.

#include <cmath>
#include <functional>
#include <optional>

#include "selgrad/expr.hpp"
#include "selgrad/generate.hpp"
#include "selgrad/rng.hpp"

namespace oracles {

using selgrad::Expr;
using selgrad::Vec;

inline Vec central_fd(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    Vec g(x.size());
    Vec probe = x;
    for (size_t c = 0; c < x.size(); ++c) {
        probe[c] = x[c] + h;
        const double fp = f(probe);
        probe[c] = x[c] - h;
        const double fm = f(probe);
        probe[c] = x[c];
        g[c] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// A well-conditioned (expr, point) pair: every node value stays moderate in
// an h-neighborhood so that central differences are trustworthy.
struct TamePair {
    Expr expr;
    Vec x;
};

inline std::optional<TamePair> try_tame_pair(selgrad::CounterRng& rng, int arity, int depth) {
    selgrad::ExprGenOptions opts;
    opts.arity = arity;
    opts.max_depth = depth;
    const Expr e = selgrad::random_expr(rng, opts);
    const Vec x = rng.uniform_vec(arity, -1.5, 1.5);

    // Reject ill-conditioned samples: faults, large node values, near-zero
    // denominators or log arguments anywhere in the tree.
    Vec values;
    try {
        e.eval_nodes(x, values);
    } catch (const selgrad::DomainFault&) {
        return std::nullopt;
    }
    for (double v : values)
        if (!std::isfinite(v) || std::fabs(v) > 1e3) return std::nullopt;
    for (int i = 0; i < e.node_count(); ++i) {
        const auto& n = e.node(i);
        if (n.op == selgrad::ExprOp::Div && std::fabs(values[n.b]) < 1e-2) return std::nullopt;
        if (n.op == selgrad::ExprOp::Log && values[n.a] < 1e-2) return std::nullopt;
    }
    const Vec g = e.gradient(x);
    for (double v : g)
        if (!std::isfinite(v) || std::fabs(v) > 1e3) return std::nullopt;
    return TamePair{e, x};
}

inline TamePair tame_pair(selgrad::CounterRng& rng, int arity, int depth) {
    for (;;) {
        auto p = try_tame_pair(rng, arity, depth);
        if (p) return *p;
    }
}

}  // namespace oracles
