#include "selgrad/generate.hpp"

#include <cmath>

#include "selgrad/builtins.hpp"
#include "selgrad/fixtures.hpp"

namespace selgrad {

Expr random_expr(CounterRng& rng, const ExprGenOptions& opts) {
    if (opts.max_depth <= 0) {
        switch (rng.below(3)) {
            case 0: return Expr::constant(opts.arity, rng.uniform(-2.0, 2.0));
            case 1: return Expr::variable(opts.arity, static_cast<int>(rng.below(opts.arity)));
            default: {
                Vec w(opts.arity);
                for (double& c : w) c = rng.uniform(-1.5, 1.5);
                return Expr::affine(std::move(w), rng.uniform(-1.0, 1.0));
            }
        }
    }
    ExprGenOptions sub = opts;
    sub.max_depth = opts.max_depth - 1;
    const int pick = static_cast<int>(rng.below(8));
    switch (pick) {
        case 0: return Expr::add(random_expr(rng, sub), random_expr(rng, sub));
        case 1: return Expr::sub(random_expr(rng, sub), random_expr(rng, sub));
        case 2: return Expr::mul(random_expr(rng, sub), random_expr(rng, sub));
        case 3:
            if (opts.allow_div) return Expr::div(random_expr(rng, sub), random_expr(rng, sub));
            return Expr::add(random_expr(rng, sub), random_expr(rng, sub));
        case 4:
            return Expr::exp(Expr::mul(Expr::constant(opts.arity, rng.uniform(-0.4, 0.4)), random_expr(rng, sub)));
        case 5:
            if (opts.allow_log) return Expr::log(random_expr(rng, sub));
            return Expr::mul(random_expr(rng, sub), random_expr(rng, sub));
        default: {
            sub.max_depth = 0;
            return random_expr(rng, sub);
        }
    }
}

Program random_piecewise_program(CounterRng& rng, const ProgramGenOptions& opts) {
    fixtures::ProgramBuilder b(opts.p);
    const int n_nodes = opts.min_nodes + static_cast<int>(rng.below(opts.max_nodes - opts.min_nodes + 1));

    auto pred1 = [&](int upper) { return static_cast<int>(rng.below(upper)); };

    for (int k = 0; k < n_nodes; ++k) {
        const int upper = b.prog.m;
        const int kind = static_cast<int>(rng.below(8));
        switch (kind) {
            case 0: b.node(builtins::relu(), {pred1(upper)}); break;
            case 1: b.node(builtins::abs(), {pred1(upper)}); break;
            case 2: b.node(builtins::max2(), {pred1(upper), pred1(upper)}); break;
            case 3: b.node(builtins::min2(), {pred1(upper), pred1(upper)}); break;
            case 4: {
                const double w0 = rng.uniform(-0.9, 0.9), w1 = rng.uniform(-0.9, 0.9);
                b.node(builtins::affine({w0, w1}, rng.uniform(-0.5, 0.5)), {pred1(upper), pred1(upper)});
                break;
            }
            case 5:
                if (opts.allow_mul) {
                    b.node(builtins::mul2(), {pred1(upper), pred1(upper)});
                    break;
                }
                [[fallthrough]];
            case 6:
                if (opts.allow_exp) {
                    b.node(builtins::exp1(rng.uniform(-0.25, 0.25)), {pred1(upper)});
                    break;
                }
                [[fallthrough]];
            default: b.node(builtins::affine({rng.uniform(-0.9, 0.9)}, rng.uniform(-0.5, 0.5)), {pred1(upper)}); break;
        }
    }
    // Make the output depend on the whole tail so upstream kinks matter.
    const int a = b.prog.m - 1;
    const int c = b.prog.m - 2;
    b.node(builtins::affine({0.7, 0.4}, 0.0), {a, c});
    return b.finish();
}

bool sample_point(const Program& prog, CounterRng& rng, double lo, double hi, Vec& out, double bound, int tries) {
    EvalTrace trace;
    for (int t = 0; t < tries; ++t) {
        Vec x = rng.uniform_vec(prog.p, lo, hi);
        try {
            evaluate(prog, x, trace);
        } catch (const DomainFault&) {
            continue;
        }
        bool ok = true;
        for (double v : trace.values)
            if (!std::isfinite(v) || std::fabs(v) > bound) {
                ok = false;
                break;
            }
        if (ok) {
            out = std::move(x);
            return true;
        }
    }
    return false;
}

}  // namespace selgrad
