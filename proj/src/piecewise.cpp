#include "selgrad/piecewise.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "selgrad/autodiff.hpp"

namespace selgrad {

namespace {

void push_unique(std::vector<Vec>& out, Vec g) {
    for (const Vec& h : out)
        if (h == g) return;
    out.push_back(std::move(g));
}

}  // namespace

ProgramFn::ProgramFn(Program prog) : prog_(std::move(prog)) {
    assert(prog_.q == 1);
}

double ProgramFn::value(const Vec& x) const { return evaluate1(prog_, x); }

Vec ProgramFn::sel_gradient(const Vec& x) const { return backward_gradient(prog_, x); }

std::vector<int> ProgramFn::signature(const Vec& x) const { return branch_signature(prog_, x); }

GeneratorSet ProgramFn::generators(const Vec& x, double tol, size_t cap) const {
    EvalTrace trace;
    evaluate(prog_, x, trace);

    // Per node: branches matching the traced value, with their local
    // gradients. The traced branch always qualifies (exact equality).
    const int n_nodes = prog_.m - prog_.p;
    std::vector<std::vector<Vec>> choices(n_nodes);
    Vec args;
    for (int k = prog_.p; k < prog_.m; ++k) {
        const auto& preds = prog_.rel.pred[k];
        args.resize(preds.size());
        for (size_t j = 0; j < preds.size(); ++j) args[j] = trace.values[preds[j]];
        const SelectionFunction& g = prog_.nodes[k - prog_.p];
        const double scale = tol * (1.0 + std::fabs(trace.values[k]));
        for (int b = 0; b < g.branch_count(); ++b) {
            Vec node_values;
            try {
                g.branch(b)[0].eval_nodes(args, node_values);
            } catch (const DomainFault&) {
                continue;  // branch not defined here, not active
            }
            if (std::fabs(node_values.back() - trace.values[k]) <= scale)
                choices[k - prog_.p].push_back(g.branch(b)[0].gradient_with_values(args, node_values));
        }
    }

    GeneratorSet out;
    out.tol = tol;

    // Enumerate assignments lexicographically, capped.
    std::vector<size_t> idx(n_nodes, 0);
    std::vector<Vec> d(n_nodes);
    size_t produced = 0;
    Vec v(prog_.m, 0.0);
    for (;;) {
        if (produced >= cap) {
            out.truncated = true;
            break;
        }
        ++produced;
        for (int k = 0; k < n_nodes; ++k) d[k] = choices[k][idx[k]];

        std::fill(v.begin(), v.end(), 0.0);
        v[prog_.m - 1] = 1.0;
        for (int t = prog_.m - 1; t >= prog_.p; --t) {
            const double vt = v[t];
            if (vt == 0.0) continue;
            const auto& preds = prog_.rel.pred[t];
            const Vec& dt = d[t - prog_.p];
            for (size_t j = 0; j < preds.size(); ++j) v[preds[j]] += vt * dt[j];
        }
        push_unique(out.gradients, Vec(v.begin(), v.begin() + prog_.p));

        int k = n_nodes;
        bool done = n_nodes == 0;
        while (k > 0) {
            --k;
            if (++idx[k] < choices[k].size()) break;
            idx[k] = 0;
            if (k == 0) done = true;
        }
        if (done) break;
    }
    return out;
}

SelectionFn::SelectionFn(SelectionFunction f) : f_(std::move(f)) {
    assert(f_.out_dim() == 1);
}

double SelectionFn::value(const Vec& x) const { return f_.value1(x); }

Vec SelectionFn::sel_gradient(const Vec& x) const { return f_.gradient(x); }

std::vector<int> SelectionFn::signature(const Vec& x) const { return {f_.index_of(x)}; }

GeneratorSet SelectionFn::generators(const Vec& x, double tol, size_t cap) const {
    GeneratorSet out;
    out.tol = tol;
    const double fx = f_.value1(x);
    const double scale = tol * (1.0 + std::fabs(fx));
    for (int b = 0; b < f_.branch_count(); ++b) {
        if (static_cast<size_t>(b) >= cap) {
            out.truncated = true;
            break;
        }
        Vec node_values;
        try {
            f_.branch(b)[0].eval_nodes(x, node_values);
        } catch (const DomainFault&) {
            continue;
        }
        if (std::fabs(node_values.back() - fx) <= scale)
            push_unique(out.gradients, f_.branch(b)[0].gradient_with_values(x, node_values));
    }
    return out;
}

std::vector<Mat> active_jacobians(const SelectionFunction& f, const Vec& x, double tol) {
    const Vec fx = f.value(x);
    const double scale = tol * (1.0 + norm_inf(fx));
    std::vector<Mat> out;
    for (int b = 0; b < f.branch_count(); ++b) {
        bool active = true;
        std::vector<Vec> values(f.out_dim());
        try {
            for (int k = 0; k < f.out_dim() && active; ++k) {
                f.branch(b)[k].eval_nodes(x, values[k]);
                if (std::fabs(values[k].back() - fx[k]) > scale) active = false;
            }
        } catch (const DomainFault&) {
            active = false;
        }
        if (!active) continue;
        Mat jac(f.out_dim(), f.arity());
        for (int k = 0; k < f.out_dim(); ++k) {
            const Vec g = f.branch(b)[k].gradient_with_values(x, values[k]);
            for (int j = 0; j < f.arity(); ++j) jac(k, j) = g[j];
        }
        bool dup = false;
        for (const Mat& m : out)
            if (m.a == jac.a) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(std::move(jac));
    }
    return out;
}

}  // namespace selgrad
