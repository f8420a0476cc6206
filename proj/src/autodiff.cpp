#include "selgrad/autodiff.hpp"

#include <cassert>

#include "selgrad/builtins.hpp"
#include "selgrad/fixtures.hpp"

namespace selgrad {

AdResult forward_ad(const Program& prog, const EvalTrace& trace) {
    assert(static_cast<int>(trace.values.size()) == prog.m);
    // tangent[k] = dx_k / dx, one row of length p per node
    std::vector<Vec> tangent(prog.m, Vec(prog.p, 0.0));
    for (int i = 0; i < prog.p; ++i) tangent[i][i] = 1.0;
    for (int k = prog.p; k < prog.m; ++k) {
        const auto& preds = prog.rel.pred[k];
        const Vec& d = trace.local_grad[k - prog.p];
        Vec& row = tangent[k];
        for (size_t j = 0; j < preds.size(); ++j) {
            const double w = d[j];
            if (w == 0.0) continue;
            const Vec& src = tangent[preds[j]];
            for (int c = 0; c < prog.p; ++c) row[c] += src[c] * w;
        }
    }
    AdResult out{Mat(prog.q, prog.p), AdMode::Forward, &trace};
    for (int o = 0; o < prog.q; ++o) {
        const Vec& row = tangent[prog.m - prog.q + o];
        for (int c = 0; c < prog.p; ++c) out.jacobian(o, c) = row[c];
    }
    return out;
}

AdResult backward_ad(const Program& prog, const EvalTrace& trace) {
    assert(static_cast<int>(trace.values.size()) == prog.m);
    AdResult out{Mat(prog.q, prog.p), AdMode::Backward, &trace};
    Vec v(prog.m, 0.0);
    for (int o = 0; o < prog.q; ++o) {
        std::fill(v.begin(), v.end(), 0.0);
        v[prog.m - prog.q + o] = 1.0;
        for (int t = prog.m - 1; t >= prog.p; --t) {
            const double vt = v[t];
            if (vt == 0.0) continue;
            const auto& preds = prog.rel.pred[t];
            const Vec& d = trace.local_grad[t - prog.p];
            for (size_t j = 0; j < preds.size(); ++j) v[preds[j]] += vt * d[j];
        }
        for (int c = 0; c < prog.p; ++c) out.jacobian(o, c) = v[c];
    }
    return out;
}

Vec backward_gradient(const Program& prog, const Vec& x) {
    assert(prog.q == 1);
    EvalTrace trace;
    evaluate(prog, x, trace);
    return backward_ad(prog, trace).gradient();
}

Vec forward_gradient(const Program& prog, const Vec& x) {
    assert(prog.q == 1);
    EvalTrace trace;
    evaluate(prog, x, trace);
    return forward_ad(prog, trace).gradient();
}

double check_modes_agree(const Program& prog, const Vec& x) {
    EvalTrace trace;
    evaluate(prog, x, trace);
    const AdResult f = forward_ad(prog, trace);
    const AdResult b = backward_ad(prog, trace);
    return max_abs_diff(f.jacobian, b.jacobian);
}

double check_backprop_identity(int p, int m, const std::vector<Vec>& d, double* entry_scale) {
    if (!(0 < p && p < m)) throw ProgramError("check_backprop_identity requires 0 < p < m");
    if (static_cast<int>(d.size()) != m - p) throw ProgramError("need one d vector per node p+1..m");
    for (const Vec& di : d)
        if (static_cast<int>(di.size()) != m) throw ProgramError("each d vector must have length m");

    Mat proj(m, m);
    for (int i = 0; i < p; ++i) proj(i, i) = 1.0;

    Mat lhs = proj;
    Mat rhs = proj;
    for (int i = p; i < m; ++i) {  // 0-based node i corresponds to e_{i+1}
        const Vec& di = d[i - p];
        Mat fl = Mat::identity(m);
        Mat fr = Mat::identity(m);
        for (int r = 0; r < m; ++r) {
            fl(r, i) += di[r];
            fr(r, i) += di[r];
        }
        fl(i, i) -= 1.0;  // the (I - e_i e_i^T) part
        lhs = matmul(lhs, fl);
        rhs = matmul(rhs, fr);
    }
    if (entry_scale) *entry_scale = std::max(max_abs_entry(lhs), max_abs_entry(rhs));
    return max_abs_diff(lhs, rhs);
}

Program prescribe_derivative(const Program& prog, int coord, double s0, double r) {
    if (prog.q != 1) throw ProgramError("prescribe_derivative requires a scalar-output program");
    if (coord < 0 || coord >= prog.p) throw ProgramError("coordinate out of range");

    fixtures::ProgramBuilder b(0);
    b.prog = prog;

    const int old_out = prog.m - 1;
    const int u = b.node(builtins::affine({1.0}, -s0), {coord});
    const int neg = b.node(builtins::negate1(), {u});
    const int r2a = b.node(builtins::relu(), {neg});
    const int relu2 = b.node(builtins::add2(), {r2a, u});
    const int r1 = b.node(builtins::relu(), {u});
    const int zero = b.node(builtins::sub2(), {relu2, r1});
    b.node(builtins::affine({1.0, r}, 0.0), {old_out, zero});
    return b.finish();
}

}  // namespace selgrad
