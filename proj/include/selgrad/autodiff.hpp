#pragma once

#include "selgrad/program.hpp"

namespace selgrad {

enum class AdMode : uint8_t { Forward, Backward };

struct AdResult {
    Mat jacobian;  // q x p
    AdMode mode;
    const EvalTrace* trace = nullptr;  // non-owning source trace

    Vec gradient() const { return jacobian.row(0); }  // q == 1 convenience
};

// Forward mode: propagates the p-dimensional tangent row of every node in
// index order, seeding input k with e_k.
AdResult forward_ad(const Program& prog, const EvalTrace& trace);

// Backward mode: one adjoint sweep per output node; v starts as the output
// seed and node t updates v[j] += v[t] * d_t[j] for j in pred(t), sweeping
// t from the last node down.
AdResult backward_ad(const Program& prog, const EvalTrace& trace);

Vec backward_gradient(const Program& prog, const Vec& x);  // q == 1
Vec forward_gradient(const Program& prog, const Vec& x);   // q == 1

// Max absolute entry difference between the two modes at x.
double check_modes_agree(const Program& prog, const Vec& x);

// Materializes both matrix products of the backprop algebra identity
//   P_p (I - e_i e_i^T + d_i e_i^T)...  ==  P_p (I + d_i e_i^T)...
// for i = p+1..m (ascending factor order) and returns the max entry
// difference. d[i - p - 1] is the (arbitrary) vector attached to node i;
// indices here are 1-based to mirror the algebra. When entry_scale is
// given, it receives the largest entry magnitude across both products.
double check_backprop_identity(int p, int m, const std::vector<Vec>& d, double* entry_scale = nullptr);

// Returns a program computing the same function as `prog` (exactly, in
// floating point) whose backward derivative at points with
// x[coord] == s0 is shifted by r along e_coord: the spiked-zero chain
// r * zero(x[coord] - s0) is added to the scalar output.
Program prescribe_derivative(const Program& prog, int coord, double s0, double r);

}  // namespace selgrad
