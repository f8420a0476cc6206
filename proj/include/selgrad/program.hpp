#pragma once

#include <functional>
#include <string>
#include <vector>

#include "selgrad/selection.hpp"

namespace selgrad {

// Dependency structure of a straight-line program: pred[i] lists the nodes
// feeding node i. Indices are 0-based throughout; nodes 0..p-1 are inputs.
struct PredecessorRelation {
    int node_count = 0;
    std::vector<std::vector<int>> pred;
};

struct Violation {
    int node;
    std::string what;
};

// P = (p, q, m, pred, nodes): nodes p..m-1 each apply a scalar selection
// function to the values of their predecessors; the outputs are the last q
// node values. Values are never overwritten, so one evaluation keeps the
// whole trace.
struct Program {
    int p = 0;
    int q = 0;
    int m = 0;
    PredecessorRelation rel;
    std::vector<SelectionFunction> nodes;  // nodes[k] drives node p+k

    std::vector<Violation> validate() const;

    std::string to_json() const;
    static Program from_json(const std::string& text);
};

struct EvalTrace {
    Vec values;                   // all m node values
    std::vector<Vec> local_grad;  // d_i over predecessors, for nodes p..m-1
    std::vector<int> branch;      // chosen branch id per node p..m-1
};

// Algorithm: for k = p..m-1 set x_k = g_k(x_pred(k)), recording values,
// frozen-branch local gradients and branch choices. Domain faults are
// annotated with the offending node id.
Vec evaluate(const Program& prog, const Vec& x, EvalTrace& trace);
Vec evaluate(const Program& prog, const Vec& x);
double evaluate1(const Program& prog, const Vec& x);  // q == 1

// The input-output map, as a plain callable.
std::function<Vec(const Vec&)> function_of(const Program& prog);

// Per-node branch choices at x, used as a piecewise "signature".
std::vector<int> branch_signature(const Program& prog, const Vec& x);

// Folds the whole DAG through the selection calculus into one explicit
// representation of the program's function (q == 1). Throws
// BranchCapExceeded when the refined branch count passes the cap.
SelectionFunction selection_of(const Program& prog, size_t cap = kDefaultBranchCap);

struct ProgramError : std::runtime_error {
    explicit ProgramError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace selgrad
