#pragma once

#include "selgrad/program.hpp"
#include "selgrad/rng.hpp"

namespace selgrad {

struct ExprGenOptions {
    int arity = 1;
    int max_depth = 4;
    bool allow_div = true;
    bool allow_log = true;
};

// Random smooth expression from the grammar. May be partial (div/log);
// callers pair it with in-domain sample points via rejection.
Expr random_expr(CounterRng& rng, const ExprGenOptions& opts);

struct ProgramGenOptions {
    int p = 1;
    int min_nodes = 2;   // non-input nodes
    int max_nodes = 12;
    bool allow_exp = true;
    bool allow_mul = true;
};

// Random scalar-output DAG program over the continuous node library
// (relu, abs, max2, min2, affine combos, products, capped exponentials).
// Every node is globally continuous, so the program is an elementary
// selection and all integration/gradient identities apply on all of R^p.
Program random_piecewise_program(CounterRng& rng, const ProgramGenOptions& opts);

// In-domain sample with moderate node values: retries until the program
// evaluates with every |node value| <= bound. Returns false if no point is
// found (does not happen with the continuous node library).
bool sample_point(const Program& prog, CounterRng& rng, double lo, double hi, Vec& out, double bound = 1e4,
                  int tries = 64);

}  // namespace selgrad
