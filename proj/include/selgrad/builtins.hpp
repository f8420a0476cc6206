#pragma once

#include "selgrad/selection.hpp"

namespace selgrad::builtins {

// relu(t) = max(0, t) with the branch layout used throughout: branch 0 is
// the constant 0 on {t <= 0}, branch 1 is t. The selection derivative at 0
// is therefore 0.
SelectionFunction relu();

// Strict-inequality twin: branch 0 on {t < 0}; the selection derivative at
// 0 is 1. Same function, different program.
SelectionFunction relu_strict();

// abs(t): branch 0 = -t on {t <= 0}, branch 1 = t.
SelectionFunction abs();

// max2 / min2 over (x0, x1), ties resolved to the first argument.
SelectionFunction max2();
SelectionFunction min2();

// Smooth one-branch helpers over the given arity.
SelectionFunction identity1();              // t
SelectionFunction negate1();                // -t
SelectionFunction constant(int arity, double c);
SelectionFunction affine(Vec coeffs, double offset);
SelectionFunction add2();                   // x0 + x1
SelectionFunction sub2();                   // x0 - x1
SelectionFunction mul2();                   // x0 * x1
SelectionFunction div2();                   // x0 / x1
SelectionFunction exp1(double coeff = 1.0); // exp(coeff * t)
SelectionFunction log1();                   // log(t)
SelectionFunction square1();                // t * t

// The representation of the null function from which AD extracts a nonzero
// derivative: index 0 (branch 0) everywhere except the origin, index 1
// (branch t) exactly at 0.
SelectionFunction spiked_zero();

// Descending 2-d sorting map as a two-branch selection with permutation
// branches: (x0, x1) on {x0 - x1 >= 0}, else (x1, x0).
SelectionFunction sort2_desc();

// select-style guarded choice over k branches of arity k (used by tests).
}  // namespace selgrad::builtins
