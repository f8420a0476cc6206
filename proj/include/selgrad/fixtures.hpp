#pragma once

#include "selgrad/program.hpp"

namespace selgrad::fixtures {

// The five canonical univariate programs. All represent familiar functions
// (relu, relu, relu, 0, identity) yet their algorithmic derivatives at 0
// are 0, 1, 1/2, 1, 0 respectively.
Program relu_program();                  // relu(t)
Program relu2_program();                 // relu(-t) + t
Program relu3_program();                 // (relu(t) + relu2(t)) / 2
Program zero_program();                  // relu2(t) - relu(t)
Program identity_minus_zero_program();   // t - zero(t)

// Smooth references.
Program square_program();                // t^2
Program shifted_square_program(double center);  // (t - center)^2

// Building block: appends `count` input nodes then wires a chain; helper
// for handwritten fixtures.
struct ProgramBuilder {
    Program prog;

    explicit ProgramBuilder(int inputs);

    // Adds a node applying `fn` to the given predecessor ids, returns its id.
    int node(SelectionFunction fn, std::vector<int> preds);

    // Declares the last `q` nodes as outputs and returns the program.
    Program finish(int q = 1);
};

}  // namespace selgrad::fixtures
