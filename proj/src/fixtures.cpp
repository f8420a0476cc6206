#include "selgrad/fixtures.hpp"

#include "selgrad/builtins.hpp"

namespace selgrad::fixtures {

ProgramBuilder::ProgramBuilder(int inputs) {
    prog.p = inputs;
    prog.m = inputs;
    prog.rel.node_count = inputs;
    prog.rel.pred.assign(inputs, {});
}

int ProgramBuilder::node(SelectionFunction fn, std::vector<int> preds) {
    const int id = prog.m++;
    prog.rel.node_count = prog.m;
    prog.rel.pred.push_back(std::move(preds));
    prog.nodes.push_back(std::move(fn));
    return id;
}

Program ProgramBuilder::finish(int q) {
    prog.q = q;
    return prog;
}

Program relu_program() {
    ProgramBuilder b(1);
    b.node(builtins::relu(), {0});
    return b.finish();
}

Program relu2_program() {
    ProgramBuilder b(1);
    const int neg = b.node(builtins::negate1(), {0});
    const int r = b.node(builtins::relu(), {neg});
    b.node(builtins::add2(), {r, 0});
    return b.finish();
}

Program relu3_program() {
    ProgramBuilder b(1);
    const int r1 = b.node(builtins::relu(), {0});
    const int neg = b.node(builtins::negate1(), {0});
    const int r2 = b.node(builtins::relu(), {neg});
    const int relu2 = b.node(builtins::add2(), {r2, 0});
    const int s = b.node(builtins::add2(), {r1, relu2});
    b.node(builtins::affine({0.5}, 0.0), {s});
    return b.finish();
}

namespace {

// Appends the nodes of zero(u) = (relu(-u) + u) - relu(u) on top of the
// node holding u; returns the id of the zero node.
int append_zero_chain(ProgramBuilder& b, int u) {
    const int neg = b.node(builtins::negate1(), {u});
    const int r2a = b.node(builtins::relu(), {neg});
    const int relu2 = b.node(builtins::add2(), {r2a, u});
    const int r1 = b.node(builtins::relu(), {u});
    return b.node(builtins::sub2(), {relu2, r1});
}

}  // namespace

Program zero_program() {
    ProgramBuilder b(1);
    append_zero_chain(b, 0);
    return b.finish();
}

Program identity_minus_zero_program() {
    ProgramBuilder b(1);
    const int z = append_zero_chain(b, 0);
    b.node(builtins::sub2(), {0, z});
    return b.finish();
}

Program square_program() {
    ProgramBuilder b(1);
    b.node(builtins::square1(), {0});
    return b.finish();
}

Program shifted_square_program(double center) {
    ProgramBuilder b(1);
    const int shifted = b.node(builtins::affine({1.0}, -center), {0});
    b.node(builtins::square1(), {shifted});
    return b.finish();
}

}  // namespace selgrad::fixtures
