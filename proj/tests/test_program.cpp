#include "doctest.h"

#include <cmath>

#include "selgrad/autodiff.hpp"
#include "selgrad/builtins.hpp"
#include "selgrad/fixtures.hpp"
#include "selgrad/program.hpp"
#include "support/oracles.hpp"

using namespace selgrad;

TEST_CASE("relu program validates") {
    const Program prog = fixtures::relu_program();
    CHECK(prog.validate().empty());
    CHECK(prog.p == 1);
    CHECK(prog.q == 1);
    CHECK(prog.m == 2);
}

TEST_CASE("validation catches broken predecessor order") {
    Program prog = fixtures::relu_program();
    prog.rel.pred[1] = {1};  // self-reference
    const auto violations = prog.validate();
    REQUIRE(!violations.empty());
    CHECK(violations.front().node == 1);
}

TEST_CASE("validation catches empty predecessors") {
    Program prog = fixtures::relu_program();
    prog.rel.pred[1] = {};
    bool found = false;
    for (const auto& v : prog.validate())
        if (v.what.find("empty predecessors") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("relu2 evaluation") {
    const Program prog = fixtures::relu2_program();
    CHECK(prog.validate().empty());
    CHECK(evaluate1(prog, {-1.0}) == 0.0);  // relu(1) + (-1)
    CHECK(evaluate1(prog, {2.0}) == 2.0);
}

TEST_CASE("zero program outputs constantly zero") {
    const Program prog = fixtures::zero_program();
    CounterRng rng(0x88);
    for (int t = 0; t < 1000; ++t) CHECK(evaluate1(prog, {rng.uniform(-5.0, 5.0)}) == 0.0);
    CHECK(evaluate1(prog, {7.0}) == 0.0);
    CHECK(evaluate1(prog, {0.0}) == 0.0);
}

TEST_CASE("relu3 program at 0") {
    CHECK(evaluate1(fixtures::relu3_program(), {0.0}) == 0.0);
}

TEST_CASE("function_of: extensional equalities on 1000 samples") {
    const auto relu = function_of(fixtures::relu_program());
    const auto relu2 = function_of(fixtures::relu2_program());
    const auto relu3 = function_of(fixtures::relu3_program());
    const auto zero = function_of(fixtures::zero_program());
    const auto idz = function_of(fixtures::identity_minus_zero_program());
    CounterRng rng(0x91);
    for (int t = 0; t < 1000; ++t) {
        const double x = rng.uniform(-4.0, 4.0);
        const double r = relu({x})[0];
        CHECK(relu2({x})[0] == r);
        CHECK(relu3({x})[0] == doctest::Approx(r).epsilon(1e-15));
        CHECK(zero({x})[0] == 0.0);
        CHECK(idz({x})[0] == x);
    }
}

TEST_CASE("trace is bit-identical across evaluations") {
    const Program prog = fixtures::relu3_program();
    EvalTrace t1, t2;
    evaluate(prog, {0.37}, t1);
    evaluate(prog, {0.37}, t2);
    CHECK(t1.values == t2.values);
    CHECK(t1.branch == t2.branch);
    for (size_t i = 0; i < t1.local_grad.size(); ++i) CHECK(t1.local_grad[i] == t2.local_grad[i]);
}

TEST_CASE("domain fault carries the node id") {
    fixtures::ProgramBuilder b(1);
    b.node(builtins::log1(), {0});
    const Program prog = b.finish();
    try {
        (void)evaluate1(prog, {-1.0});
        FAIL("expected a domain fault");
    } catch (const DomainFault& f) {
        CHECK(f.program_node == 1);
        CHECK(f.kind == FaultKind::LogNonPositive);
    }
}

TEST_CASE("program evaluation agrees with the composed selection") {
    CounterRng rng(0xa3);
    const Program progs[] = {fixtures::relu_program(), fixtures::relu2_program(), fixtures::relu3_program(),
                             fixtures::zero_program(), fixtures::identity_minus_zero_program()};
    for (const Program& prog : progs) {
        const SelectionFunction rep = selection_of(prog);
        for (int t = 0; t < 200; ++t) {
            const Vec x{rng.uniform(-3.0, 3.0)};
            const double via_program = evaluate1(prog, x);
            const double via_selection = rep.value1(x);
            CHECK(std::fabs(via_program - via_selection) <= 1e-12 * (1.0 + std::fabs(via_program)));
        }
    }
}

TEST_CASE("composed selection reproduces the selection gradient of AD") {
    CounterRng rng(0xb5);
    const Program progs[] = {fixtures::relu_program(), fixtures::relu2_program(), fixtures::zero_program()};
    for (const Program& prog : progs) {
        const SelectionFunction rep = selection_of(prog);
        for (int t = 0; t < 200; ++t) {
            const Vec x{rng.uniform(-3.0, 3.0)};
            const Vec lhs = backward_gradient(prog, x);
            const Vec rhs = rep.gradient(x);
            CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * (1.0 + norm_inf(lhs)));
        }
    }
}

TEST_CASE("random piecewise programs validate and evaluate") {
    CounterRng rng(0xc1);
    for (int t = 0; t < 50; ++t) {
        ProgramGenOptions opts;
        opts.p = 1 + static_cast<int>(rng.below(3));
        const Program prog = random_piecewise_program(rng, opts);
        CHECK(prog.validate().empty());
        Vec x;
        REQUIRE(sample_point(prog, rng, -2.0, 2.0, x));
        (void)evaluate1(prog, x);
    }
}

TEST_CASE("program json round trip") {
    const Program progs[] = {fixtures::relu3_program(), fixtures::identity_minus_zero_program()};
    CounterRng rng(0xd2);
    for (const Program& prog : progs) {
        const Program back = Program::from_json(prog.to_json());
        CHECK(back.p == prog.p);
        CHECK(back.m == prog.m);
        for (int t = 0; t < 100; ++t) {
            const Vec x{rng.uniform(-3.0, 3.0)};
            CHECK(evaluate1(back, x) == evaluate1(prog, x));
        }
    }
}
