#include "doctest.h"

#include <cmath>

#include "selgrad/builtins.hpp"
#include "selgrad/selection.hpp"
#include "support/oracles.hpp"

using namespace selgrad;

TEST_CASE("relu index and values") {
    const SelectionFunction relu = builtins::relu();
    CHECK(relu.index_of({0.0}) == 0);   // ties take the <= branch
    CHECK(relu.index_of({0.5}) == 1);
    CHECK(relu.value1({-3.0}) == 0.0);
    CHECK(relu.value1({2.0}) == 2.0);
}

TEST_CASE("spiked zero representation of the null function") {
    const SelectionFunction z = builtins::spiked_zero();
    CHECK(z.index_of({0.0}) == 1);
    CHECK(z.value1({0.0}) == 0.0);
    for (double t : {-2.0, -0.5, 0.25, 7.0}) CHECK(z.value1({t}) == 0.0);
    // The frozen-branch derivative at the origin is 1, not 0.
    CHECK(z.gradient({0.0}) == Vec{1.0});
    CHECK(z.gradient({1.0}) == Vec{0.0});
}

TEST_CASE("selection gradients of relu") {
    const SelectionFunction relu = builtins::relu();
    CHECK(relu.gradient({0.0}) == Vec{0.0});
    CHECK(relu.gradient({3.0}) == Vec{1.0});
    const SelectionFunction relu_lt = builtins::relu_strict();
    CHECK(relu_lt.gradient({0.0}) == Vec{1.0});  // same function, other branch order
}

TEST_CASE("selection gradient is the exact active branch gradient") {
    CounterRng rng(0x1b5);
    const SelectionFunction relu = builtins::relu();
    for (int t = 0; t < 100; ++t) {
        const Vec x{rng.uniform(-2.0, 2.0)};
        const int idx = relu.index_of(x);
        CHECK(relu.gradient(x) == relu.branch(idx)[0].gradient(x));
    }
}

TEST_CASE("totality fault") {
    const SelectionFunction partial(1, {Predicate::atom(Expr::variable(1, 0), Rel::GT)}, {{Expr::variable(1, 0)}});
    CHECK_THROWS_AS((void)partial.value1({-1.0}), TotalityFault);
    CHECK(partial.value1({1.0}) == 1.0);
}

TEST_CASE("compose: relu after relu is relu") {
    const SelectionFunction r = builtins::relu();
    const SelectionFunction rr = compose(r, {r});
    CHECK(rr.branch_count() == 4);
    CounterRng rng(0x2d);
    for (int t = 0; t < 1000; ++t) {
        const Vec x{rng.uniform(-3.0, 3.0)};
        CHECK(rr.value1(x) == r.value1(x));
    }
}

namespace {

// relu2(t) = relu(-t) + t as an explicit selection.
SelectionFunction make_relu2() {
    const SelectionFunction inner = compose(builtins::relu(), {builtins::negate1()});
    return sum(inner, builtins::identity1());
}

}  // namespace

TEST_CASE("compose + sum: relu2 equals relu pointwise") {
    const SelectionFunction relu2 = make_relu2();
    const SelectionFunction relu = builtins::relu();
    CounterRng rng(0x31);
    double max_diff = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const Vec x{rng.uniform(-3.0, 3.0)};
        max_diff = std::max(max_diff, std::fabs(relu2.value1(x) - relu.value1(x)));
    }
    CHECK(max_diff == 0.0);
    CHECK(relu2.gradient({0.0}) == Vec{1.0});
}

TEST_CASE("zero = relu2 - relu vanishes pointwise") {
    const SelectionFunction zero = sum(make_relu2(), negate(builtins::relu()));
    CounterRng rng(0x3c);
    for (int t = 0; t < 1000; ++t) {
        const Vec x{rng.uniform(-3.0, 3.0)};
        CHECK(zero.value1(x) == 0.0);
    }
    CHECK(zero.gradient({0.0}) == Vec{1.0});
}

TEST_CASE("sum of relu and -relu(-x) is the identity function") {
    const SelectionFunction mirrored = negate(compose(builtins::relu(), {builtins::negate1()}));
    const SelectionFunction f = sum(builtins::relu(), mirrored);
    CounterRng rng(0x44);
    for (int t = 0; t < 200; ++t) {
        const double x = rng.uniform(-3.0, 3.0);
        CHECK(f.value1({x}) == doctest::Approx(x).epsilon(1e-15));
        if (x != 0.0) CHECK(f.gradient({x}) == Vec{1.0});
    }
    CHECK(f.gradient({0.0}) == Vec{0.0});  // both frozen branches are flat at 0
}

TEST_CASE("product with the zero constant annihilates") {
    const SelectionFunction f = product(builtins::constant(1, 0.0), builtins::relu());
    CounterRng rng(0x50);
    for (int t = 0; t < 100; ++t) {
        const Vec x{rng.uniform(-2.0, 2.0)};
        CHECK(f.value1(x) == 0.0);
        CHECK(f.gradient(x) == Vec{0.0});
    }
}

TEST_CASE("relu3 via the calculus has derivative 1/2 at the origin") {
    const SelectionFunction relu3 = scale(sum(builtins::relu(), make_relu2()), 0.5);
    CHECK(relu3.gradient({0.0}) == Vec{0.5});
    CHECK(relu3.value1({2.0}) == doctest::Approx(2.0));
    CHECK(relu3.value1({-2.0}) == 0.0);
}

TEST_CASE("branch cap faults") {
    auto blow_up = [] {
        SelectionFunction acc = builtins::relu();
        for (int i = 0; i < 13; ++i) acc = sum(acc, acc);  // 2 -> 4 -> 16 -> 256 -> 65536
        return acc;
    };
    CHECK_THROWS_AS((void)blow_up(), BranchCapExceeded);
}

TEST_CASE("refine_common builds a common-index vector selection") {
    const SelectionFunction refined = refine_common({builtins::max2(), builtins::min2()});
    CHECK(refined.out_dim() == 2);
    CHECK(refined.branch_count() == 4);
    CounterRng rng(0x5b);
    for (int t = 0; t < 200; ++t) {
        const Vec x = rng.uniform_vec(2, -2.0, 2.0);
        const Vec v = refined.value(x);
        CHECK(v[0] == builtins::max2().value1(x));
        CHECK(v[1] == builtins::min2().value1(x));
        // the common-index jacobian stacks the per-coordinate rows
        const Mat joint = refined.jacobian(x);
        const Mat stacked = selection_jacobian({builtins::max2(), builtins::min2()}, x);
        CHECK(max_abs_diff(joint, stacked) == 0.0);
    }
}

TEST_CASE("selection jacobian: identity map") {
    const std::vector<SelectionFunction> coords{SelectionFunction::smooth(Expr::variable(2, 0)),
                                                SelectionFunction::smooth(Expr::variable(2, 1))};
    const Mat j = selection_jacobian(coords, {0.3, -0.7});
    CHECK(j(0, 0) == 1.0);
    CHECK(j(0, 1) == 0.0);
    CHECK(j(1, 0) == 0.0);
    CHECK(j(1, 1) == 1.0);
}

TEST_CASE("selection jacobian: coordinatewise relu") {
    const SelectionFunction relu = builtins::relu();
    const std::vector<SelectionFunction> coords{compose(relu, {SelectionFunction::smooth(Expr::variable(2, 0))}),
                                                compose(relu, {SelectionFunction::smooth(Expr::variable(2, 1))})};
    const Mat j = selection_jacobian(coords, {1.0, -1.0});
    CHECK(j(0, 0) == 1.0);
    CHECK(j(0, 1) == 0.0);
    CHECK(j(1, 0) == 0.0);
    CHECK(j(1, 1) == 0.0);
}

TEST_CASE("sorting map jacobians are permutation matrices") {
    const SelectionFunction sort2 = builtins::sort2_desc();
    const Mat ordered = sort2.jacobian({2.0, 1.0});
    CHECK(ordered(0, 0) == 1.0);
    CHECK(ordered(0, 1) == 0.0);
    CHECK(ordered(1, 0) == 0.0);
    CHECK(ordered(1, 1) == 1.0);
    const Mat swapped = sort2.jacobian({1.0, 2.0});
    CHECK(swapped(0, 0) == 0.0);
    CHECK(swapped(0, 1) == 1.0);
    CHECK(swapped(1, 0) == 1.0);
    CHECK(swapped(1, 1) == 0.0);
}

TEST_CASE("boundary continuity of the builtin selections") {
    // At sampled guard boundaries adjacent branches agree: the
    // representations describe continuous functions.
    CounterRng rng(0x66);
    const SelectionFunction fns[] = {builtins::relu(), builtins::abs(), make_relu2()};
    for (const SelectionFunction& f : fns) {
        for (int t = 0; t < 50; ++t) {
            const Vec x{0.0};  // all these have their only boundary at 0
            double worst = 0.0;
            for (int i = 0; i < f.branch_count(); ++i)
                for (int j = i + 1; j < f.branch_count(); ++j)
                    worst = std::max(worst, std::fabs(f.branch(i)[0].eval(x) - f.branch(j)[0].eval(x)));
            CHECK(worst <= 1e-9);
        }
    }
    const SelectionFunction mx = builtins::max2();
    for (int t = 0; t < 50; ++t) {
        const double v = rng.uniform(-2.0, 2.0);
        const Vec x{v, v};
        CHECK(std::fabs(mx.branch(0)[0].eval(x) - mx.branch(1)[0].eval(x)) <= 1e-9);
    }
}

TEST_CASE("selection text round trip") {
    const SelectionFunction fns[] = {builtins::relu(), builtins::abs(), builtins::max2(), builtins::sort2_desc(),
                                     make_relu2()};
    CounterRng rng(0x71);
    for (const SelectionFunction& f : fns) {
        const SelectionFunction back = SelectionFunction::parse_text(f.to_text());
        CHECK(back.arity() == f.arity());
        CHECK(back.out_dim() == f.out_dim());
        CHECK(back.branch_count() == f.branch_count());
        for (int t = 0; t < 50; ++t) {
            const Vec x = rng.uniform_vec(f.arity(), -2.0, 2.0);
            CHECK(back.value(x) == f.value(x));
            CHECK(back.index_of(x) == f.index_of(x));
        }
    }
}
