#include "selgrad/builtins.hpp"

namespace selgrad::builtins {

namespace {
Expr t() { return Expr::variable(1, 0); }
Expr x0_2() { return Expr::variable(2, 0); }
Expr x1_2() { return Expr::variable(2, 1); }
}  // namespace

SelectionFunction relu() {
    return SelectionFunction(1, {Predicate::atom(t(), Rel::LE), Predicate::always()},
                             {{Expr::constant(1, 0.0)}, {t()}});
}

SelectionFunction relu_strict() {
    return SelectionFunction(1, {Predicate::atom(t(), Rel::LT), Predicate::always()},
                             {{Expr::constant(1, 0.0)}, {t()}});
}

SelectionFunction abs() {
    return SelectionFunction(1, {Predicate::atom(t(), Rel::LE), Predicate::always()}, {{-t()}, {t()}});
}

SelectionFunction max2() {
    return SelectionFunction(2, {Predicate::atom(x0_2() - x1_2(), Rel::GE), Predicate::always()},
                             {{x0_2()}, {x1_2()}});
}

SelectionFunction min2() {
    return SelectionFunction(2, {Predicate::atom(x0_2() - x1_2(), Rel::LE), Predicate::always()},
                             {{x0_2()}, {x1_2()}});
}

SelectionFunction identity1() { return SelectionFunction::smooth(t()); }

SelectionFunction negate1() { return SelectionFunction::smooth(Expr::affine({-1.0}, 0.0)); }

SelectionFunction constant(int arity, double c) { return SelectionFunction::smooth(Expr::constant(arity, c)); }

SelectionFunction affine(Vec coeffs, double offset) {
    return SelectionFunction::smooth(Expr::affine(std::move(coeffs), offset));
}

SelectionFunction add2() { return SelectionFunction::smooth(x0_2() + x1_2()); }
SelectionFunction sub2() { return SelectionFunction::smooth(x0_2() - x1_2()); }
SelectionFunction mul2() { return SelectionFunction::smooth(x0_2() * x1_2()); }
SelectionFunction div2() { return SelectionFunction::smooth(x0_2() / x1_2()); }

SelectionFunction exp1(double coeff) {
    return SelectionFunction::smooth(Expr::exp(Expr::affine({coeff}, 0.0)));
}

SelectionFunction log1() { return SelectionFunction::smooth(Expr::log(t())); }

SelectionFunction square1() { return SelectionFunction::smooth(t() * t()); }

SelectionFunction spiked_zero() {
    Predicate off_origin = Predicate::any_of({Predicate::atom(t(), Rel::LT), Predicate::atom(t(), Rel::GT)});
    return SelectionFunction(1, {std::move(off_origin), Predicate::always()},
                             {{Expr::constant(1, 0.0)}, {t()}});
}

SelectionFunction sort2_desc() {
    return SelectionFunction(2, {Predicate::atom(x0_2() - x1_2(), Rel::GE), Predicate::always()},
                             {{x0_2(), x1_2()}, {x1_2(), x0_2()}});
}

}  // namespace selgrad::builtins
