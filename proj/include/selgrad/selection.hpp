#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selgrad/expr.hpp"
#include "selgrad/types.hpp"

namespace selgrad {

enum class Rel : uint8_t { LT, LE, EQ, GE, GT };

const char* rel_name(Rel r);
bool rel_holds(double lhs, Rel r);

// Finite conjunction/disjunction tree over atoms `expr ⋈ 0`. Atom
// comparisons are exact floating-point tests, matching what a real program
// branch does; tolerances belong to the set-valued layer, not to guards.
class Predicate {
  public:
    enum class Kind : uint8_t { True, Atom, And, Or };

    static Predicate always();
    static Predicate atom(Expr e, Rel r);
    static Predicate all_of(std::vector<Predicate> children);
    static Predicate any_of(std::vector<Predicate> children);

    Kind kind() const { return kind_; }
    const Expr& atom_expr() const { return atom_expr_; }
    Rel atom_rel() const { return rel_; }
    const std::vector<Predicate>& children() const { return children_; }

    bool eval(const Vec& x) const;  // may throw DomainFault

    Predicate substitute(const std::vector<Expr>& repl) const;

    std::string to_text() const;
    static Predicate parse_text(std::string_view text, int arity);

  private:
    Kind kind_ = Kind::True;
    Expr atom_expr_;
    Rel rel_ = Rel::LE;
    std::vector<Predicate> children_;
};

struct TotalityFault : std::runtime_error {
    Vec at;
    explicit TotalityFault(Vec point);
};

struct BranchCapExceeded : std::runtime_error {
    size_t required, cap;
    BranchCapExceeded(size_t req, size_t c);
};

inline constexpr size_t kDefaultBranchCap = 10000;

// A guarded branch list (s, f_1, ..., f_m): the index s(x) is the first
// guard that holds at x, the represented value is branch s(x) evaluated at
// x. Branches are vectors of expressions so that maps with a common index
// (e.g. coordinate sorting) are first-class; scalar functions have
// out_dim() == 1.
class SelectionFunction {
  public:
    SelectionFunction() = default;
    SelectionFunction(int arity, std::vector<Predicate> guards, std::vector<std::vector<Expr>> branches);

    // Single smooth branch (guard `true`).
    static SelectionFunction smooth(Expr e);
    static SelectionFunction smooth_vector(std::vector<Expr> exprs);

    int arity() const { return arity_; }
    int out_dim() const { return out_dim_; }
    int branch_count() const { return static_cast<int>(guards_.size()); }
    const Predicate& guard(int i) const { return guards_[i]; }
    const std::vector<Expr>& branch(int i) const { return branches_[i]; }

    // First true guard, scanning in order; throws TotalityFault if none holds.
    int index_of(const Vec& x) const;

    Vec value(const Vec& x) const;
    double value1(const Vec& x) const;  // requires out_dim() == 1
    // Gradient of the active branch, decision frozen (out_dim() == 1).
    Vec gradient(const Vec& x) const;
    // Row k = gradient of output coordinate k of the active branch.
    Mat jacobian(const Vec& x) const;

    std::string to_text() const;
    static SelectionFunction parse_text(std::string_view text);

  private:
    int arity_ = 0;
    int out_dim_ = 1;
    std::vector<Predicate> guards_;
    std::vector<std::vector<Expr>> branches_;
};

// Product refinement of several selections over a shared input space into
// one selection with a common index; output coordinates are concatenated.
// Branch tuples are ordered lexicographically, so a first-true scan picks
// exactly the per-factor first-true choices.
SelectionFunction refine_common(const std::vector<SelectionFunction>& fs, size_t cap = kDefaultBranchCap);

// g after F = (inner_1, ..., inner_{p2}): the representation with branch
// set {(i..., j)} refined over both layers. Inner selections must be scalar.
SelectionFunction compose(const SelectionFunction& g, const std::vector<SelectionFunction>& inner,
                          size_t cap = kDefaultBranchCap);

SelectionFunction sum(const SelectionFunction& f, const SelectionFunction& g, size_t cap = kDefaultBranchCap);
SelectionFunction product(const SelectionFunction& f, const SelectionFunction& g, size_t cap = kDefaultBranchCap);
SelectionFunction scale(const SelectionFunction& f, double c);
SelectionFunction negate(const SelectionFunction& f);

// Rows = per-coordinate selection gradients under the (implicit) common
// refined index; for scalar coords this equals stacking coords[k].gradient.
Mat selection_jacobian(const std::vector<SelectionFunction>& coords, const Vec& x);

}  // namespace selgrad
