#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selgrad/types.hpp"

namespace selgrad {

// Smooth building blocks: +, -, *, /, affine maps, exp, log. Every function
// in this class is C-infinity on the open set where all division
// denominators are nonzero and all log arguments are positive. Outside that
// set evaluation raises DomainFault, never a silent value.
enum class ExprOp : uint8_t { Const, Var, Affine, Add, Sub, Mul, Div, Exp, Log };

enum class FaultKind : uint8_t { DivisionByZero, LogNonPositive };

struct DomainFault : std::runtime_error {
    FaultKind kind;
    int expr_node;     // offending node id within the expression
    int program_node;  // filled in by program evaluation, -1 otherwise
    Vec at;

    DomainFault(FaultKind k, int node, Vec point);
};

struct ExprNode {
    ExprOp op;
    double value = 0.0;  // Const
    int index = -1;      // Var
    Vec coeffs;          // Affine
    double offset = 0.0; // Affine
    int a = -1, b = -1;  // children (b unused for unary ops)
};

// Immutable expression over R^arity. Nodes are stored in a flat arena in
// topological order (children strictly before parents, root last), which
// makes evaluation and the value-cached gradient sweep a single loop.
class Expr {
  public:
    Expr() = default;

    static Expr constant(int arity, double c);
    static Expr variable(int arity, int index);
    static Expr affine(Vec coeffs, double offset);  // arity = coeffs.size()
    static Expr add(const Expr& x, const Expr& y);
    static Expr sub(const Expr& x, const Expr& y);
    static Expr mul(const Expr& x, const Expr& y);
    static Expr div(const Expr& x, const Expr& y);
    static Expr exp(const Expr& x);
    static Expr log(const Expr& x);

    int arity() const { return arity_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    int root() const { return node_count() - 1; }
    const ExprNode& node(int i) const { return nodes_[i]; }
    bool empty() const { return nodes_.empty(); }

    double eval(const Vec& x) const;
    // Forward pass storing every node value; the gradient sweep reuses it.
    void eval_nodes(const Vec& x, Vec& values) const;
    Vec gradient(const Vec& x) const;
    Vec gradient_with_values(const Vec& x, const Vec& values) const;

    // Materialized partial derivative d/dx_coord as a new expression.
    // The class is closed under differentiation; this is the constructive
    // witness (the fast path above never builds it).
    Expr derivative(int coord) const;

    // Replaces variable i by repl[i]; all repl share a common arity, which
    // becomes the arity of the result. Affine nodes expand into
    // sum-of-scaled-children form.
    Expr substitute(const std::vector<Expr>& repl) const;

    std::string to_sexpr() const;
    static Expr parse_sexpr(std::string_view text, int arity);

    bool structurally_equal(const Expr& other) const;

  private:
    int arity_ = 0;
    std::vector<ExprNode> nodes_;

    int append_tree(const Expr& other);  // splice other's nodes, return new root id
    friend class ExprBuilder;
};

Expr operator+(const Expr& x, const Expr& y);
Expr operator-(const Expr& x, const Expr& y);
Expr operator*(const Expr& x, const Expr& y);
Expr operator/(const Expr& x, const Expr& y);
Expr operator-(const Expr& x);  // 0 - x

struct SexprError : std::runtime_error {
    explicit SexprError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace selgrad
