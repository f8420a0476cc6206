#include "selgrad/expr.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <charconv>
#include <cmath>

namespace selgrad {

DomainFault::DomainFault(FaultKind k, int node, Vec point)
    : std::runtime_error(k == FaultKind::DivisionByZero ? "division by zero" : "log of non-positive argument"),
      kind(k),
      expr_node(node),
      program_node(-1),
      at(std::move(point)) {}

class ExprBuilder {
  public:
    static Expr binary(ExprOp op, const Expr& x, const Expr& y) {
        assert(x.arity() == y.arity());
        assert(!x.empty() && !y.empty());
        Expr e = x;
        const int lhs = e.root();
        const int rhs = e.append_tree(y);
        ExprNode n;
        n.op = op;
        n.a = lhs;
        n.b = rhs;
        e.nodes_.push_back(std::move(n));
        return e;
    }

    static Expr unary(ExprOp op, const Expr& x) {
        assert(!x.empty());
        Expr e = x;
        ExprNode n;
        n.op = op;
        n.a = e.root();
        e.nodes_.push_back(std::move(n));
        return e;
    }
};

Expr Expr::constant(int arity, double c) {
    Expr e;
    e.arity_ = arity;
    ExprNode n;
    n.op = ExprOp::Const;
    n.value = c;
    e.nodes_.push_back(std::move(n));
    return e;
}

Expr Expr::variable(int arity, int index) {
    assert(index >= 0 && index < arity);
    Expr e;
    e.arity_ = arity;
    ExprNode n;
    n.op = ExprOp::Var;
    n.index = index;
    e.nodes_.push_back(std::move(n));
    return e;
}

Expr Expr::affine(Vec coeffs, double offset) {
    Expr e;
    e.arity_ = static_cast<int>(coeffs.size());
    ExprNode n;
    n.op = ExprOp::Affine;
    n.coeffs = std::move(coeffs);
    n.offset = offset;
    e.nodes_.push_back(std::move(n));
    return e;
}

int Expr::append_tree(const Expr& other) {
    const int base = node_count();
    for (const ExprNode& n : other.nodes_) {
        ExprNode c = n;
        if (c.a >= 0) c.a += base;
        if (c.b >= 0) c.b += base;
        nodes_.push_back(std::move(c));
    }
    return node_count() - 1;
}

Expr Expr::add(const Expr& x, const Expr& y) { return ExprBuilder::binary(ExprOp::Add, x, y); }
Expr Expr::sub(const Expr& x, const Expr& y) { return ExprBuilder::binary(ExprOp::Sub, x, y); }
Expr Expr::mul(const Expr& x, const Expr& y) { return ExprBuilder::binary(ExprOp::Mul, x, y); }
Expr Expr::div(const Expr& x, const Expr& y) { return ExprBuilder::binary(ExprOp::Div, x, y); }
Expr Expr::exp(const Expr& x) { return ExprBuilder::unary(ExprOp::Exp, x); }
Expr Expr::log(const Expr& x) { return ExprBuilder::unary(ExprOp::Log, x); }

Expr operator+(const Expr& x, const Expr& y) { return Expr::add(x, y); }
Expr operator-(const Expr& x, const Expr& y) { return Expr::sub(x, y); }
Expr operator*(const Expr& x, const Expr& y) { return Expr::mul(x, y); }
Expr operator/(const Expr& x, const Expr& y) { return Expr::div(x, y); }
Expr operator-(const Expr& x) { return Expr::sub(Expr::constant(x.arity(), 0.0), x); }

void Expr::eval_nodes(const Vec& x, Vec& values) const {
    assert(static_cast<int>(x.size()) == arity_);
    values.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const ExprNode& n = nodes_[i];
        switch (n.op) {
            case ExprOp::Const: values[i] = n.value; break;
            case ExprOp::Var: values[i] = x[n.index]; break;
            case ExprOp::Affine: {
                double s = n.offset;
                for (size_t j = 0; j < n.coeffs.size(); ++j) s += n.coeffs[j] * x[j];
                values[i] = s;
                break;
            }
            case ExprOp::Add: values[i] = values[n.a] + values[n.b]; break;
            case ExprOp::Sub: values[i] = values[n.a] - values[n.b]; break;
            case ExprOp::Mul: values[i] = values[n.a] * values[n.b]; break;
            case ExprOp::Div:
                if (values[n.b] == 0.0) throw DomainFault(FaultKind::DivisionByZero, static_cast<int>(i), x);
                values[i] = values[n.a] / values[n.b];
                break;
            case ExprOp::Exp: values[i] = std::exp(values[n.a]); break;
            case ExprOp::Log:
                if (!(values[n.a] > 0.0)) throw DomainFault(FaultKind::LogNonPositive, static_cast<int>(i), x);
                values[i] = std::log(values[n.a]);
                break;
        }
    }
}

double Expr::eval(const Vec& x) const {
    Vec values;
    eval_nodes(x, values);
    return values.back();
}

Vec Expr::gradient_with_values(const Vec& x, const Vec& values) const {
    assert(values.size() == nodes_.size());
    (void)x;
    Vec adj(nodes_.size(), 0.0);
    Vec grad(arity_, 0.0);
    adj[root()] = 1.0;
    for (int i = root(); i >= 0; --i) {
        const double a = adj[i];
        if (a == 0.0) continue;
        const ExprNode& n = nodes_[i];
        switch (n.op) {
            case ExprOp::Const: break;
            case ExprOp::Var: grad[n.index] += a; break;
            case ExprOp::Affine:
                for (size_t j = 0; j < n.coeffs.size(); ++j) grad[j] += a * n.coeffs[j];
                break;
            case ExprOp::Add:
                adj[n.a] += a;
                adj[n.b] += a;
                break;
            case ExprOp::Sub:
                adj[n.a] += a;
                adj[n.b] -= a;
                break;
            case ExprOp::Mul:
                adj[n.a] += a * values[n.b];
                adj[n.b] += a * values[n.a];
                break;
            case ExprOp::Div:
                adj[n.a] += a / values[n.b];
                adj[n.b] -= a * values[n.a] / (values[n.b] * values[n.b]);
                break;
            case ExprOp::Exp: adj[n.a] += a * values[i]; break;
            case ExprOp::Log: adj[n.a] += a / values[n.a]; break;
        }
    }
    return grad;
}

Vec Expr::gradient(const Vec& x) const {
    Vec values;
    eval_nodes(x, values);
    return gradient_with_values(x, values);
}

namespace {

// Rebuilds the subtree rooted at node k as a standalone Expr.
Expr rebuild(const Expr& e, int k) {
    const ExprNode& n = e.node(k);
    const int p = e.arity();
    switch (n.op) {
        case ExprOp::Const: return Expr::constant(p, n.value);
        case ExprOp::Var: return Expr::variable(p, n.index);
        case ExprOp::Affine: return Expr::affine(n.coeffs, n.offset);
        case ExprOp::Add: return Expr::add(rebuild(e, n.a), rebuild(e, n.b));
        case ExprOp::Sub: return Expr::sub(rebuild(e, n.a), rebuild(e, n.b));
        case ExprOp::Mul: return Expr::mul(rebuild(e, n.a), rebuild(e, n.b));
        case ExprOp::Div: return Expr::div(rebuild(e, n.a), rebuild(e, n.b));
        case ExprOp::Exp: return Expr::exp(rebuild(e, n.a));
        case ExprOp::Log: return Expr::log(rebuild(e, n.a));
    }
    return Expr::constant(p, 0.0);
}

// Classical sum/product/quotient/chain rules, as a fresh tree.
Expr diff_node(const Expr& e, int id, int coord) {
    const ExprNode& n = e.node(id);
    const int p = e.arity();
    switch (n.op) {
        case ExprOp::Const: return Expr::constant(p, 0.0);
        case ExprOp::Var: return Expr::constant(p, n.index == coord ? 1.0 : 0.0);
        case ExprOp::Affine: return Expr::constant(p, n.coeffs[coord]);
        case ExprOp::Add: return Expr::add(diff_node(e, n.a, coord), diff_node(e, n.b, coord));
        case ExprOp::Sub: return Expr::sub(diff_node(e, n.a, coord), diff_node(e, n.b, coord));
        case ExprOp::Mul:
            return Expr::add(Expr::mul(diff_node(e, n.a, coord), rebuild(e, n.b)),
                             Expr::mul(rebuild(e, n.a), diff_node(e, n.b, coord)));
        case ExprOp::Div: {
            const Expr v = rebuild(e, n.b);
            const Expr num = Expr::sub(Expr::mul(diff_node(e, n.a, coord), v),
                                       Expr::mul(rebuild(e, n.a), diff_node(e, n.b, coord)));
            return Expr::div(num, Expr::mul(v, v));
        }
        case ExprOp::Exp: return Expr::mul(Expr::exp(rebuild(e, n.a)), diff_node(e, n.a, coord));
        case ExprOp::Log: return Expr::div(diff_node(e, n.a, coord), rebuild(e, n.a));
    }
    return Expr::constant(p, 0.0);
}

}  // namespace

Expr Expr::derivative(int coord) const {
    assert(coord >= 0 && coord < arity_);
    return diff_node(*this, root(), coord);
}

Expr Expr::substitute(const std::vector<Expr>& repl) const {
    assert(static_cast<int>(repl.size()) == arity_);
    const int new_arity = repl.empty() ? 0 : repl[0].arity();
    for ([[maybe_unused]] const Expr& r : repl) assert(r.arity() == new_arity);

    std::vector<Expr> rebuilt(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const ExprNode& n = nodes_[i];
        switch (n.op) {
            case ExprOp::Const: rebuilt[i] = Expr::constant(new_arity, n.value); break;
            case ExprOp::Var: rebuilt[i] = repl[n.index]; break;
            case ExprOp::Affine: {
                // w . E + b, expanded term by term.
                Expr acc = Expr::constant(new_arity, n.offset);
                for (size_t j = 0; j < n.coeffs.size(); ++j)
                    acc = Expr::add(acc, Expr::mul(Expr::constant(new_arity, n.coeffs[j]), repl[j]));
                rebuilt[i] = acc;
                break;
            }
            case ExprOp::Add: rebuilt[i] = Expr::add(rebuilt[n.a], rebuilt[n.b]); break;
            case ExprOp::Sub: rebuilt[i] = Expr::sub(rebuilt[n.a], rebuilt[n.b]); break;
            case ExprOp::Mul: rebuilt[i] = Expr::mul(rebuilt[n.a], rebuilt[n.b]); break;
            case ExprOp::Div: rebuilt[i] = Expr::div(rebuilt[n.a], rebuilt[n.b]); break;
            case ExprOp::Exp: rebuilt[i] = Expr::exp(rebuilt[n.a]); break;
            case ExprOp::Log: rebuilt[i] = Expr::log(rebuilt[n.a]); break;
        }
    }
    return rebuilt.back();
}

namespace {

void print_node(const Expr& e, int id, std::string& out) {
    const ExprNode& n = e.node(id);
    switch (n.op) {
        case ExprOp::Const:
            out += "(const ";
            out += format_double(n.value);
            out += ')';
            break;
        case ExprOp::Var:
            out += "(var ";
            out += std::to_string(n.index);
            out += ')';
            break;
        case ExprOp::Affine: {
            out += "(affine (";
            for (size_t j = 0; j < n.coeffs.size(); ++j) {
                if (j) out += ' ';
                out += format_double(n.coeffs[j]);
            }
            out += ") ";
            out += format_double(n.offset);
            out += ')';
            break;
        }
        case ExprOp::Add:
        case ExprOp::Sub:
        case ExprOp::Mul:
        case ExprOp::Div: {
            const char* name = n.op == ExprOp::Add   ? "add"
                               : n.op == ExprOp::Sub ? "sub"
                               : n.op == ExprOp::Mul ? "mul"
                                                     : "div";
            out += '(';
            out += name;
            out += ' ';
            print_node(e, n.a, out);
            out += ' ';
            print_node(e, n.b, out);
            out += ')';
            break;
        }
        case ExprOp::Exp:
        case ExprOp::Log:
            out += n.op == ExprOp::Exp ? "(exp " : "(log ";
            print_node(e, n.a, out);
            out += ')';
            break;
    }
}

struct SexprLexer {
    std::string_view text;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) throw SexprError(std::string("expected '") + c + "' at offset " + std::to_string(pos));
    }
    std::string token() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != '(' && text[pos] != ')')
            ++pos;
        if (start == pos) throw SexprError("expected token at offset " + std::to_string(pos));
        return std::string(text.substr(start, pos - start));
    }
    double number() {
        const std::string t = token();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) throw SexprError("bad number '" + t + "'");
        return v;
    }
    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }
};

Expr parse_inner(SexprLexer& lx, int arity) {
    lx.expect('(');
    const std::string head = lx.token();
    Expr out;
    if (head == "const") {
        out = Expr::constant(arity, lx.number());
    } else if (head == "var") {
        const int i = static_cast<int>(lx.number());
        if (i < 0 || i >= arity)
            throw SexprError("variable index " + std::to_string(i) + " out of range for arity " + std::to_string(arity));
        out = Expr::variable(arity, i);
    } else if (head == "affine") {
        lx.expect('(');
        Vec coeffs;
        while (!lx.eat(')')) coeffs.push_back(lx.number());
        if (static_cast<int>(coeffs.size()) != arity)
            throw SexprError("affine coefficient count " + std::to_string(coeffs.size()) + " != arity " + std::to_string(arity));
        const double offset = lx.number();
        out = Expr::affine(std::move(coeffs), offset);
    } else if (head == "add" || head == "sub" || head == "mul" || head == "div") {
        const Expr a = parse_inner(lx, arity);
        const Expr b = parse_inner(lx, arity);
        out = head == "add"   ? Expr::add(a, b)
              : head == "sub" ? Expr::sub(a, b)
              : head == "mul" ? Expr::mul(a, b)
                              : Expr::div(a, b);
    } else if (head == "exp" || head == "log") {
        const Expr a = parse_inner(lx, arity);
        out = head == "exp" ? Expr::exp(a) : Expr::log(a);
    } else {
        throw SexprError("unknown operator '" + head + "'");
    }
    lx.expect(')');
    return out;
}

}  // namespace

std::string Expr::to_sexpr() const {
    std::string out;
    print_node(*this, root(), out);
    return out;
}

Expr Expr::parse_sexpr(std::string_view text, int arity) {
    SexprLexer lx{text};
    Expr e = parse_inner(lx, arity);
    if (!lx.at_end()) throw SexprError("trailing input after expression");
    return e;
}

bool Expr::structurally_equal(const Expr& other) const {
    if (arity_ != other.arity_ || nodes_.size() != other.nodes_.size()) return false;
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const ExprNode& x = nodes_[i];
        const ExprNode& y = other.nodes_[i];
        if (x.op != y.op || x.value != y.value || x.index != y.index || x.offset != y.offset || x.a != y.a || x.b != y.b ||
            x.coeffs != y.coeffs)
            return false;
    }
    return true;
}

}  // namespace selgrad
