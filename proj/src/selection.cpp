#include "selgrad/selection.hpp"

#include <cassert>

namespace selgrad {

const char* rel_name(Rel r) {
    switch (r) {
        case Rel::LT: return "<";
        case Rel::LE: return "<=";
        case Rel::EQ: return "==";
        case Rel::GE: return ">=";
        case Rel::GT: return ">";
    }
    return "?";
}

bool rel_holds(double lhs, Rel r) {
    switch (r) {
        case Rel::LT: return lhs < 0.0;
        case Rel::LE: return lhs <= 0.0;
        case Rel::EQ: return lhs == 0.0;
        case Rel::GE: return lhs >= 0.0;
        case Rel::GT: return lhs > 0.0;
    }
    return false;
}

Predicate Predicate::always() { return Predicate(); }

Predicate Predicate::atom(Expr e, Rel r) {
    Predicate p;
    p.kind_ = Kind::Atom;
    p.atom_expr_ = std::move(e);
    p.rel_ = r;
    return p;
}

Predicate Predicate::all_of(std::vector<Predicate> children) {
    if (children.size() == 1) return children[0];
    Predicate p;
    p.kind_ = Kind::And;
    p.children_ = std::move(children);
    return p;
}

Predicate Predicate::any_of(std::vector<Predicate> children) {
    if (children.size() == 1) return children[0];
    Predicate p;
    p.kind_ = Kind::Or;
    p.children_ = std::move(children);
    return p;
}

bool Predicate::eval(const Vec& x) const {
    switch (kind_) {
        case Kind::True: return true;
        case Kind::Atom: return rel_holds(atom_expr_.eval(x), rel_);
        case Kind::And:
            for (const Predicate& c : children_)
                if (!c.eval(x)) return false;
            return true;
        case Kind::Or:
            for (const Predicate& c : children_)
                if (c.eval(x)) return true;
            return false;
    }
    return false;
}

Predicate Predicate::substitute(const std::vector<Expr>& repl) const {
    switch (kind_) {
        case Kind::True: return *this;
        case Kind::Atom: return Predicate::atom(atom_expr_.substitute(repl), rel_);
        case Kind::And:
        case Kind::Or: {
            std::vector<Predicate> out;
            out.reserve(children_.size());
            for (const Predicate& c : children_) out.push_back(c.substitute(repl));
            Predicate p;
            p.kind_ = kind_;
            p.children_ = std::move(out);
            return p;
        }
    }
    return *this;
}

std::string Predicate::to_text() const {
    switch (kind_) {
        case Kind::True: return "(true)";
        case Kind::Atom: {
            std::string s = "(atom ";
            s += rel_name(rel_);
            s += ' ';
            s += atom_expr_.to_sexpr();
            s += ')';
            return s;
        }
        case Kind::And:
        case Kind::Or: {
            std::string s = kind_ == Kind::And ? "(and" : "(or";
            for (const Predicate& c : children_) {
                s += ' ';
                s += c.to_text();
            }
            s += ')';
            return s;
        }
    }
    return "(true)";
}

namespace {

struct PredLexer {
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
        if (!eat(c)) throw SexprError(std::string("expected '") + c + "' in predicate at offset " + std::to_string(pos));
    }
    std::string token() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != '(' && text[pos] != ')')
            ++pos;
        if (start == pos) throw SexprError("expected token in predicate at offset " + std::to_string(pos));
        return std::string(text.substr(start, pos - start));
    }
    // Extracts one balanced s-expression verbatim.
    std::string_view balanced() {
        skip_ws();
        if (pos >= text.size() || text[pos] != '(') throw SexprError("expected '(' in predicate at offset " + std::to_string(pos));
        const size_t start = pos;
        int depth = 0;
        while (pos < text.size()) {
            if (text[pos] == '(') ++depth;
            if (text[pos] == ')') {
                --depth;
                if (depth == 0) {
                    ++pos;
                    return text.substr(start, pos - start);
                }
            }
            ++pos;
        }
        throw SexprError("unterminated predicate expression");
    }
    bool peek_close() {
        skip_ws();
        return pos < text.size() && text[pos] == ')';
    }
};

Rel rel_from_name(const std::string& s) {
    if (s == "<") return Rel::LT;
    if (s == "<=") return Rel::LE;
    if (s == "==" || s == "=") return Rel::EQ;
    if (s == ">=") return Rel::GE;
    if (s == ">") return Rel::GT;
    throw SexprError("unknown relation '" + s + "'");
}

Predicate parse_pred(PredLexer& lx, int arity) {
    lx.expect('(');
    const std::string head = lx.token();
    if (head == "true") {
        lx.expect(')');
        return Predicate::always();
    }
    if (head == "atom") {
        const Rel r = rel_from_name(lx.token());
        const Expr e = Expr::parse_sexpr(lx.balanced(), arity);
        lx.expect(')');
        return Predicate::atom(e, r);
    }
    if (head == "and" || head == "or") {
        std::vector<Predicate> children;
        while (!lx.peek_close()) children.push_back(parse_pred(lx, arity));
        lx.expect(')');
        if (children.empty()) throw SexprError("empty '" + head + "' predicate");
        Predicate p = head == "and" ? Predicate::all_of(std::move(children)) : Predicate::any_of(std::move(children));
        return p;
    }
    throw SexprError("unknown predicate head '" + head + "'");
}

}  // namespace

Predicate Predicate::parse_text(std::string_view text, int arity) {
    PredLexer lx{text};
    Predicate p = parse_pred(lx, arity);
    lx.skip_ws();
    if (lx.pos < text.size()) throw SexprError("trailing input after predicate");
    return p;
}

TotalityFault::TotalityFault(Vec point) : std::runtime_error("no guard holds at the evaluation point"), at(std::move(point)) {}

BranchCapExceeded::BranchCapExceeded(size_t req, size_t c)
    : std::runtime_error("refined representation needs " + std::to_string(req) + " branches, cap is " + std::to_string(c)),
      required(req),
      cap(c) {}

SelectionFunction::SelectionFunction(int arity, std::vector<Predicate> guards, std::vector<std::vector<Expr>> branches)
    : arity_(arity), guards_(std::move(guards)), branches_(std::move(branches)) {
    assert(!branches_.empty());
    assert(guards_.size() == branches_.size());
    out_dim_ = static_cast<int>(branches_[0].size());
    for ([[maybe_unused]] const auto& b : branches_) {
        assert(static_cast<int>(b.size()) == out_dim_);
        for ([[maybe_unused]] const Expr& e : b) assert(e.arity() == arity_);
    }
}

SelectionFunction SelectionFunction::smooth(Expr e) {
    const int p = e.arity();
    return SelectionFunction(p, {Predicate::always()}, {{std::move(e)}});
}

SelectionFunction SelectionFunction::smooth_vector(std::vector<Expr> exprs) {
    assert(!exprs.empty());
    const int p = exprs[0].arity();
    return SelectionFunction(p, {Predicate::always()}, {std::move(exprs)});
}

int SelectionFunction::index_of(const Vec& x) const {
    for (size_t i = 0; i < guards_.size(); ++i)
        if (guards_[i].eval(x)) return static_cast<int>(i);
    throw TotalityFault(x);
}

Vec SelectionFunction::value(const Vec& x) const {
    const int i = index_of(x);
    Vec out(out_dim_);
    for (int k = 0; k < out_dim_; ++k) out[k] = branches_[i][k].eval(x);
    return out;
}

double SelectionFunction::value1(const Vec& x) const {
    assert(out_dim_ == 1);
    return branches_[index_of(x)][0].eval(x);
}

Vec SelectionFunction::gradient(const Vec& x) const {
    assert(out_dim_ == 1);
    return branches_[index_of(x)][0].gradient(x);
}

Mat SelectionFunction::jacobian(const Vec& x) const {
    const int i = index_of(x);
    Mat out(out_dim_, arity_);
    for (int k = 0; k < out_dim_; ++k) {
        const Vec g = branches_[i][k].gradient(x);
        for (int j = 0; j < arity_; ++j) out(k, j) = g[j];
    }
    return out;
}

std::string SelectionFunction::to_text() const {
    std::string s = "(selection ";
    s += std::to_string(arity_);
    s += ' ';
    s += std::to_string(out_dim_);
    for (int i = 0; i < branch_count(); ++i) {
        s += "\n  (case ";
        s += guards_[i].to_text();
        for (const Expr& e : branches_[i]) {
            s += ' ';
            s += e.to_sexpr();
        }
        s += ')';
    }
    s += ')';
    return s;
}

SelectionFunction SelectionFunction::parse_text(std::string_view text) {
    PredLexer lx{text};
    lx.expect('(');
    if (lx.token() != "selection") throw SexprError("expected (selection ...)");
    const int arity = std::stoi(lx.token());
    const int outdim = std::stoi(lx.token());
    std::vector<Predicate> guards;
    std::vector<std::vector<Expr>> branches;
    while (!lx.peek_close()) {
        lx.expect('(');
        if (lx.token() != "case") throw SexprError("expected (case ...)");
        guards.push_back(parse_pred(lx, arity));
        std::vector<Expr> exprs;
        for (int k = 0; k < outdim; ++k) exprs.push_back(Expr::parse_sexpr(lx.balanced(), arity));
        lx.expect(')');
        branches.push_back(std::move(exprs));
    }
    lx.expect(')');
    lx.skip_ws();
    if (lx.pos < text.size()) throw SexprError("trailing input after selection");
    if (branches.empty()) throw SexprError("selection with no branches");
    return SelectionFunction(arity, std::move(guards), std::move(branches));
}

namespace {

size_t checked_branch_product(const std::vector<size_t>& counts, size_t cap) {
    size_t total = 1;
    for (size_t c : counts) {
        if (c == 0) return 0;
        if (total > cap / c) throw BranchCapExceeded(static_cast<size_t>(-1), cap);
        total *= c;
    }
    if (total > cap) throw BranchCapExceeded(total, cap);
    return total;
}

Predicate conjoin(Predicate a, Predicate b) {
    std::vector<Predicate> parts;
    if (a.kind() != Predicate::Kind::True) parts.push_back(std::move(a));
    if (b.kind() != Predicate::Kind::True) parts.push_back(std::move(b));
    if (parts.empty()) return Predicate::always();
    return Predicate::all_of(std::move(parts));
}

}  // namespace

SelectionFunction refine_common(const std::vector<SelectionFunction>& fs, size_t cap) {
    assert(!fs.empty());
    const int p = fs[0].arity();
    std::vector<size_t> counts;
    int out_total = 0;
    for (const SelectionFunction& f : fs) {
        assert(f.arity() == p);
        counts.push_back(static_cast<size_t>(f.branch_count()));
        out_total += f.out_dim();
    }
    checked_branch_product(counts, cap);

    std::vector<Predicate> guards;
    std::vector<std::vector<Expr>> branches;
    std::vector<size_t> idx(fs.size(), 0);
    for (;;) {
        std::vector<Predicate> parts;
        std::vector<Expr> exprs;
        exprs.reserve(out_total);
        for (size_t c = 0; c < fs.size(); ++c) {
            const Predicate& g = fs[c].guard(static_cast<int>(idx[c]));
            if (g.kind() != Predicate::Kind::True) parts.push_back(g);
            for (const Expr& e : fs[c].branch(static_cast<int>(idx[c]))) exprs.push_back(e);
        }
        guards.push_back(parts.empty() ? Predicate::always() : Predicate::all_of(std::move(parts)));
        branches.push_back(std::move(exprs));

        // lexicographic odometer
        size_t c = fs.size();
        while (c > 0) {
            --c;
            if (++idx[c] < counts[c]) break;
            idx[c] = 0;
            if (c == 0) {
                return SelectionFunction(p, std::move(guards), std::move(branches));
            }
        }
    }
}

SelectionFunction compose(const SelectionFunction& g, const std::vector<SelectionFunction>& inner, size_t cap) {
    assert(static_cast<int>(inner.size()) == g.arity());
    for ([[maybe_unused]] const SelectionFunction& f : inner) assert(f.out_dim() == 1);

    std::vector<size_t> counts;
    for (const SelectionFunction& f : inner) counts.push_back(static_cast<size_t>(f.branch_count()));
    counts.push_back(static_cast<size_t>(g.branch_count()));
    checked_branch_product(counts, cap);

    const int p = inner.empty() ? 0 : inner[0].arity();
    std::vector<Predicate> guards;
    std::vector<std::vector<Expr>> branches;

    std::vector<size_t> idx(inner.size(), 0);
    for (;;) {
        // Current inner branch tuple as substitution expressions.
        std::vector<Expr> repl;
        std::vector<Predicate> inner_guards;
        for (size_t c = 0; c < inner.size(); ++c) {
            const Predicate& gd = inner[c].guard(static_cast<int>(idx[c]));
            if (gd.kind() != Predicate::Kind::True) inner_guards.push_back(gd);
            repl.push_back(inner[c].branch(static_cast<int>(idx[c]))[0]);
        }
        const Predicate inner_guard = inner_guards.empty() ? Predicate::always() : Predicate::all_of(std::move(inner_guards));

        for (int j = 0; j < g.branch_count(); ++j) {
            guards.push_back(conjoin(inner_guard, g.guard(j).substitute(repl)));
            std::vector<Expr> outs;
            outs.reserve(g.out_dim());
            for (const Expr& e : g.branch(j)) outs.push_back(e.substitute(repl));
            branches.push_back(std::move(outs));
        }

        if (inner.empty()) break;
        size_t c = inner.size();
        bool done = false;
        while (c > 0) {
            --c;
            if (++idx[c] < counts[c]) break;
            idx[c] = 0;
            if (c == 0) done = true;
        }
        if (done) break;
    }
    return SelectionFunction(p, std::move(guards), std::move(branches));
}

namespace {

SelectionFunction pointwise(const SelectionFunction& f, const SelectionFunction& g, bool is_sum, size_t cap) {
    assert(f.arity() == g.arity());
    assert(f.out_dim() == 1 && g.out_dim() == 1);
    const size_t total = static_cast<size_t>(f.branch_count()) * static_cast<size_t>(g.branch_count());
    if (total > cap) throw BranchCapExceeded(total, cap);

    std::vector<Predicate> guards;
    std::vector<std::vector<Expr>> branches;
    for (int i = 0; i < f.branch_count(); ++i)
        for (int j = 0; j < g.branch_count(); ++j) {
            guards.push_back(conjoin(f.guard(i), g.guard(j)));
            const Expr& a = f.branch(i)[0];
            const Expr& b = g.branch(j)[0];
            branches.push_back({is_sum ? Expr::add(a, b) : Expr::mul(a, b)});
        }
    return SelectionFunction(f.arity(), std::move(guards), std::move(branches));
}

}  // namespace

SelectionFunction sum(const SelectionFunction& f, const SelectionFunction& g, size_t cap) { return pointwise(f, g, true, cap); }

SelectionFunction product(const SelectionFunction& f, const SelectionFunction& g, size_t cap) {
    return pointwise(f, g, false, cap);
}

SelectionFunction scale(const SelectionFunction& f, double c) {
    std::vector<Predicate> guards;
    std::vector<std::vector<Expr>> branches;
    for (int i = 0; i < f.branch_count(); ++i) {
        guards.push_back(f.guard(i));
        std::vector<Expr> outs;
        for (const Expr& e : f.branch(i)) outs.push_back(Expr::mul(Expr::constant(f.arity(), c), e));
        branches.push_back(std::move(outs));
    }
    return SelectionFunction(f.arity(), std::move(guards), std::move(branches));
}

SelectionFunction negate(const SelectionFunction& f) { return scale(f, -1.0); }

Mat selection_jacobian(const std::vector<SelectionFunction>& coords, const Vec& x) {
    assert(!coords.empty());
    int rows = 0;
    for (const SelectionFunction& f : coords) rows += f.out_dim();
    Mat out(rows, coords[0].arity());
    int r = 0;
    for (const SelectionFunction& f : coords) {
        const Mat jf = f.jacobian(x);
        for (int k = 0; k < jf.rows; ++k, ++r)
            for (int j = 0; j < jf.cols; ++j) out(r, j) = jf(k, j);
    }
    return out;
}

}  // namespace selgrad
