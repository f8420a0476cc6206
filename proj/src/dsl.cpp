#include "selgrad/dsl.hpp"

#include <cassert>
#include <cctype>
#include <charconv>
#include <set>

#include "selgrad/builtins.hpp"
#include "selgrad/fixtures.hpp"

namespace selgrad::dsl {

const FnDef* ParseResult::find(const std::string& name) const {
    for (const FnDef& fn : fns)
        if (fn.name == name) return &fn;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok : uint8_t {
    End, Ident, Number, KwFn, KwLet, KwSelect, KwElse,
    LParen, RParen, LBrace, RBrace, Comma, Semi, Assign, Arrow,
    Plus, Minus, Star, Slash,
    Lt, Le, Gt, Ge, EqEq, Ne, AndAnd, OrOr,
    Error
};

struct Token {
    Tok kind = Tok::End;
    SrcPos pos;
    std::string text;
    double number = 0.0;
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run(std::vector<Diagnostic>& diags) {
        std::vector<Token> out;
        for (;;) {
            skip_trivia();
            Token t;
            t.pos = pos();
            if (at_end()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            const char c = peek();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string word;
                while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) word += advance();
                t.text = word;
                t.kind = word == "fn"       ? Tok::KwFn
                         : word == "let"    ? Tok::KwLet
                         : word == "select" ? Tok::KwSelect
                         : word == "else"   ? Tok::KwElse
                                            : Tok::Ident;
                out.push_back(std::move(t));
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && next_is_digit())) {
                std::string num;
                while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.')) num += advance();
                if (!at_end() && (peek() == 'e' || peek() == 'E')) {
                    num += advance();
                    if (!at_end() && (peek() == '+' || peek() == '-')) num += advance();
                    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) num += advance();
                }
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
                if (ec != std::errc() || ptr != num.data() + num.size()) {
                    diags.push_back({t.pos, "malformed number literal '" + num + "'"});
                    t.kind = Tok::Error;
                } else {
                    t.kind = Tok::Number;
                    t.number = v;
                }
                t.text = num;
                out.push_back(std::move(t));
                continue;
            }
            advance();
            auto two = [&](char second, Tok yes, Tok no) {
                if (!at_end() && peek() == second) {
                    advance();
                    t.kind = yes;
                } else {
                    t.kind = no;
                }
            };
            switch (c) {
                case '(': t.kind = Tok::LParen; break;
                case ')': t.kind = Tok::RParen; break;
                case '{': t.kind = Tok::LBrace; break;
                case '}': t.kind = Tok::RBrace; break;
                case ',': t.kind = Tok::Comma; break;
                case ';': t.kind = Tok::Semi; break;
                case '+': t.kind = Tok::Plus; break;
                case '-': t.kind = Tok::Minus; break;
                case '*': t.kind = Tok::Star; break;
                case '/': t.kind = Tok::Slash; break;
                case '<': two('=', Tok::Le, Tok::Lt); break;
                case '>': two('=', Tok::Ge, Tok::Gt); break;
                case '=':
                    if (!at_end() && peek() == '=') {
                        advance();
                        t.kind = Tok::EqEq;
                    } else if (!at_end() && peek() == '>') {
                        advance();
                        t.kind = Tok::Arrow;
                    } else {
                        t.kind = Tok::Assign;
                    }
                    break;
                case '!':
                    if (!at_end() && peek() == '=') {
                        advance();
                        t.kind = Tok::Ne;
                    } else {
                        diags.push_back({t.pos, "unexpected character '!'"});
                        t.kind = Tok::Error;
                    }
                    break;
                case '&':
                    if (!at_end() && peek() == '&') {
                        advance();
                        t.kind = Tok::AndAnd;
                    } else {
                        diags.push_back({t.pos, "unexpected character '&' (did you mean '&&'?)"});
                        t.kind = Tok::Error;
                    }
                    break;
                case '|':
                    if (!at_end() && peek() == '|') {
                        advance();
                        t.kind = Tok::OrOr;
                    } else {
                        diags.push_back({t.pos, "unexpected character '|' (did you mean '||'?)"});
                        t.kind = Tok::Error;
                    }
                    break;
                default:
                    diags.push_back({t.pos, std::string("unexpected character '") + c + "'"});
                    t.kind = Tok::Error;
                    break;
            }
            out.push_back(std::move(t));
        }
    }

  private:
    std::string_view src_;
    size_t i_ = 0;
    int line_ = 1, col_ = 1;

    bool at_end() const { return i_ >= src_.size(); }
    char peek() const { return src_[i_]; }
    bool next_is_digit() const { return i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1])); }
    SrcPos pos() const { return {line_, col_}; }

    char advance() {
        const char c = src_[i_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_trivia() {
        for (;;) {
            while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
            if (!at_end() && peek() == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
                while (!at_end() && peek() != '\n') advance();
                continue;
            }
            return;
        }
    }
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
  public:
    Parser(std::vector<Token> toks, std::vector<Diagnostic>& diags) : toks_(std::move(toks)), diags_(diags) {}

    std::vector<FnDef> run() {
        std::vector<FnDef> fns;
        while (!at(Tok::End)) {
            if (at(Tok::KwFn)) {
                FnDef fn;
                if (parse_fn(fn)) fns.push_back(std::move(fn));
                continue;
            }
            error(cur().pos, "expected 'fn' at top level");
            sync_to_fn();
        }
        return fns;
    }

  private:
    std::vector<Token> toks_;
    std::vector<Diagnostic>& diags_;
    size_t i_ = 0;

    const Token& cur() const { return toks_[i_]; }
    bool at(Tok k) const { return cur().kind == k; }
    const Token& advance() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }
    bool eat(Tok k) {
        if (at(k)) {
            advance();
            return true;
        }
        return false;
    }
    void error(SrcPos pos, std::string message) { diags_.push_back({pos, std::move(message)}); }

    bool expect(Tok k, const char* what) {
        if (eat(k)) return true;
        error(cur().pos, std::string("expected ") + what);
        return false;
    }

    void sync_to_fn() {
        while (!at(Tok::End) && !at(Tok::KwFn)) advance();
    }

    // Skips to a statement-ish boundary within a function body.
    void sync_stmt() {
        int depth = 0;
        while (!at(Tok::End)) {
            if (at(Tok::Semi) && depth == 0) {
                advance();
                return;
            }
            if (at(Tok::LBrace) || at(Tok::LParen)) ++depth;
            if (at(Tok::RBrace) || at(Tok::RParen)) {
                if (depth == 0) return;
                --depth;
            }
            if (at(Tok::KwFn)) return;
            advance();
        }
    }

    bool parse_fn(FnDef& fn) {
        fn.pos = cur().pos;
        expect(Tok::KwFn, "'fn'");
        if (at(Tok::Ident)) {
            fn.name = cur().text;
            advance();
        } else {
            error(cur().pos, "expected function name after 'fn'");
            sync_to_fn();
            return false;
        }
        if (!expect(Tok::LParen, "'(' after function name")) {
            sync_to_fn();
            return false;
        }
        if (!at(Tok::RParen)) {
            do {
                if (at(Tok::Ident)) {
                    fn.params.push_back(cur().text);
                    fn.param_pos.push_back(cur().pos);
                    advance();
                } else {
                    error(cur().pos, "expected parameter name");
                    break;
                }
            } while (eat(Tok::Comma));
        }
        expect(Tok::RParen, "')' after parameters");
        if (!expect(Tok::LBrace, "'{' to open function body")) {
            sync_to_fn();
            return false;
        }

        bool have_result = false;
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            if (at(Tok::KwLet)) {
                LetStmt let;
                let.pos = cur().pos;
                advance();
                if (at(Tok::Ident)) {
                    let.name = cur().text;
                    advance();
                } else {
                    error(cur().pos, "expected name after 'let'");
                    sync_stmt();
                    continue;
                }
                if (!expect(Tok::Assign, "'=' in let binding")) {
                    sync_stmt();
                    continue;
                }
                let.value = parse_expr();
                expect(Tok::Semi, "';' after let binding");
                fn.lets.push_back(std::move(let));
                continue;
            }
            if (have_result) {
                error(cur().pos, "unexpected tokens after the result expression");
                sync_stmt();
                continue;
            }
            fn.result = parse_expr();
            have_result = true;
        }
        if (!have_result) error(cur().pos, "function body needs a result expression");
        expect(Tok::RBrace, "'}' to close function body");
        return true;
    }

    DslExpr parse_expr() {
        DslExpr lhs = parse_term();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            DslExpr bin;
            bin.kind = DslExpr::Kind::Binary;
            bin.pos = cur().pos;
            bin.op = at(Tok::Plus) ? '+' : '-';
            advance();
            bin.args.push_back(std::move(lhs));
            bin.args.push_back(parse_term());
            lhs = std::move(bin);
        }
        return lhs;
    }

    DslExpr parse_term() {
        DslExpr lhs = parse_unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            DslExpr bin;
            bin.kind = DslExpr::Kind::Binary;
            bin.pos = cur().pos;
            bin.op = at(Tok::Star) ? '*' : '/';
            advance();
            bin.args.push_back(std::move(lhs));
            bin.args.push_back(parse_unary());
            lhs = std::move(bin);
        }
        return lhs;
    }

    DslExpr parse_unary() {
        if (at(Tok::Minus)) {
            const SrcPos pos = cur().pos;
            advance();
            DslExpr inner = parse_unary();
            if (inner.kind == DslExpr::Kind::Number) {
                inner.number = -inner.number;  // fold literal sign
                inner.pos = pos;
                return inner;
            }
            DslExpr neg;
            neg.kind = DslExpr::Kind::Unary;
            neg.pos = pos;
            neg.op = '-';
            neg.args.push_back(std::move(inner));
            return neg;
        }
        return parse_primary();
    }

    DslExpr parse_primary() {
        DslExpr e;
        e.pos = cur().pos;
        switch (cur().kind) {
            case Tok::Number:
                e.kind = DslExpr::Kind::Number;
                e.number = cur().number;
                advance();
                return e;
            case Tok::Ident: {
                e.name = cur().text;
                advance();
                if (eat(Tok::LParen)) {
                    e.kind = DslExpr::Kind::Call;
                    if (!at(Tok::RParen)) {
                        do e.args.push_back(parse_expr());
                        while (eat(Tok::Comma));
                    }
                    expect(Tok::RParen, "')' to close call arguments");
                } else {
                    e.kind = DslExpr::Kind::Ref;
                }
                return e;
            }
            case Tok::LParen: {
                advance();
                e = parse_expr();
                expect(Tok::RParen, "')'");
                return e;
            }
            case Tok::KwSelect: return parse_select();
            default:
                error(cur().pos, "expected an expression, found '" + describe(cur()) + "'");
                if (!at(Tok::End) && !at(Tok::RBrace) && !at(Tok::Semi) && !at(Tok::Comma) && !at(Tok::RParen)) advance();
                e.kind = DslExpr::Kind::Number;
                e.number = 0.0;
                return e;
        }
    }

    DslExpr parse_select() {
        DslExpr sel;
        sel.kind = DslExpr::Kind::Select;
        sel.pos = cur().pos;
        expect(Tok::KwSelect, "'select'");
        expect(Tok::LBrace, "'{' after select");
        bool seen_else = false;
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            SelectArm arm;
            if (at(Tok::KwElse)) {
                arm.is_else = true;
                arm.guard.kind = GuardExpr::Kind::True;
                arm.guard.pos = cur().pos;
                if (seen_else) error(cur().pos, "duplicate 'else' arm in select");
                seen_else = true;
                advance();
            } else {
                if (seen_else) error(cur().pos, "'else' must be the last arm of a select");
                arm.guard = parse_guard();
            }
            expect(Tok::Arrow, "'=>' after guard");
            arm.value = parse_expr();
            sel.arms.push_back(std::move(arm));
            if (!eat(Tok::Comma)) break;
        }
        expect(Tok::RBrace, "'}' to close select");
        if (sel.arms.empty()) error(sel.pos, "select needs at least one arm");
        return sel;
    }

    GuardExpr parse_guard() { return parse_guard_or(); }

    GuardExpr parse_guard_or() {
        GuardExpr lhs = parse_guard_and();
        while (at(Tok::OrOr)) {
            GuardExpr node;
            node.kind = GuardExpr::Kind::Or;
            node.pos = cur().pos;
            advance();
            node.kids.push_back(std::move(lhs));
            node.kids.push_back(parse_guard_and());
            lhs = std::move(node);
        }
        return lhs;
    }

    GuardExpr parse_guard_and() {
        GuardExpr lhs = parse_guard_atom();
        while (at(Tok::AndAnd)) {
            GuardExpr node;
            node.kind = GuardExpr::Kind::And;
            node.pos = cur().pos;
            advance();
            node.kids.push_back(std::move(lhs));
            node.kids.push_back(parse_guard_atom());
            lhs = std::move(node);
        }
        return lhs;
    }

    GuardExpr parse_guard_atom() {
        // '(' may open a guard group or a parenthesized arithmetic
        // expression; try the group first and backtrack.
        if (at(Tok::LParen)) {
            const size_t mark = i_;
            const size_t diag_mark = diags_.size();
            advance();
            GuardExpr inner = parse_guard();
            if (diags_.size() == diag_mark && at(Tok::RParen)) {
                advance();
                return inner;
            }
            diags_.resize(diag_mark);
            i_ = mark;
        }
        GuardExpr cmp;
        cmp.kind = GuardExpr::Kind::Cmp;
        cmp.pos = cur().pos;
        cmp.sides.push_back(parse_expr());
        switch (cur().kind) {
            case Tok::Lt: cmp.cmp = "<"; break;
            case Tok::Le: cmp.cmp = "<="; break;
            case Tok::Gt: cmp.cmp = ">"; break;
            case Tok::Ge: cmp.cmp = ">="; break;
            case Tok::EqEq: cmp.cmp = "=="; break;
            case Tok::Ne: cmp.cmp = "!="; break;
            default:
                error(cur().pos, "expected a comparison operator in guard");
                cmp.cmp = "<";
                cmp.sides.push_back(cmp.sides[0]);
                return cmp;
        }
        advance();
        cmp.sides.push_back(parse_expr());
        return cmp;
    }

    static std::string describe(const Token& t) {
        if (!t.text.empty()) return t.text;
        switch (t.kind) {
            case Tok::End: return "end of input";
            case Tok::LParen: return "(";
            case Tok::RParen: return ")";
            case Tok::LBrace: return "{";
            case Tok::RBrace: return "}";
            case Tok::Comma: return ",";
            case Tok::Semi: return ";";
            case Tok::Assign: return "=";
            case Tok::Arrow: return "=>";
            case Tok::Plus: return "+";
            case Tok::Minus: return "-";
            case Tok::Star: return "*";
            case Tok::Slash: return "/";
            default: return "?";
        }
    }
};

}  // namespace

ParseResult parse(std::string_view source) {
    ParseResult out;
    Lexer lexer(source);
    std::vector<Token> toks = lexer.run(out.diagnostics);
    Parser parser(std::move(toks), out.diagnostics);
    out.fns = parser.run();

    std::set<std::string> names;
    for (const FnDef& fn : out.fns) {
        if (!names.insert(fn.name).second)
            out.diagnostics.push_back({fn.pos, "duplicate function name '" + fn.name + "'"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pretty printer

namespace {

int precedence(const DslExpr& e) {
    if (e.kind == DslExpr::Kind::Binary) return (e.op == '+' || e.op == '-') ? 1 : 2;
    if (e.kind == DslExpr::Kind::Unary) return 3;
    return 4;
}

void print_expr(const DslExpr& e, std::string& out);

void print_child(const DslExpr& child, int parent_prec, bool right, std::string& out) {
    const int prec = precedence(child);
    const bool parens = prec < parent_prec || (right && prec == parent_prec);
    if (parens) out += '(';
    print_expr(child, out);
    if (parens) out += ')';
}

void print_guard(const GuardExpr& g, std::string& out) {
    switch (g.kind) {
        case GuardExpr::Kind::True: out += "else"; break;
        case GuardExpr::Kind::Cmp:
            print_expr(g.sides[0], out);
            out += ' ';
            out += g.cmp;
            out += ' ';
            print_expr(g.sides[1], out);
            break;
        case GuardExpr::Kind::And:
            for (size_t i = 0; i < g.kids.size(); ++i) {
                if (i) out += " && ";
                const bool parens = g.kids[i].kind == GuardExpr::Kind::Or;
                if (parens) out += '(';
                print_guard(g.kids[i], out);
                if (parens) out += ')';
            }
            break;
        case GuardExpr::Kind::Or:
            for (size_t i = 0; i < g.kids.size(); ++i) {
                if (i) out += " || ";
                print_guard(g.kids[i], out);
            }
            break;
    }
}

void print_expr(const DslExpr& e, std::string& out) {
    switch (e.kind) {
        case DslExpr::Kind::Number: out += format_double(e.number); break;
        case DslExpr::Kind::Ref: out += e.name; break;
        case DslExpr::Kind::Unary:
            out += '-';
            print_child(e.args[0], 3, true, out);
            break;
        case DslExpr::Kind::Binary: {
            const int prec = precedence(e);
            print_child(e.args[0], prec, false, out);
            out += ' ';
            out += e.op;
            out += ' ';
            print_child(e.args[1], prec, true, out);
            break;
        }
        case DslExpr::Kind::Call:
            out += e.name;
            out += '(';
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ", ";
                print_expr(e.args[i], out);
            }
            out += ')';
            break;
        case DslExpr::Kind::Select:
            out += "select { ";
            for (size_t i = 0; i < e.arms.size(); ++i) {
                if (i) out += ", ";
                if (e.arms[i].is_else)
                    out += "else";
                else
                    print_guard(e.arms[i].guard, out);
                out += " => ";
                print_expr(e.arms[i].value, out);
            }
            out += " }";
            break;
    }
}

}  // namespace

std::string pretty_print(const FnDef& fn) {
    std::string out = "fn " + fn.name + "(";
    for (size_t i = 0; i < fn.params.size(); ++i) {
        if (i) out += ", ";
        out += fn.params[i];
    }
    out += ") {\n";
    for (const LetStmt& let : fn.lets) {
        out += "  let " + let.name + " = ";
        print_expr(let.value, out);
        out += ";\n";
    }
    out += "  ";
    print_expr(fn.result, out);
    out += "\n}\n";
    return out;
}

std::string pretty_print(const ParseResult& parsed) {
    std::string out;
    for (size_t i = 0; i < parsed.fns.size(); ++i) {
        if (i) out += '\n';
        out += pretty_print(parsed.fns[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// AST equality (positions ignored)

namespace {
bool guard_equal(const GuardExpr& a, const GuardExpr& b);
}

bool ast_equal(const DslExpr& a, const DslExpr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case DslExpr::Kind::Number: return a.number == b.number;
        case DslExpr::Kind::Ref: return a.name == b.name;
        case DslExpr::Kind::Unary:
        case DslExpr::Kind::Binary: {
            if (a.op != b.op || a.args.size() != b.args.size()) return false;
            for (size_t i = 0; i < a.args.size(); ++i)
                if (!ast_equal(a.args[i], b.args[i])) return false;
            return true;
        }
        case DslExpr::Kind::Call: {
            if (a.name != b.name || a.args.size() != b.args.size()) return false;
            for (size_t i = 0; i < a.args.size(); ++i)
                if (!ast_equal(a.args[i], b.args[i])) return false;
            return true;
        }
        case DslExpr::Kind::Select: {
            if (a.arms.size() != b.arms.size()) return false;
            for (size_t i = 0; i < a.arms.size(); ++i) {
                if (a.arms[i].is_else != b.arms[i].is_else) return false;
                if (!guard_equal(a.arms[i].guard, b.arms[i].guard)) return false;
                if (!ast_equal(a.arms[i].value, b.arms[i].value)) return false;
            }
            return true;
        }
    }
    return false;
}

namespace {

bool guard_equal(const GuardExpr& a, const GuardExpr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case GuardExpr::Kind::True: return true;
        case GuardExpr::Kind::Cmp:
            return a.cmp == b.cmp && ast_equal(a.sides[0], b.sides[0]) && ast_equal(a.sides[1], b.sides[1]);
        case GuardExpr::Kind::And:
        case GuardExpr::Kind::Or: {
            if (a.kids.size() != b.kids.size()) return false;
            for (size_t i = 0; i < a.kids.size(); ++i)
                if (!guard_equal(a.kids[i], b.kids[i])) return false;
            return true;
        }
    }
    return false;
}

}  // namespace

bool ast_equal(const FnDef& a, const FnDef& b) {
    if (a.name != b.name || a.params != b.params || a.lets.size() != b.lets.size()) return false;
    for (size_t i = 0; i < a.lets.size(); ++i)
        if (a.lets[i].name != b.lets[i].name || !ast_equal(a.lets[i].value, b.lets[i].value)) return false;
    return ast_equal(a.result, b.result);
}

bool ast_equal(const ParseResult& a, const ParseResult& b) {
    if (a.fns.size() != b.fns.size()) return false;
    for (size_t i = 0; i < a.fns.size(); ++i)
        if (!ast_equal(a.fns[i], b.fns[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Compiler

namespace {

// Predecessor slots of the node being assembled.
struct PredCollector {
    std::vector<int> preds;

    int slot_of(int node_id) {
        for (size_t i = 0; i < preds.size(); ++i)
            if (preds[i] == node_id) return static_cast<int>(i);
        preds.push_back(node_id);
        return static_cast<int>(preds.size()) - 1;
    }
};

struct Env {
    std::map<std::string, int> names;  // name -> program node id
};

class Compiler {
  public:
    Compiler(const ParseResult& parsed, std::vector<Diagnostic>& diags)
        : parsed_(parsed), diags_(diags), builder_(0) {}

    std::optional<Program> run(const std::string& fn_name, std::map<int, SrcPos>& node_pos) {
        const FnDef* fn = parsed_.find(fn_name);
        if (!fn) {
            diags_.push_back({{}, "unknown function '" + fn_name + "'"});
            return std::nullopt;
        }
        if (fn->params.empty()) {
            diags_.push_back({fn->pos, "function '" + fn_name + "' needs at least one parameter"});
            return std::nullopt;
        }
        static_checks();

        builder_ = fixtures::ProgramBuilder(static_cast<int>(fn->params.size()));
        first_param_node_ = 0;
        std::vector<int> arg_nodes;
        for (size_t i = 0; i < fn->params.size(); ++i) arg_nodes.push_back(static_cast<int>(i));

        const int result = lower_fn(*fn, arg_nodes, fn->pos);
        if (!diags_.empty()) return std::nullopt;

        if (result != builder_.prog.m - 1 || result < builder_.prog.p) {
            // Result must be the last node: add a copy node.
            const int id = builder_.node(builtins::identity1(), {result});
            node_pos_[id] = fn->pos;
        }
        node_pos = node_pos_;
        Program prog = builder_.finish(1);
        const auto violations = prog.validate();
        assert(violations.empty());
        (void)violations;
        return prog;
    }

  private:
    const ParseResult& parsed_;
    std::vector<Diagnostic>& diags_;
    fixtures::ProgramBuilder builder_;
    std::map<int, SrcPos> node_pos_;
    std::vector<std::string> call_stack_;
    std::vector<size_t> scope_stack_;  // definition index of the body being lowered
    int first_param_node_ = 0;

    void error(SrcPos pos, std::string message) { diags_.push_back({pos, std::move(message)}); }

    // Calls resolve against functions defined before the enclosing body.
    const FnDef* resolve(const std::string& name) const {
        const size_t limit = scope_stack_.empty() ? parsed_.fns.size() : scope_stack_.back();
        for (size_t i = 0; i < limit; ++i)
            if (parsed_.fns[i].name == name) return &parsed_.fns[i];
        return nullptr;
    }

    size_t def_index(const FnDef& fn) const {
        for (size_t i = 0; i < parsed_.fns.size(); ++i)
            if (&parsed_.fns[i] == &fn) return i;
        return parsed_.fns.size();
    }

    void static_checks() {
        for (const FnDef& fn : parsed_.fns) {
            std::set<std::string> seen;
            for (size_t i = 0; i < fn.params.size(); ++i)
                if (!seen.insert(fn.params[i]).second)
                    error(fn.param_pos[i], "duplicate parameter '" + fn.params[i] + "'");
            for (const LetStmt& let : fn.lets)
                if (!seen.insert(let.name).second)
                    error(let.pos, "name '" + let.name + "' is already bound in this function");
        }
    }

    int make_node(SelectionFunction fn, std::vector<int> preds, SrcPos pos) {
        const int id = builder_.node(std::move(fn), std::move(preds));
        node_pos_[id] = pos;
        return id;
    }

    // Inline a function call: params are bound to existing nodes.
    int lower_fn(const FnDef& fn, const std::vector<int>& arg_nodes, SrcPos call_pos) {
        if (std::find(call_stack_.begin(), call_stack_.end(), fn.name) != call_stack_.end()) {
            std::string cycle;
            for (const std::string& s : call_stack_) cycle += s + " -> ";
            error(call_pos, "recursive call: " + cycle + fn.name);
            return first_param_node_;
        }
        if (arg_nodes.size() != fn.params.size()) {
            error(call_pos, "call to '" + fn.name + "' with " + std::to_string(arg_nodes.size()) + " arguments, expected " +
                                std::to_string(fn.params.size()));
            return first_param_node_;
        }
        call_stack_.push_back(fn.name);
        scope_stack_.push_back(def_index(fn));
        Env env;
        for (size_t i = 0; i < fn.params.size(); ++i) env.names[fn.params[i]] = arg_nodes[i];
        for (const LetStmt& let : fn.lets) env.names[let.name] = lower_to_node(let.value, env);
        const int result = lower_to_node(fn.result, env);
        scope_stack_.pop_back();
        call_stack_.pop_back();
        return result;
    }

    // Lowers any expression to the id of a node holding its value.
    int lower_to_node(const DslExpr& e, Env& env) {
        if (e.kind == DslExpr::Kind::Ref) {
            const auto it = env.names.find(e.name);
            if (it == env.names.end()) {
                error(e.pos, "unknown name '" + e.name + "'");
                return first_param_node_;
            }
            return it->second;
        }
        if (e.kind == DslExpr::Kind::Select) return lower_select(e, env);
        // User definitions shadow same-named intrinsics.
        if (e.kind == DslExpr::Kind::Call && (resolve(e.name) != nullptr || !is_smooth_intrinsic(e.name)))
            return lower_call(e, env);

        PredCollector pc;
        Expr ex = lower_pure(e, env, pc);
        if (pc.preds.empty()) pc.slot_of(first_param_node_);  // keep the DAG connected
        ex = remap_expr(ex, static_cast<int>(pc.preds.size()));
        return make_node(SelectionFunction::smooth(std::move(ex)), pc.preds, e.pos);
    }

    static bool is_smooth_intrinsic(const std::string& name) {
        return name == "exp" || name == "log" || name == "affine";
    }

    int lower_call(const DslExpr& e, Env& env) {
        if (std::find(call_stack_.begin(), call_stack_.end(), e.name) != call_stack_.end()) {
            std::string cycle;
            for (const std::string& s : call_stack_) cycle += s + " -> ";
            error(e.pos, "recursive call: " + cycle + e.name);
            return first_param_node_;
        }
        if (const FnDef* callee = resolve(e.name)) {
            std::vector<int> arg_nodes;
            for (const DslExpr& arg : e.args) arg_nodes.push_back(lower_to_node(arg, env));
            return lower_fn(*callee, arg_nodes, e.pos);
        }
        if (e.name == "relu" || e.name == "abs") {
            if (e.args.size() != 1) {
                error(e.pos, "'" + e.name + "' takes exactly one argument");
                return first_param_node_;
            }
            const int arg = lower_to_node(e.args[0], env);
            return make_node(e.name == "relu" ? builtins::relu() : builtins::abs(), {arg}, e.pos);
        }
        if (e.name == "max" || e.name == "min") {
            if (e.args.size() != 2) {
                error(e.pos, "'" + e.name + "' takes exactly two arguments");
                return first_param_node_;
            }
            const int a = lower_to_node(e.args[0], env);
            const int b = lower_to_node(e.args[1], env);
            return make_node(e.name == "max" ? builtins::max2() : builtins::min2(), {a, b}, e.pos);
        }
        error(e.pos, "call to unknown function '" + e.name + "'");
        return first_param_node_;
    }

    int lower_select(const DslExpr& e, Env& env) {
        PredCollector pc;
        std::vector<Predicate> guards;
        std::vector<std::vector<Expr>> branches;
        bool total = false;
        for (const SelectArm& arm : e.arms) {
            if (arm.is_else) {
                guards.push_back(Predicate::always());
                total = true;
            } else {
                guards.push_back(lower_guard(arm.guard, env, pc));
            }
            branches.push_back({lower_pure(arm.value, env, pc)});
        }
        if (!total && !syntactically_total(e)) error(e.pos, "select guards are not total; add an 'else' arm");
        if (pc.preds.empty()) pc.slot_of(first_param_node_);
        const int arity = static_cast<int>(pc.preds.size());
        for (Predicate& g : guards) g = remap_pred(g, arity);
        for (auto& br : branches) br[0] = remap_expr(br[0], arity);
        return make_node(SelectionFunction(arity, std::move(guards), std::move(branches)), pc.preds, e.pos);
    }

    // Two complementary comparison arms over the same sides cover the line.
    bool syntactically_total(const DslExpr& sel) const {
        if (sel.arms.size() != 2) return false;
        const GuardExpr& a = sel.arms[0].guard;
        const GuardExpr& b = sel.arms[1].guard;
        if (a.kind != GuardExpr::Kind::Cmp || b.kind != GuardExpr::Kind::Cmp) return false;
        if (!ast_equal(a.sides[0], b.sides[0]) || !ast_equal(a.sides[1], b.sides[1])) return false;
        auto complement = [](const std::string& op) -> std::string {
            if (op == "<") return ">=";
            if (op == "<=") return ">";
            if (op == ">") return "<=";
            if (op == ">=") return "<";
            if (op == "==") return "!=";
            if (op == "!=") return "==";
            return "";
        };
        return complement(a.cmp) == b.cmp;
    }

    Predicate lower_guard(const GuardExpr& g, Env& env, PredCollector& pc) {
        switch (g.kind) {
            case GuardExpr::Kind::True: return Predicate::always();
            case GuardExpr::Kind::Cmp: {
                Expr lhs = lower_pure(g.sides[0], env, pc);
                Expr rhs = lower_pure(g.sides[1], env, pc);
                Expr diff = Expr::sub(lhs, rhs);
                if (g.cmp == "<") return Predicate::atom(std::move(diff), Rel::LT);
                if (g.cmp == "<=") return Predicate::atom(std::move(diff), Rel::LE);
                if (g.cmp == ">") return Predicate::atom(std::move(diff), Rel::GT);
                if (g.cmp == ">=") return Predicate::atom(std::move(diff), Rel::GE);
                if (g.cmp == "==") return Predicate::atom(std::move(diff), Rel::EQ);
                // a != b  <=>  a - b < 0 or a - b > 0
                return Predicate::any_of({Predicate::atom(diff, Rel::LT), Predicate::atom(diff, Rel::GT)});
            }
            case GuardExpr::Kind::And:
            case GuardExpr::Kind::Or: {
                std::vector<Predicate> kids;
                for (const GuardExpr& k : g.kids) kids.push_back(lower_guard(k, env, pc));
                return g.kind == GuardExpr::Kind::And ? Predicate::all_of(std::move(kids))
                                                      : Predicate::any_of(std::move(kids));
            }
        }
        return Predicate::always();
    }

    // Lowers a smooth expression into an Expr over the collector's slots.
    // Nonsmooth subtrees and calls become separate nodes referenced as vars.
    Expr lower_pure(const DslExpr& e, Env& env, PredCollector& pc) {
        // Slots can grow while lowering siblings; build with a generous
        // placeholder arity and remap at node-creation time.
        switch (e.kind) {
            case DslExpr::Kind::Number: return Expr::constant(kMaxSlots, e.number);
            case DslExpr::Kind::Ref: {
                const auto it = env.names.find(e.name);
                if (it == env.names.end()) {
                    error(e.pos, "unknown name '" + e.name + "'");
                    return Expr::constant(kMaxSlots, 0.0);
                }
                return slot_var(pc, it->second, e.pos);
            }
            case DslExpr::Kind::Unary: return -lower_pure(e.args[0], env, pc);
            case DslExpr::Kind::Binary: {
                const Expr a = lower_pure(e.args[0], env, pc);
                const Expr b = lower_pure(e.args[1], env, pc);
                switch (e.op) {
                    case '+': return Expr::add(a, b);
                    case '-': return Expr::sub(a, b);
                    case '*': return Expr::mul(a, b);
                    default: return Expr::div(a, b);
                }
            }
            case DslExpr::Kind::Call: {
                if (resolve(e.name) == nullptr) {
                    if (e.name == "exp" || e.name == "log") {
                        if (e.args.size() != 1) {
                            error(e.pos, "'" + e.name + "' takes exactly one argument");
                            return Expr::constant(kMaxSlots, 0.0);
                        }
                        const Expr a = lower_pure(e.args[0], env, pc);
                        return e.name == "exp" ? Expr::exp(a) : Expr::log(a);
                    }
                    if (e.name == "affine") return lower_affine(e, env, pc);
                }
                const int node = lower_to_node(e, env);
                return slot_var(pc, node, e.pos);
            }
            case DslExpr::Kind::Select: {
                const int node = lower_select(e, env);
                return slot_var(pc, node, e.pos);
            }
        }
        return Expr::constant(kMaxSlots, 0.0);
    }

    // affine(c1, e1, c2, e2, ..., b): constant coefficients alternating with
    // expressions, trailing constant offset; lowered to c1*e1 + ... + b.
    Expr lower_affine(const DslExpr& e, Env& env, PredCollector& pc) {
        if (e.args.size() < 3 || e.args.size() % 2 == 0) {
            error(e.pos, "'affine' takes arguments (c1, e1, ..., ck, ek, b) with literal coefficients");
            return Expr::constant(kMaxSlots, 0.0);
        }
        const size_t terms = (e.args.size() - 1) / 2;
        bool bad = false;
        for (size_t i = 0; i < terms; ++i)
            if (e.args[2 * i].kind != DslExpr::Kind::Number) {
                error(e.args[2 * i].pos, "'affine' coefficients must be number literals");
                bad = true;
            }
        if (e.args.back().kind != DslExpr::Kind::Number) {
            error(e.args.back().pos, "'affine' offset must be a number literal");
            bad = true;
        }
        if (bad) return Expr::constant(kMaxSlots, 0.0);

        Expr acc = Expr::constant(kMaxSlots, e.args.back().number);
        for (size_t i = 0; i < terms; ++i) {
            const double c = e.args[2 * i].number;
            Expr term = Expr::mul(Expr::constant(kMaxSlots, c), lower_pure(e.args[2 * i + 1], env, pc));
            acc = Expr::add(acc, term);
        }
        return acc;
    }

    // Expressions are built over kMaxSlots placeholder inputs; shrink to the
    // final predecessor count once it is known.
    static constexpr int kMaxSlots = 64;

    Expr slot_var(PredCollector& pc, int node_id, SrcPos pos) {
        const int slot = pc.slot_of(node_id);
        if (slot >= kMaxSlots) {
            error(pos, "expression depends on more than " + std::to_string(kMaxSlots) + " distinct values");
            return Expr::constant(kMaxSlots, 0.0);
        }
        return Expr::variable(kMaxSlots, slot);
    }

    static Expr remap_expr(const Expr& e, int arity) {
        std::string text = e.to_sexpr();
        return reparse_with_arity(text, arity);
    }

    static Predicate remap_pred(const Predicate& g, int arity) {
        return Predicate::parse_text(g.to_text(), arity);
    }

    static Expr reparse_with_arity(const std::string& text, int arity) { return Expr::parse_sexpr(text, arity); }
};

}  // namespace

CompileOutput compile(const ParseResult& parsed, const std::string& fn_name, std::string_view source) {
    CompileOutput out;
    out.diagnostics = parsed.diagnostics;
    if (!out.diagnostics.empty()) return out;

    Compiler compiler(parsed, out.diagnostics);
    std::map<int, SrcPos> node_pos;
    std::optional<Program> prog = compiler.run(fn_name, node_pos);
    if (!prog || !out.diagnostics.empty()) {
        out.artifact.reset();
        return out;
    }
    CompileArtifact art;
    art.program = std::move(*prog);
    art.fn_name = fn_name;
    art.node_pos = std::move(node_pos);
    uint64_t h = 1469598103934665603ULL;
    for (const char c : source) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    art.source_hash = h;
    out.artifact = std::move(art);
    return out;
}

CompileOutput compile_source(std::string_view source, const std::string& fn_name) {
    return compile(parse(source), fn_name, source);
}

}  // namespace selgrad::dsl
