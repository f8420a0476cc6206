#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selgrad/program.hpp"

namespace selgrad::dsl {

struct SrcPos {
    int line = 0;
    int col = 0;
};

struct Diagnostic {
    SrcPos pos;
    std::string message;
};

struct SelectArm;

// Surface expression grammar: numbers, references, arithmetic, calls to
// previously defined functions or intrinsics, and guarded select blocks.
struct DslExpr {
    enum class Kind : uint8_t { Number, Ref, Unary, Binary, Call, Select };

    Kind kind = Kind::Number;
    SrcPos pos;
    double number = 0.0;
    std::string name;            // Ref / Call
    char op = 0;                 // Binary: + - * /, Unary: -
    std::vector<DslExpr> args;   // operands / call arguments
    std::vector<SelectArm> arms; // Select
};

struct GuardExpr {
    enum class Kind : uint8_t { True, Cmp, And, Or };

    Kind kind = Kind::True;
    SrcPos pos;
    std::string cmp;              // "<", "<=", ">", ">=", "==", "!="
    std::vector<DslExpr> sides;   // 2 for Cmp
    std::vector<GuardExpr> kids;  // And / Or
};

struct SelectArm {
    GuardExpr guard;
    DslExpr value;
    bool is_else = false;
};

struct LetStmt {
    SrcPos pos;
    std::string name;
    DslExpr value;
};

struct FnDef {
    SrcPos pos;
    std::string name;
    std::vector<std::string> params;
    std::vector<SrcPos> param_pos;
    std::vector<LetStmt> lets;
    DslExpr result;
};

struct ParseResult {
    std::vector<FnDef> fns;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return diagnostics.empty(); }
    const FnDef* find(const std::string& name) const;
};

// Recursive-descent parse with recovery: diagnostics carry line/column and
// the parser keeps going, so one pass reports all errors it can see.
ParseResult parse(std::string_view source);

std::string pretty_print(const ParseResult& parsed);
std::string pretty_print(const FnDef& fn);

bool ast_equal(const DslExpr& a, const DslExpr& b);
bool ast_equal(const FnDef& a, const FnDef& b);
bool ast_equal(const ParseResult& a, const ParseResult& b);

struct CompileArtifact {
    Program program;
    std::string fn_name;
    uint64_t source_hash = 0;
    std::map<int, SrcPos> node_pos;  // program node -> source position
};

struct CompileOutput {
    std::optional<CompileArtifact> artifact;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return artifact.has_value(); }
};

// Compiles one function (inlining the call graph) into a program whose node
// order is a topological order. Branch selects become selection nodes; let
// bindings become memory cells (one node each).
CompileOutput compile(const ParseResult& parsed, const std::string& fn_name, std::string_view source = {});

// Convenience: parse + compile, merging diagnostics.
CompileOutput compile_source(std::string_view source, const std::string& fn_name);

}  // namespace selgrad::dsl
