#include "selgrad/program.hpp"

#include <cassert>

#include "json.hpp"

namespace selgrad {

std::vector<Violation> Program::validate() const {
    std::vector<Violation> out;
    if (p < 1) out.push_back({-1, "input dimension must be >= 1"});
    if (q < 1) out.push_back({-1, "output dimension must be >= 1"});
    if (m < p + q) out.push_back({-1, "node count must be >= p + q"});
    if (rel.node_count != m) out.push_back({-1, "relation node count differs from m"});
    if (static_cast<int>(rel.pred.size()) != m) {
        out.push_back({-1, "predecessor table size differs from m"});
        return out;
    }
    for (int i = 0; i < m; ++i) {
        for (int j : rel.pred[i])
            if (j >= i) out.push_back({i, "predecessor order broken: " + std::to_string(j) + " >= " + std::to_string(i)});
        for (int j : rel.pred[i])
            if (j < 0) out.push_back({i, "negative predecessor id"});
        if (i < p && !rel.pred[i].empty()) out.push_back({i, "input node with predecessors"});
        if (i >= p && rel.pred[i].empty()) out.push_back({i, "empty predecessors"});
    }
    if (static_cast<int>(nodes.size()) != m - p) {
        out.push_back({-1, "selection list size differs from m - p"});
        return out;
    }
    for (int k = 0; k < m - p; ++k) {
        const int node_id = p + k;
        if (node_id < static_cast<int>(rel.pred.size()) &&
            nodes[k].arity() != static_cast<int>(rel.pred[node_id].size()))
            out.push_back({node_id, "selection arity differs from predecessor count"});
        if (nodes[k].out_dim() != 1) out.push_back({node_id, "node selections must be scalar"});
    }
    return out;
}

Vec evaluate(const Program& prog, const Vec& x, EvalTrace& trace) {
    assert(static_cast<int>(x.size()) == prog.p);
    trace.values.assign(prog.m, 0.0);
    trace.local_grad.assign(prog.m - prog.p, {});
    trace.branch.assign(prog.m - prog.p, -1);
    for (int i = 0; i < prog.p; ++i) trace.values[i] = x[i];

    Vec args;
    for (int k = prog.p; k < prog.m; ++k) {
        const auto& preds = prog.rel.pred[k];
        args.resize(preds.size());
        for (size_t j = 0; j < preds.size(); ++j) args[j] = trace.values[preds[j]];
        const SelectionFunction& g = prog.nodes[k - prog.p];
        try {
            const int b = g.index_of(args);
            trace.branch[k - prog.p] = b;
            Vec node_values;
            g.branch(b)[0].eval_nodes(args, node_values);
            trace.values[k] = node_values.back();
            trace.local_grad[k - prog.p] = g.branch(b)[0].gradient_with_values(args, node_values);
        } catch (DomainFault& f) {
            f.program_node = k;
            throw;
        }
    }
    return Vec(trace.values.end() - prog.q, trace.values.end());
}

Vec evaluate(const Program& prog, const Vec& x) {
    EvalTrace trace;
    return evaluate(prog, x, trace);
}

double evaluate1(const Program& prog, const Vec& x) {
    assert(prog.q == 1);
    return evaluate(prog, x)[0];
}

std::function<Vec(const Vec&)> function_of(const Program& prog) {
    return [prog](const Vec& x) { return evaluate(prog, x); };
}

std::vector<int> branch_signature(const Program& prog, const Vec& x) {
    EvalTrace trace;
    evaluate(prog, x, trace);
    return trace.branch;
}

SelectionFunction selection_of(const Program& prog, size_t cap) {
    if (prog.q != 1) throw ProgramError("selection_of requires a scalar-output program");
    std::vector<SelectionFunction> reps;
    reps.reserve(prog.m);
    for (int i = 0; i < prog.p; ++i)
        reps.push_back(SelectionFunction::smooth(Expr::variable(prog.p, i)));
    for (int k = prog.p; k < prog.m; ++k) {
        std::vector<SelectionFunction> inner;
        for (int j : prog.rel.pred[k]) inner.push_back(reps[j]);
        reps.push_back(compose(prog.nodes[k - prog.p], inner, cap));
    }
    return reps.back();
}

std::string Program::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["p"] = p;
    j["q"] = q;
    j["m"] = m;
    j["pred"] = rel.pred;
    nlohmann::json ns = nlohmann::json::array();
    for (const SelectionFunction& g : nodes) ns.push_back(g.to_text());
    j["nodes"] = ns;
    return j.dump(2);
}

Program Program::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Program prog;
    prog.p = j.at("p").get<int>();
    prog.q = j.at("q").get<int>();
    prog.m = j.at("m").get<int>();
    prog.rel.node_count = prog.m;
    prog.rel.pred = j.at("pred").get<std::vector<std::vector<int>>>();
    for (const auto& item : j.at("nodes")) prog.nodes.push_back(SelectionFunction::parse_text(item.get<std::string>()));
    const auto violations = prog.validate();
    if (!violations.empty()) throw ProgramError("invalid program: " + violations.front().what);
    return prog;
}

}  // namespace selgrad
