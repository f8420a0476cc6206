// Command-line front end: compiles .sel sources to programs and drives
// evaluation, both AD modes, set-valued derivative reports, path-integral
// and gradient verification suites, SGD runs and the trap-avoidance
// experiment. Exit code 0 means every contract checked by the invoked
// command held.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "selgrad/autodiff.hpp"
#include "selgrad/builtins.hpp"
#include "selgrad/dsl.hpp"
#include "selgrad/fixtures.hpp"
#include "selgrad/generate.hpp"
#include "selgrad/optimize.hpp"
#include "selgrad/setfield.hpp"
#include "selgrad/verify.hpp"

using namespace selgrad;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_diagnostics(const std::string& path, const std::vector<dsl::Diagnostic>& diags) {
    for (const dsl::Diagnostic& d : diags)
        std::cerr << path << ":" << d.pos.line << ":" << d.pos.col << ": error: " << d.message << "\n";
}

Program compile_fn(const std::string& path, const std::string& fn) {
    const std::string source = read_file(path);
    const dsl::CompileOutput out = dsl::compile_source(source, fn);
    if (!out.ok()) {
        print_diagnostics(path, out.diagnostics);
        throw std::runtime_error("compilation of '" + fn + "' failed");
    }
    return out.artifact->program;
}

Vec parse_point(const std::vector<double>& at) { return Vec(at.begin(), at.end()); }

PiecewisePath load_path(const std::string& path) {
    const json j = json::parse(read_file(path));
    PiecewisePath out;
    const json& verts = j.is_array() ? j : j.at("vertices");
    for (const auto& v : verts) {
        if (v.is_array())
            out.vertices.push_back(v.get<Vec>());
        else
            out.vertices.push_back(Vec{v.get<double>()});
    }
    if (out.segments() < 1) throw std::runtime_error("path needs at least two vertices");
    return out;
}

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

FiniteSumProblem compile_sum(const std::string& path, const std::string& names_csv) {
    const std::string source = read_file(path);
    const dsl::ParseResult parsed = dsl::parse(source);
    if (!parsed.ok()) {
        print_diagnostics(path, parsed.diagnostics);
        throw std::runtime_error("parse failed");
    }
    FiniteSumProblem problem;
    for (const std::string& name : split_names(names_csv)) {
        const dsl::CompileOutput out = dsl::compile(parsed, name, source);
        if (!out.ok()) {
            print_diagnostics(path, out.diagnostics);
            throw std::runtime_error("compilation of '" + name + "' failed");
        }
        problem.components.push_back(out.artifact->program);
    }
    const auto violations = problem.validate();
    if (!violations.empty()) throw std::runtime_error("invalid finite sum: " + violations.front().what);
    return problem;
}

std::string fmt_vec(const Vec& v) {
    std::string s = "(";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_double(v[i]);
    }
    return s + ")";
}

// Failed contracts always leave a machine-readable record, even in
// human-table mode (on stderr, so tables stay clean).
void record_failure(const std::string& command, const json& detail) {
    json j{{"schema_version", 1}, {"failure", command}, {"detail", detail}};
    std::cerr << j.dump() << "\n";
}

int run_eval(const std::string& file, const std::string& fn, const Vec& x, bool as_json) {
    const Program prog = compile_fn(file, fn);
    const Vec y = evaluate(prog, x);
    if (as_json) {
        json j{{"schema_version", 1}, {"fn", fn}, {"at", x}, {"value", y}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << fn << fmt_vec(x) << " = " << fmt_vec(y) << "\n";
    }
    return 0;
}

int run_grad(const std::string& file, const std::string& fn, const Vec& x, const std::string& mode, bool as_json) {
    const Program prog = compile_fn(file, fn);
    EvalTrace trace;
    evaluate(prog, x, trace);
    json j{{"schema_version", 1}, {"fn", fn}, {"at", x}, {"mode", mode}};
    int rc = 0;
    double discrepancy = 0.0;
    Vec fwd, bwd;
    if (mode == "forward" || mode == "both") {
        fwd = forward_ad(prog, trace).gradient();
        j["forward"] = fwd;
    }
    if (mode == "backward" || mode == "both") {
        bwd = backward_ad(prog, trace).gradient();
        j["backward"] = bwd;
    }
    if (mode == "both") {
        discrepancy = max_abs_diff(fwd, bwd);
        j["discrepancy"] = discrepancy;
        if (discrepancy > 1e-12 * (1.0 + norm_inf(bwd))) {
            rc = 1;
            if (!as_json) record_failure("grad", j);
        }
    }
    if (as_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        if (!fwd.empty()) std::cout << "forward  " << fmt_vec(fwd) << "\n";
        if (!bwd.empty()) std::cout << "backward " << fmt_vec(bwd) << "\n";
        if (mode == "both") std::cout << "discrepancy " << format_double(discrepancy) << "\n";
    }
    return rc;
}

int run_lemma1(int p, int m, int trials, uint64_t seed, bool as_json) {
    if (!(0 < p && p < m)) {
        std::cerr << "need 0 < p < m\n";
        return 2;
    }
    CounterRng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        std::vector<Vec> d;
        for (int i = 0; i < m - p; ++i) d.push_back(rng.normal_vec(m));
        double scale = 0.0;
        const double disc = check_backprop_identity(p, m, d, &scale);
        worst = std::max(worst, disc / std::max(1.0, scale));
    }
    const bool pass = worst <= 1e-12;
    json j{{"schema_version", 1}, {"p", p}, {"m", m}, {"trials", trials}, {"max_discrepancy", worst}, {"pass", pass}};
    if (as_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("lemma1: p=%d m=%d trials=%d max discrepancy %.3e -> %s\n", p, m, trials, worst,
                    pass ? "PASS" : "FAIL");
        if (!pass) record_failure("check-lemma1", j);
    }
    return pass ? 0 : 1;
}

int run_dfield(const std::string& file, const std::string& fn, const Vec& x, double tol_active, bool as_json) {
    const ProgramFn f(compile_fn(file, fn));
    const GeneratorSet gens = f.generators(x, tol_active, kDefaultAssignmentCap);
    const MinNormResult mn = min_norm_point(gens.gradients);
    if (as_json) {
        json j{{"schema_version", 1},
               {"fn", fn},
               {"at", x},
               {"tol_active", tol_active},
               {"generators", gens.gradients},
               {"truncated", gens.truncated},
               {"min_norm", mn.norm},
               {"min_norm_point", mn.point},
               {"weights", mn.weights}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "generators at " << fmt_vec(x) << " (tol " << format_double(tol_active) << "):\n";
        for (const Vec& g : gens.gradients) std::cout << "  " << fmt_vec(g) << "\n";
        if (gens.truncated) std::cout << "  (enumeration truncated at the assignment cap)\n";
        std::cout << "min-norm point " << fmt_vec(mn.point) << ", norm " << format_double(mn.norm) << "\n";
    }
    return 0;
}

int run_classify(const std::string& file, const std::string& fn, const Vec& x, bool as_json) {
    const ProgramFn f(compile_fn(file, fn));
    const CriticalityReport rep = classify(f, x);
    if (as_json) {
        std::cout << rep.to_json() << "\n";
    } else {
        std::printf("%s at %s: %s (|D| min-norm %.3e, sampled Clarke min-norm %.3e, %d generators%s)\n", fn.c_str(),
                    fmt_vec(x).c_str(), criticality_name(rep.cls), rep.set_min_norm, rep.clarke_min_norm,
                    rep.generator_count, rep.truncated ? ", truncated" : "");
    }
    return 0;
}

int run_integrate(const std::string& file, const std::string& fn, const std::string& path_file, const std::string& rule,
                  const std::string& csv_dir, bool as_json) {
    const ProgramFn f(compile_fn(file, fn));
    const PiecewisePath path = load_path(path_file);
    const QuadratureReport rep = integrate_selection_gradient(f, path, rule_from_name(rule));
    const bool pass = rep.residual <= 1e-8 * (1.0 + std::fabs(rep.difference));
    if (!csv_dir.empty()) {
        // residual table across all rules, one row each
        std::filesystem::create_directories(csv_dir);
        const std::string out_path = csv_dir + "/residuals_" + fn + ".csv";
        std::ofstream out(out_path);
        out << "rule,integral,difference,residual,switches\n";
        for (const char* r : {"selection", "minnorm", "random", "maxinner", "mininner"}) {
            const QuadratureReport row = integrate_selection_gradient(f, path, rule_from_name(r));
            out << r << ',' << format_double(row.integral) << ',' << format_double(row.difference) << ','
                << format_double(row.residual) << ',' << row.switches.size() << "\n";
        }
        if (!as_json) std::cout << "residual table written to " << out_path << "\n";
    }
    if (as_json) {
        json j = json::parse(rep.to_json());
        j["rule"] = rule;
        j["pass"] = pass;
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("rule=%s integral=%.12g difference=%.12g residual=%.3e switches=%zu -> %s\n", rule.c_str(),
                    rep.integral, rep.difference, rep.residual, rep.switches.size(), pass ? "PASS" : "FAIL");
        if (!pass) record_failure("integrate", json::parse(rep.to_json()));
    }
    return pass ? 0 : 1;
}

int run_verify(const std::string& file, const std::string& fn, const std::string& suite, int points, uint64_t seed,
               bool as_json) {
    const Program prog = compile_fn(file, fn);
    const ProgramFn f(prog);
    CounterRng rng(seed);
    json j{{"schema_version", 1}, {"fn", fn}, {"suite", suite}};
    bool pass = false;

    if (suite == "ae") {
        const Box box{Vec(prog.p, -2.0), Vec(prog.p, 2.0)};
        const AeReport rep = check_gradient_ae(f, box, points, rng);
        // Disagreements are acceptable only with a boundary certificate.
        pass = rep.uncertified == 0;
        j["samples"] = rep.samples;
        j["failures"] = rep.failures.size();
        j["uncertified"] = rep.uncertified;
        j["failure_fraction"] = rep.failure_fraction;
        if (!as_json)
            std::printf("ae: %d samples, %zu disagreements, %d uncertified -> %s\n", rep.samples, rep.failures.size(),
                        rep.uncertified, pass ? "PASS" : "FAIL");
    } else if (suite == "chain") {
        // Random affine/hinge warps around the compiled function.
        const SelectionFunction rep = selection_of(prog, 1000000);
        double worst = 0.0;
        const int trials = std::max(1, points / 100);
        for (int t = 0; t < trials; ++t) {
            std::vector<SelectionFunction> inner;
            for (int c = 0; c < prog.p; ++c) {
                Vec w(prog.p, 0.0);
                for (double& ww : w) ww = rng.uniform(-1.0, 1.0);
                SelectionFunction warp = builtins::affine(w, rng.uniform(-0.5, 0.5));
                if (rng.coin()) warp = compose(builtins::abs(), {warp});
                inner.push_back(std::move(warp));
            }
            const Vec x = rng.uniform_vec(prog.p, -1.5, 1.5);
            try {
                const Vec g = compose(rep, inner, 1000000).gradient(x);
                worst = std::max(worst, check_chain_rule(rep, inner, x, 1000000) / (1.0 + norm_inf(g)));
            } catch (const BranchCapExceeded&) {
                continue;
            }
        }
        pass = worst <= 1e-12;
        j["max_relative_discrepancy"] = worst;
        if (!as_json) std::printf("chain: max relative discrepancy %.3e -> %s\n", worst, pass ? "PASS" : "FAIL");
    } else if (suite == "closedgraph") {
        double worst = 0.0;
        int probes = 0;
        for (int t = 0; t < 20 && probes < 10; ++t) {
            const Vec a = rng.uniform_vec(prog.p, -2.0, 2.0);
            const Vec b = rng.uniform_vec(prog.p, -2.0, 2.0);
            const SwitchScan scan = detect_switch_points(f, a, b);
            for (double s : scan.params) {
                Vec xbar(prog.p), dir(prog.p);
                for (int c = 0; c < prog.p; ++c) {
                    dir[c] = b[c] - a[c];
                    xbar[c] = a[c] + s * dir[c];
                }
                std::vector<Vec> approach;
                for (int k = 1; k <= 20; ++k) {
                    const double t_off = 1e-2 * std::pow(0.5, k);
                    Vec pt(prog.p);
                    for (int c = 0; c < prog.p; ++c) pt[c] = xbar[c] - t_off * dir[c];
                    approach.push_back(std::move(pt));
                }
                worst = std::max(worst, closed_graph_probe(f, xbar, approach));
                ++probes;
            }
        }
        pass = worst <= 1e-6;
        j["probes"] = probes;
        j["max_distance"] = worst;
        if (!as_json)
            std::printf("closedgraph: %d probes, max hull distance %.3e -> %s\n", probes, worst, pass ? "PASS" : "FAIL");
    } else {
        std::cerr << "unknown suite '" << suite << "' (ae|chain|closedgraph)\n";
        return 2;
    }
    j["pass"] = pass;
    if (as_json)
        std::cout << j.dump(2) << "\n";
    else if (!pass)
        record_failure("verify", j);
    return pass ? 0 : 1;
}

int run_sgd(const std::string& file, const std::string& sum, const Vec& x0, double c, double beta,
            const std::string& schedule_kind, long iters, uint64_t seed, double radius, bool full_batch,
            const std::string& csv_dir, bool as_json) {
    const FiniteSumProblem problem = compile_sum(file, sum);
    if (static_cast<int>(x0.size()) != problem.dim()) {
        std::cerr << "x0 dimension " << x0.size() << " != problem dimension " << problem.dim() << "\n";
        return 2;
    }
    const StepSchedule schedule{c, schedule_kind == "log" ? ScheduleKind::LogDamped : ScheduleKind::Power, beta};
    SgdOptions options;
    options.iters = iters;
    options.seed = seed;
    options.radius = radius;
    options.full_batch = full_batch;
    const OptimRun run = sgd_run(problem, x0, schedule, options);
    RunVerdict verdict;
    if (!run.faulted) verdict = classify_run(run, problem);

    if (!csv_dir.empty()) {
        std::filesystem::create_directories(csv_dir);
        const std::string path = csv_dir + "/sgd_seed" + std::to_string(seed) + ".csv";
        std::ofstream out(path);
        out << run.trajectory_csv();
        if (!as_json) std::cout << "trajectory written to " << path << "\n";
    }
    if (as_json) {
        json j{{"schema_version", 1},
               {"x0", run.x0},
               {"c", c},
               {"beta", beta},
               {"iters", iters},
               {"seed", seed},
               {"completed", run.completed},
               {"aborted", run.aborted},
               {"faulted", run.faulted},
               {"terminal", run.final_x},
               {"tail_mean", run.tail_mean},
               {"J_final", verdict.j_final},
               {"J_converged", verdict.j_converged},
               {"J_oscillation", verdict.j_oscillation},
               {"classification", run.faulted ? "unclassified" : criticality_name(verdict.report.cls)},
               {"set_min_norm", verdict.report.set_min_norm}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("terminal %s after %ld iters, J=%.9g (%s), %s\n", fmt_vec(run.final_x).c_str(), run.completed,
                    verdict.j_final, verdict.j_converged ? "converged" : "still moving",
                    run.faulted ? "unclassified" : criticality_name(verdict.report.cls));
        if (run.aborted) std::printf("aborted: left the radius-%g ball\n", radius);
        if (run.faulted) std::printf("fault: %s\n", run.fault_message.c_str());
    }
    return run.faulted ? 1 : 0;
}

int run_traps(const std::string& file, const std::string& sum, int inits, long iters, uint64_t seed, double c_min,
              double c_max, double lo, double hi, int threads, bool as_json) {
    const FiniteSumProblem problem = compile_sum(file, sum);
    TrapExperimentConfig config;
    config.n_inits = inits;
    config.iters = iters;
    config.seed = seed;
    config.c_min = c_min;
    config.c_max = c_max;
    config.x0_box = {Vec(problem.dim(), lo), Vec(problem.dim(), hi)};
    config.threads = threads;
    const TrapSummary summary = trap_avoidance_experiment(problem, config);
    const bool pass = summary.artificial == 0 && summary.faulted == 0;
    if (as_json) {
        json j = json::parse(summary.to_json());
        j["pass"] = pass;
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("%d runs: %d artificial-critical, %d Clarke-critical, %d non-critical, %d aborted, %d faulted -> %s\n",
                    summary.n, summary.artificial, summary.clarke, summary.non_critical, summary.aborted,
                    summary.faulted, pass ? "PASS" : "FAIL");
        if (!pass)
            record_failure("experiment traps", json{{"artificial", summary.artificial}, {"faulted", summary.faulted}});
    }
    return pass ? 0 : 1;
}

int run_demo_figure1(bool as_json) {
    struct Row {
        const char* name;
        Program prog;
        double expected;
    };
    const Row rows[] = {
        {"relu", fixtures::relu_program(), 0.0},
        {"relu2", fixtures::relu2_program(), 1.0},
        {"relu3", fixtures::relu3_program(), 0.5},
        {"zero", fixtures::zero_program(), 1.0},
        {"id-zero", fixtures::identity_minus_zero_program(), 0.0},
    };
    bool pass = true;
    json rows_json = json::array();
    if (!as_json) std::printf("%-8s %6s %10s %10s %10s\n", "fn", "at", "forward", "backward", "expected");
    for (const Row& row : rows) {
        EvalTrace trace;
        evaluate(row.prog, {0.0}, trace);
        const double fwd = forward_ad(row.prog, trace).gradient()[0];
        const double bwd = backward_ad(row.prog, trace).gradient()[0];
        const bool ok = fwd == row.expected && bwd == row.expected;
        pass = pass && ok;
        if (as_json)
            rows_json.push_back({{"fn", row.name},
                                 {"at", 0.0},
                                 {"forward", fwd},
                                 {"backward", bwd},
                                 {"expected", row.expected},
                                 {"pass", ok}});
        else
            std::printf("%-8s %6g %10g %10g %10g %s\n", row.name, 0.0, fwd, bwd, row.expected,
                        ok ? "" : "  <- MISMATCH");
    }
    if (as_json) {
        json j{{"schema_version", 1}, {"rows", rows_json}, {"pass", pass}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("figure1: %s\n", pass ? "PASS" : "FAIL");
        if (!pass) record_failure("demo figure1", rows_json);
    }
    return pass ? 0 : 1;
}

int run_compile(const std::string& file, const std::string& fn, const std::string& out_path) {
    const std::string source = read_file(file);
    const dsl::CompileOutput out = dsl::compile_source(source, fn);
    if (!out.ok()) {
        print_diagnostics(file, out.diagnostics);
        return 1;
    }
    const std::string doc = out.artifact->program.to_json();
    if (out_path.empty()) {
        std::cout << doc << "\n";
    } else {
        std::ofstream os(out_path);
        os << doc << "\n";
        std::cout << "program written to " << out_path << "\n";
    }
    return 0;
}

int run_prescribe(const std::string& file, const std::string& fn, double at, double shift, int coord, int samples,
                  bool as_json) {
    const Program base = compile_fn(file, fn);
    const Program shifted = prescribe_derivative(base, coord, at, shift);
    Vec probe(base.p, 0.0);
    probe[coord] = at;
    const Vec g_before = backward_gradient(base, probe);
    const Vec g_after = backward_gradient(shifted, probe);

    CounterRng rng(0xfe11);
    double max_value_diff = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec x = rng.uniform_vec(base.p, -4.0, 4.0);
        max_value_diff = std::max(max_value_diff, std::fabs(evaluate1(shifted, x) - evaluate1(base, x)));
    }
    const bool pass = max_value_diff == 0.0 && g_after[coord] == g_before[coord] + shift;
    if (as_json) {
        json j{{"schema_version", 1},
               {"fn", fn},
               {"at", at},
               {"coord", coord},
               {"shift", shift},
               {"grad_before", g_before},
               {"grad_after", g_after},
               {"max_value_diff", max_value_diff},
               {"pass", pass}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("derivative at %g: before %s, after %s (shift %g); max |value diff| over %d samples: %g -> %s\n",
                    at, fmt_vec(g_before).c_str(), fmt_vec(g_after).c_str(), shift, samples, max_value_diff,
                    pass ? "PASS" : "FAIL");
        if (!pass)
            record_failure("prescribe", json{{"grad_before", g_before}, {"grad_after", g_after},
                                             {"max_value_diff", max_value_diff}});
    }
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"selection-derivative engine for piecewise-smooth programs"};
    app.require_subcommand(1);

    std::string file, fn, mode = "backward", rule = "selection", suite = "ae", sum, csv_dir, path_file;
    std::string schedule_kind = "power", out_path;
    std::vector<double> at;
    double tol_active = kDefaultActiveTol, c = 1.0, beta = 0.6, radius = 1e6, shift = 0.0, at1 = 0.0;
    double c_min = 0.2, c_max = 1.0, lo = -2.0, hi = 2.0;
    long iters = 100000;
    int p = 1, m = 2, trials = 100, points = 10000, inits = 1000, threads = 0, coord = 0, samples = 1000;
    uint64_t seed = 1;
    bool as_json = false, full_batch = false;

    auto add_common = [&](CLI::App* cmd, bool needs_fn = true) {
        cmd->add_option("file", file, ".sel source file")->required();
        if (needs_fn) cmd->add_option("--fn", fn, "function name")->required();
        cmd->add_flag("--json", as_json, "machine-readable output");
    };

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a function at a point");
    add_common(eval_cmd);
    eval_cmd->add_option("--at", at, "evaluation point")->required()->expected(-1);

    CLI::App* grad_cmd = app.add_subcommand("grad", "algorithmic derivative at a point");
    add_common(grad_cmd);
    grad_cmd->add_option("--at", at, "evaluation point")->required()->expected(-1);
    grad_cmd->add_option("--mode", mode, "forward|backward|both")->check(CLI::IsMember({"forward", "backward", "both"}));

    CLI::App* lemma_cmd = app.add_subcommand("check-lemma1", "backprop algebra identity on random factors");
    lemma_cmd->add_option("--p", p, "projection size")->required();
    lemma_cmd->add_option("--m", m, "matrix size")->required();
    lemma_cmd->add_option("--trials", trials, "number of random trials");
    lemma_cmd->add_option("--seed", seed, "rng seed");
    lemma_cmd->add_flag("--json", as_json, "machine-readable output");

    CLI::App* dfield_cmd = app.add_subcommand("dfield", "active-branch generators and min-norm point");
    add_common(dfield_cmd);
    dfield_cmd->add_option("--at", at, "evaluation point")->required()->expected(-1);
    dfield_cmd->add_option("--tol-active", tol_active, "activity tolerance");

    CLI::App* classify_cmd = app.add_subcommand("classify", "criticality taxonomy at a point");
    add_common(classify_cmd);
    classify_cmd->add_option("--at", at, "evaluation point")->required()->expected(-1);

    CLI::App* integrate_cmd = app.add_subcommand("integrate", "path integral of a set-valued selection");
    add_common(integrate_cmd);
    integrate_cmd->add_option("--path", path_file, "JSON array of path vertices")->required();
    integrate_cmd->add_option("--rule", rule, "selection|minnorm|random|maxinner|mininner");
    integrate_cmd->add_option("--csv", csv_dir, "directory for the all-rules residual table");

    CLI::App* verify_cmd = app.add_subcommand("verify", "numerical verification suites");
    add_common(verify_cmd);
    verify_cmd->add_option("--suite", suite, "ae|chain|closedgraph")->required();
    verify_cmd->add_option("--points", points, "sample count");
    verify_cmd->add_option("--seed", seed, "rng seed");

    CLI::App* sgd_cmd = app.add_subcommand("sgd", "minibatch SGD driven by backward AD");
    sgd_cmd->add_option("file", file, ".sel source file")->required();
    sgd_cmd->add_option("--sum", sum, "comma-separated component functions")->required();
    sgd_cmd->add_option("--x0", at, "starting point")->required()->expected(-1);
    sgd_cmd->add_option("--c", c, "step constant in (0,1]");
    sgd_cmd->add_option("--beta", beta, "power schedule exponent");
    sgd_cmd->add_option("--schedule", schedule_kind, "power|log")->check(CLI::IsMember({"power", "log"}));
    sgd_cmd->add_option("--iters", iters, "iteration count");
    sgd_cmd->add_option("--seed", seed, "rng seed");
    sgd_cmd->add_option("--radius", radius, "abort radius");
    sgd_cmd->add_option("--csv", csv_dir, "directory for the thinned trajectory CSV");
    sgd_cmd->add_flag("--full-batch", full_batch, "always use the full batch");
    sgd_cmd->add_flag("--json", as_json, "machine-readable output");

    CLI::App* experiment_cmd = app.add_subcommand("experiment", "multi-run experiments");
    CLI::App* traps_cmd = experiment_cmd->add_subcommand("traps", "trap-avoidance experiment");
    traps_cmd->add_option("file", file, ".sel source file")->required();
    traps_cmd->add_option("--sum", sum, "comma-separated component functions")->required();
    traps_cmd->add_option("--inits", inits, "number of runs");
    traps_cmd->add_option("--iters", iters, "iterations per run");
    traps_cmd->add_option("--seed", seed, "rng seed");
    traps_cmd->add_option("--c-min", c_min, "lower end of the c law");
    traps_cmd->add_option("--c-max", c_max, "upper end of the c law");
    traps_cmd->add_option("--lo", lo, "x0 box lower bound");
    traps_cmd->add_option("--hi", hi, "x0 box upper bound");
    traps_cmd->add_option("--threads", threads, "worker threads (0 = auto)");
    traps_cmd->add_flag("--json", as_json, "machine-readable output");

    CLI::App* demo_cmd = app.add_subcommand("demo", "built-in demonstrations");
    std::string demo_name;
    demo_cmd->add_option("name", demo_name, "demo name (figure1)")->required();
    demo_cmd->add_flag("--json", as_json, "machine-readable output");

    CLI::App* compile_cmd = app.add_subcommand("compile", "compile a function to its program JSON document");
    add_common(compile_cmd);
    compile_cmd->add_option("-o,--out", out_path, "output file (default: stdout)");

    CLI::App* prescribe_cmd = app.add_subcommand("prescribe", "shift the AD derivative at a chosen point");
    add_common(prescribe_cmd);
    prescribe_cmd->add_option("--at", at1, "coordinate value s0")->required();
    prescribe_cmd->add_option("--shift", shift, "derivative shift r")->required();
    prescribe_cmd->add_option("--coord", coord, "input coordinate");
    prescribe_cmd->add_option("--samples", samples, "value-equality sample count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (eval_cmd->parsed()) return run_eval(file, fn, parse_point(at), as_json);
        if (grad_cmd->parsed()) return run_grad(file, fn, parse_point(at), mode, as_json);
        if (lemma_cmd->parsed()) return run_lemma1(p, m, trials, seed, as_json);
        if (dfield_cmd->parsed()) return run_dfield(file, fn, parse_point(at), tol_active, as_json);
        if (classify_cmd->parsed()) return run_classify(file, fn, parse_point(at), as_json);
        if (integrate_cmd->parsed()) return run_integrate(file, fn, path_file, rule, csv_dir, as_json);
        if (verify_cmd->parsed()) return run_verify(file, fn, suite, points, seed, as_json);
        if (sgd_cmd->parsed())
            return run_sgd(file, sum, parse_point(at), c, beta, schedule_kind, iters, seed, radius, full_batch,
                           csv_dir, as_json);
        if (experiment_cmd->parsed() && traps_cmd->parsed())
            return run_traps(file, sum, inits, iters, seed, c_min, c_max, lo, hi, threads, as_json);
        if (compile_cmd->parsed()) return run_compile(file, fn, out_path);
        if (demo_cmd->parsed()) {
            if (demo_name == "figure1") return run_demo_figure1(as_json);
            std::cerr << "unknown demo '" << demo_name << "'\n";
            return 2;
        }
        if (prescribe_cmd->parsed()) return run_prescribe(file, fn, at1, shift, coord, samples, as_json);
    } catch (const DomainFault& f) {
        std::cerr << "domain fault: " << f.what();
        if (f.program_node >= 0) std::cerr << " at program node " << f.program_node;
        std::cerr << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
