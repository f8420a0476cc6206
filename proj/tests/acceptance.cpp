// Acceptance suite: one check per shipped contract, each printed as a
// PASS/FAIL line with its measured statistic and runtime. Exit code 0 only
// when every criterion holds.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "selgrad/autodiff.hpp"
#include "selgrad/builtins.hpp"
#include "selgrad/dsl.hpp"
#include "selgrad/fixtures.hpp"
#include "selgrad/generate.hpp"
#include "selgrad/optimize.hpp"
#include "selgrad/setfield.hpp"
#include "selgrad/verify.hpp"

using namespace selgrad;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int id, const char* name, bool pass, const std::string& detail, double secs) {
    std::printf("[%s] %2d %-28s %s (%.2fs)\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(), secs);
    if (!pass) ++failures;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --------------------------------------------------------------- criterion 1
void criterion_figure1() {
    Timer timer;
    const struct {
        const char* name;
        Program prog;
        double expected;
    } rows[] = {
        {"relu", fixtures::relu_program(), 0.0},
        {"relu2", fixtures::relu2_program(), 1.0},
        {"relu3", fixtures::relu3_program(), 0.5},
        {"zero", fixtures::zero_program(), 1.0},
        {"id-zero", fixtures::identity_minus_zero_program(), 0.0},
    };
    bool pass = true;
    for (const auto& row : rows) {
        EvalTrace trace;
        evaluate(row.prog, {0.0}, trace);
        pass = pass && forward_ad(row.prog, trace).gradient()[0] == row.expected;
        pass = pass && backward_ad(row.prog, trace).gradient()[0] == row.expected;
    }
    const double secs = timer.seconds();
    report(1, "figure-1 golden values", pass && secs < 1.0, "5 programs, both modes, exact", secs);
}

// --------------------------------------------------------------- criterion 2
void criterion_lemma1() {
    Timer timer;
    CounterRng rng(0xacce5501);
    double worst_rel = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int p = 1 + static_cast<int>(rng.below(3));
        const int m = p + 1 + static_cast<int>(rng.below(12 - p));
        std::vector<Vec> d;
        for (int i = 0; i < m - p; ++i) d.push_back(rng.normal_vec(m));
        double scale = 0.0;
        const double disc = check_backprop_identity(p, m, d, &scale);
        worst_rel = std::max(worst_rel, disc / std::max(1.0, scale));
    }
    const double secs = timer.seconds();
    char buf[96];
    std::snprintf(buf, sizeof buf, "100 instances, max rel discrepancy %.2e", worst_rel);
    report(2, "backprop algebra identity", worst_rel <= 1e-12 && secs < 5.0, buf, secs);
}

// --------------------------------------------------------------- criterion 3
void criterion_mode_equivalence() {
    Timer timer;
    CounterRng rng(0xacce5503);
    double worst = 0.0;
    int done = 0;
    while (done < 500) {
        ProgramGenOptions opts;
        opts.p = 1 + static_cast<int>(rng.below(3));
        opts.min_nodes = 3;
        opts.max_nodes = 28;
        const Program prog = random_piecewise_program(rng, opts);
        Vec x;
        if (!sample_point(prog, rng, -2.0, 2.0, x)) continue;
        EvalTrace trace;
        evaluate(prog, x, trace);
        const Mat f = forward_ad(prog, trace).jacobian;
        const Mat b = backward_ad(prog, trace).jacobian;
        worst = std::max(worst, max_abs_diff(f, b) / (1.0 + max_abs_entry(b)));
        ++done;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "500 random DAGs, max rel discrepancy %.2e", worst);
    report(3, "forward/backward equivalence", worst <= 1e-12, buf, timer.seconds());
}

// --------------------------------------------------------------- criterion 4
void criterion_segment_integration() {
    Timer timer;
    CounterRng rng(0xacce5504);
    double worst = 0.0;
    int done = 0;
    while (done < 200) {
        ProgramGenOptions opts;
        opts.p = 1 + static_cast<int>(rng.below(2));
        opts.max_nodes = 10;
        const Program prog = random_piecewise_program(rng, opts);
        Vec x, y;
        if (!sample_point(prog, rng, -1.5, 1.5, x) || !sample_point(prog, rng, -1.5, 1.5, y)) continue;
        const ProgramFn f(prog);
        const QuadratureReport rep =
            integrate_selection_gradient(f, PiecewisePath{{x, y}}, SelectionRule::SelectionGradient);
        worst = std::max(worst, rep.residual / (1.0 + std::fabs(rep.difference)));
        ++done;
    }
    const double secs = timer.seconds();
    char buf[96];
    std::snprintf(buf, sizeof buf, "200 segments, max rel residual %.2e", worst);
    report(4, "segment integration", worst <= 1e-8 && secs < 60.0, buf, secs);
}

// --------------------------------------------------------------- criterion 5
void criterion_rule_independence() {
    Timer timer;
    CounterRng rng(0xacce5505);
    double worst_residual = 0.0, worst_loop = 0.0;
    const SelectionRule rules[] = {SelectionRule::SelectionGradient, SelectionRule::MinNorm,
                                   SelectionRule::RandomVertex, SelectionRule::MaxInner, SelectionRule::MinInner};
    for (int fixture = 0; fixture < 50; ++fixture) {
        ProgramGenOptions opts;
        opts.p = 2;
        opts.min_nodes = 2;
        opts.max_nodes = 7;
        const Program prog = random_piecewise_program(rng, opts);
        const ProgramFn f(prog);

        PiecewisePath open1{{rng.uniform_vec(2, -1.2, 1.2), rng.uniform_vec(2, -1.2, 1.2)}};
        PiecewisePath open2{{rng.uniform_vec(2, -1.2, 1.2), rng.uniform_vec(2, -1.2, 1.2),
                             rng.uniform_vec(2, -1.2, 1.2)}};
        PiecewisePath loop{{rng.uniform_vec(2, -1.2, 1.2), rng.uniform_vec(2, -1.2, 1.2),
                            rng.uniform_vec(2, -1.2, 1.2)}};
        loop.vertices.push_back(loop.vertices.front());

        for (SelectionRule rule : rules) {
            for (const PiecewisePath* path : {&open1, &open2, &loop}) {
                const QuadratureReport rep = integrate_selection_gradient(f, *path, rule);
                worst_residual = std::max(worst_residual, rep.residual);
                if (path == &loop) worst_loop = std::max(worst_loop, std::fabs(rep.integral));
            }
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "750 integrals, residual %.2e, loop %.2e", worst_residual, worst_loop);
    report(5, "rule independence", worst_residual <= 2e-8 && worst_loop <= 1e-8, buf, timer.seconds());
}

// --------------------------------------------------------------- criterion 6
void criterion_gradient_ae() {
    Timer timer;
    CounterRng rng(0xacce5506);
    bool pass = true;
    int total_failures = 0;

    std::vector<std::pair<std::unique_ptr<PiecewiseScalar>, Box>> fixtures_list;
    fixtures_list.emplace_back(std::make_unique<ProgramFn>(fixtures::relu_program()), Box{{-1.0}, {1.0}});
    fixtures_list.emplace_back(std::make_unique<SelectionFn>(builtins::spiked_zero()), Box{{-1.0}, {1.0}});
    {
        fixtures::ProgramBuilder b(2);
        const int mx = b.node(builtins::max2(), {0, 1});
        b.node(builtins::affine({1.0}, 0.25), {mx});
        fixtures_list.emplace_back(std::make_unique<ProgramFn>(b.finish()), Box{{-1.0, -1.0}, {1.0, 1.0}});
    }
    for (int extra = 0; extra < 2; ++extra) {
        ProgramGenOptions opts;
        opts.p = 2;
        opts.max_nodes = 8;
        opts.allow_exp = false;
        fixtures_list.emplace_back(std::make_unique<ProgramFn>(random_piecewise_program(rng, opts)),
                                   Box{{-1.0, -1.0}, {1.0, 1.0}});
    }

    for (const auto& [f, box] : fixtures_list) {
        const AeReport rep = check_gradient_ae(*f, box, 10000, rng);
        total_failures += static_cast<int>(rep.failures.size());
        if (rep.failure_fraction != 0.0) pass = false;
    }

    // Engineered boundary points must disagree with finite differences and
    // carry a bisection certificate.
    const auto probe = [&](const PiecewiseScalar& f, const Vec& x) {
        const Vec g = f.sel_gradient(x);
        Vec fd(f.dim());
        Vec p2 = x;
        for (int c = 0; c < f.dim(); ++c) {
            p2[c] = x[c] + 1e-6;
            const double fp = f.value(p2);
            p2[c] = x[c] - 1e-6;
            const double fm = f.value(p2);
            p2[c] = x[c];
            fd[c] = (fp - fm) / 2e-6;
        }
        const AeFailure fail = certify_boundary(f, x, g, fd, 1e-6);
        return fail.certified && fail.boundary_dist <= 1e-6;
    };
    const ProgramFn relu(fixtures::relu_program());
    if (!probe(relu, {0.0})) pass = false;
    {
        fixtures::ProgramBuilder b(2);
        b.node(builtins::max2(), {0, 1});
        const ProgramFn mx(b.finish());
        if (!probe(mx, {0.3, 0.3})) pass = false;
    }

    char buf[96];
    std::snprintf(buf, sizeof buf, "5 fixtures x 10^4 samples, %d failures; certificates ok", total_failures);
    report(6, "gradient a.e.", pass, buf, timer.seconds());
}

// --------------------------------------------------------------- criterion 7
void criterion_dfield_examples() {
    Timer timer;
    bool pass = true;

    const ProgramFn relu(fixtures::relu_program());
    const GeneratorSet at0 = relu.generators({0.0}, kDefaultActiveTol, kDefaultAssignmentCap);
    pass = pass && at0.gradients.size() == 2;
    bool has0 = false, has1 = false;
    for (const Vec& g : at0.gradients) {
        if (g == Vec{0.0}) has0 = true;
        if (g == Vec{1.0}) has1 = true;
    }
    pass = pass && has0 && has1;
    pass = pass && min_norm_point(at0.gradients).norm == 0.0;

    const SelectionFunction sort2 = builtins::sort2_desc();
    const auto tie = active_jacobians(sort2, {1.0, 1.0});
    const auto apart = active_jacobians(sort2, {2.0, 1.0});
    pass = pass && tie.size() == 2 && apart.size() == 1;
    if (pass) {
        // both tie jacobians are permutation matrices
        for (const Mat& m : tie) {
            const bool ident = m(0, 0) == 1.0 && m(1, 1) == 1.0 && m(0, 1) == 0.0 && m(1, 0) == 0.0;
            const bool swap = m(0, 1) == 1.0 && m(1, 0) == 1.0 && m(0, 0) == 0.0 && m(1, 1) == 0.0;
            pass = pass && (ident || swap);
        }
    }
    report(7, "set-valued field examples", pass, "relu kink generators {0,1}; sorting tie = 2 permutations",
           timer.seconds());
}

// --------------------------------------------------------------- criterion 8
void criterion_prescribe() {
    Timer timer;
    CounterRng rng(0xacce5508);
    bool pass = true;
    const struct {
        Program base;
        double s0, r;
    } cases[] = {
        {fixtures::square_program(), 1.0, 5.0},
        {fixtures::relu_program(), 2.0, -1.0},
        {fixtures::relu2_program(), -0.7, 0.25},
    };
    for (const auto& c : cases) {
        const Program shifted = prescribe_derivative(c.base, 0, c.s0, c.r);
        const Vec before = backward_gradient(c.base, {c.s0});
        const Vec after = backward_gradient(shifted, {c.s0});
        pass = pass && after[0] == before[0] + c.r;  // exact shift
        for (int t = 0; t < 1000; ++t) {
            const Vec x{rng.uniform(-4.0, 4.0)};
            if (evaluate1(shifted, x) != evaluate1(c.base, x)) {
                pass = false;
                break;
            }
        }
    }
    report(8, "derivative prescription", pass, "3 programs, values exact, shifts exact", timer.seconds());
}

// --------------------------------------------------------------- criterion 9
FiniteSumProblem quad_problem() {
    FiniteSumProblem problem;
    problem.components.push_back(fixtures::square_program());
    return problem;
}

FiniteSumProblem hinge_valley_problem() {
    FiniteSumProblem problem;
    {
        fixtures::ProgramBuilder b(1);
        const int s = b.node(builtins::affine({1.0}, -1.0), {0});
        b.node(builtins::relu(), {s});
        problem.components.push_back(b.finish());
    }
    {
        fixtures::ProgramBuilder b(1);
        const int s = b.node(builtins::affine({-1.0}, -1.0), {0});
        b.node(builtins::relu(), {s});
        problem.components.push_back(b.finish());
    }
    return problem;
}

FiniteSumProblem three_hinge_2d_problem() {
    FiniteSumProblem problem;
    const Vec dirs[] = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    for (const Vec& a : dirs) {
        fixtures::ProgramBuilder b(2);
        const int s = b.node(builtins::affine(a, -1.0), {0, 1});
        b.node(builtins::relu(), {s});
        problem.components.push_back(b.finish());
    }
    return problem;
}

void criterion_convergence() {
    Timer timer;
    const FiniteSumProblem problems[] = {quad_problem(), hinge_valley_problem(), three_hinge_2d_problem()};
    int good = 0, aborts = 0, bad = 0;
    const int runs_per_fixture = 100;

    for (int which = 0; which < 3; ++which) {
        const FiniteSumProblem& problem = problems[which];
        std::vector<int> outcome(runs_per_fixture, 0);  // 1 good, 2 abort, 3 bad
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= runs_per_fixture) return;
                CounterRng draw(CounterRng::derive_key(0xacce5509 + which, r));
                const Vec x0 = draw.uniform_vec(problem.dim(), -2.0, 2.0);
                const double c = 1.0 - 0.8 * draw.uniform();  // U(0.2, 1]
                SgdOptions options;
                options.iters = 100000;
                options.seed = CounterRng::derive_key(0x90 + which, r);
                const OptimRun run = sgd_run(problem, x0, StepSchedule{c, ScheduleKind::Power, 0.6}, options);
                if (run.aborted) {
                    outcome[r] = 2;
                    continue;
                }
                const RunVerdict verdict = classify_run(run, problem);
                const bool ok = verdict.j_converged && verdict.report.set_min_norm <= 1e-6;
                outcome[r] = ok ? 1 : 3;
            }
        };
        std::thread t1(worker), t2(worker);
        t1.join();
        t2.join();
        for (int v : outcome) {
            if (v == 1) ++good;
            else if (v == 2) ++aborts;
            else ++bad;
        }
    }
    const int total = 3 * runs_per_fixture;
    const bool pass = good >= static_cast<int>(0.99 * total) && bad == 0 && timer.seconds() <= 300.0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d/%d critical+converged, %d aborts, %d other", good, total, aborts, bad);
    report(9, "convergence to criticality", pass, buf, timer.seconds());
}

// -------------------------------------------------------------- criterion 10
FiniteSumProblem artefact_problem() {
    FiniteSumProblem problem;
    {
        fixtures::ProgramBuilder b(1);
        const int s = b.node(builtins::affine({1.0}, -1.0), {0});
        b.node(builtins::square1(), {s});
        problem.components.push_back(b.finish());  // (x-1)^2
    }
    {
        fixtures::ProgramBuilder b(1);
        const int neg = b.node(builtins::negate1(), {0});
        const int r2a = b.node(builtins::relu(), {neg});
        const int relu2 = b.node(builtins::add2(), {r2a, 0});
        const int r1 = b.node(builtins::relu(), {0});
        const int z = b.node(builtins::sub2(), {relu2, r1});
        b.node(builtins::affine({2.0}, 0.0), {z});
        problem.components.push_back(b.finish());  // 2 zero(x)
    }
    return problem;
}

void criterion_trap_avoidance() {
    Timer timer;
    const FiniteSumProblem problem = artefact_problem();

    TrapExperimentConfig config;
    config.n_inits = 1000;
    config.iters = 100000;
    config.seed = 0xacce5510;
    config.c_min = 0.2;  // continuous law bounded away from stalling steps
    config.c_max = 1.0;
    config.x0_box = {{-2.0}, {2.0}};
    const TrapSummary summary = trap_avoidance_experiment(problem, config);

    int near_target = 0;
    for (const TrapRunOutcome& run : summary.runs)
        if (std::fabs(run.terminal[0] - 1.0) <= 1e-2) ++near_target;

    // Positive control: started exactly on the artefact with full batches,
    // the iterate never moves.
    SgdOptions control;
    control.iters = 100000;
    control.seed = 7;
    control.full_batch = true;
    const OptimRun trapped = sgd_run(problem, {0.0}, StepSchedule{0.5, ScheduleKind::Power, 0.6}, control);
    bool control_ok = trapped.final_x[0] == 0.0;
    for (const Vec& x : trapped.xs) control_ok = control_ok && x[0] == 0.0;

    const bool pass = summary.artificial == 0 && near_target >= 990 && control_ok && timer.seconds() <= 120.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d/1000 artificial, %d/1000 near 1, control %s", summary.artificial, near_target,
                  control_ok ? "trapped" : "escaped");
    report(10, "trap avoidance", pass, buf, timer.seconds());
}

// -------------------------------------------------------------- criterion 11
void criterion_closed_graph() {
    Timer timer;
    CounterRng rng(0xacce5511);
    double worst = 0.0;
    int probes = 0;

    auto probe_boundary = [&](const PiecewiseScalar& f, const Vec& a, const Vec& b) {
        const SwitchScan scan = detect_switch_points(f, a, b);
        for (double s : scan.params) {
            const int p = f.dim();
            Vec xbar(p), dir(p);
            for (int c = 0; c < p; ++c) {
                dir[c] = b[c] - a[c];
                xbar[c] = a[c] + s * dir[c];
            }
            for (double side : {-1.0, 1.0}) {
                std::vector<Vec> approach;
                for (int k = 1; k <= 20; ++k) {
                    const double off = side * 1e-2 * std::pow(0.5, k);
                    Vec pt(p);
                    for (int c = 0; c < p; ++c) pt[c] = xbar[c] + off * dir[c];
                    approach.push_back(std::move(pt));
                }
                worst = std::max(worst, closed_graph_probe(f, xbar, approach));
                ++probes;
            }
        }
    };

    probe_boundary(ProgramFn(fixtures::relu_program()), {-1.0}, {1.0});
    probe_boundary(ProgramFn(fixtures::relu3_program()), {-0.5}, {0.7});
    for (int fixture = 0; fixture < 6; ++fixture) {
        ProgramGenOptions opts;
        opts.p = 2;
        opts.max_nodes = 8;
        const Program prog = random_piecewise_program(rng, opts);
        const ProgramFn f(prog);
        probe_boundary(f, rng.uniform_vec(2, -1.5, 1.5), rng.uniform_vec(2, -1.5, 1.5));
    }

    char buf[96];
    std::snprintf(buf, sizeof buf, "%d boundary sequences, max hull distance %.2e", probes, worst);
    report(11, "closed graph probe", worst <= 1e-6 && probes >= 4, buf, timer.seconds());
}

// -------------------------------------------------------------- criterion 12
void criterion_parser_corpus() {
    Timer timer;
    const fs::path corpus = SELGRAD_CORPUS_DIR;
    int valid_files = 0, invalid_files = 0;
    bool pass = true;
    std::string first_problem;

    for (const auto& entry : fs::directory_iterator(corpus / "valid")) {
        if (entry.path().extension() != ".sel") continue;
        ++valid_files;
        const std::string source = read_file(entry.path());
        const dsl::ParseResult parsed = dsl::parse(source);
        if (!parsed.ok()) {
            pass = false;
            if (first_problem.empty()) first_problem = entry.path().filename().string() + " failed to parse";
            continue;
        }
        // Every function compiles to a validating program.
        for (const dsl::FnDef& fn : parsed.fns) {
            const dsl::CompileOutput out = dsl::compile(parsed, fn.name, source);
            if (!out.ok() || !out.artifact->program.validate().empty()) {
                pass = false;
                if (first_problem.empty())
                    first_problem = entry.path().filename().string() + ": '" + fn.name + "' did not compile";
            }
        }
        // Round trip: printing and reparsing preserves the tree.
        const dsl::ParseResult reparsed = dsl::parse(dsl::pretty_print(parsed));
        if (!reparsed.ok() || !dsl::ast_equal(parsed, reparsed)) {
            pass = false;
            if (first_problem.empty()) first_problem = entry.path().filename().string() + " broke the round trip";
        }
    }

    for (const auto& entry : fs::directory_iterator(corpus / "invalid")) {
        if (entry.path().extension() != ".sel") continue;
        ++invalid_files;
        const std::string source = read_file(entry.path());
        const dsl::ParseResult parsed = dsl::parse(source);
        std::vector<dsl::Diagnostic> diags = parsed.diagnostics;
        if (diags.empty()) {
            for (const dsl::FnDef& fn : parsed.fns) {
                const dsl::CompileOutput out = dsl::compile(parsed, fn.name, source);
                diags.insert(diags.end(), out.diagnostics.begin(), out.diagnostics.end());
            }
        }
        if (diags.empty()) {
            pass = false;
            if (first_problem.empty())
                first_problem = entry.path().filename().string() + " produced no diagnostics";
            continue;
        }
        for (const dsl::Diagnostic& d : diags)
            if (d.pos.line < 1 || d.pos.col < 1) {
                pass = false;
                if (first_problem.empty())
                    first_problem = entry.path().filename().string() + " produced an unpositioned diagnostic";
            }
    }

    pass = pass && valid_files >= 30 && invalid_files >= 20;
    char buf[160];
    if (first_problem.empty())
        std::snprintf(buf, sizeof buf, "%d valid + %d invalid files", valid_files, invalid_files);
    else
        std::snprintf(buf, sizeof buf, "%d valid + %d invalid files; %s", valid_files, invalid_files,
                      first_problem.c_str());
    report(12, "parser corpus", pass, buf, timer.seconds());
}

}  // namespace

int main() {
    Timer total;
    criterion_figure1();
    criterion_lemma1();
    criterion_mode_equivalence();
    criterion_segment_integration();
    criterion_rule_independence();
    criterion_gradient_ae();
    criterion_dfield_examples();
    criterion_prescribe();
    criterion_convergence();
    criterion_trap_avoidance();
    criterion_closed_graph();
    criterion_parser_corpus();
    std::printf("%d/12 criteria passed (%.1fs total)\n", 12 - failures, total.seconds());
    return failures == 0 ? 0 : 1;
}
