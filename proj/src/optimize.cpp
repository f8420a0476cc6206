#include "selgrad/optimize.hpp"

#include <atomic>
#include <cassert>
#include <cmath>
#include <thread>

#include "json.hpp"

namespace selgrad {

std::vector<Violation> FiniteSumProblem::validate() const {
    std::vector<Violation> out;
    if (components.empty()) {
        out.push_back({-1, "finite sum needs at least one component"});
        return out;
    }
    const int p = components.front().p;
    for (size_t i = 0; i < components.size(); ++i) {
        if (components[i].p != p) out.push_back({static_cast<int>(i), "component input dimension differs"});
        if (components[i].q != 1) out.push_back({static_cast<int>(i), "component must have scalar output"});
        for (const Violation& v : components[i].validate())
            out.push_back({static_cast<int>(i), "component invalid: " + v.what});
    }
    return out;
}

FiniteSumFn::FiniteSumFn(const FiniteSumProblem& problem) : problem_(&problem) {
    assert(!problem.components.empty());
}

int FiniteSumFn::dim() const { return problem_->dim(); }

double FiniteSumFn::value(const Vec& x) const {
    double s = 0.0;
    for (const Program& f : problem_->components) s += evaluate1(f, x);
    return s / problem_->n();
}

Vec FiniteSumFn::sel_gradient(const Vec& x) const {
    Vec g(dim(), 0.0);
    for (const Program& f : problem_->components) {
        const Vec gi = backward_gradient(f, x);
        for (int c = 0; c < dim(); ++c) g[c] += gi[c];
    }
    return vscale(g, 1.0 / problem_->n());
}

std::vector<int> FiniteSumFn::signature(const Vec& x) const {
    std::vector<int> sig;
    for (const Program& f : problem_->components) {
        const std::vector<int> s = branch_signature(f, x);
        sig.insert(sig.end(), s.begin(), s.end());
    }
    return sig;
}

GeneratorSet FiniteSumFn::generators(const Vec& x, double tol, size_t cap) const {
    // Minkowski mean of the component hulls: every vertex is a mean of
    // per-component generators.
    std::vector<GeneratorSet> parts;
    parts.reserve(problem_->components.size());
    for (const Program& f : problem_->components) parts.push_back(ProgramFn(f).generators(x, tol, cap));

    GeneratorSet out;
    out.tol = tol;
    for (const GeneratorSet& part : parts) out.truncated = out.truncated || part.truncated;

    const int n = problem_->n();
    const double inv = 1.0 / n;
    std::vector<size_t> idx(n, 0);
    size_t produced = 0;
    for (;;) {
        if (produced >= cap) {
            out.truncated = true;
            break;
        }
        ++produced;
        Vec g(dim(), 0.0);
        for (int i = 0; i < n; ++i) {
            const Vec& gi = parts[i].gradients[idx[i]];
            for (int c = 0; c < dim(); ++c) g[c] += gi[c];
        }
        g = vscale(g, inv);
        bool dup = false;
        for (const Vec& h : out.gradients)
            if (h == g) {
                dup = true;
                break;
            }
        if (!dup) out.gradients.push_back(std::move(g));

        int i = n;
        bool done = false;
        while (i > 0) {
            --i;
            if (++idx[i] < parts[i].gradients.size()) break;
            idx[i] = 0;
            if (i == 0) done = true;
        }
        if (done) break;
    }
    return out;
}

double StepSchedule::gamma(long k) const {
    const double kk = static_cast<double>(k) + 2.0;
    switch (kind) {
        case ScheduleKind::Power: return c * std::pow(kk, -beta);
        case ScheduleKind::LogDamped: return c / (kk * std::log(kk));
    }
    return 0.0;
}

Vec minibatch_gradient(const FiniteSumProblem& problem, const std::vector<int>& batch, const Vec& x) {
    assert(!batch.empty());
    Vec g(problem.dim(), 0.0);
    for (int i : batch) {
        const Vec gi = backward_gradient(problem.components[i], x);
        for (int c = 0; c < problem.dim(); ++c) g[c] += gi[c];
    }
    return vscale(g, 1.0 / batch.size());
}

OptimRun sgd_run(const FiniteSumProblem& problem, Vec x0, const StepSchedule& schedule, const SgdOptions& options) {
    assert(options.iters >= 1);
    const int n = problem.n();
    const int p = problem.dim();
    assert(static_cast<int>(x0.size()) == p);
    assert(n <= 62);

    OptimRun run;
    run.x0 = x0;
    run.schedule = schedule;
    run.options = options;
    const long stride = options.stride > 0 ? options.stride : std::max<long>(1, options.iters / 1000);
    run.options.stride = stride;

    CounterRng rng(CounterRng::derive_key(options.seed, 0xb47c5));
    const uint64_t full_mask = (n == 62) ? ((1ULL << 62) - 1) : ((1ULL << n) - 1);

    FiniteSumFn J(problem);
    Vec x = std::move(x0);
    std::vector<int> batch;
    batch.reserve(n);

    const long tail_start = options.iters - std::max<long>(1, options.iters / 100);
    Vec tail_sum(p, 0.0);
    long tail_count = 0;

    auto record = [&](long k, uint64_t mask) {
        run.steps.push_back(k);
        run.gammas.push_back(schedule.gamma(k));
        run.xs.push_back(x);
        run.Js.push_back(J.value(x));
        run.batch_hashes.push_back(CounterRng::mix(mask));
    };

    long k = 0;
    try {
        for (; k < options.iters; ++k) {
            uint64_t mask = full_mask;
            if (!options.full_batch) {
                do {
                    mask = rng.next_u64() & full_mask;
                } while (mask == 0);
            }
            batch.clear();
            for (int i = 0; i < n; ++i)
                if (mask & (1ULL << i)) batch.push_back(i);

            if (k % stride == 0) record(k, mask);

            const Vec g = minibatch_gradient(problem, batch, x);
            const double gamma = schedule.gamma(k);
            for (int c = 0; c < p; ++c) x[c] -= gamma * g[c];

            if (norm2(x) > options.radius) {
                run.aborted = true;
                ++k;
                break;
            }
            if (k >= tail_start) {
                for (int c = 0; c < p; ++c) tail_sum[c] += x[c];
                ++tail_count;
            }
        }
    } catch (const DomainFault& f) {
        run.faulted = true;
        run.fault_message = std::string(f.what()) + " at program node " + std::to_string(f.program_node) +
                            " after " + std::to_string(k) + " iterations";
    }
    run.completed = k;
    run.final_x = x;
    run.tail_mean = tail_count > 0 ? vscale(tail_sum, 1.0 / tail_count) : x;
    if (!run.faulted) record(k, 0);
    return run;
}

std::string OptimRun::trajectory_csv() const {
    std::string out = "k,gamma,";
    for (size_t c = 0; c < x0.size(); ++c) out += "x" + std::to_string(c) + ",";
    out += "J,batch_hash\n";
    for (size_t r = 0; r < steps.size(); ++r) {
        out += std::to_string(steps[r]);
        out += ',';
        out += format_double(gammas[r]);
        out += ',';
        for (double v : xs[r]) {
            out += format_double(v);
            out += ',';
        }
        out += format_double(Js[r]);
        out += ',';
        out += std::to_string(batch_hashes[r]);
        out += '\n';
    }
    return out;
}

RunVerdict classify_run(const OptimRun& run, const FiniteSumProblem& problem, const ClassifyOptions& opts) {
    RunVerdict verdict;
    FiniteSumFn J(problem);
    verdict.report = classify(J, run.final_x, opts);
    verdict.j_final = run.Js.empty() ? J.value(run.final_x) : run.Js.back();

    // Cauchy tail: oscillation of the last 10% of recorded J values.
    const size_t n = run.Js.size();
    const size_t tail = std::max<size_t>(2, n / 10);
    if (n >= 2) {
        double lo = run.Js[n - tail], hi = run.Js[n - tail];
        for (size_t i = n - tail; i < n; ++i) {
            lo = std::min(lo, run.Js[i]);
            hi = std::max(hi, run.Js[i]);
        }
        verdict.j_oscillation = hi - lo;
        verdict.j_converged = verdict.j_oscillation <= 1e-4 * (1.0 + std::fabs(verdict.j_final));
    }
    return verdict;
}

TrapSummary trap_avoidance_experiment(const FiniteSumProblem& problem, const TrapExperimentConfig& config) {
    TrapSummary summary;
    summary.n = config.n_inits;
    summary.runs.resize(config.n_inits);

    const int threads = config.threads > 0
                            ? config.threads
                            : std::max(1u, std::min(4u, std::thread::hardware_concurrency()));
    std::atomic<int> next{0};

    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= config.n_inits) return;
            CounterRng draw(CounterRng::derive_key(config.seed, static_cast<uint64_t>(r)));

            TrapRunOutcome& out = summary.runs[r];
            out.x0.resize(config.x0_box.dim());
            for (int c = 0; c < config.x0_box.dim(); ++c)
                out.x0[c] = draw.uniform(config.x0_box.lo[c], config.x0_box.hi[c]);
            // Uniform on (c_min, c_max]: flip the half-open side.
            out.c = config.c_max - (config.c_max - config.c_min) * draw.uniform();

            StepSchedule schedule{out.c, config.kind, config.beta};
            SgdOptions options;
            options.iters = config.iters;
            options.seed = CounterRng::derive_key(config.seed, 0x517d00 + static_cast<uint64_t>(r));
            options.radius = config.radius;

            const OptimRun run = sgd_run(problem, out.x0, schedule, options);
            out.terminal = run.final_x;
            out.aborted = run.aborted;
            out.faulted = run.faulted;
            if (!run.faulted) {
                const RunVerdict verdict = classify_run(run, problem, config.classify);
                out.cls = verdict.report.cls;
                out.j_converged = verdict.j_converged;
            }
        }
    };

    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    for (const TrapRunOutcome& out : summary.runs) {
        if (out.faulted) {
            ++summary.faulted;
            continue;
        }
        if (out.aborted) ++summary.aborted;
        switch (out.cls) {
            case Criticality::ArtificialCritical: ++summary.artificial; break;
            case Criticality::ClarkeCritical: ++summary.clarke; break;
            case Criticality::NonCritical: ++summary.non_critical; break;
        }
    }
    return summary;
}

std::string TrapSummary::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["runs"] = n;
    j["artificial_critical"] = artificial;
    j["clarke_critical"] = clarke;
    j["non_critical"] = non_critical;
    j["aborted"] = aborted;
    j["faulted"] = faulted;
    nlohmann::json terminals = nlohmann::json::array();
    for (const TrapRunOutcome& r : runs)
        terminals.push_back({{"x0", r.x0}, {"c", r.c}, {"terminal", r.terminal}, {"class", criticality_name(r.cls)}});
    j["terminals"] = terminals;
    return j.dump(2);
}

}  // namespace selgrad
