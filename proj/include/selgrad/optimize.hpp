#pragma once

#include <cstdint>
#include <string>

#include "selgrad/autodiff.hpp"
#include "selgrad/piecewise.hpp"
#include "selgrad/rng.hpp"
#include "selgrad/setfield.hpp"
#include "selgrad/verify.hpp"

namespace selgrad {

// J(x) = (1/n) sum f_i(x), every component a scalar-output program over a
// common input space.
struct FiniteSumProblem {
    std::vector<Program> components;

    int dim() const { return components.empty() ? 0 : components.front().p; }
    int n() const { return static_cast<int>(components.size()); }
    std::vector<Violation> validate() const;
};

// The objective as a piecewise scalar: value and frozen-branch gradient are
// componentwise means; generators are the Minkowski mean of the component
// generator sets.
class FiniteSumFn final : public PiecewiseScalar {
  public:
    explicit FiniteSumFn(const FiniteSumProblem& problem);

    int dim() const override;
    double value(const Vec& x) const override;
    Vec sel_gradient(const Vec& x) const override;
    std::vector<int> signature(const Vec& x) const override;
    GeneratorSet generators(const Vec& x, double tol, size_t cap) const override;

  private:
    const FiniteSumProblem* problem_;
};

enum class ScheduleKind : uint8_t { Power, LogDamped };

// gamma_k = c * alpha_k with alpha_k = (k+2)^-beta (0.5 < beta <= 1) or
// alpha_k = 1 / ((k+2) log(k+2)); both are o(1/log k) with divergent sum.
struct StepSchedule {
    double c = 1.0;
    ScheduleKind kind = ScheduleKind::Power;
    double beta = 0.6;

    double gamma(long k) const;
};

Vec minibatch_gradient(const FiniteSumProblem& problem, const std::vector<int>& batch, const Vec& x);

struct SgdOptions {
    long iters = 100000;
    uint64_t seed = 1;
    double radius = 1e6;   // abort when |x| exceeds this
    long stride = 0;       // 0: pick ~1000 recorded steps
    bool full_batch = false;
};

struct OptimRun {
    Vec x0;
    StepSchedule schedule;
    SgdOptions options;

    Vec final_x;
    Vec tail_mean;              // mean of the final 1% of iterates
    long completed = 0;
    bool aborted = false;       // left the radius ball
    bool faulted = false;       // evaluation left the domain
    std::string fault_message;

    // Thinned records, one row per recorded step (always includes the end).
    std::vector<long> steps;
    std::vector<double> gammas;
    std::vector<Vec> xs;
    std::vector<double> Js;
    std::vector<uint64_t> batch_hashes;

    std::string trajectory_csv() const;
};

// x_{k+1} = x_k - gamma_k * mean_{i in I_k} grad f_i(x_k), with I_k i.i.d.
// uniform over the nonempty subsets of {1..n} (n independent fair bits,
// all-zero rejected), from a counter-based stream keyed by the seed.
OptimRun sgd_run(const FiniteSumProblem& problem, Vec x0, const StepSchedule& schedule, const SgdOptions& options);

struct RunVerdict {
    CriticalityReport report;     // at the terminal iterate
    bool j_converged = false;     // oscillation of the recorded J tail is small
    double j_oscillation = 0.0;
    double j_final = 0.0;
};

RunVerdict classify_run(const OptimRun& run, const FiniteSumProblem& problem, const ClassifyOptions& opts = {});

struct TrapExperimentConfig {
    int n_inits = 1000;
    long iters = 100000;
    uint64_t seed = 7;
    ScheduleKind kind = ScheduleKind::Power;
    double beta = 0.6;
    double c_min = 0.2;   // c drawn uniformly from (c_min, c_max]
    double c_max = 1.0;
    Box x0_box;
    double radius = 1e6;
    int threads = 0;      // 0: hardware choice
    ClassifyOptions classify;
};

struct TrapRunOutcome {
    Vec x0;
    double c = 0.0;
    Vec terminal;
    Criticality cls = Criticality::NonCritical;
    bool aborted = false;
    bool faulted = false;
    bool j_converged = false;
};

struct TrapSummary {
    int n = 0;
    int artificial = 0;
    int clarke = 0;
    int non_critical = 0;
    int aborted = 0;
    int faulted = 0;
    std::vector<TrapRunOutcome> runs;

    std::string to_json() const;
};

// Draws (x0, c) pairs from continuous laws, runs SGD for each, classifies
// the terminal points. Runs execute in parallel; every run owns its RNG
// stream (keyed by run id), so the aggregate is order-independent.
TrapSummary trap_avoidance_experiment(const FiniteSumProblem& problem, const TrapExperimentConfig& config);

}  // namespace selgrad
