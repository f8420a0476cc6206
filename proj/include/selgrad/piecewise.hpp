#pragma once

#include <memory>

#include "selgrad/program.hpp"

namespace selgrad {

// A finite set of branch gradients active at a point; its convex hull is
// the set-valued derivative there.
struct GeneratorSet {
    std::vector<Vec> gradients;  // exact-duplicate free
    bool truncated = false;      // enumeration hit the assignment cap
    double tol = 0.0;            // activity tolerance that produced the set
};

inline constexpr size_t kDefaultAssignmentCap = 100000;
inline constexpr double kDefaultActiveTol = 1e-9;

// Common face of everything the set-valued and verification layers operate
// on: scalar piecewise functions given by programs, explicit selections, or
// finite sums of programs.
class PiecewiseScalar {
  public:
    virtual ~PiecewiseScalar() = default;

    virtual int dim() const = 0;
    virtual double value(const Vec& x) const = 0;
    // Gradient of the active branch(es), decisions frozen — what AD returns.
    virtual Vec sel_gradient(const Vec& x) const = 0;
    // Discrete branch-choice fingerprint; changes exactly when the active
    // index changes.
    virtual std::vector<int> signature(const Vec& x) const = 0;
    // All branch-assignment gradients whose values match the function value
    // at x within tol * (1 + |value|), per node for programs.
    virtual GeneratorSet generators(const Vec& x, double tol = kDefaultActiveTol,
                                    size_t cap = kDefaultAssignmentCap) const = 0;
};

class ProgramFn final : public PiecewiseScalar {
  public:
    explicit ProgramFn(Program prog);

    int dim() const override { return prog_.p; }
    double value(const Vec& x) const override;
    Vec sel_gradient(const Vec& x) const override;
    std::vector<int> signature(const Vec& x) const override;
    GeneratorSet generators(const Vec& x, double tol, size_t cap) const override;

    const Program& program() const { return prog_; }

  private:
    Program prog_;
};

class SelectionFn final : public PiecewiseScalar {
  public:
    explicit SelectionFn(SelectionFunction f);

    int dim() const override { return f_.arity(); }
    double value(const Vec& x) const override;
    Vec sel_gradient(const Vec& x) const override;
    std::vector<int> signature(const Vec& x) const override;
    GeneratorSet generators(const Vec& x, double tol, size_t cap) const override;

    const SelectionFunction& selection() const { return f_; }

  private:
    SelectionFunction f_;
};

// Active branch jacobians of a (possibly vector-valued) selection: branch i
// is active when its whole value vector matches F(x) within
// tol * (1 + |F(x)|_inf) coordinatewise.
std::vector<Mat> active_jacobians(const SelectionFunction& f, const Vec& x, double tol = kDefaultActiveTol);

}  // namespace selgrad
