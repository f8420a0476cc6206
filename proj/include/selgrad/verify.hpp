#pragma once

#include "selgrad/piecewise.hpp"
#include "selgrad/rng.hpp"
#include "selgrad/setfield.hpp"

namespace selgrad {

// Piecewise-linear path through R^p with uniform parametrization over its
// segments. A closed loop just repeats its first vertex at the end.
struct PiecewisePath {
    std::vector<Vec> vertices;

    int segments() const { return static_cast<int>(vertices.size()) - 1; }
    bool closed() const { return vertices.size() >= 2 && vertices.front() == vertices.back(); }
    // Zero-length segments are tolerated but worth flagging in reports.
    bool has_degenerate_segment() const {
        for (size_t i = 0; i + 1 < vertices.size(); ++i)
            if (vertices[i] == vertices[i + 1]) return true;
        return false;
    }
};

struct SwitchScan {
    std::vector<double> params;  // sorted, in (0, 1)
    bool overflow = false;       // more switches than the sanity bound
};

// Scans the segment x -> y at the given grid resolution and bisects every
// cell where the branch signature changes down to param_tol in t.
SwitchScan detect_switch_points(const PiecewiseScalar& f, const Vec& x, const Vec& y, int grid = 1024,
                                double param_tol = 1e-12);

enum class SelectionRule : uint8_t { SelectionGradient, MinNorm, RandomVertex, MaxInner, MinInner };

const char* rule_name(SelectionRule r);
SelectionRule rule_from_name(const std::string& name);

struct IntegrateOptions {
    int grid = 1024;      // switch-detection resolution per segment
    int max_panels = 32;  // base quadrature panels per segment; bisection refines locally
    double tol_active = kDefaultActiveTol;
    size_t cap = kDefaultAssignmentCap;
    uint64_t seed = 0x9a713e11;  // for the random-vertex rule
};

struct QuadratureReport {
    double integral = 0.0;
    double difference = 0.0;  // f(end) - f(start)
    double residual = 0.0;    // |integral - difference|
    int panels = 0;
    std::vector<double> switches;  // global path parameters in (0, 1)
    bool switch_overflow = false;

    std::string to_json() const;
};

// Composite 16-point Gauss-Legendre integration of t -> <y - x, v(t)> per
// smooth piece, where v(t) is the vector the rule picks from the set-valued
// derivative at the path point. Conservativity makes the rule irrelevant up
// to quadrature error.
QuadratureReport integrate_selection_gradient(const PiecewiseScalar& f, const PiecewisePath& path, SelectionRule rule,
                                              const IntegrateOptions& opts = {});

// Max entry discrepancy between the composed representation's jacobian and
// the product of the parts' jacobians at x.
double check_chain_rule(const SelectionFunction& outer, const std::vector<SelectionFunction>& inner, const Vec& x,
                        size_t cap = kDefaultBranchCap);

struct Box {
    Vec lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
};

struct AeFailure {
    Vec x;
    Vec ad_grad;
    Vec fd_grad;
    bool certified = false;   // a guard boundary passes within reach of x
    Vec boundary_point;
    double boundary_dist = 0.0;
};

struct AeOptions {
    double h = 1e-6;
    double rel_tol = 1e-5;
};

struct AeReport {
    int samples = 0;
    std::vector<AeFailure> failures;
    double failure_fraction = 0.0;
    int uncertified = 0;
};

// Samples the box with a continuous law and compares the frozen-branch
// gradient against central differences; every disagreement gets a bisection
// certificate locating a guard boundary within h of the point.
AeReport check_gradient_ae(const PiecewiseScalar& f, const Box& domain, int n_points, CounterRng& rng,
                           const AeOptions& opts = {});

// Diagnoses one point: returns a certificate if a signature change occurs
// within h of x along some probe axis.
AeFailure certify_boundary(const PiecewiseScalar& f, const Vec& x, const Vec& ad_grad, const Vec& fd_grad, double h);

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
const std::vector<std::pair<double, double>>& gauss_legendre_16();

}  // namespace selgrad
