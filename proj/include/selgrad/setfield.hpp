#pragma once

#include <string>

#include "selgrad/piecewise.hpp"
#include "selgrad/rng.hpp"

namespace selgrad {

struct MinNormResult {
    Vec point;    // argmin |v| over the convex hull
    double norm;  // |point|
    Vec weights;  // convex weights over the input list (duplicates get 0)
};

// Minimum-norm point of conv(generators): closed-form projections for up to
// three generators, Wolfe's algorithm above that. Solved to ~1e-10 absolute.
MinNormResult min_norm_point(const std::vector<Vec>& generators);

// Euclidean distance from v to conv(generators).
double hull_distance(const std::vector<Vec>& generators, const Vec& v);

struct CloudResult {
    std::vector<Vec> gradients;  // certified-differentiable sample gradients
    int tried = 0;
    int certified = 0;
    double radius = 0.0;
    bool enough = false;  // at least 10 certified samples
};

// Gradient sampling approximation of the Clarke subdifferential: draws
// points uniformly in the radius ball, keeps those whose frozen-branch
// gradient matches central finite differences (step h, default radius/100)
// to fd_rel_tol relative, and returns their gradients.
CloudResult clarke_sample(const PiecewiseScalar& f, const Vec& x, double radius, int n_samples, CounterRng& rng,
                          double fd_rel_tol = 1e-5, double fd_step = -1.0);

enum class Criticality : uint8_t { NonCritical, ClarkeCritical, ArtificialCritical };

const char* criticality_name(Criticality c);

struct ClassifyOptions {
    double tol_D = 1e-8;       // min-norm threshold over the index-closure hull
    double tol_C = 1e-3;       // min-norm threshold over the sampled Clarke cloud
    double tol_active = kDefaultActiveTol;
    size_t cap = kDefaultAssignmentCap;
    double clarke_radius = 1e-3;
    int clarke_samples = 200;
    uint64_t seed = 0x5e7f1e1d;
};

struct CriticalityReport {
    Vec x;
    double set_min_norm = 0.0;     // distance of 0 to conv(generators)
    double clarke_min_norm = 0.0;  // distance of 0 to conv(sampled cloud)
    Criticality cls = Criticality::NonCritical;
    Vec weights;                   // minimizing convex weights over generators
    int generator_count = 0;
    bool truncated = false;
    int cloud_size = 0;
    double cloud_radius = 0.0;
    bool cloud_ok = false;
    double tol_D = 0.0, tol_C = 0.0, tol_active = 0.0;

    std::string to_json() const;
};

// Combines the exactly-enumerated hull with the sampled Clarke cloud:
// artificial means the first contains 0 and the second does not.
CriticalityReport classify(const PiecewiseScalar& f, const Vec& x, const ClassifyOptions& opts = {});

// Max distance from limit-candidate gradients taken at the last point of
// the approach sequence to the hull at xbar.
double closed_graph_probe(const PiecewiseScalar& f, const Vec& xbar, const std::vector<Vec>& approach,
                          double tol_active = kDefaultActiveTol, size_t cap = kDefaultAssignmentCap);

}  // namespace selgrad
