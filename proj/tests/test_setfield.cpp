#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "selgrad/builtins.hpp"
#include "selgrad/fixtures.hpp"
#include "selgrad/setfield.hpp"
#include "support/oracles.hpp"

using namespace selgrad;

namespace {

bool contains(const std::vector<Vec>& set, const Vec& v, double tol = 0.0) {
    for (const Vec& g : set)
        if (max_abs_diff(g, v) <= tol) return true;
    return false;
}

}  // namespace

TEST_CASE("relu generators at the kink and off it") {
    const ProgramFn relu(fixtures::relu_program());
    const GeneratorSet at0 = relu.generators({0.0}, kDefaultActiveTol, kDefaultAssignmentCap);
    REQUIRE(at0.gradients.size() == 2);
    CHECK(contains(at0.gradients, {0.0}));
    CHECK(contains(at0.gradients, {1.0}));

    const GeneratorSet at2 = relu.generators({2.0}, kDefaultActiveTol, kDefaultAssignmentCap);
    REQUIRE(at2.gradients.size() == 1);
    CHECK(at2.gradients[0] == Vec{1.0});
}

TEST_CASE("selection gradient is always among the generators") {
    CounterRng rng(0x200);
    const Program progs[] = {fixtures::relu_program(), fixtures::zero_program(),
                             fixtures::identity_minus_zero_program(), fixtures::relu3_program()};
    for (const Program& prog : progs) {
        const ProgramFn f(prog);
        for (int t = 0; t < 50; ++t) {
            const Vec x{rng.uniform(-2.0, 2.0) * (t % 7 == 0 ? 0.0 : 1.0)};
            const GeneratorSet gens = f.generators(x, kDefaultActiveTol, kDefaultAssignmentCap);
            CHECK(contains(gens.gradients, f.sel_gradient(x)));
        }
    }
}

TEST_CASE("generator monotonicity in the activity tolerance") {
    const ProgramFn f(fixtures::zero_program());
    const Vec x{1e-10};
    const GeneratorSet tight = f.generators(x, 1e-12, kDefaultAssignmentCap);
    const GeneratorSet loose = f.generators(x, 1e-6, kDefaultAssignmentCap);
    CHECK(loose.gradients.size() >= tight.gradients.size());
    for (const Vec& g : tight.gradients) CHECK(contains(loose.gradients, g));
}

TEST_CASE("sorting map: active jacobians are exactly the fitting permutations") {
    const SelectionFunction sort2 = builtins::sort2_desc();
    const auto tie = active_jacobians(sort2, {1.0, 1.0});
    REQUIRE(tie.size() == 2);
    const auto apart = active_jacobians(sort2, {2.0, 1.0});
    REQUIRE(apart.size() == 1);
    CHECK(apart[0](0, 0) == 1.0);
    CHECK(apart[0](1, 1) == 1.0);
}

TEST_CASE("min-norm point: exact small cases") {
    SUBCASE("zero is a vertex") {
        const MinNormResult r = min_norm_point({{0.0}, {1.0}});
        CHECK(r.norm == 0.0);
        CHECK(r.weights == Vec{1.0, 0.0});
    }
    SUBCASE("negative side") {
        const MinNormResult r = min_norm_point({{-1.0}, {0.0}});
        CHECK(r.norm == 0.0);
    }
    SUBCASE("projection onto a segment") {
        const MinNormResult r = min_norm_point({{1.0, 0.0}, {0.0, 1.0}});
        CHECK(r.point[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.point[1] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.norm == doctest::Approx(0.7071067811865476).epsilon(1e-12));
        CHECK(r.weights[0] == doctest::Approx(0.5));
    }
    SUBCASE("singleton") {
        const MinNormResult r = min_norm_point({{3.0, 4.0}});
        CHECK(r.norm == 5.0);
        CHECK(r.weights == Vec{1.0});
    }
    SUBCASE("origin inside a triangle") {
        const MinNormResult r = min_norm_point({{1.0, 0.0}, {-1.0, 1.0}, {-1.0, -1.0}});
        CHECK(r.norm <= 1e-12);
    }
}

TEST_CASE("min-norm point: optimality certificate on random hulls") {
    CounterRng rng(0x211);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(4));
        const int n = 1 + static_cast<int>(rng.below(8));
        std::vector<Vec> gens;
        for (int i = 0; i < n; ++i) gens.push_back(rng.normal_vec(d));
        const MinNormResult r = min_norm_point(gens);

        // v* is the projection of the origin iff <v*, g - v*> >= 0 for all g.
        const double vv = dot(r.point, r.point);
        for (const Vec& g : gens) CHECK(dot(r.point, g) - vv >= -1e-9);

        Vec rebuilt(d, 0.0);
        double wsum = 0.0;
        for (size_t i = 0; i < gens.size(); ++i) {
            wsum += r.weights[i];
            for (int c = 0; c < d; ++c) rebuilt[c] += r.weights[i] * gens[i][c];
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(max_abs_diff(rebuilt, r.point) <= 1e-8);
        for (double w : r.weights) CHECK(w >= 0.0);
    }
}

TEST_CASE("min-norm handles duplicate generators") {
    const MinNormResult r = min_norm_point({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    CHECK(r.norm == doctest::Approx(0.7071067811865476).epsilon(1e-10));
    CHECK(r.weights[0] + r.weights[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("clarke sampling on relu sees both slopes") {
    const ProgramFn relu(fixtures::relu_program());
    CounterRng rng(0x222);
    const CloudResult cloud = clarke_sample(relu, {0.0}, 1e-3, 200, rng);
    CHECK(cloud.enough);
    CHECK(contains(cloud.gradients, {0.0}));
    CHECK(contains(cloud.gradients, {1.0}));
    for (const Vec& g : cloud.gradients) CHECK((g == Vec{0.0} || g == Vec{1.0}));
}

TEST_CASE("clarke sampling sees through the zero artefact") {
    const ProgramFn idz(fixtures::identity_minus_zero_program());
    CounterRng rng(0x233);
    const CloudResult cloud = clarke_sample(idz, {0.0}, 1e-3, 200, rng);
    CHECK(cloud.enough);
    for (const Vec& g : cloud.gradients) CHECK(g == Vec{1.0});
}

TEST_CASE("clarke sampling on a smooth square concentrates") {
    const ProgramFn sq(fixtures::square_program());
    CounterRng rng(0x244);
    const CloudResult cloud = clarke_sample(sq, {1.0}, 1e-4, 100, rng);
    CHECK(cloud.enough);
    for (const Vec& g : cloud.gradients) CHECK(std::fabs(g[0] - 2.0) <= 1e-3);
}

TEST_CASE("classification of the canonical points") {
    SUBCASE("relu at 0 is Clarke critical") {
        const CriticalityReport rep = classify(ProgramFn(fixtures::relu_program()), {0.0});
        CHECK(rep.cls == Criticality::ClarkeCritical);
        CHECK(rep.set_min_norm <= 1e-12);
    }
    SUBCASE("identity-minus-zero at 0 is an artificial critical point") {
        const CriticalityReport rep = classify(ProgramFn(fixtures::identity_minus_zero_program()), {0.0});
        CHECK(rep.cls == Criticality::ArtificialCritical);
        CHECK(rep.set_min_norm <= 1e-12);
        CHECK(rep.clarke_min_norm == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("square at 3 is not critical") {
        const CriticalityReport rep = classify(ProgramFn(fixtures::square_program()), {3.0});
        CHECK(rep.cls == Criticality::NonCritical);
        CHECK(rep.set_min_norm == doctest::Approx(6.0));
    }
}

TEST_CASE("criticality report serializes") {
    const CriticalityReport rep = classify(ProgramFn(fixtures::relu_program()), {0.0});
    const std::string json = rep.to_json();
    CHECK(json.find("\"classification\"") != std::string::npos);
    CHECK(json.find("Clarke-critical") != std::string::npos);
    CHECK(json.find("schema_version") != std::string::npos);
}

TEST_CASE("closed graph probe on relu sequences") {
    const ProgramFn relu(fixtures::relu_program());
    SUBCASE("descending from the right, gradients 1") {
        std::vector<Vec> approach;
        for (int k = 1; k <= 30; ++k) approach.push_back({1.0 / k});
        CHECK(closed_graph_probe(relu, {0.0}, approach) <= 1e-12);
    }
    SUBCASE("ascending from the left, gradients 0") {
        std::vector<Vec> approach;
        for (int k = 1; k <= 30; ++k) approach.push_back({-1.0 / k});
        CHECK(closed_graph_probe(relu, {0.0}, approach) <= 1e-12);
    }
}

TEST_CASE("assignment cap truncates with a flag, not a fault") {
    // 17 two-branch nodes at their common kink: 2^17 assignments > cap.
    fixtures::ProgramBuilder b(1);
    std::vector<int> parts;
    for (int i = 0; i < 17; ++i) parts.push_back(b.node(builtins::relu(), {0}));
    int acc = parts[0];
    for (int i = 1; i < 17; ++i) acc = b.node(builtins::add2(), {acc, parts[i]});
    const ProgramFn f(b.finish());
    const GeneratorSet gens = f.generators({0.0}, kDefaultActiveTol, kDefaultAssignmentCap);
    CHECK(gens.truncated);
    CHECK(!gens.gradients.empty());
}

TEST_CASE("sampled clarke hull sits inside the enumerated hull") {
    CounterRng rng(0x255);
    const Program progs[] = {fixtures::relu_program(), fixtures::relu3_program(), fixtures::zero_program()};
    for (const Program& prog : progs) {
        const ProgramFn f(prog);
        for (double x0 : {0.0, 0.5, -1.0}) {
            const Vec x{x0};
            const CloudResult cloud = clarke_sample(f, x, 1e-7, 60, rng);
            const GeneratorSet gens = f.generators(x, 1e-6, kDefaultAssignmentCap);
            for (const Vec& g : cloud.gradients) CHECK(hull_distance(gens.gradients, g) <= 1e-6);
        }
    }
}
