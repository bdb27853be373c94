#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "wfopt/ga.hpp"

using namespace wfopt;

TEST_CASE("staircase hypervolume hand cases") {
    using P = std::pair<double, double>;
    CHECK(hypervolume_2d({}, 0.0, 0.0) == 0.0);
    CHECK(hypervolume_2d({P{3.0, 4.0}}, 0.0, 0.0) == 12.0);
    CHECK(hypervolume_2d({P{-1.0, 5.0}}, 0.0, 0.0) == 0.0);
    CHECK(hypervolume_2d({P{0.0, 3.0}}, 0.0, 0.0) == 0.0);
    CHECK(hypervolume_2d({P{3.0, 1.0}, P{1.0, 3.0}}, 0.0, 0.0) == 5.0);
    CHECK(hypervolume_2d({P{3.0, 1.0}, P{1.0, 3.0}, P{1.0, 1.0}}, 0.0, 0.0) == 5.0);
    CHECK(hypervolume_2d({P{2.0, 2.0}, P{2.0, 2.0}}, 0.0, 0.0) == 4.0);
    CHECK(hypervolume_2d({P{0.0, -4.0}}, -5.0, -5.0) == 5.0);
}

TEST_CASE("fast nondominated filter equals the quadratic oracle") {
    std::mt19937_64 rng(7);
    auto lattice = [&rng] {
        return std::floor(static_cast<double>(rng() >> 11) * 0x1.0p-53 * 10.0) / 10.0;
    };
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < 300; ++i) pts.emplace_back(lattice(), lattice());
        // Lattice coordinates force many exact ties and duplicates.
        CHECK(nondominated_indices(pts) == testutil::slow_front(pts));
    }
}

TEST_CASE("nondominated filter keeps exact bi-objective ties only") {
    using P = std::pair<double, double>;
    const std::vector<P> pts{P{3.0, 1.0}, P{2.0, 1.0}, P{3.0, 1.0}, P{1.0, 3.0}};
    const auto front = nondominated_indices(pts);
    CHECK(front == std::vector<std::size_t>{0, 2, 3});
}

namespace {

GaParams small_params(std::uint64_t seed, int pop, int gen) {
    GaParams p;
    p.population = pop;
    p.generations = gen;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("fixed seed reproduces the run bit for bit") {
    const GaEvaluate eval = [](const std::vector<double>& x, double& f1,
                               double& f2, double& penalty) {
        f1 = -(x[0] - 1.0) * (x[0] - 1.0) - 0.1 * x[1] * x[1];
        f2 = -(x[0] + 1.0) * (x[0] + 1.0) - 0.1 * x[1] * x[1];
        penalty = 0.0;
    };
    const std::vector<double> lo{-2.0, -2.0}, hi{2.0, 2.0};
    const GaResult a = nsga2_run(eval, lo, hi, small_params(42, 8, 6), -9.0, -9.0);
    const GaResult b = nsga2_run(eval, lo, hi, small_params(42, 8, 6), -9.0, -9.0);
    REQUIRE(a.archive.size() == b.archive.size());
    for (std::size_t i = 0; i < a.archive.size(); ++i) {
        CHECK(a.archive[i].x == b.archive[i].x);
        CHECK(a.archive[i].f1 == b.archive[i].f1);
        CHECK(a.archive[i].f2 == b.archive[i].f2);
    }
    CHECK(a.hypervolume_history == b.hypervolume_history);

    const GaResult c = nsga2_run(eval, lo, hi, small_params(43, 8, 6), -9.0, -9.0);
    CHECK(a.hypervolume_history != c.hypervolume_history);
}

TEST_CASE("archive hypervolume never decreases") {
    const GaEvaluate eval = [](const std::vector<double>& x, double& f1,
                               double& f2, double& penalty) {
        f1 = -x[0] * x[0];
        f2 = -(x[0] - 2.0) * (x[0] - 2.0);
        penalty = 0.0;
    };
    const GaResult r = nsga2_run(eval, {-1.0}, {3.0}, small_params(5, 12, 20),
                                 -5.0, -5.0);
    REQUIRE(r.hypervolume_history.size() == 20);
    for (std::size_t i = 1; i < r.hypervolume_history.size(); ++i) {
        CHECK(r.hypervolume_history[i] >= r.hypervolume_history[i - 1]);
    }
}

TEST_CASE("bi-objective benchmark reaches most of the analytic hypervolume") {
    // max(-x^2, -(x-2)^2) on [-1, 3]: the front is x in [0, 2] and the exact
    // dominated volume against (-5, -5) is 67/3.
    const GaEvaluate eval = [](const std::vector<double>& x, double& f1,
                               double& f2, double& penalty) {
        f1 = -x[0] * x[0];
        f2 = -(x[0] - 2.0) * (x[0] - 2.0);
        penalty = 0.0;
    };
    const GaResult r = nsga2_run(eval, {-1.0}, {3.0}, small_params(3, 16, 25),
                                 -5.0, -5.0);
    CHECK_FALSE(r.all_infeasible);
    CHECK(r.hypervolume_history.back() >= 0.95 * (67.0 / 3.0));
    CHECK(r.hypervolume_history.back() <= 67.0 / 3.0 + 1e-12);
    for (const GaIndividual& ind : r.archive) {
        CHECK(ind.penalty == 0.0);
        CHECK(ind.x[0] >= -1.0);
        CHECK(ind.x[0] <= 3.0);
    }
}

TEST_CASE("constraint domination keeps infeasible points out of the archive") {
    const GaEvaluate eval = [](const std::vector<double>& x, double& f1,
                               double& f2, double& penalty) {
        f1 = x[0];
        f2 = -x[0];
        penalty = x[0] < 0.0 ? -x[0] : 0.0;
    };
    const GaResult r = nsga2_run(eval, {-1.0}, {1.0}, small_params(11, 10, 8),
                                 -2.0, -2.0);
    CHECK_FALSE(r.all_infeasible);
    CHECK_FALSE(r.archive.empty());
    for (const GaIndividual& ind : r.archive) {
        CHECK(ind.feasible());
        CHECK(ind.x[0] >= 0.0);
    }
}

TEST_CASE("a run with no feasible point reports the least-penalized one") {
    const GaEvaluate eval = [](const std::vector<double>& x, double& f1,
                               double& f2, double& penalty) {
        f1 = x[0];
        f2 = -x[0];
        penalty = 1.0 + std::abs(x[0]);
    };
    const GaResult r = nsga2_run(eval, {-1.0}, {1.0}, small_params(2, 8, 4),
                                 -2.0, -2.0);
    CHECK(r.all_infeasible);
    CHECK(r.archive.empty());
    REQUIRE(r.best_infeasible.x.size() == 1);
    CHECK(r.best_infeasible.penalty >= 1.0);
    CHECK(r.best_infeasible.penalty < 2.0);
    for (double hv : r.hypervolume_history) CHECK(hv == 0.0);
}

TEST_CASE("evaluation failures are quarantined") {
    const GaEvaluate eval = [](const std::vector<double>& x, double& f1,
                               double& f2, double& penalty) {
        if (x[0] < 0.5) {
            f1 = std::numeric_limits<double>::quiet_NaN();
            f2 = 0.0;
            penalty = 0.0;
            return;
        }
        f1 = x[0];
        f2 = 1.0 - x[0];
        penalty = 0.0;
    };
    const GaResult r = nsga2_run(eval, {0.0}, {1.0}, small_params(9, 8, 6),
                                 -1.0, -1.0);
    CHECK_FALSE(r.archive.empty());
    for (const GaIndividual& ind : r.archive) {
        CHECK(std::isfinite(ind.f1));
        CHECK(ind.x[0] >= 0.5);
    }
}

TEST_CASE("run parameters are validated") {
    const GaEvaluate eval = [](const std::vector<double>&, double& f1,
                               double& f2, double& penalty) {
        f1 = f2 = 0.0;
        penalty = 0.0;
    };
    CHECK_THROWS_AS(nsga2_run(eval, {0.0}, {1.0}, small_params(1, 5, 3), 0, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(nsga2_run(eval, {0.0}, {1.0}, small_params(1, 2, 3), 0, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(nsga2_run(eval, {0.0}, {1.0}, small_params(1, 8, 0), 0, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(nsga2_run(eval, {1.0}, {0.0}, small_params(1, 8, 3), 0, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(nsga2_run(eval, {}, {}, small_params(1, 8, 3), 0, 0),
                    std::invalid_argument);
}
