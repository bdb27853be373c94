#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace wfopt {

// Real-coded NSGA-II with constraint domination. Objectives are maximized.
// Everything is deterministic for a fixed seed: one mt19937_64 stream drives
// initialization, selection, crossover and mutation in a fixed order.

struct GaIndividual {
    std::vector<double> x;
    double f1 = 0.0;
    double f2 = 0.0;
    double penalty = 0.0;  // 0 = feasible; evaluation failures use +inf
    [[nodiscard]] bool feasible() const { return penalty == 0.0; }
};

struct GaParams {
    int population = 40;  // must be even
    int generations = 60;
    double crossover_prob = 0.9;
    double sbx_eta = 15.0;
    double mutation_eta = 20.0;
    double mutation_rate = 0.0;  // <= 0 means 1/n_vars
    std::uint64_t seed = 1;
};

// Evaluation callback: fills f1, f2, penalty for a genome.
using GaEvaluate =
    std::function<void(const std::vector<double>& x, double& f1, double& f2,
                       double& penalty)>;

struct GaResult {
    std::vector<GaIndividual> archive;  // nondominated feasible individuals
    std::vector<double> hypervolume_history;  // one entry per generation
    bool all_infeasible = false;
    // When no feasible candidate was ever seen, the least-penalized one.
    GaIndividual best_infeasible;
};

GaResult nsga2_run(const GaEvaluate& evaluate,
                   const std::vector<double>& lower,
                   const std::vector<double>& upper, const GaParams& params,
                   double hv_ref_f1, double hv_ref_f2);

// Staircase hypervolume for maximized (f1, f2) against a reference point.
// Points not strictly dominating the reference contribute nothing.
double hypervolume_2d(const std::vector<std::pair<double, double>>& points,
                      double ref_f1, double ref_f2);

// Nondominated subset under (maximize f1, maximize f2). Exact ties on both
// objectives are all kept. Sort-and-sweep, O(n log n).
std::vector<std::size_t> nondominated_indices(
    const std::vector<std::pair<double, double>>& points);

}  // namespace wfopt
