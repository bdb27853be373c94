#include "wfopt/ga.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "wfopt/common.hpp"

namespace wfopt {

namespace {

// std::uniform_real_distribution is implementation-defined; derive doubles
// from raw engine output so runs reproduce bit-for-bit anywhere.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t next_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

// Deb's simulated binary crossover on one variable.
void sbx_pair(double p1, double p2, double lo, double hi, double eta,
              std::mt19937_64& rng, double& c1, double& c2) {
    c1 = p1;
    c2 = p2;
    if (std::abs(p1 - p2) < 1e-14) return;
    const double y1 = std::min(p1, p2);
    const double y2 = std::max(p1, p2);
    const double u = next_unit(rng);
    auto spread = [&](double beta) {
        const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        if (u <= 1.0 / alpha) return std::pow(u * alpha, 1.0 / (eta + 1.0));
        return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
    };
    const double bl = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
    const double bu = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
    double a = 0.5 * ((y1 + y2) - spread(bl) * (y2 - y1));
    double b = 0.5 * ((y1 + y2) + spread(bu) * (y2 - y1));
    a = std::clamp(a, lo, hi);
    b = std::clamp(b, lo, hi);
    if (next_unit(rng) < 0.5) std::swap(a, b);
    c1 = a;
    c2 = b;
}

// Deb's polynomial mutation on one variable.
double polynomial_mutate(double x, double lo, double hi, double eta,
                         std::mt19937_64& rng) {
    const double span = hi - lo;
    if (span <= 0.0) return x;
    const double u = next_unit(rng);
    const double mut_pow = 1.0 / (eta + 1.0);
    double deltaq;
    if (u <= 0.5) {
        const double xy = 1.0 - (x - lo) / span;
        const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0);
        deltaq = std::pow(val, mut_pow) - 1.0;
    } else {
        const double xy = 1.0 - (hi - x) / span;
        const double val =
            2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0);
        deltaq = 1.0 - std::pow(val, mut_pow);
    }
    return std::clamp(x + deltaq * span, lo, hi);
}

// Constraint domination: feasible beats infeasible, less-penalized beats
// more-penalized, and between feasible individuals plain Pareto dominance.
bool dominates(const GaIndividual& a, const GaIndividual& b) {
    if (a.feasible() != b.feasible()) return a.feasible();
    if (!a.feasible()) return a.penalty < b.penalty;
    const bool ge = a.f1 >= b.f1 && a.f2 >= b.f2;
    const bool gt = a.f1 > b.f1 || a.f2 > b.f2;
    return ge && gt;
}

struct RankInfo {
    std::vector<int> rank;
    std::vector<double> crowding;
    std::vector<std::vector<std::size_t>> fronts;
};

RankInfo rank_population(const std::vector<GaIndividual>& pop) {
    const std::size_t n = pop.size();
    RankInfo info;
    info.rank.assign(n, 0);
    info.crowding.assign(n, 0.0);

    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<int> dom_count(n, 0);
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(pop[i], pop[j])) dominated[i].push_back(j);
            else if (dominates(pop[j], pop[i])) ++dom_count[i];
        }
        if (dom_count[i] == 0) {
            info.rank[i] = 0;
            current.push_back(i);
        }
    }
    int level = 0;
    while (!current.empty()) {
        info.fronts.push_back(current);
        std::vector<std::size_t> next;
        for (std::size_t i : current) {
            for (std::size_t j : dominated[i]) {
                if (--dom_count[j] == 0) {
                    info.rank[j] = level + 1;
                    next.push_back(j);
                }
            }
        }
        current = std::move(next);
        ++level;
    }

    const double inf = std::numeric_limits<double>::infinity();
    for (auto& front : info.fronts) {
        if (front.size() <= 2) {
            for (std::size_t i : front) info.crowding[i] = inf;
            continue;
        }
        for (int obj = 0; obj < 2; ++obj) {
            auto value = [&](std::size_t i) {
                return obj == 0 ? pop[i].f1 : pop[i].f2;
            };
            std::vector<std::size_t> order = front;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) {
                                 return value(a) < value(b);
                             });
            info.crowding[order.front()] = inf;
            info.crowding[order.back()] = inf;
            const double span = value(order.back()) - value(order.front());
            if (span <= 0.0) continue;
            for (std::size_t k = 1; k + 1 < order.size(); ++k) {
                info.crowding[order[k]] +=
                    (value(order[k + 1]) - value(order[k - 1])) / span;
            }
        }
    }
    return info;
}

// Tournament preference: domination first, then rank, then crowding.
std::size_t tournament(const std::vector<GaIndividual>& pop,
                       const RankInfo& info, std::mt19937_64& rng) {
    const std::size_t a = next_index(rng, pop.size());
    const std::size_t b = next_index(rng, pop.size());
    if (dominates(pop[a], pop[b])) return a;
    if (dominates(pop[b], pop[a])) return b;
    if (info.rank[a] != info.rank[b])
        return info.rank[a] < info.rank[b] ? a : b;
    if (info.crowding[a] != info.crowding[b])
        return info.crowding[a] > info.crowding[b] ? a : b;
    return a;
}

void merge_archive(std::vector<GaIndividual>& archive,
                   const std::vector<GaIndividual>& pop) {
    for (const auto& ind : pop) {
        if (!ind.feasible()) continue;
        bool duplicate = false;
        for (const auto& kept : archive) {
            if (kept.f1 == ind.f1 && kept.f2 == ind.f2 && kept.x == ind.x) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) archive.push_back(ind);
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(archive.size());
    for (const auto& ind : archive) pts.emplace_back(ind.f1, ind.f2);
    std::vector<GaIndividual> kept;
    for (std::size_t i : nondominated_indices(pts)) kept.push_back(archive[i]);
    std::stable_sort(kept.begin(), kept.end(),
                     [](const GaIndividual& a, const GaIndividual& b) {
                         if (a.f1 != b.f1) return a.f1 > b.f1;
                         if (a.f2 != b.f2) return a.f2 > b.f2;
                         return a.x < b.x;
                     });
    archive = std::move(kept);
}

}  // namespace

std::vector<std::size_t> nondominated_indices(
    const std::vector<std::pair<double, double>>& points) {
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (points[a].first != points[b].first)
                             return points[a].first > points[b].first;
                         return points[a].second > points[b].second;
                     });
    std::vector<std::size_t> kept;
    double best_f2 = -std::numeric_limits<double>::infinity();
    double best_f1 = 0.0;
    for (std::size_t i : order) {
        const auto [f1, f2] = points[i];
        if (f2 > best_f2) {
            kept.push_back(i);
            best_f2 = f2;
            best_f1 = f1;
        } else if (f2 == best_f2 && f1 == best_f1) {
            kept.push_back(i);  // exact tie on both objectives
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

double hypervolume_2d(const std::vector<std::pair<double, double>>& points,
                      double ref_f1, double ref_f2) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : points) {
        if (p.first > ref_f1 && p.second > ref_f2) pts.push_back(p);
    }
    if (pts.empty()) return 0.0;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
    });
    double hv = 0.0;
    double floor_f2 = ref_f2;
    for (const auto& [f1, f2] : pts) {
        if (f2 <= floor_f2) continue;
        hv += (f1 - ref_f1) * (f2 - floor_f2);
        floor_f2 = f2;
    }
    return hv;
}

GaResult nsga2_run(const GaEvaluate& evaluate,
                   const std::vector<double>& lower,
                   const std::vector<double>& upper, const GaParams& params,
                   double hv_ref_f1, double hv_ref_f2) {
    const std::size_t n_vars = lower.size();
    if (n_vars == 0 || upper.size() != n_vars)
        throw std::invalid_argument("nsga2_run: bad variable bounds");
    for (std::size_t i = 0; i < n_vars; ++i) {
        if (!(lower[i] < upper[i]))
            throw std::invalid_argument("nsga2_run: lower bound must be below upper");
    }
    if (params.population < 4 || params.population % 2 != 0)
        throw std::invalid_argument("nsga2_run: population must be even and >= 4");
    if (params.generations < 1)
        throw std::invalid_argument("nsga2_run: need at least one generation");

    const double pm = params.mutation_rate > 0.0
                          ? params.mutation_rate
                          : 1.0 / static_cast<double>(n_vars);
    std::mt19937_64 rng(params.seed);

    auto eval_one = [&](GaIndividual& ind) {
        evaluate(ind.x, ind.f1, ind.f2, ind.penalty);
        if (!std::isfinite(ind.f1) || !std::isfinite(ind.f2) ||
            std::isnan(ind.penalty)) {
            ind.f1 = ind.f2 = -std::numeric_limits<double>::infinity();
            ind.penalty = std::numeric_limits<double>::infinity();
        }
    };

    std::vector<GaIndividual> pop(static_cast<std::size_t>(params.population));
    for (auto& ind : pop) {
        ind.x.resize(n_vars);
        for (std::size_t i = 0; i < n_vars; ++i)
            ind.x[i] = lower[i] + next_unit(rng) * (upper[i] - lower[i]);
        eval_one(ind);
    }

    GaResult result;
    result.best_infeasible = pop.front();
    auto track_best_infeasible = [&](const GaIndividual& ind) {
        if (ind.penalty < result.best_infeasible.penalty)
            result.best_infeasible = ind;
    };
    for (const auto& ind : pop) track_best_infeasible(ind);
    merge_archive(result.archive, pop);

    RankInfo info = rank_population(pop);
    for (int gen = 0; gen < params.generations; ++gen) {
        std::vector<GaIndividual> offspring;
        offspring.reserve(pop.size());
        while (offspring.size() < pop.size()) {
            const GaIndividual& pa = pop[tournament(pop, info, rng)];
            const GaIndividual& pb = pop[tournament(pop, info, rng)];
            GaIndividual c1 = pa;
            GaIndividual c2 = pb;
            if (next_unit(rng) < params.crossover_prob) {
                for (std::size_t i = 0; i < n_vars; ++i) {
                    if (next_unit(rng) < 0.5) {
                        sbx_pair(pa.x[i], pb.x[i], lower[i], upper[i],
                                 params.sbx_eta, rng, c1.x[i], c2.x[i]);
                    }
                }
            }
            for (std::size_t i = 0; i < n_vars; ++i) {
                if (next_unit(rng) < pm)
                    c1.x[i] = polynomial_mutate(c1.x[i], lower[i], upper[i],
                                                params.mutation_eta, rng);
                if (next_unit(rng) < pm)
                    c2.x[i] = polynomial_mutate(c2.x[i], lower[i], upper[i],
                                                params.mutation_eta, rng);
            }
            eval_one(c1);
            eval_one(c2);
            track_best_infeasible(c1);
            track_best_infeasible(c2);
            offspring.push_back(std::move(c1));
            if (offspring.size() < pop.size())
                offspring.push_back(std::move(c2));
        }

        std::vector<GaIndividual> combined = pop;
        combined.insert(combined.end(), offspring.begin(), offspring.end());
        RankInfo cinfo = rank_population(combined);

        std::vector<GaIndividual> next;
        next.reserve(pop.size());
        for (const auto& front : cinfo.fronts) {
            if (next.size() + front.size() <= pop.size()) {
                for (std::size_t i : front) next.push_back(combined[i]);
            } else {
                std::vector<std::size_t> order = front;
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) {
                                     return cinfo.crowding[a] >
                                            cinfo.crowding[b];
                                 });
                for (std::size_t i : order) {
                    if (next.size() == pop.size()) break;
                    next.push_back(combined[i]);
                }
            }
            if (next.size() == pop.size()) break;
        }
        pop = std::move(next);
        info = rank_population(pop);

        merge_archive(result.archive, pop);
        std::vector<std::pair<double, double>> pts;
        pts.reserve(result.archive.size());
        for (const auto& ind : result.archive)
            pts.emplace_back(ind.f1, ind.f2);
        result.hypervolume_history.push_back(
            hypervolume_2d(pts, hv_ref_f1, hv_ref_f2));
    }

    result.all_infeasible = result.archive.empty();
    return result;
}

}  // namespace wfopt
