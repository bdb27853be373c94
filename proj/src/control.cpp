#include "wfopt/control.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "wfopt/textfile.hpp"

namespace wfopt {
namespace {

using json = nlohmann::ordered_json;

struct SolveContext {
    const MachineDesign* design;
    const FluxLinkageMap* map;
    MachineGeometry geo;
    SolverOptions opts;
    double w_mech = 0.0;
    double w_elec = 0.0;
    double r_s = 0.0;
    double v_limit = 0.0;
    double i_max_pk = 0.0;
    double i_f_cap = 0.0;
};

SolveContext make_context(const MachineDesign& design, const FluxLinkageMap& map,
                          double speed_rpm, double v_dc,
                          const SolverOptions& opts) {
    SolveContext ctx;
    ctx.design = &design;
    ctx.map = &map;
    ctx.geo = derive_geometry(design);
    ctx.opts = opts;
    ctx.w_mech = rpm_to_rad_s(speed_rpm);
    ctx.w_elec = design.pole_pairs * ctx.w_mech;
    ctx.r_s = resistance_at(ctx.geo.stator_resistance_20c, opts.loss.winding_temp);
    ctx.v_limit = opts.modulation_limit * v_dc;
    ctx.i_max_pk = design.ratings.max_stator_current * std::sqrt(2.0);
    if (design.topology == Topology::wfsm) {
        const double r_f =
            resistance_at(design.field_resistance_20c, opts.loss.winding_temp);
        ctx.i_f_cap = std::min(design.ratings.max_field_current,
                               std::sqrt(design.ratings.max_field_power / r_f));
    }
    return ctx;
}

struct PointEval {
    FluxLinkageMap::Sample s{};
    double torque = 0.0;
    double v_d = 0.0;
    double v_q = 0.0;
    double v_ll = 0.0;
};

PointEval eval_point(const SolveContext& ctx, double i_d, double i_q, double i_f) {
    PointEval p;
    p.s = ctx.map->sample(i_d, i_q, i_f);
    p.torque = 1.5 * ctx.design->pole_pairs * (p.s.psi_d * i_q - p.s.psi_q * i_d);
    p.v_d = ctx.r_s * i_d - ctx.w_elec * p.s.psi_q;
    p.v_q = ctx.r_s * i_q + ctx.w_elec * p.s.psi_d;
    p.v_ll = std::sqrt(3.0) * std::hypot(p.v_d, p.v_q);
    return p;
}

struct RayPoint {
    double magnitude = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
    double torque = 0.0;
};

// All magnitudes along the (angle, i_f) ray where the torque crosses t_tgt
// and the voltage limit holds. Torque is not monotone in magnitude once the
// d-axis flux reverses, and at high speed only a descending-branch crossing
// may sit inside the voltage window, so every scan-grid bracket is bisected
// and checked, not just the first.
std::vector<RayPoint> solve_ray(const SolveContext& ctx, double angle,
                                double i_f, double t_tgt) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const int n = ctx.opts.n_mag;
    std::vector<RayPoint> out;
    double prev_m = 0.0;
    double prev_f = -t_tgt;  // torque at zero stator current is zero
    for (int j = 1; j < n; ++j) {
        const double m = ctx.i_max_pk * j / (n - 1);
        const double f = eval_point(ctx, m * c, m * s, i_f).torque - t_tgt;
        if (prev_f * f <= 0.0 && (prev_f != 0.0 || f != 0.0)) {
            double lo = prev_m;
            double f_lo = prev_f;
            double hi = m;
            const double t_inner = 1e-9 * std::max(1.0, t_tgt);
            double mid = hi;
            PointEval pe = eval_point(ctx, hi * c, hi * s, i_f);
            for (int it = 0; it < 80; ++it) {
                mid = 0.5 * (lo + hi);
                pe = eval_point(ctx, mid * c, mid * s, i_f);
                const double f_mid = pe.torque - t_tgt;
                if (std::abs(f_mid) <= t_inner) break;
                if ((f_mid < 0.0) == (f_lo < 0.0)) {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            if (pe.v_ll <= ctx.v_limit) {
                RayPoint rp;
                rp.magnitude = mid;
                rp.i_d = mid * c;
                rp.i_q = mid * s;
                rp.torque = pe.torque;
                out.push_back(rp);
            }
        }
        prev_m = m;
        prev_f = f;
    }
    return out;
}

struct Candidate {
    double objective = 0.0;
    double i_f = 0.0;
    double angle = 0.0;
    RayPoint point;
};

// Deterministic ordering: objective, then smaller field current, then
// smaller stator current magnitude.
bool better(const Candidate& a, const Candidate& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    if (a.i_f != b.i_f) return a.i_f < b.i_f;
    return a.point.magnitude < b.point.magnitude;
}

double candidate_objective(const SolveContext& ctx, ControlStrategy strategy,
                           const RayPoint& rp, double i_f) {
    if (strategy == ControlStrategy::mtpa) return rp.magnitude;
    return machine_losses(*ctx.design, ctx.geo, *ctx.map, rp.i_d, rp.i_q, i_f,
                          ctx.w_mech, ctx.opts.loss)
        .total();
}

std::optional<Candidate> try_candidate(const SolveContext& ctx,
                                       ControlStrategy strategy, double angle,
                                       double i_f, double t_tgt) {
    std::optional<Candidate> best;
    for (const RayPoint& rp : solve_ray(ctx, angle, i_f, t_tgt)) {
        Candidate cand;
        cand.objective = candidate_objective(ctx, strategy, rp, i_f);
        cand.i_f = i_f;
        cand.angle = angle;
        cand.point = rp;
        if (!best || better(cand, *best)) best = cand;
    }
    return best;
}

ControlSolution finish_solution(const SolveContext& ctx, double i_d, double i_q,
                                double i_f) {
    const PointEval pe = eval_point(ctx, i_d, i_q, i_f);
    ControlSolution sol;
    sol.i_d = i_d;
    sol.i_q = i_q;
    sol.i_f = i_f;
    sol.v_d = pe.v_d;
    sol.v_q = pe.v_q;
    sol.torque_achieved = pe.torque;
    sol.losses = machine_losses(*ctx.design, ctx.geo, *ctx.map, i_d, i_q, i_f,
                                ctx.w_mech, ctx.opts.loss);
    sol.shaft_power = sol.torque_achieved * ctx.w_mech;
    sol.electrical_input_power = sol.shaft_power + sol.losses.total();
    if (sol.shaft_power > 0.0) {
        sol.efficiency = sol.shaft_power / sol.electrical_input_power;
    } else if (sol.shaft_power < 0.0) {
        sol.efficiency = sol.electrical_input_power / sol.shaft_power;
    }
    return sol;
}

// Minimum-loss point delivering (to tolerance) zero torque. For a wound-field
// machine the all-zero point has exactly zero loss and cannot be beaten; a
// magnet machine may trade copper for iron along the pure-d ray.
ControlSolution solve_zero_torque(const SolveContext& ctx,
                                  ControlStrategy strategy) {
    if (strategy == ControlStrategy::mtpa ||
        ctx.design->topology == Topology::wfsm) {
        return finish_solution(ctx, 0.0, 0.0, 0.0);
    }
    const int n = 2 * ctx.opts.n_mag + 1;
    double best_m = 0.0;
    double best_loss = machine_losses(*ctx.design, ctx.geo, *ctx.map, 0.0, 0.0,
                                      0.0, ctx.w_mech, ctx.opts.loss)
                           .total();
    auto consider = [&](double m) {
        if (m < 0.0 || m > ctx.i_max_pk) return;
        const PointEval pe = eval_point(ctx, -m, 0.0, 0.0);
        if (pe.v_ll > ctx.v_limit) return;
        const double loss = machine_losses(*ctx.design, ctx.geo, *ctx.map, -m,
                                           0.0, 0.0, ctx.w_mech, ctx.opts.loss)
                                .total();
        if (loss < best_loss || (loss == best_loss && m < best_m)) {
            best_loss = loss;
            best_m = m;
        }
    };
    for (int j = 1; j < n; ++j) consider(ctx.i_max_pk * j / (n - 1));
    double step = ctx.i_max_pk / (n - 1) / 2.0;
    for (int round = 0; round < ctx.opts.refine_rounds; ++round) {
        for (int guard = 0; guard < 64; ++guard) {
            const double before = best_m;
            consider(best_m - step);
            consider(best_m + step);
            if (best_m == before) break;
        }
        step *= 0.5;
    }
    return finish_solution(ctx, -best_m, 0.0, 0.0);
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

}  // namespace

double peak_torque_at(const MachineDesign& design, const FluxLinkageMap& map,
                      double speed_rpm, double v_dc, const SolverOptions& opts) {
    const SolveContext ctx = make_context(design, map, speed_rpm, v_dc, opts);
    const std::vector<double> if_values =
        design.topology == Topology::wfsm
            ? linspace(0.0, ctx.i_f_cap, opts.n_if)
            : std::vector<double>{0.0};
    const std::vector<double> angles = linspace(0.0, kPi, opts.n_angle);
    const std::vector<double> mags = linspace(0.0, ctx.i_max_pk, opts.n_mag);

    double best_t = 0.0;
    double best_if = 0.0, best_angle = 0.0, best_m = 0.0;
    auto consider = [&](double i_f, double angle, double m) {
        if (i_f < 0.0 || i_f > ctx.i_f_cap || angle < 0.0 || angle > kPi ||
            m < 0.0 || m > ctx.i_max_pk) {
            return false;
        }
        const PointEval pe =
            eval_point(ctx, m * std::cos(angle), m * std::sin(angle), i_f);
        if (pe.v_ll > ctx.v_limit) return false;
        if (pe.torque > best_t) {
            best_t = pe.torque;
            best_if = i_f;
            best_angle = angle;
            best_m = m;
            return true;
        }
        return false;
    };
    for (double i_f : if_values) {
        for (double angle : angles) {
            for (double m : mags) consider(i_f, angle, m);
        }
    }
    double step_if = if_values.size() > 1 ? if_values[1] - if_values[0] : 0.0;
    double step_ang = angles[1] - angles[0];
    double step_m = mags[1] - mags[0];
    for (int round = 0; round < opts.refine_rounds; ++round) {
        step_if *= 0.5;
        step_ang *= 0.5;
        step_m *= 0.5;
        for (int guard = 0; guard < 64; ++guard) {
            bool moved = false;
            const double f0 = best_if, a0 = best_angle, m0 = best_m;
            if (step_if > 0.0) {
                moved |= consider(f0 - step_if, a0, m0);
                moved |= consider(f0 + step_if, a0, m0);
            }
            moved |= consider(f0, a0 - step_ang, m0);
            moved |= consider(f0, a0 + step_ang, m0);
            moved |= consider(f0, a0, m0 - step_m);
            moved |= consider(f0, a0, m0 + step_m);
            if (!moved) break;
        }
    }
    return best_t;
}

ControlSolution solve_operating_point(const MachineDesign& design,
                                      const FluxLinkageMap& map,
                                      ControlStrategy strategy, double t_req,
                                      double speed_rpm, double v_dc,
                                      const SolverOptions& opts) {
    const SolveContext ctx = make_context(design, map, speed_rpm, v_dc, opts);
    const double t_sign = t_req < 0.0 ? -1.0 : 1.0;
    const double t_tgt = std::abs(t_req);
    const double tol =
        std::max(opts.torque_tol_abs, opts.torque_tol_rel * t_tgt);

    if (t_tgt <= tol) {
        return solve_zero_torque(ctx, strategy);
    }

    const std::vector<double> if_values =
        design.topology == Topology::wfsm
            ? linspace(0.0, ctx.i_f_cap, opts.n_if)
            : std::vector<double>{0.0};
    const std::vector<double> angles = linspace(0.0, kPi, opts.n_angle);

    // Best candidate at a fixed field current: coarse scan over the angle
    // grid, then pattern-refine the angle alone.
    auto best_at_field = [&](double i_f) -> std::optional<Candidate> {
        std::optional<Candidate> local;
        for (double angle : angles) {
            auto cand = try_candidate(ctx, strategy, angle, i_f, t_tgt);
            if (cand && (!local || better(*cand, *local))) local = cand;
        }
        if (!local) return local;
        double step = (angles[1] - angles[0]) * 0.5;
        for (int round = 0; round < opts.refine_rounds; ++round) {
            for (int guard = 0; guard < 64; ++guard) {
                const double a0 = local->angle;
                std::optional<Candidate> improved;
                auto probe = [&](double angle) {
                    if (angle < 0.0 || angle > kPi) return;
                    auto cand = try_candidate(ctx, strategy, angle, i_f, t_tgt);
                    if (cand && better(*cand, *local) &&
                        (!improved || better(*cand, *improved))) {
                        improved = cand;
                    }
                };
                probe(a0 - step);
                probe(a0 + step);
                if (!improved) break;
                local = improved;
            }
            step *= 0.5;
        }
        return local;
    };

    std::optional<Candidate> best;
    for (double i_f : if_values) {
        auto cand = best_at_field(i_f);
        if (cand && (!best || better(*cand, *best))) best = cand;
    }
    if (!best) {
        const double achievable = peak_torque_at(design, map, speed_rpm, v_dc, opts);
        std::ostringstream msg;
        msg << design.name << ": torque " << t_req << " N*m not reachable at "
            << speed_rpm << " rpm under current/voltage/field limits (max "
            << t_sign * achievable << " N*m)";
        throw Infeasible(msg.str(), t_sign * achievable);
    }

    // The voltage-feasible angle window shifts with the field current, so a
    // field-current step is only meaningful with the angle re-optimized; a
    // joint coordinate search stalls on that ridge.
    double step_if =
        if_values.size() > 1 ? (if_values[1] - if_values[0]) * 0.5 : 0.0;
    for (int round = 0; step_if > 0.0 && round < opts.refine_rounds; ++round) {
        for (int guard = 0; guard < 64; ++guard) {
            const double f0 = best->i_f;
            std::optional<Candidate> improved;
            auto probe = [&](double i_f) {
                i_f = std::clamp(i_f, 0.0, ctx.i_f_cap);
                auto cand = best_at_field(i_f);
                if (cand && better(*cand, *best) &&
                    (!improved || better(*cand, *improved))) {
                    improved = cand;
                }
            };
            probe(f0 - step_if);
            probe(f0 + step_if);
            if (!improved) break;
            best = improved;
        }
        step_if *= 0.5;
    }

    ControlSolution sol = finish_solution(ctx, best->point.i_d,
                                          t_sign * best->point.i_q, best->i_f);
    return sol;
}

ControlSolution mtpl_solve(const MachineDesign& design, const FluxLinkageMap& map,
                           double t_req, double speed_rpm, double v_dc,
                           const SolverOptions& opts) {
    return solve_operating_point(design, map, ControlStrategy::mtpl, t_req,
                                 speed_rpm, v_dc, opts);
}

ControlSolution mtpa_solve(const MachineDesign& design, const FluxLinkageMap& map,
                           double t_req, double speed_rpm, double v_dc,
                           const SolverOptions& opts) {
    return solve_operating_point(design, map, ControlStrategy::mtpa, t_req,
                                 speed_rpm, v_dc, opts);
}

PeakEnvelope peak_envelope(const MachineDesign& design, const FluxLinkageMap& map,
                           double v_dc, const std::vector<double>& speed_axis_rpm,
                           const SolverOptions& opts) {
    PeakEnvelope env;
    env.speed_rpm = speed_axis_rpm;
    env.torque.reserve(speed_axis_rpm.size());
    env.power.reserve(speed_axis_rpm.size());
    for (double rpm : speed_axis_rpm) {
        const double t = peak_torque_at(design, map, rpm, v_dc, opts);
        env.torque.push_back(t);
        env.power.push_back(t * rpm_to_rad_s(rpm));
    }
    return env;
}

EfficiencyMap build_efficiency_map(const MachineDesign& design,
                                   const FluxLinkageMap& map,
                                   ControlStrategy strategy,
                                   const std::vector<double>& torque_axis,
                                   const std::vector<double>& speed_axis_rpm,
                                   double v_dc, const SolverOptions& opts) {
    EfficiencyMap em;
    em.design_name = design.name;
    em.strategy = strategy == ControlStrategy::mtpl ? "mtpl" : "mtpa";
    em.v_dc = v_dc;
    em.torque_axis = torque_axis;
    em.speed_axis = speed_axis_rpm;
    const std::size_t total = torque_axis.size() * speed_axis_rpm.size();
    em.efficiency.assign(total, 0.0);
    em.loss_total.assign(total, 0.0);
    em.i_f_choice.assign(total, 0.0);
    em.feasible.assign(total, 0);
    em.iron_stator.assign(total, 0.0);
    em.iron_rotor.assign(total, 0.0);
    em.copper_dc.assign(total, 0.0);
    em.copper_ac.assign(total, 0.0);
    em.field_copper.assign(total, 0.0);
    em.transformer.assign(total, 0.0);

    for (std::size_t t = 0; t < torque_axis.size(); ++t) {
        for (std::size_t s = 0; s < speed_axis_rpm.size(); ++s) {
            if (torque_axis[t] <= 0.0 || speed_axis_rpm[s] <= 0.0) continue;
            const std::size_t idx = em.index(static_cast<int>(t),
                                             static_cast<int>(s));
            try {
                const ControlSolution sol =
                    solve_operating_point(design, map, strategy, torque_axis[t],
                                          speed_axis_rpm[s], v_dc, opts);
                em.efficiency[idx] = sol.efficiency;
                em.loss_total[idx] = sol.losses.total();
                em.i_f_choice[idx] = sol.i_f;
                em.feasible[idx] = 1;
                em.iron_stator[idx] = sol.losses.iron_stator;
                em.iron_rotor[idx] = sol.losses.iron_rotor;
                em.copper_dc[idx] = sol.losses.copper_dc;
                em.copper_ac[idx] = sol.losses.copper_ac;
                em.field_copper[idx] = sol.losses.field_copper;
                em.transformer[idx] = sol.losses.transformer;
            } catch (const Infeasible&) {
                // outside the envelope: masked, not an error
            }
        }
    }
    em.validate();
    return em;
}

void EfficiencyMap::validate() const {
    auto check_axis = [](const std::vector<double>& axis, const char* name) {
        if (axis.empty())
            throw ValidationError(std::string("efficiency map: empty ") + name);
        for (std::size_t i = 1; i < axis.size(); ++i) {
            if (!(axis[i] > axis[i - 1])) {
                throw ValidationError(std::string("efficiency map: ") + name +
                                      " must be strictly increasing");
            }
        }
    };
    check_axis(torque_axis, "torque_axis");
    check_axis(speed_axis, "speed_axis");
    if (torque_axis.front() < 0.0) {
        throw ValidationError("efficiency map: torque axis must be nonnegative");
    }
    const std::size_t total = torque_axis.size() * speed_axis.size();
    for (const auto* arr :
         {&efficiency, &loss_total, &i_f_choice, &iron_stator, &iron_rotor,
          &copper_dc, &copper_ac, &field_copper, &transformer}) {
        if (arr->size() != total) {
            throw ValidationError("efficiency map: array size mismatch");
        }
    }
    if (feasible.size() != total) {
        throw ValidationError("efficiency map: mask size mismatch");
    }
    for (std::size_t i = 0; i < total; ++i) {
        if (feasible[i] && !(efficiency[i] > 0.0 && efficiency[i] <= 1.0)) {
            throw ValidationError(
                "efficiency map: feasible cell with efficiency outside (0, 1]");
        }
    }
}

void save_efficiency_map(const EfficiencyMap& map, const std::string& path) {
    json j;
    j["format"] = "efficiency_map/1";
    j["design"] = map.design_name;
    j["strategy"] = map.strategy;
    j["v_dc"] = map.v_dc;
    j["axis_order"] = "torque,speed";
    j["torque_axis"] = map.torque_axis;
    j["speed_axis"] = map.speed_axis;
    j["efficiency"] = map.efficiency;
    j["loss_total"] = map.loss_total;
    j["i_f_choice"] = map.i_f_choice;
    j["feasible"] = map.feasible;
    j["iron_stator"] = map.iron_stator;
    j["iron_rotor"] = map.iron_rotor;
    j["copper_dc"] = map.copper_dc;
    j["copper_ac"] = map.copper_ac;
    j["field_copper"] = map.field_copper;
    j["transformer"] = map.transformer;
    write_file_atomic(path, j.dump(1) + "\n");
}

EfficiencyMap load_efficiency_map(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!j.contains("format") || j["format"] != "efficiency_map/1") {
        throw ConfigError(path + ": not an efficiency map file");
    }
    EfficiencyMap map;
    try {
        map.design_name = j.at("design").get<std::string>();
        map.strategy = j.at("strategy").get<std::string>();
        map.v_dc = j.at("v_dc").get<double>();
        map.torque_axis = j.at("torque_axis").get<std::vector<double>>();
        map.speed_axis = j.at("speed_axis").get<std::vector<double>>();
        map.efficiency = j.at("efficiency").get<std::vector<double>>();
        map.loss_total = j.at("loss_total").get<std::vector<double>>();
        map.i_f_choice = j.at("i_f_choice").get<std::vector<double>>();
        map.feasible = j.at("feasible").get<std::vector<std::uint8_t>>();
        map.iron_stator = j.at("iron_stator").get<std::vector<double>>();
        map.iron_rotor = j.at("iron_rotor").get<std::vector<double>>();
        map.copper_dc = j.at("copper_dc").get<std::vector<double>>();
        map.copper_ac = j.at("copper_ac").get<std::vector<double>>();
        map.field_copper = j.at("field_copper").get<std::vector<double>>();
        map.transformer = j.at("transformer").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    map.validate();
    return map;
}

void export_efficiency_csv(const EfficiencyMap& map, const std::string& path) {
    std::string out =
        "torque_nm,speed_rpm,feasible,efficiency,i_f_a,loss_total_w,"
        "iron_stator_w,iron_rotor_w,copper_dc_w,copper_ac_w,field_copper_w,"
        "transformer_w\n";
    for (std::size_t t = 0; t < map.torque_axis.size(); ++t) {
        for (std::size_t s = 0; s < map.speed_axis.size(); ++s) {
            const std::size_t i = map.index(static_cast<int>(t),
                                            static_cast<int>(s));
            out += format_double(map.torque_axis[t]);
            out += ',';
            out += format_double(map.speed_axis[s]);
            out += ',';
            out += map.feasible[i] ? '1' : '0';
            for (double v : {map.efficiency[i], map.i_f_choice[i],
                             map.loss_total[i], map.iron_stator[i],
                             map.iron_rotor[i], map.copper_dc[i],
                             map.copper_ac[i], map.field_copper[i],
                             map.transformer[i]}) {
                out += ',';
                out += format_double(v);
            }
            out += '\n';
        }
    }
    write_file_atomic(path, out);
}

}  // namespace wfopt
