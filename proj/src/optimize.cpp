#include "wfopt/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "wfopt/textfile.hpp"

namespace wfopt {

namespace {

double required_dc_voltage(const ControlSolution& s, double modulation_limit) {
    return std::sqrt(3.0) * std::hypot(s.v_d, s.v_q) / modulation_limit;
}

std::tuple<double, double, double, int> variable_key(const DesignVariables& v) {
    return {v.slot_width, v.slot_depth, v.stator_yoke_width, v.turns_per_phase};
}

// Measured quantities the constraint table can reference by name.
struct ScoreValues {
    double op1_torque = 0.0;
    double op1_efficiency = 0.0;
    double op2_torque = 0.0;
    double op2_efficiency = 0.0;
    double peak_torque = 0.0;
    double peak_power = 0.0;
    double dc_voltage = 0.0;
};

double named_value(const ScoreValues& v, const std::string& name) {
    if (name == "op1_torque") return v.op1_torque;
    if (name == "op1_efficiency") return v.op1_efficiency;
    if (name == "op2_torque") return v.op2_torque;
    if (name == "op2_efficiency") return v.op2_efficiency;
    if (name == "peak_torque") return v.peak_torque;
    if (name == "peak_power") return v.peak_power;
    if (name == "dc_voltage") return v.dc_voltage;
    throw ConfigError("unknown constraint quantity '" + name + "'");
}

// Delivered torque, operating efficiency and the DC voltage the point
// actually needs. When the request exceeds the machine's capability the
// achievable torque is reported and efficiency is probed just inside it.
void solve_scoring_point(const MachineDesign& design, const FluxLinkageMap& map,
                         double t_req, double speed_rpm, double v_dc,
                         const SolverOptions& opts, double& torque_out,
                         double& eff_out, double& vdc_need) {
    try {
        ControlSolution s = mtpl_solve(design, map, t_req, speed_rpm, v_dc, opts);
        torque_out = s.torque_achieved;
        eff_out = s.efficiency;
        vdc_need = required_dc_voltage(s, opts.modulation_limit);
        return;
    } catch (const Infeasible& e) {
        torque_out = std::max(0.0, e.achievable_value);
    }
    eff_out = 0.0;
    vdc_need = v_dc;
    if (torque_out <= 1e-6) return;
    try {
        ControlSolution s =
            mtpl_solve(design, map, 0.98 * torque_out, speed_rpm, v_dc, opts);
        eff_out = s.efficiency;
        vdc_need = required_dc_voltage(s, opts.modulation_limit);
    } catch (const Infeasible&) {
        // shortfall already captured via torque_out
    }
}

void score_candidate(EvaluatedCandidate& out, const MachineDesign& design,
                     const FluxLinkageMap& map, const ConstraintSpec& spec,
                     const OperatingPoints& pts, double v_dc,
                     const SolverOptions& opts) {
    const MachineGeometry geo = derive_geometry(design);
    out.stator_core_mass = geo.stator_core_mass();
    out.rotor_core_mass = geo.rotor_core_mass();
    out.magnet_mass = geo.magnet_mass;
    out.core_material_cost = out.stator_core_mass * design.stator_mat->cost +
                             out.rotor_core_mass * design.rotor_mat->cost;

    ScoreValues vals;
    double v1 = 0.0, v2 = 0.0;
    solve_scoring_point(design, map, pts.op1_torque, pts.op1_speed_rpm, v_dc,
                        opts, vals.op1_torque, vals.op1_efficiency, v1);
    solve_scoring_point(design, map, pts.op2_torque, pts.op2_speed_rpm, v_dc,
                        opts, vals.op2_torque, vals.op2_efficiency, v2);
    vals.peak_torque =
        peak_torque_at(design, map, pts.peak_torque_speed_rpm, v_dc, opts);
    const double w_pk = rpm_to_rad_s(pts.peak_power_speed_rpm);
    vals.peak_power =
        peak_torque_at(design, map, pts.peak_power_speed_rpm, v_dc, opts) * w_pk;
    vals.dc_voltage = std::max(v1, v2);

    out.op1_efficiency = vals.op1_efficiency;
    out.op2_efficiency = vals.op2_efficiency;
    out.peak_torque = vals.peak_torque;
    out.peak_power = vals.peak_power;
    out.required_dc_voltage = vals.dc_voltage;

    out.constraint_values.clear();
    double penalty = 0.0;
    for (const auto& item : spec.items) {
        const double value = named_value(vals, item.name);
        out.constraint_values.emplace_back(item.name, value);
        if (item.kind == ConstraintKind::lower_bound && value < item.threshold) {
            penalty += item.weight * (item.threshold - value) / item.threshold;
        } else if (item.kind == ConstraintKind::upper_bound &&
                   value > item.threshold) {
            penalty += item.weight * (value - item.threshold) / item.threshold;
        }
    }
    out.penalty = penalty;
}

std::vector<double> genome_lower(const DesignBounds& b) {
    std::vector<double> lo{b.slot_width_min, b.slot_depth_min, b.yoke_width_min};
    if (b.optimize_turns) lo.push_back(static_cast<double>(b.turns_min));
    return lo;
}

std::vector<double> genome_upper(const DesignBounds& b) {
    std::vector<double> hi{b.slot_width_max, b.slot_depth_max, b.yoke_width_max};
    if (b.optimize_turns) hi.push_back(static_cast<double>(b.turns_max));
    return hi;
}

DesignVariables genome_to_vars(const std::vector<double>& x,
                               const DesignBounds& b) {
    DesignVariables v;
    v.slot_width = x[0];
    v.slot_depth = x[1];
    v.stator_yoke_width = x[2];
    if (b.optimize_turns)
        v.turns_per_phase = static_cast<int>(std::lround(x[3]));
    return v;
}

}  // namespace

void DesignBounds::validate() const {
    auto check = [](double lo, double hi, const char* what) {
        if (!(lo > 0.0) || !(hi > lo))
            throw ValidationError(std::string("design bounds: bad range for ") +
                                  what);
    };
    check(slot_width_min, slot_width_max, "slot_width");
    check(slot_depth_min, slot_depth_max, "slot_depth");
    check(yoke_width_min, yoke_width_max, "stator_yoke_width");
    if (optimize_turns && (turns_min < 1 || turns_max <= turns_min))
        throw ValidationError("design bounds: bad range for turns_per_phase");
}

void ConstraintSpec::validate() const {
    if (items.empty())
        throw ValidationError("constraint table: no entries");
    for (const auto& item : items) {
        if (item.name.empty())
            throw ValidationError("constraint table: unnamed entry");
        if (item.weight < 1.0 || item.weight > 10.0)
            throw ValidationError("constraint '" + item.name +
                                  "': weight must lie in [1, 10]");
        if (item.kind != ConstraintKind::maximize && !(item.threshold > 0.0))
            throw ValidationError("constraint '" + item.name +
                                  "': threshold must be positive");
    }
}

ConstraintSpec ConstraintSpec::benchmark() {
    ConstraintSpec spec;
    spec.items = {
        {"op1_torque", ConstraintKind::lower_bound, 145.0, 6.0},
        {"op1_efficiency", ConstraintKind::maximize, 0.0, 8.0},
        {"op2_torque", ConstraintKind::lower_bound, 40.0, 6.0},
        {"op2_efficiency", ConstraintKind::maximize, 0.0, 7.0},
        {"peak_torque", ConstraintKind::lower_bound, 550.0, 10.0},
        {"peak_power", ConstraintKind::lower_bound, 200e3, 8.0},
        {"dc_voltage", ConstraintKind::upper_bound, 625.0, 8.0},
    };
    return spec;
}

MachineDesign apply_variables(const MachineDesign& base,
                              const DesignVariables& vars) {
    MachineDesign design = base;
    design.slot_width = vars.slot_width;
    design.slot_depth = vars.slot_depth;
    design.stator_yoke_width = vars.stator_yoke_width;
    if (vars.turns_per_phase > 0) design.turns_per_phase = vars.turns_per_phase;
    return design;
}

EvaluatedCandidate evaluate_candidate(const OptimizationSetup& setup,
                                      const DesignVariables& vars) {
    EvaluatedCandidate out;
    out.vars = vars;
    const MachineDesign design = apply_variables(setup.base_design, vars);
    try {
        design.validate();
        const FluxLinkageMap map = build_flux_map(design, setup.search_grid);
        score_candidate(out, design, map, setup.constraints, setup.points,
                        setup.dc_link_voltage, setup.solver);
    } catch (const ValidationError& e) {
        out.failed = true;
        out.failure_reason = e.what();
    } catch (const SolverDivergence& e) {
        out.failed = true;
        out.failure_reason = e.what();
    }
    return out;
}

OptimizationResult optimize_run(const OptimizationSetup& setup) {
    setup.bounds.validate();
    setup.constraints.validate();

    const std::vector<double> lower = genome_lower(setup.bounds);
    const std::vector<double> upper = genome_upper(setup.bounds);

    GaEvaluate evaluate = [&setup](const std::vector<double>& x, double& f1,
                                   double& f2, double& penalty) {
        const EvaluatedCandidate cand =
            evaluate_candidate(setup, genome_to_vars(x, setup.bounds));
        f1 = cand.op1_efficiency;
        f2 = cand.op2_efficiency;
        penalty = cand.failed ? std::numeric_limits<double>::infinity()
                              : cand.penalty;
    };

    const GaResult ga = nsga2_run(evaluate, lower, upper, setup.ga, 0.0, 0.0);

    OptimizationResult result;
    result.hypervolume_history = ga.hypervolume_history;
    result.all_infeasible = ga.all_infeasible;
    for (const auto& ind : ga.archive) {
        result.archive.push_back(
            evaluate_candidate(setup, genome_to_vars(ind.x, setup.bounds)));
    }
    if (ga.all_infeasible && !ga.best_infeasible.x.empty()) {
        result.best_infeasible = evaluate_candidate(
            setup, genome_to_vars(ga.best_infeasible.x, setup.bounds));
    }
    return result;
}

EvaluatedCandidate reevaluate_full(const OptimizationSetup& setup,
                                   const CycleContext& ctx,
                                   const DesignVariables& vars) {
    EvaluatedCandidate out;
    out.vars = vars;
    const MachineDesign design = apply_variables(setup.base_design, vars);
    try {
        design.validate();
        const FluxLinkageMap map = build_flux_map(design, ctx.fine_grid);
        score_candidate(out, design, map, setup.constraints, setup.points,
                        setup.dc_link_voltage, setup.solver);

        EduSpec edu;
        edu.design = &design;
        edu.map = &map;
        edu.device = ctx.device;
        edu.gear = ctx.gear;
        edu.strategy = ctx.strategy;
        edu.v_dc = ctx.v_dc;
        edu.f_sw = ctx.f_sw;
        edu.solver = setup.solver;
        const auto trace = demand_trace(ctx.cycle, ctx.vehicle);
        const CycleResult cycle = run_cycle(trace, edu, ctx.vehicle, ctx.cycle.name);
        out.wltp_efficiency = cycle.edu_efficiency;
    } catch (const ValidationError& e) {
        out.failed = true;
        out.failure_reason = e.what();
    } catch (const SolverDivergence& e) {
        out.failed = true;
        out.failure_reason = e.what();
    } catch (const CycleError& e) {
        out.failed = true;
        out.failure_reason = e.what();
    }
    return out;
}

std::vector<std::size_t> pareto_front(
    const std::vector<EvaluatedCandidate>& candidates) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(candidates.size());
    for (const auto& c : candidates)
        pts.emplace_back(c.op1_efficiency, c.op2_efficiency);
    return nondominated_indices(pts);
}

void EconomicsParams::validate() const {
    if (!(value_per_pp_wltp >= 0.0) || !(value_per_nm >= 0.0) ||
        !(magnet_price >= 0.0))
        throw ValidationError("economics: values and prices must be nonnegative");
    if (!(wltp_reference > 0.0) || !(wltp_reference < 1.0))
        throw ValidationError("economics: wltp_reference must lie in (0, 1)");
    if (!(torque_reference > 0.0))
        throw ValidationError("economics: torque_reference must be positive");
}

EconomicsParams load_economics_file(const std::string& path) {
    const TextRecord rec = TextRecord::parse_file(path);
    EconomicsParams econ;
    econ.value_per_pp_wltp = rec.get_double("value_per_pp_wltp");
    econ.wltp_reference = rec.get_double("wltp_reference_efficiency");
    econ.value_per_nm = rec.get_double("value_per_nm");
    econ.torque_reference = rec.get_double("torque_reference_nm");
    econ.magnet_price = rec.get_double("magnet_price_per_kg");
    econ.production_adder = rec.get_double("production_adder");
    econ.validate();
    return econ;
}

double tbv_score(const EvaluatedCandidate& cand, const EconomicsParams& econ) {
    if (cand.failed || !std::isfinite(cand.wltp_efficiency))
        throw std::invalid_argument(
            "tbv_score: candidate has no cycle efficiency; run a full "
            "re-evaluation first");
    const double eff_gain_pp =
        (cand.wltp_efficiency - econ.wltp_reference) * 100.0;
    const double torque_margin =
        std::max(0.0, cand.peak_torque - econ.torque_reference);
    return econ.value_per_pp_wltp * eff_gain_pp +
           econ.value_per_nm * torque_margin - cand.core_material_cost -
           cand.magnet_mass * econ.magnet_price - econ.production_adder;
}

std::size_t select_best(const std::vector<EvaluatedCandidate>& front,
                        const EconomicsParams& econ) {
    bool found = false;
    std::size_t best = 0;
    double best_tbv = 0.0;
    for (std::size_t i = 0; i < front.size(); ++i) {
        const auto& cand = front[i];
        if (cand.failed || !std::isfinite(cand.wltp_efficiency)) continue;
        const double tbv = tbv_score(cand, econ);
        if (!found) {
            found = true;
            best = i;
            best_tbv = tbv;
            continue;
        }
        bool better = tbv > best_tbv;
        if (tbv == best_tbv) {
            const auto& inc = front[i];
            const auto& cur = front[best];
            if (inc.op2_efficiency != cur.op2_efficiency)
                better = inc.op2_efficiency > cur.op2_efficiency;
            else
                better = variable_key(inc.vars) < variable_key(cur.vars);
        }
        if (better) {
            best = i;
            best_tbv = tbv;
        }
    }
    if (!found)
        throw std::invalid_argument("select_best: no scoreable candidates");
    return best;
}

void write_candidates_csv(const std::vector<EvaluatedCandidate>& candidates,
                          const std::string& path) {
    std::ostringstream out;
    out << "slot_width_m,slot_depth_m,stator_yoke_width_m,turns_per_phase,"
           "op1_efficiency,op2_efficiency,peak_torque_nm,peak_power_w,"
           "required_dc_voltage_v,penalty,feasible,wltp_efficiency,tbv\n";
    for (const auto& c : candidates) {
        out << format_double(c.vars.slot_width) << ','
            << format_double(c.vars.slot_depth) << ','
            << format_double(c.vars.stator_yoke_width) << ','
            << c.vars.turns_per_phase << ','
            << format_double(c.op1_efficiency) << ','
            << format_double(c.op2_efficiency) << ','
            << format_double(c.peak_torque) << ','
            << format_double(c.peak_power) << ','
            << format_double(c.required_dc_voltage) << ','
            << format_double(c.penalty) << ',' << (c.feasible() ? 1 : 0) << ','
            << format_double(c.wltp_efficiency) << ',' << format_double(c.tbv)
            << '\n';
    }
    write_file_atomic(path, out.str());
}

}  // namespace wfopt
