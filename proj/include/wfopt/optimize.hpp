#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "wfopt/control.hpp"
#include "wfopt/ga.hpp"
#include "wfopt/machine.hpp"
#include "wfopt/powertrain.hpp"

namespace wfopt {

// Free stator variables layered over a base design. Everything else
// (rotor, materials, ratings) comes from the base.
struct DesignVariables {
    double slot_width = 0.0;         // m
    double slot_depth = 0.0;         // m
    double stator_yoke_width = 0.0;  // m
    int turns_per_phase = 0;         // 0 = keep the base design's turns
};

struct DesignBounds {
    double slot_width_min = 3.0e-3;
    double slot_width_max = 7.0e-3;
    double slot_depth_min = 12.0e-3;
    double slot_depth_max = 28.0e-3;
    double yoke_width_min = 10.0e-3;
    double yoke_width_max = 24.0e-3;
    bool optimize_turns = false;
    int turns_min = 24;
    int turns_max = 48;

    void validate() const;
    [[nodiscard]] int n_vars() const { return optimize_turns ? 4 : 3; }
};

enum class ConstraintKind { lower_bound, upper_bound, maximize };

struct Constraint {
    std::string name;
    ConstraintKind kind = ConstraintKind::lower_bound;
    double threshold = 0.0;  // ignored for maximize rows
    double weight = 1.0;     // 1..10
};

// Requirement table scored per candidate. Bound rows add
// weight * relative violation to the penalty; maximize rows are the search
// objectives and never contribute. Penalty 0 means every bound holds.
struct ConstraintSpec {
    std::vector<Constraint> items;

    void validate() const;
    // Traction-drive table: OP1 torque > 145 N*m (w6), OP1 efficiency
    // maximized (w8), OP2 torque > 40 N*m (w6), OP2 efficiency maximized
    // (w7), peak torque > 550 N*m (w10), peak power > 200 kW (w8),
    // required DC voltage < 625 V (w8).
    static ConstraintSpec benchmark();
};

// Scoring points. OP1 is a low-speed high-torque urban acceleration point,
// OP2 a mid-speed highway cruise point; speeds are declared here and
// configurable. Peak torque is checked where voltage cannot bind; peak
// power at a representative above-base speed.
struct OperatingPoints {
    double op1_torque = 145.0;  // N*m
    double op1_speed_rpm = 1500.0;
    double op2_torque = 40.0;  // N*m
    double op2_speed_rpm = 4000.0;
    double peak_torque_speed_rpm = 0.0;
    double peak_power_speed_rpm = 4000.0;
};

struct EvaluatedCandidate {
    DesignVariables vars;
    bool failed = false;  // invalid geometry or solver divergence
    std::string failure_reason;

    double op1_efficiency = 0.0;
    double op2_efficiency = 0.0;
    double peak_torque = 0.0;           // N*m
    double peak_power = 0.0;            // W
    double required_dc_voltage = 0.0;   // V, max over scoring points
    std::vector<std::pair<std::string, double>> constraint_values;
    double penalty = std::numeric_limits<double>::infinity();

    double stator_core_mass = 0.0;  // kg
    double rotor_core_mass = 0.0;   // kg
    double magnet_mass = 0.0;       // kg
    double core_material_cost = 0.0;

    // Filled by reevaluate_full / tbv scoring only.
    double wltp_efficiency = std::numeric_limits<double>::quiet_NaN();
    double tbv = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] bool feasible() const { return !failed && penalty == 0.0; }
};

struct OptimizationSetup {
    MachineDesign base_design;  // materials already bound
    DesignBounds bounds;
    ConstraintSpec constraints = ConstraintSpec::benchmark();
    OperatingPoints points;
    GaParams ga;
    GridSpec search_grid{9, 9, 5};  // coarse map used inside the GA
    SolverOptions solver;
    double dc_link_voltage = 625.0;
};

struct OptimizationResult {
    std::vector<EvaluatedCandidate> archive;  // nondominated feasible set
    std::vector<double> hypervolume_history;  // nondecreasing per generation
    bool all_infeasible = false;
    EvaluatedCandidate best_infeasible;  // meaningful when all_infeasible
};

MachineDesign apply_variables(const MachineDesign& base,
                              const DesignVariables& vars);

// One deterministic candidate evaluation on the coarse search grid: flux
// map, MTPL solves at OP1/OP2, peak torque and power, required DC voltage,
// penalty. Geometry or solver failures yield failed = true with infinite
// penalty instead of throwing.
EvaluatedCandidate evaluate_candidate(const OptimizationSetup& setup,
                                      const DesignVariables& vars);

// NSGA-II over (OP1 efficiency, OP2 efficiency) with the penalty as the
// constraint-domination measure. Fixed seed -> bit-identical result.
OptimizationResult optimize_run(const OptimizationSetup& setup);

// Cycle-level context for re-scoring archive members at full fidelity.
struct CycleContext {
    VehicleParams vehicle;
    DriveCycle cycle;
    DeviceParams device;
    GearParams gear;
    ControlStrategy strategy = ControlStrategy::mtpl;
    double v_dc = 800.0;
    double f_sw = 10e3;  // Hz
    GridSpec fine_grid;  // default full-resolution map
};

// Re-evaluates one candidate on the fine grid and runs the drive cycle to
// fill wltp_efficiency. Cycle failures mark the candidate failed.
EvaluatedCandidate reevaluate_full(const OptimizationSetup& setup,
                                   const CycleContext& ctx,
                                   const DesignVariables& vars);

// Nondominated subset under (maximize OP1 efficiency, maximize OP2
// efficiency); exact ties on both objectives are all kept.
std::vector<std::size_t> pareto_front(
    const std::vector<EvaluatedCandidate>& candidates);

struct EconomicsParams {
    double value_per_pp_wltp = 0.0;  // currency per WLTP percentage point
    double wltp_reference = 0.0;     // fraction
    double value_per_nm = 0.0;       // currency per N*m above the reference
    double torque_reference = 0.0;   // N*m
    double magnet_price = 0.0;       // currency per kg
    double production_adder = 0.0;   // flat per-design manufacturing delta

    void validate() const;
};

EconomicsParams load_economics_file(const std::string& path);

// Total business value: cycle-efficiency gain plus peak-torque headroom
// valued in currency, minus core material, magnet and production costs.
// Requires a candidate with a cycle efficiency (reevaluate_full).
double tbv_score(const EvaluatedCandidate& cand, const EconomicsParams& econ);

// Index of the highest-TBV candidate. Ties break toward higher OP2
// efficiency, then lexicographically smaller variables. Candidates without
// a cycle efficiency are skipped; throws if none is scoreable.
std::size_t select_best(const std::vector<EvaluatedCandidate>& front,
                        const EconomicsParams& econ);

void write_candidates_csv(const std::vector<EvaluatedCandidate>& candidates,
                          const std::string& path);

}  // namespace wfopt
