#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wfopt/losses.hpp"
#include "wfopt/machine.hpp"
#include "wfopt/mec.hpp"

namespace wfopt {

enum class ControlStrategy { mtpl, mtpa };

// Scan densities match the brute-force validation grid: at high speed the
// voltage-feasible angle window is narrower than a coarse grid step, and the
// loss-vs-field-current landscape has distinct basins, so sparser scans
// either report spurious infeasibility or settle in the wrong basin.
struct SolverOptions {
    int n_if = 33;      // grid points over [0, field cap]
    int n_angle = 101;  // current angle points over [0, pi]
    int n_mag = 101;    // magnitude scan points for torque bracketing
    int refine_rounds = 3;  // pattern-search step halvings
    double torque_tol_abs = 0.1;   // N*m
    double torque_tol_rel = 1e-3;  // of |T_req|
    double modulation_limit = kModulationLimit;
    LossModelParams loss;
};

// One solved operating point. electrical_input_power is computed as
// shaft_power + losses.total() so the energy balance is an identity.
struct ControlSolution {
    double i_d = 0.0;
    double i_q = 0.0;
    double i_f = 0.0;
    double v_d = 0.0;
    double v_q = 0.0;
    double torque_achieved = 0.0;
    LossBreakdown losses;
    double shaft_power = 0.0;
    double electrical_input_power = 0.0;
    double efficiency = 0.0;  // 0 when shaft power is zero (undefined)
};

// Minimum-total-loss operating point delivering T_req at the given speed
// under current, voltage and field limits. Deterministic: grid search over
// (i_f, current angle) with per-ray torque bisection on magnitude, then
// pattern-search refinement; ties break toward smaller i_f, then smaller
// magnitude. Regeneration (T_req < 0) is solved by symmetry with i_q
// mirrored. Throws Infeasible carrying the maximum achievable torque.
ControlSolution mtpl_solve(const MachineDesign& design, const FluxLinkageMap& map,
                           double t_req, double speed_rpm, double v_dc,
                           const SolverOptions& opts = {});

// Same search with the stator current magnitude as the objective.
ControlSolution mtpa_solve(const MachineDesign& design, const FluxLinkageMap& map,
                           double t_req, double speed_rpm, double v_dc,
                           const SolverOptions& opts = {});

ControlSolution solve_operating_point(const MachineDesign& design,
                                      const FluxLinkageMap& map,
                                      ControlStrategy strategy, double t_req,
                                      double speed_rpm, double v_dc,
                                      const SolverOptions& opts = {});

// Maximum torque over all feasible controls at one speed.
double peak_torque_at(const MachineDesign& design, const FluxLinkageMap& map,
                      double speed_rpm, double v_dc,
                      const SolverOptions& opts = {});

struct PeakEnvelope {
    std::vector<double> speed_rpm;
    std::vector<double> torque;  // N*m
    std::vector<double> power;   // W, torque * mechanical speed
};

PeakEnvelope peak_envelope(const MachineDesign& design, const FluxLinkageMap& map,
                           double v_dc, const std::vector<double>& speed_axis_rpm,
                           const SolverOptions& opts = {});

// Dense (torque, speed) sweep of solved operating points. Cells where
// efficiency is undefined (zero torque or zero speed) or the solver reports
// infeasibility are masked out; infeasibility is data here, not an error.
struct EfficiencyMap {
    std::string design_name;
    std::string strategy;  // "mtpl" or "mtpa"
    double v_dc = 0.0;
    std::vector<double> torque_axis;  // N*m, nonnegative
    std::vector<double> speed_axis;   // rpm
    // Row-major over (torque, speed): index = t * speed_axis.size() + s.
    std::vector<double> efficiency;
    std::vector<double> loss_total;
    std::vector<double> i_f_choice;
    std::vector<std::uint8_t> feasible;
    std::vector<double> iron_stator, iron_rotor, copper_dc, copper_ac,
        field_copper, transformer;

    [[nodiscard]] std::size_t index(int t, int s) const {
        return static_cast<std::size_t>(t) * speed_axis.size() + s;
    }
    void validate() const;
};

EfficiencyMap build_efficiency_map(const MachineDesign& design,
                                   const FluxLinkageMap& map,
                                   ControlStrategy strategy,
                                   const std::vector<double>& torque_axis,
                                   const std::vector<double>& speed_axis_rpm,
                                   double v_dc, const SolverOptions& opts = {});

void save_efficiency_map(const EfficiencyMap& map, const std::string& path);
EfficiencyMap load_efficiency_map(const std::string& path);
void export_efficiency_csv(const EfficiencyMap& map, const std::string& path);

}  // namespace wfopt
