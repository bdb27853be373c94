#pragma once

#include <string>

#include "wfopt/machine.hpp"
#include "wfopt/mec.hpp"

namespace wfopt {

// Per-mechanism losses at one operating point. total() is the exact sum of
// the stored fields so energy bookkeeping closes to the last bit.
struct LossBreakdown {
    double iron_stator = 0.0;
    double iron_rotor = 0.0;
    double copper_dc = 0.0;
    double copper_ac = 0.0;
    double field_copper = 0.0;
    double transformer = 0.0;
    double inverter = 0.0;
    double gearbox = 0.0;
    double pwm_correction_applied = 1.0;

    [[nodiscard]] double total() const {
        return iron_stator + iron_rotor + copper_dc + copper_ac + field_copper +
               transformer + inverter + gearbox;
    }
    [[nodiscard]] double machine_total() const {
        return iron_stator + iron_rotor + copper_dc + copper_ac + field_copper +
               transformer;
    }
};

struct LossModelParams {
    double pwm_factor = 1.05;  // multiplies iron components (PWM ripple flux)
    double transformer_efficiency = 0.92;
    double winding_temp = 120.0;  // degC, declared evaluation temperature
};

// Machine-side components only (iron, stator copper, field copper and its
// rotating-transformer feed). Inverter and gearbox are added by their own
// operations. Throws Infeasible when the field winding demands more than
// ratings.max_field_power delivered through the rotating transformer.
//
// Iron model: stator tooth and yoke at the fundamental electrical frequency
// using the mapped region flux densities; the rotor carries DC flux, so only
// the slot-passing ripple (rotor_ripple_fraction * B_rotor at
// slot_count * f_mech) dissipates there.
LossBreakdown machine_losses(const MachineDesign& design,
                             const MachineGeometry& geo,
                             const FluxLinkageMap& map, double i_d, double i_q,
                             double i_f, double speed_mech,
                             const LossModelParams& params = {});

LossBreakdown machine_losses(const MachineDesign& design,
                             const FluxLinkageMap& map, double i_d, double i_q,
                             double i_f, double speed_mech,
                             const LossModelParams& params = {});

struct DeviceParams {
    std::string name;
    double v_on = 0.0;   // V, conduction knee
    double r_on = 0.0;   // ohm, slope resistance per switch
    double e_on = 0.0;   // J at (i_ref, v_ref)
    double e_off = 0.0;  // J
    double e_rr = 0.0;   // J, reverse recovery
    double i_ref = 1.0;  // A rms scaling anchor
    double v_ref = 1.0;  // V
    double max_current = 0.0;  // A rms, 0 = unlimited

    void validate() const;
};

// Conduction: 3*(v_on*I_avg + r_on*I_rms^2) with I_avg = 2*sqrt(2)/pi * I_rms
// (rectified-sine average). Switching: f_sw*(e_on+e_off+e_rr)*(i/i_ref)*(v/v_ref).
double inverter_losses(double i_rms, double v_dc, double f_sw,
                       const DeviceParams& device);

struct GearParams {
    std::string name;
    double ratio = 1.0;  // total speed reduction, machine to wheel
    int stages = 1;
    double stage_efficiency = 0.99;
    double drag_coeff = 0.0;  // N*m*s/rad equivalent, per stage, W per (rad/s)

    void validate() const;
};

// Per stage: (1 - eta)*|P_through| + drag*stage_input_speed. Through power is
// not cascaded (losses are small); stage input speeds follow the per-stage
// ratio ratio^(1/stages).
double gearbox_loss(double input_torque, double input_speed,
                    const GearParams& gear);

DeviceParams load_device_file(const std::string& path);
GearParams load_gear_file(const std::string& path);

}  // namespace wfopt
