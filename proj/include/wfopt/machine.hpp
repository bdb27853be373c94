#pragma once

#include <string>

#include "wfopt/material.hpp"

namespace wfopt {

enum class Topology { wfsm, pmsm };
enum class ToothTip { open_slot, semi_closed };

// Electromagnetic ratings and converter-side limits for one machine.
struct MachineRatings {
    double peak_torque = 0.0;         // N*m
    double peak_power = 0.0;          // W
    double rated_voltage = 0.0;       // V DC
    double max_voltage = 0.0;         // V DC absolute ceiling
    double max_stator_current = 0.0;  // A rms (machine limit)
    double max_field_current = 0.0;   // A (0 for pmsm)
    double max_field_power = 8200.0;  // W, rotating-transformer cap

    void validate(Topology topology) const;
};

// Parametric radial-flux geometry, winding and material assignment.
// This is the optimizer genome; geometry quantities derive from it.
struct MachineDesign {
    std::string name;
    Topology topology = Topology::wfsm;
    int pole_pairs = 4;
    int slot_count = 48;
    double stator_outer_diameter = 0.237;  // m
    double airgap_diameter = 0.165;        // m, stator bore
    double airgap_length = 0.8e-3;         // m
    double active_length = 0.133;          // m
    double slot_width = 4.8e-3;            // m
    double slot_depth = 19e-3;             // m
    double stator_yoke_width = 16e-3;      // m
    ToothTip tooth_tip = ToothTip::semi_closed;
    int turns_per_phase = 32;              // equivalent series turns
    double rotor_pole_width = 28e-3;       // m
    double rotor_yoke_width = 18e-3;       // m

    // wfsm excitation
    int field_turns = 85;                  // turns per pole
    double field_resistance_20c = 2.8;     // ohm, whole winding

    // pmsm excitation
    double magnet_remanence = 0.0;         // T
    double magnet_thickness = 0.0;         // m

    // model parameters (declared, configurable per design file)
    double winding_factor = 0.933;
    double pole_arc_fraction = 0.70;
    double q_gap_factor = 4.0;       // q-axis effective gap multiplier
    double slot_fill_factor = 0.45;
    double end_winding_factor = 1.4; // end length = factor * pole pitch
    double c_ac = 4.0e-7;            // k_ac = 1 + c_ac * f_elec^2
    double rotor_ripple_fraction = 0.05;  // slot-ripple B seen by the rotor

    std::string stator_material;
    std::string rotor_material;
    const MaterialSpec* stator_mat = nullptr;  // bound via bind_materials()
    const MaterialSpec* rotor_mat = nullptr;

    MachineRatings ratings;

    void bind_materials(const GradeLibrary& lib);
    // Throws ValidationError naming the violated constraint.
    void validate() const;
};

// Geometry quantities derived from a MachineDesign. Lengths in m, areas in
// m^2, masses in kg. Per-pole flux cross-sections feed the reluctance
// network; masses feed iron-loss and cost evaluation.
struct MachineGeometry {
    double slot_pitch = 0.0;
    double tooth_width = 0.0;
    double carter_factor = 1.0;
    double gap_d_effective = 0.0;   // effective d-axis airgap incl. Carter (+magnet)
    double gap_q_effective = 0.0;
    double pole_pitch_gap = 0.0;
    double gap_area = 0.0;          // per pole
    double tooth_area = 0.0;        // per pole, flux-carrying teeth
    double tooth_length = 0.0;
    double yoke_area = 0.0;         // both yoke halves in parallel
    double yoke_length = 0.0;
    double rotor_pole_area = 0.0;   // per pole
    double rotor_pole_length = 0.0;
    double rotor_yoke_area = 0.0;
    double rotor_yoke_length = 0.0;
    double shaft_radius = 0.0;

    double stator_tooth_mass = 0.0;
    double stator_yoke_mass = 0.0;
    double rotor_pole_mass = 0.0;
    double rotor_yoke_mass = 0.0;
    double magnet_mass = 0.0;

    double slot_area = 0.0;
    double conductor_area = 0.0;
    double mean_turn_length = 0.0;
    double stator_resistance_20c = 0.0;  // ohm per phase
    double slot_leakage_permeance = 0.0; // per slot, mu0*lambda*L
    double leakage_inductance = 0.0;     // per phase, H

    double stator_core_mass() const { return stator_tooth_mass + stator_yoke_mass; }
    double rotor_core_mass() const { return rotor_pole_mass + rotor_yoke_mass; }
};

MachineGeometry derive_geometry(const MachineDesign& design);

// Winding temperature scaling for copper resistance.
inline double resistance_at(double r20, double temp_c) {
    return r20 * (1.0 + kCopperTempCoeff * (temp_c - 20.0));
}

MachineDesign load_design_file(const std::string& path, const GradeLibrary& lib);

}  // namespace wfopt
