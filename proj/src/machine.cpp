#include "wfopt/machine.hpp"

#include <cmath>

#include "wfopt/textfile.hpp"

namespace wfopt {
namespace {

constexpr double kMagnetDensity = 7500.0;      // kg/m^3, sintered NdFeB
constexpr double kMagnetRecoilPermeability = 1.05;
constexpr double kShaftFraction = 0.30;        // shaft radius / rotor outer radius
constexpr double kSemiClosedOpeningFraction = 0.35;  // slot opening / slot width
constexpr double kSemiClosedTipPermeance = 0.15;     // extra leakage permeance coeff

void require(bool ok, const std::string& design, const std::string& what) {
    if (!ok) throw ValidationError("design '" + design + "': " + what);
}

}  // namespace

void MachineRatings::validate(Topology topology) const {
    if (peak_torque <= 0.0) throw ValidationError("ratings: peak_torque must be > 0");
    if (peak_power <= 0.0) throw ValidationError("ratings: peak_power must be > 0");
    if (rated_voltage <= 0.0) throw ValidationError("ratings: rated_voltage must be > 0");
    if (max_voltage < rated_voltage)
        throw ValidationError("ratings: max_voltage must be >= rated_voltage");
    if (max_stator_current <= 0.0)
        throw ValidationError("ratings: max_stator_current must be > 0");
    if (topology == Topology::wfsm) {
        if (max_field_current <= 0.0)
            throw ValidationError("ratings: max_field_current must be > 0 for wound-field machines");
        if (max_field_power <= 0.0)
            throw ValidationError("ratings: max_field_power must be > 0");
    }
}

void MachineDesign::bind_materials(const GradeLibrary& lib) {
    stator_mat = &lib.get(stator_material);
    rotor_mat = &lib.get(rotor_material);
}

void MachineDesign::validate() const {
    require(pole_pairs >= 1, name, "pole_pairs must be >= 1");
    require(slot_count >= 6 && slot_count % (3 * pole_pairs) == 0, name,
            "slot_count must be a positive multiple of 3*pole_pairs");
    require(stator_outer_diameter > 0.0, name, "stator_outer_diameter must be > 0");
    require(airgap_diameter > 0.0 && airgap_diameter < stator_outer_diameter, name,
            "airgap_diameter must be positive and smaller than stator_outer_diameter");
    require(airgap_length > 0.0, name, "airgap_length must be > 0");
    require(active_length > 0.0, name, "active_length must be > 0");
    require(slot_width > 0.0 && slot_depth > 0.0, name, "slot dimensions must be > 0");
    require(slot_width * slot_count < kPi * airgap_diameter, name,
            "total slot width must be less than the airgap circumference");
    require(stator_yoke_width > 0.0, name, "stator_yoke_width must be > 0");
    require(slot_depth + stator_yoke_width <
                0.5 * (stator_outer_diameter - airgap_diameter),
            name, "slot_depth + stator_yoke_width must fit inside the stator ring");
    require(turns_per_phase >= 1, name, "turns_per_phase must be >= 1");
    require(rotor_pole_width > 0.0 && rotor_yoke_width > 0.0, name,
            "rotor pole and yoke widths must be > 0");
    const double rotor_outer = 0.5 * airgap_diameter - airgap_length;
    require(rotor_outer > 0.0, name, "rotor outer radius must be > 0");
    const double pole_height =
        rotor_outer * (1.0 - kShaftFraction) - rotor_yoke_width;
    require(pole_height > 0.0, name,
            "rotor_yoke_width leaves no radial room for the pole body");
    require(rotor_pole_width < 2.0 * kPi * rotor_outer / (2.0 * pole_pairs), name,
            "rotor_pole_width must be smaller than the rotor pole pitch");
    require(winding_factor > 0.0 && winding_factor <= 1.0, name,
            "winding_factor must be in (0, 1]");
    require(pole_arc_fraction > 0.0 && pole_arc_fraction < 1.0, name,
            "pole_arc_fraction must be in (0, 1)");
    require(q_gap_factor > 0.0, name, "q_gap_factor must be > 0");
    require(slot_fill_factor > 0.0 && slot_fill_factor <= 0.8, name,
            "slot_fill_factor must be in (0, 0.8]");
    require(end_winding_factor > 0.0, name, "end_winding_factor must be > 0");
    require(c_ac >= 0.0, name, "c_ac must be >= 0");
    require(rotor_ripple_fraction >= 0.0 && rotor_ripple_fraction < 1.0, name,
            "rotor_ripple_fraction must be in [0, 1)");
    require(stator_mat != nullptr && rotor_mat != nullptr, name,
            "materials must be bound before validation");
    if (stator_mat->kind == MaterialKind::smc) {
        require(tooth_tip == ToothTip::open_slot, name,
                "SMC stators require open slots (compacted teeth carry no tips)");
    }
    if (topology == Topology::wfsm) {
        require(field_turns >= 1, name, "field_turns must be >= 1");
        require(field_resistance_20c > 0.0, name, "field_resistance_20c must be > 0");
        require(magnet_thickness == 0.0, name,
                "wound-field designs must not declare magnets");
    } else {
        require(magnet_remanence > 0.0, name, "magnet_remanence must be > 0");
        require(magnet_thickness > 0.0, name, "magnet_thickness must be > 0");
    }
    ratings.validate(topology);
}

MachineGeometry derive_geometry(const MachineDesign& d) {
    MachineGeometry g;
    const double bore_radius = 0.5 * d.airgap_diameter;
    const double rotor_outer = bore_radius - d.airgap_length;
    const int poles = 2 * d.pole_pairs;

    const StackProperties stator_stack =
        effective_stack_properties(*d.stator_mat, d.active_length);
    const StackProperties rotor_stack =
        effective_stack_properties(*d.rotor_mat, d.active_length);

    g.slot_pitch = kPi * d.airgap_diameter / d.slot_count;
    g.tooth_width = g.slot_pitch - d.slot_width;
    g.pole_pitch_gap = kPi * d.airgap_diameter / poles;

    const double opening = d.tooth_tip == ToothTip::open_slot
                               ? d.slot_width
                               : kSemiClosedOpeningFraction * d.slot_width;
    const double ratio = opening / d.airgap_length;
    const double gamma = ratio * ratio / (5.0 + ratio);
    g.carter_factor = g.slot_pitch / (g.slot_pitch - gamma * d.airgap_length);

    g.gap_d_effective = g.carter_factor * d.airgap_length;
    if (d.topology == Topology::pmsm) {
        // Magnet recoil behaves as additional airgap on the d axis.
        g.gap_d_effective += d.magnet_thickness / kMagnetRecoilPermeability;
    }
    // q_gap_factor > 1 models the inter-pole gap of a salient wound rotor
    // (L_d > L_q); < 1 models buried-magnet designs where the q path avoids
    // the magnet (L_q > L_d).
    g.gap_q_effective = d.q_gap_factor * g.gap_d_effective;

    g.gap_area = d.pole_arc_fraction * g.pole_pitch_gap * d.active_length;
    const double teeth_per_pole = static_cast<double>(d.slot_count) / poles;
    g.tooth_area = d.pole_arc_fraction * teeth_per_pole * g.tooth_width *
                   stator_stack.magnetic_length;
    g.tooth_length = d.slot_depth;

    // Yoke flux splits left/right behind each pole; the two half-yokes act in
    // parallel, equivalent to twice the section over one pole pitch of path.
    g.yoke_area = 2.0 * d.stator_yoke_width * stator_stack.magnetic_length;
    const double yoke_mean_radius =
        bore_radius + d.slot_depth + 0.5 * d.stator_yoke_width;
    g.yoke_length = kPi * yoke_mean_radius / d.pole_pairs;

    g.shaft_radius = kShaftFraction * rotor_outer;
    const double pole_height = rotor_outer - g.shaft_radius - d.rotor_yoke_width;
    g.rotor_pole_area = d.rotor_pole_width * rotor_stack.magnetic_length;
    g.rotor_pole_length = pole_height;
    g.rotor_yoke_area = 2.0 * d.rotor_yoke_width * rotor_stack.magnetic_length;
    const double rotor_yoke_mean_radius = g.shaft_radius + 0.5 * d.rotor_yoke_width;
    g.rotor_yoke_length = kPi * rotor_yoke_mean_radius / d.pole_pairs;

    const double rho_s = d.stator_mat->density;
    const double rho_r = d.rotor_mat->density;
    g.stator_tooth_mass = d.slot_count * g.tooth_width * d.slot_depth *
                          stator_stack.magnetic_length * rho_s;
    const double yoke_inner = bore_radius + d.slot_depth;
    const double yoke_outer = 0.5 * d.stator_outer_diameter;
    g.stator_yoke_mass = kPi * (yoke_outer * yoke_outer - yoke_inner * yoke_inner) *
                         stator_stack.magnetic_length * rho_s;
    g.rotor_pole_mass = poles * d.rotor_pole_width * pole_height *
                        rotor_stack.magnetic_length * rho_r;
    const double rotor_yoke_outer = g.shaft_radius + d.rotor_yoke_width;
    g.rotor_yoke_mass =
        kPi * (rotor_yoke_outer * rotor_yoke_outer - g.shaft_radius * g.shaft_radius) *
        rotor_stack.magnetic_length * rho_r;
    if (d.topology == Topology::pmsm) {
        const double pole_pitch_rotor = kPi * 2.0 * rotor_outer / poles;
        g.magnet_mass = poles * d.pole_arc_fraction * pole_pitch_rotor *
                        d.magnet_thickness * d.active_length * kMagnetDensity;
    }

    g.slot_area = d.slot_width * d.slot_depth;
    const double conductors_per_slot =
        6.0 * d.turns_per_phase / static_cast<double>(d.slot_count);
    g.conductor_area = d.slot_fill_factor * g.slot_area / conductors_per_slot;
    g.mean_turn_length =
        2.0 * (d.active_length + d.end_winding_factor * g.pole_pitch_gap);
    g.stator_resistance_20c = kCopperResistivity20C * d.turns_per_phase *
                              g.mean_turn_length / g.conductor_area;

    double lambda = d.slot_depth / (3.0 * d.slot_width);
    if (d.tooth_tip == ToothTip::semi_closed) lambda += kSemiClosedTipPermeance;
    g.slot_leakage_permeance = kMu0 * lambda * d.active_length;
    g.leakage_inductance = 12.0 * g.slot_leakage_permeance *
                           d.turns_per_phase * d.turns_per_phase / d.slot_count;
    return g;
}

namespace {

Topology parse_topology(const TextRecord& rec) {
    const std::string t = rec.get_string("topology");
    if (t == "wfsm") return Topology::wfsm;
    if (t == "pmsm") return Topology::pmsm;
    throw ConfigError(rec.origin() + ": unknown topology '" + t + "'");
}

ToothTip parse_tooth_tip(const TextRecord& rec) {
    const std::string t = rec.get_string("tooth_tip");
    if (t == "open_slot") return ToothTip::open_slot;
    if (t == "semi_closed") return ToothTip::semi_closed;
    throw ConfigError(rec.origin() + ": unknown tooth_tip '" + t + "'");
}

}  // namespace

MachineDesign load_design_file(const std::string& path, const GradeLibrary& lib) {
    const TextRecord rec = TextRecord::parse_file(path);
    MachineDesign d;
    d.name = rec.get_string("name");
    d.topology = parse_topology(rec);
    d.pole_pairs = rec.get_int("pole_pairs");
    d.slot_count = rec.get_int("slot_count");
    d.stator_outer_diameter = rec.get_double("stator_outer_diameter");
    d.airgap_diameter = rec.get_double("airgap_diameter");
    d.airgap_length = rec.get_double("airgap_length");
    d.active_length = rec.get_double("active_length");
    d.slot_width = rec.get_double("slot_width");
    d.slot_depth = rec.get_double("slot_depth");
    d.stator_yoke_width = rec.get_double("stator_yoke_width");
    d.tooth_tip = parse_tooth_tip(rec);
    d.turns_per_phase = rec.get_int("turns_per_phase");
    d.rotor_pole_width = rec.get_double("rotor_pole_width");
    d.rotor_yoke_width = rec.get_double("rotor_yoke_width");
    if (d.topology == Topology::wfsm) {
        d.field_turns = rec.get_int("field_turns");
        d.field_resistance_20c = rec.get_double("field_resistance_20c");
        d.magnet_remanence = 0.0;
        d.magnet_thickness = 0.0;
    } else {
        d.field_turns = 0;
        d.field_resistance_20c = 0.0;
        d.magnet_remanence = rec.get_double("magnet_remanence");
        d.magnet_thickness = rec.get_double("magnet_thickness");
    }
    d.winding_factor = rec.get_double_or("winding_factor", d.winding_factor);
    d.pole_arc_fraction = rec.get_double_or("pole_arc_fraction", d.pole_arc_fraction);
    d.q_gap_factor = rec.get_double("q_gap_factor");
    d.slot_fill_factor = rec.get_double_or("slot_fill_factor", d.slot_fill_factor);
    d.end_winding_factor =
        rec.get_double_or("end_winding_factor", d.end_winding_factor);
    d.c_ac = rec.get_double_or("c_ac", d.c_ac);
    d.rotor_ripple_fraction =
        rec.get_double_or("rotor_ripple_fraction", d.rotor_ripple_fraction);
    d.stator_material = rec.get_string("stator_material");
    d.rotor_material = rec.get_string("rotor_material");

    d.ratings.peak_torque = rec.get_double("rated_peak_torque");
    d.ratings.peak_power = rec.get_double("rated_peak_power");
    d.ratings.rated_voltage = rec.get_double("rated_voltage");
    d.ratings.max_voltage = rec.get_double("max_voltage");
    d.ratings.max_stator_current = rec.get_double("max_stator_current");
    d.ratings.max_field_current = rec.get_double_or("max_field_current", 0.0);
    d.ratings.max_field_power =
        rec.get_double_or("max_field_power", d.ratings.max_field_power);

    d.bind_materials(lib);
    d.validate();
    return d;
}

}  // namespace wfopt
