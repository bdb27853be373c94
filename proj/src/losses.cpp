#include "wfopt/losses.hpp"

#include <cmath>
#include <sstream>

#include "wfopt/textfile.hpp"

namespace wfopt {

LossBreakdown machine_losses(const MachineDesign& design,
                             const MachineGeometry& geo,
                             const FluxLinkageMap& map, double i_d, double i_q,
                             double i_f, double speed_mech,
                             const LossModelParams& params) {
    if (speed_mech < 0.0) {
        throw std::invalid_argument("machine_losses: speed must be >= 0");
    }
    LossBreakdown out;
    out.pwm_correction_applied = params.pwm_factor;

    const auto s = map.sample(i_d, i_q, i_f);
    const double f_elec = design.pole_pairs * speed_mech / (2.0 * kPi);

    double iron_stator =
        iron_loss_density(*design.stator_mat, s.b_tooth, f_elec) *
            geo.stator_tooth_mass +
        iron_loss_density(*design.stator_mat, s.b_yoke, f_elec) *
            geo.stator_yoke_mass;
    const double f_slot = design.slot_count * speed_mech / (2.0 * kPi);
    double iron_rotor =
        iron_loss_density(*design.rotor_mat,
                          design.rotor_ripple_fraction * s.b_rotor, f_slot) *
        geo.rotor_core_mass();
    out.iron_stator = params.pwm_factor * iron_stator;
    out.iron_rotor = params.pwm_factor * iron_rotor;

    const double i_rms = std::hypot(i_d, i_q) / std::sqrt(2.0);
    const double r_s = resistance_at(geo.stator_resistance_20c, params.winding_temp);
    out.copper_dc = 3.0 * i_rms * i_rms * r_s;
    const double k_ac = 1.0 + design.c_ac * f_elec * f_elec;
    out.copper_ac = out.copper_dc * (k_ac - 1.0);

    if (design.topology == Topology::wfsm && i_f != 0.0) {
        const double r_f = resistance_at(design.field_resistance_20c, params.winding_temp);
        out.field_copper = i_f * i_f * r_f;
        if (out.field_copper > design.ratings.max_field_power) {
            std::ostringstream msg;
            msg << "field winding demands " << out.field_copper
                << " W through the rotating transformer, above the "
                << design.ratings.max_field_power << " W cap";
            throw Infeasible(msg.str(), design.ratings.max_field_power);
        }
        out.transformer =
            out.field_copper * (1.0 / params.transformer_efficiency - 1.0);
    }
    return out;
}

LossBreakdown machine_losses(const MachineDesign& design,
                             const FluxLinkageMap& map, double i_d, double i_q,
                             double i_f, double speed_mech,
                             const LossModelParams& params) {
    return machine_losses(design, derive_geometry(design), map, i_d, i_q, i_f,
                          speed_mech, params);
}

void DeviceParams::validate() const {
    if (v_on < 0.0 || r_on < 0.0 || e_on < 0.0 || e_off < 0.0 || e_rr < 0.0) {
        throw ValidationError("device '" + name + "': coefficients must be >= 0");
    }
    if (i_ref <= 0.0 || v_ref <= 0.0) {
        throw ValidationError("device '" + name + "': i_ref and v_ref must be > 0");
    }
    if (max_current < 0.0) {
        throw ValidationError("device '" + name + "': max_current must be >= 0");
    }
}

double inverter_losses(double i_rms, double v_dc, double f_sw,
                       const DeviceParams& device) {
    if (i_rms < 0.0 || v_dc < 0.0 || f_sw < 0.0) {
        throw std::invalid_argument("inverter_losses: inputs must be >= 0");
    }
    const double i_avg = 2.0 * std::sqrt(2.0) / kPi * i_rms;
    const double conduction = 3.0 * (device.v_on * i_avg + device.r_on * i_rms * i_rms);
    const double switching = f_sw * (device.e_on + device.e_off + device.e_rr) *
                             (i_rms / device.i_ref) * (v_dc / device.v_ref);
    return conduction + switching;
}

void GearParams::validate() const {
    if (ratio <= 0.0) throw ValidationError("gear '" + name + "': ratio must be > 0");
    if (stages < 1) throw ValidationError("gear '" + name + "': stages must be >= 1");
    if (stage_efficiency <= 0.0 || stage_efficiency > 1.0) {
        throw ValidationError("gear '" + name + "': stage_efficiency must be in (0, 1]");
    }
    if (drag_coeff < 0.0) {
        throw ValidationError("gear '" + name + "': drag_coeff must be >= 0");
    }
}

double gearbox_loss(double input_torque, double input_speed,
                    const GearParams& gear) {
    if (input_speed < 0.0) {
        throw std::invalid_argument("gearbox_loss: speed must be >= 0");
    }
    const double p_through = std::abs(input_torque * input_speed);
    const double stage_ratio = std::pow(gear.ratio, 1.0 / gear.stages);
    double loss = 0.0;
    double speed = input_speed;
    for (int s = 0; s < gear.stages; ++s) {
        loss += (1.0 - gear.stage_efficiency) * p_through + gear.drag_coeff * speed;
        speed /= stage_ratio;
    }
    return loss;
}

DeviceParams load_device_file(const std::string& path) {
    const TextRecord rec = TextRecord::parse_file(path);
    DeviceParams d;
    d.name = rec.get_string("name");
    d.v_on = rec.get_double("v_on");
    d.r_on = rec.get_double("r_on");
    d.e_on = rec.get_double("e_on");
    d.e_off = rec.get_double("e_off");
    d.e_rr = rec.get_double("e_rr");
    d.i_ref = rec.get_double("i_ref");
    d.v_ref = rec.get_double("v_ref");
    d.max_current = rec.get_double_or("max_current", 0.0);
    d.validate();
    return d;
}

GearParams load_gear_file(const std::string& path) {
    const TextRecord rec = TextRecord::parse_file(path);
    GearParams g;
    g.name = rec.get_string("name");
    g.ratio = rec.get_double("ratio");
    g.stages = rec.get_int("stages");
    g.stage_efficiency = rec.get_double("stage_efficiency");
    g.drag_coeff = rec.get_double_or("drag_coeff", 0.0);
    g.validate();
    return g;
}

}  // namespace wfopt
