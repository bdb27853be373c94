#include "wfopt/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wfopt/textfile.hpp"

namespace wfopt {
namespace {

using json = nlohmann::ordered_json;

}  // namespace

void VehicleParams::validate() const {
    auto positive = [this](double v, const char* what) {
        if (!(v > 0.0)) {
            throw ValidationError("vehicle '" + name + "': " + what +
                                  " must be > 0");
        }
    };
    positive(mass, "mass");
    positive(drag_area_cda, "drag_area_cda");
    positive(rolling_coeff, "rolling_coeff");
    positive(wheel_radius, "wheel_radius");
    positive(gear_ratio, "gear_ratio");
    positive(air_density, "air_density");
    if (aux_power < 0.0) {
        throw ValidationError("vehicle '" + name + "': aux_power must be >= 0");
    }
    if (driveline != "rwd") {
        throw ValidationError("vehicle '" + name + "': unsupported driveline '" +
                              driveline + "'");
    }
    if (regen_fraction < 0.0 || regen_fraction > 1.0) {
        throw ValidationError("vehicle '" + name +
                              "': regen_fraction must be in [0, 1]");
    }
}

VehicleParams load_vehicle_file(const std::string& path) {
    const TextRecord rec = TextRecord::parse_file(path);
    VehicleParams v;
    v.name = rec.get_string("name");
    v.mass = rec.get_double("mass");
    v.drag_area_cda = rec.get_double("drag_area_cda");
    v.rolling_coeff = rec.get_double("rolling_coeff");
    v.wheel_radius = rec.get_double("wheel_radius");
    v.gear_ratio = rec.get_double("gear_ratio");
    v.driveline = rec.has("driveline") ? rec.get_string("driveline") : "rwd";
    v.aux_power = rec.get_double_or("aux_power", v.aux_power);
    v.air_density = rec.get_double_or("air_density", v.air_density);
    v.regen_fraction = rec.get_double_or("regen_fraction", v.regen_fraction);
    v.validate();
    return v;
}

void DriveCycle::validate() const {
    if (time_s.size() < 2) {
        throw ValidationError("cycle '" + name + "': needs at least 2 samples");
    }
    if (time_s.size() != speed_ms.size()) {
        throw ValidationError("cycle '" + name + "': time/speed length mismatch");
    }
    for (std::size_t i = 1; i < time_s.size(); ++i) {
        if (!(time_s[i] > time_s[i - 1])) {
            throw ValidationError("cycle '" + name +
                                  "': time must be strictly increasing (sample " +
                                  std::to_string(i) + ")");
        }
    }
    for (std::size_t i = 0; i < speed_ms.size(); ++i) {
        if (speed_ms[i] < 0.0) {
            throw ValidationError("cycle '" + name + "': negative speed (sample " +
                                  std::to_string(i) + ")");
        }
    }
}

DriveCycle load_cycle_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open cycle file: " + path);
    DriveCycle cycle;
    {
        auto slash = path.find_last_of('/');
        cycle.name = slash == std::string::npos ? path : path.substr(slash + 1);
    }
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time_s,speed_kmh") {
        throw ConfigError(path + ": expected header 'time_s,speed_kmh', got '" +
                          line + "'");
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'time,speed'");
        }
        try {
            std::size_t used = 0;
            const std::string ts = line.substr(0, comma);
            const std::string vs = line.substr(comma + 1);
            const double t = std::stod(ts, &used);
            if (used != ts.size()) throw std::invalid_argument(ts);
            const double v = std::stod(vs, &used);
            if (used != vs.size()) throw std::invalid_argument(vs);
            cycle.time_s.push_back(t);
            cycle.speed_ms.push_back(v / 3.6);
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": malformed number");
        }
    }
    cycle.validate();
    return cycle;
}

std::vector<DemandPoint> demand_trace(const DriveCycle& cycle,
                                      const VehicleParams& vehicle) {
    cycle.validate();
    vehicle.validate();
    std::vector<DemandPoint> trace;
    trace.reserve(cycle.time_s.size() - 1);
    for (std::size_t i = 0; i + 1 < cycle.time_s.size(); ++i) {
        const double dt = cycle.time_s[i + 1] - cycle.time_s[i];
        const double v0 = cycle.speed_ms[i];
        const double v1 = cycle.speed_ms[i + 1];
        const double v_mid = 0.5 * (v0 + v1);
        const double accel = (v1 - v0) / dt;
        double force = vehicle.mass * accel +
                       0.5 * vehicle.air_density * vehicle.drag_area_cda * v_mid * v_mid;
        if (v_mid > 0.0) {
            force += vehicle.mass * kGravity * vehicle.rolling_coeff;
        }
        DemandPoint p;
        p.time = cycle.time_s[i];
        p.duration = dt;
        p.speed = v_mid * vehicle.gear_ratio / vehicle.wheel_radius;
        p.torque = force * vehicle.wheel_radius / vehicle.gear_ratio;
        if (p.torque < 0.0) p.torque *= vehicle.regen_fraction;
        trace.push_back(p);
    }
    return trace;
}

namespace {

struct EduPoint {
    ControlSolution sol;
    double gear_loss = 0.0;
    double inverter_loss = 0.0;
    double wheel_power = 0.0;
    double battery_power = 0.0;
    LossBreakdown losses;  // sol.losses plus inverter and gearbox
};

// Solve the EDU at one machine-shaft demand point (ideal torque before
// gearbox loss). The machine must additionally cover the gearbox loss, so the
// solved torque is demand + loss/speed. Battery power is assembled as
// wheel_power + losses.total() so the step energy balance is an identity.
EduPoint solve_edu_point(const EduSpec& edu, double torque_ideal, double speed) {
    EduPoint pt;
    pt.gear_loss = gearbox_loss(torque_ideal, speed, edu.gear);
    double torque_machine = torque_ideal;
    if (speed > 0.0) torque_machine += pt.gear_loss / speed;
    const double speed_rpm = rad_s_to_rpm(speed);
    pt.sol = solve_operating_point(*edu.design, *edu.map, edu.strategy,
                                   torque_machine, speed_rpm, edu.v_dc,
                                   edu.solver);
    const double i_rms = std::hypot(pt.sol.i_d, pt.sol.i_q) / std::sqrt(2.0);
    pt.inverter_loss = inverter_losses(i_rms, edu.v_dc, edu.f_sw, edu.device);
    pt.losses = pt.sol.losses;
    pt.losses.inverter = pt.inverter_loss;
    pt.losses.gearbox = pt.gear_loss;
    pt.wheel_power = pt.sol.shaft_power - pt.gear_loss;
    pt.battery_power = pt.wheel_power + pt.losses.total();
    return pt;
}

}  // namespace

CycleResult run_cycle(const std::vector<DemandPoint>& trace, const EduSpec& edu,
                      const VehicleParams& vehicle,
                      const std::string& cycle_name) {
    CycleResult res;
    res.design_name = edu.design->name;
    res.cycle_name = cycle_name;
    res.steps.reserve(trace.size());

    for (const DemandPoint& dp : trace) {
        CycleStep step;
        step.time = dp.time;
        step.duration = dp.duration;
        step.speed_rpm = rad_s_to_rpm(dp.speed);
        step.torque_demand = dp.torque;

        if (dp.speed <= 0.0) {
            res.steps.push_back(step);
            continue;
        }

        double torque_try = dp.torque;
        EduPoint pt;
        bool solved = false;
        for (int attempt = 0; attempt < 4 && !solved; ++attempt) {
            try {
                pt = solve_edu_point(edu, torque_try, dp.speed);
                solved = true;
            } catch (const Infeasible& e) {
                step.clipped = true;
                const double gl = gearbox_loss(torque_try, dp.speed, edu.gear);
                const double machine_req = std::abs(torque_try + gl / dp.speed);
                const double cap = 0.995 * std::abs(e.achievable_value);
                double scale = machine_req > 0.0 ? cap / machine_req : 0.0;
                scale = std::min(scale, 0.995);
                torque_try *= scale;
                if (std::abs(torque_try) < 1e-6) break;
            }
        }
        if (!solved) {
            // Even the clipped retries failed: drop the step entirely.
            res.clipped_energy += std::abs(dp.torque * dp.speed) * dp.duration;
            res.steps.push_back(step);
            continue;
        }
        if (step.clipped) {
            res.clipped_energy +=
                std::abs((dp.torque - torque_try) * dp.speed) * dp.duration;
        }
        step.torque_demand = dp.torque;
        step.torque_achieved = pt.sol.torque_achieved;
        step.wheel_power = pt.wheel_power;
        step.battery_power = pt.battery_power;
        step.i_d = pt.sol.i_d;
        step.i_q = pt.sol.i_q;
        step.i_f = pt.sol.i_f;
        step.losses = pt.losses;
        res.steps.push_back(step);
    }

    for (const CycleStep& step : res.steps) {
        const double e_wheel = step.wheel_power * step.duration;
        if (e_wheel > 0.0) {
            res.traction_energy += e_wheel;
        } else {
            res.regen_energy += -e_wheel;
        }
        res.net_wheel_energy += e_wheel;
        res.loss_energy.iron_stator += step.losses.iron_stator * step.duration;
        res.loss_energy.iron_rotor += step.losses.iron_rotor * step.duration;
        res.loss_energy.copper_dc += step.losses.copper_dc * step.duration;
        res.loss_energy.copper_ac += step.losses.copper_ac * step.duration;
        res.loss_energy.field_copper += step.losses.field_copper * step.duration;
        res.loss_energy.transformer += step.losses.transformer * step.duration;
        res.loss_energy.inverter += step.losses.inverter * step.duration;
        res.loss_energy.gearbox += step.losses.gearbox * step.duration;
        res.aux_energy += vehicle.aux_power * step.duration;
    }
    res.loss_energy.pwm_correction_applied = edu.solver.loss.pwm_factor;
    res.battery_energy = res.net_wheel_energy + res.loss_energy.total();
    if (res.battery_energy != 0.0) {
        res.edu_efficiency = res.net_wheel_energy / res.battery_energy;
    }
    if (res.traction_energy > 0.0) {
        res.clipped_fraction = res.clipped_energy / res.traction_energy;
        if (res.clipped_fraction > 0.01) {
            std::ostringstream msg;
            msg << "cycle '" << cycle_name << "' on " << edu.design->name << ": "
                << res.clipped_fraction * 100.0
                << "% of traction energy fell outside the solvable envelope";
            throw CycleError(msg.str());
        }
    }
    return res;
}

EnergyHistogram energy_histogram(const CycleResult& result, int torque_bins,
                                 int speed_bins, HistogramMode mode) {
    if (torque_bins < 1 || speed_bins < 1) {
        throw ConfigError("energy histogram needs at least one bin per axis");
    }
    double t_max = 0.0;
    double s_max = 0.0;
    for (const CycleStep& step : result.steps) {
        t_max = std::max(t_max, std::abs(step.torque_achieved));
        s_max = std::max(s_max, step.speed_rpm);
    }
    if (t_max <= 0.0) t_max = 1.0;
    if (s_max <= 0.0) s_max = 1.0;

    EnergyHistogram h;
    h.torque_edges.resize(torque_bins + 1);
    h.speed_edges.resize(speed_bins + 1);
    for (int i = 0; i <= torque_bins; ++i) {
        h.torque_edges[i] = t_max * i / torque_bins;
    }
    for (int i = 0; i <= speed_bins; ++i) {
        h.speed_edges[i] = s_max * i / speed_bins;
    }
    h.energy.assign(static_cast<std::size_t>(torque_bins) * speed_bins, 0.0);

    for (const CycleStep& step : result.steps) {
        const double e = mode == HistogramMode::throughput
                             ? std::abs(step.wheel_power) * step.duration
                             : step.losses.total() * step.duration;
        if (e == 0.0) continue;
        int tb = static_cast<int>(std::abs(step.torque_achieved) / t_max *
                                  torque_bins);
        int sb = static_cast<int>(step.speed_rpm / s_max * speed_bins);
        tb = std::min(tb, torque_bins - 1);
        sb = std::min(sb, speed_bins - 1);
        h.energy[h.index(tb, sb)] += e;
        h.total_energy += e;
    }

    double peak = 0.0;
    for (double e : h.energy) peak = std::max(peak, e);
    h.normalized.resize(h.energy.size());
    for (std::size_t i = 0; i < h.energy.size(); ++i) {
        h.normalized[i] = peak > 0.0 ? h.energy[i] / peak : 0.0;
    }

    double best[2] = {-1.0, -1.0};
    for (int t = 0; t < torque_bins; ++t) {
        for (int s = 0; s < speed_bins; ++s) {
            const double e = h.energy[h.index(t, s)];
            if (e > best[0]) {
                best[1] = best[0];
                h.hot_torque[1] = h.hot_torque[0];
                h.hot_speed[1] = h.hot_speed[0];
                best[0] = e;
                h.hot_torque[0] = t;
                h.hot_speed[0] = s;
            } else if (e > best[1]) {
                best[1] = e;
                h.hot_torque[1] = t;
                h.hot_speed[1] = s;
            }
        }
    }
    return h;
}

double cruise_efficiency(double v_kmh, const VehicleParams& vehicle,
                         const EduSpec& edu) {
    if (v_kmh <= 0.0) {
        throw Infeasible("cruise efficiency undefined at zero speed", 0.0);
    }
    const double v = v_kmh / 3.6;
    const double force =
        0.5 * vehicle.air_density * vehicle.drag_area_cda * v * v +
        vehicle.mass * kGravity * vehicle.rolling_coeff;
    const double torque = force * vehicle.wheel_radius / vehicle.gear_ratio;
    const double speed = v * vehicle.gear_ratio / vehicle.wheel_radius;
    const EduPoint pt = solve_edu_point(edu, torque, speed);
    return pt.wheel_power / pt.battery_power;
}

void export_cycle_summary_json(const CycleResult& result, const std::string& path,
                               const std::string& config_hash) {
    json j;
    j["format"] = "cycle_summary/1";
    j["config_hash"] = config_hash;
    j["design"] = result.design_name;
    j["cycle"] = result.cycle_name;
    j["traction_energy_j"] = result.traction_energy;
    j["regen_energy_j"] = result.regen_energy;
    j["net_wheel_energy_j"] = result.net_wheel_energy;
    j["battery_energy_j"] = result.battery_energy;
    j["aux_energy_j"] = result.aux_energy;
    j["edu_efficiency"] = result.edu_efficiency;
    j["clipped_fraction"] = result.clipped_fraction;
    json losses;
    losses["iron_stator_j"] = result.loss_energy.iron_stator;
    losses["iron_rotor_j"] = result.loss_energy.iron_rotor;
    losses["copper_dc_j"] = result.loss_energy.copper_dc;
    losses["copper_ac_j"] = result.loss_energy.copper_ac;
    losses["field_copper_j"] = result.loss_energy.field_copper;
    losses["transformer_j"] = result.loss_energy.transformer;
    losses["inverter_j"] = result.loss_energy.inverter;
    losses["gearbox_j"] = result.loss_energy.gearbox;
    j["loss_energy"] = losses;
    write_file_atomic(path, j.dump(1) + "\n");
}

void export_cycle_steps_csv(const CycleResult& result, const std::string& path) {
    std::string out =
        "time_s,duration_s,speed_rpm,torque_demand_nm,torque_achieved_nm,"
        "wheel_power_w,battery_power_w,i_d_a,i_q_a,i_f_a,loss_total_w,clipped\n";
    for (const CycleStep& s : result.steps) {
        for (double v : {s.time, s.duration, s.speed_rpm, s.torque_demand,
                         s.torque_achieved, s.wheel_power, s.battery_power,
                         s.i_d, s.i_q, s.i_f, s.losses.total()}) {
            out += format_double(v);
            out += ',';
        }
        out += s.clipped ? '1' : '0';
        out += '\n';
    }
    write_file_atomic(path, out);
}

void export_histogram_csv(const EnergyHistogram& hist, const std::string& path) {
    std::string out =
        "torque_lo_nm,torque_hi_nm,speed_lo_rpm,speed_hi_rpm,energy_j,"
        "normalized\n";
    const int nt = static_cast<int>(hist.torque_edges.size()) - 1;
    const int ns = static_cast<int>(hist.speed_edges.size()) - 1;
    for (int t = 0; t < nt; ++t) {
        for (int s = 0; s < ns; ++s) {
            const std::size_t i = hist.index(t, s);
            for (double v :
                 {hist.torque_edges[t], hist.torque_edges[t + 1],
                  hist.speed_edges[s], hist.speed_edges[s + 1], hist.energy[i]}) {
                out += format_double(v);
                out += ',';
            }
            out += format_double(hist.normalized[i]);
            out += '\n';
        }
    }
    write_file_atomic(path, out);
}

}  // namespace wfopt
