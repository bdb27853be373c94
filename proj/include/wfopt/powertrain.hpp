#pragma once

#include <string>
#include <vector>

#include "wfopt/control.hpp"
#include "wfopt/losses.hpp"

namespace wfopt {

struct VehicleParams {
    std::string name;
    double mass = 1900.0;          // kg
    double drag_area_cda = 0.62;   // m^2
    double rolling_coeff = 0.009;
    double wheel_radius = 0.35;    // m
    double gear_ratio = 7.0;       // machine speed / wheel speed
    std::string driveline = "rwd";
    double aux_power = 300.0;      // W, non-EDU loads
    double air_density = 1.2;      // kg/m^3
    double regen_fraction = 0.85;  // share of braking handled by the machine

    void validate() const;
};

VehicleParams load_vehicle_file(const std::string& path);

struct DriveCycle {
    std::string name;
    std::vector<double> time_s;
    std::vector<double> speed_ms;

    void validate() const;
    [[nodiscard]] double duration() const {
        return time_s.empty() ? 0.0 : time_s.back() - time_s.front();
    }
};

// CSV with header `time_s,speed_kmh`.
DriveCycle load_cycle_csv(const std::string& path);

// One averaged cycle interval's demand at the machine shaft, before gearbox
// loss: torque = wheel torque / gear_ratio with braking torque scaled by
// regen_fraction (the rest is friction braking).
struct DemandPoint {
    double time = 0.0;      // s, interval start
    double duration = 0.0;  // s
    double torque = 0.0;    // N*m at the machine, gearbox assumed lossless here
    double speed = 0.0;     // rad/s at the machine
};

std::vector<DemandPoint> demand_trace(const DriveCycle& cycle,
                                      const VehicleParams& vehicle);

// Motor + inverter + gearbox composition for one machine.
struct EduSpec {
    const MachineDesign* design = nullptr;
    const FluxLinkageMap* map = nullptr;
    DeviceParams device;
    GearParams gear;
    ControlStrategy strategy = ControlStrategy::mtpl;
    double v_dc = 800.0;
    double f_sw = 10e3;  // Hz
    SolverOptions solver;
};

struct CycleStep {
    double time = 0.0;
    double duration = 0.0;
    double speed_rpm = 0.0;        // machine speed
    double torque_demand = 0.0;    // machine-side demand incl. gearbox loss
    double torque_achieved = 0.0;
    double wheel_power = 0.0;      // W delivered past the gearbox
    double battery_power = 0.0;    // W at the EDU DC terminals (aux excluded)
    double i_d = 0.0, i_q = 0.0, i_f = 0.0;
    LossBreakdown losses;          // machine + inverter + gearbox
    bool clipped = false;
};

struct CycleResult {
    std::string design_name;
    std::string cycle_name;
    std::vector<CycleStep> steps;
    // Energies in J. battery_energy = net_wheel_energy + per-component loss
    // sum by construction, so the aggregate balance is an identity.
    double traction_energy = 0.0;  // wheel output while motoring
    double regen_energy = 0.0;     // wheel input while braking (positive)
    double net_wheel_energy = 0.0;
    LossBreakdown loss_energy;     // J per component over the cycle
    double battery_energy = 0.0;   // net EDU draw
    double aux_energy = 0.0;
    double clipped_energy = 0.0;
    double clipped_fraction = 0.0;
    // Net wheel energy / net battery draw at the EDU boundary; auxiliary
    // loads excluded. Always < 1 while losses are positive.
    double edu_efficiency = 0.0;
};

// Throws CycleError when clipped steps carry more than 1% of traction energy.
class CycleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

CycleResult run_cycle(const std::vector<DemandPoint>& trace, const EduSpec& edu,
                      const VehicleParams& vehicle,
                      const std::string& cycle_name = "");

enum class HistogramMode { throughput, loss };

struct EnergyHistogram {
    std::vector<double> torque_edges;  // N*m, |machine torque|
    std::vector<double> speed_edges;   // rpm
    std::vector<double> energy;        // J, row-major (torque, speed)
    std::vector<double> normalized;    // max bin = 1.0
    double total_energy = 0.0;
    // Top-2 bins by energy: {torque bin, speed bin} pairs, largest first.
    int hot_torque[2] = {-1, -1};
    int hot_speed[2] = {-1, -1};

    [[nodiscard]] std::size_t index(int t, int s) const {
        return static_cast<std::size_t>(t) * (speed_edges.size() - 1) + s;
    }
};

EnergyHistogram energy_histogram(const CycleResult& result, int torque_bins,
                                 int speed_bins,
                                 HistogramMode mode = HistogramMode::throughput);

// Steady-state EDU efficiency at a constant-speed cruise point.
double cruise_efficiency(double v_kmh, const VehicleParams& vehicle,
                         const EduSpec& edu);

void export_cycle_summary_json(const CycleResult& result, const std::string& path,
                               const std::string& config_hash);
void export_cycle_steps_csv(const CycleResult& result, const std::string& path);
void export_histogram_csv(const EnergyHistogram& hist, const std::string& path);

}  // namespace wfopt
