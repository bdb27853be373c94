#pragma once

#include <array>
#include <string>
#include <vector>

#include "wfopt/machine.hpp"

namespace wfopt {

// Lumped magnetic equivalent circuit of one pole pair. Node potentials and
// branch fluxes are 2-vectors (d, q components of the fundamental space wave);
// iron branches conduct both components and saturate at the flux magnitude,
// which reproduces cross-saturation. The airgap is split into a d-only and a
// q-only branch so the two axes see different effective gaps (saliency).
//
// Template (node 0 is the reference, the stator yoke midpoint):
//   0 --rotor_yoke--> 1 --rotor_pole--> 2 --airgap_d/airgap_q--> 3
//     --stator_tooth--> 4 --stator_yoke--> 0
// Slot leakage closes locally around each slot and is kept as per-slot
// constant-permeance records; its aggregate enters flux linkage as
// leakage_inductance * current and never crosses the airgap.
enum class BranchKind {
    rotor_yoke,
    rotor_pole,
    airgap_d,
    airgap_q,
    stator_tooth,
    stator_yoke,
    slot_leakage,
};

enum class MmfTerminal { none, field, stator_d, stator_q };

struct NetworkBranch {
    BranchKind kind;
    int node_from = -1;  // flux positive from -> to; -1 for local leakage loops
    int node_to = -1;
    const MaterialSpec* material = nullptr;  // nullptr: linear air path
    double area = 0.0;       // m^2
    double length = 0.0;     // m
    double permeance = 0.0;  // Wb/A-turn, air branches only
    MmfTerminal source = MmfTerminal::none;
    double fixed_mmf = 0.0;  // constant series source (magnet), d axis, A-turns
};

struct MmfSources {
    double stator_d = 0.0;  // A-turns per pole
    double stator_q = 0.0;
    double field = 0.0;
};

struct ReluctanceNetwork {
    int node_count = 0;
    std::vector<NetworkBranch> branches;  // the core six-branch template
    std::vector<NetworkBranch> leakage;   // one record per slot
    int pole_pairs = 0;
    double stator_mmf_per_amp = 0.0;  // 3*k_w*N_ph/(pi*p), A-turns per peak amp
    double field_mmf_per_amp = 0.0;   // field turns per pole
    double magnet_mmf = 0.0;          // B_r*t_m/mu0, A-turns
    double turns_factor = 0.0;        // k_w*N_ph, links pole flux to psi
    double leakage_inductance = 0.0;  // H per phase, from the slot records
};

// Throws ValidationError naming the violated geometry constraint.
ReluctanceNetwork build_reluctance_network(const MachineDesign& design);

struct NetworkSolution {
    std::vector<std::array<double, 2>> node_potentials;  // (d, q) per node
    std::vector<std::array<double, 2>> branch_fluxes;    // per core branch, Wb
    int iterations = 0;
    double residual = 0.0;         // worst node imbalance, Wb
    double max_branch_flux = 0.0;  // |flux| scale used for the relative check
};

// Damped Newton on nodal flux balance. Throws SolverDivergence (carrying the
// last residual) if the relative imbalance is still above 1e-9 after the
// iteration cap.
NetworkSolution solve_network(const ReluctanceNetwork& network,
                              const MmfSources& sources);

struct GridSpec {
    int n_id = 17;
    int n_iq = 17;  // must be odd so i_q = 0 lies on the grid
    int n_if = 9;   // forced to 1 for pmsm designs
};

struct FluxLinkageMap {
    std::string design_name;
    std::string topology;  // "wfsm" or "pmsm"
    int pole_pairs = 0;
    double leakage_inductance = 0.0;
    std::vector<double> id_axis;  // A, strictly increasing
    std::vector<double> iq_axis;
    std::vector<double> if_axis;
    // Row-major over (i_d, i_q, i_f): index = (a*n_iq + b)*n_if + c.
    std::vector<double> psi_d;
    std::vector<double> psi_q;
    std::vector<double> b_tooth;
    std::vector<double> b_yoke;
    std::vector<double> b_rotor;

    [[nodiscard]] std::size_t index(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * iq_axis.size() + b) * if_axis.size() + c;
    }

    struct Sample {
        double psi_d, psi_q, b_tooth, b_yoke, b_rotor;
    };
    // Trilinear interpolation; throws std::out_of_range beyond the axes.
    [[nodiscard]] Sample sample(double i_d, double i_q, double i_f) const;

    void validate() const;
};

FluxLinkageMap build_flux_map(const MachineDesign& design, const GridSpec& grid);

void save_flux_map(const FluxLinkageMap& map, const std::string& path);
FluxLinkageMap load_flux_map(const std::string& path);

double torque(const FluxLinkageMap& map, int pole_pairs, double i_d, double i_q,
              double i_f);

struct VoltageResult {
    double v_d = 0.0;
    double v_q = 0.0;
    double v_peak_lineline = 0.0;
};

VoltageResult steady_voltage(const FluxLinkageMap& map, double i_d, double i_q,
                             double i_f, double speed_elec, double r_s);

// Space-vector feasibility bound: peak line-line voltage against the DC link.
inline constexpr double kModulationLimit = 0.95;

inline bool voltage_feasible(const VoltageResult& v, double v_dc,
                             double modulation_limit = kModulationLimit) {
    return v.v_peak_lineline <= modulation_limit * v_dc;
}

}  // namespace wfopt
