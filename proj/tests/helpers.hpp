#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfopt/control.hpp"
#include "wfopt/losses.hpp"
#include "wfopt/machine.hpp"
#include "wfopt/material.hpp"
#include "wfopt/mec.hpp"

namespace testutil {

inline std::string data_dir() { return WFOPT_DATA_DIR; }
inline std::string test_data_dir() { return WFOPT_TEST_DATA_DIR; }

inline wfopt::GradeLibrary shipped_grades() {
    return wfopt::GradeLibrary::load_directory(data_dir() + "/materials");
}

inline wfopt::MachineDesign shipped_design(const std::string& file,
                                           const wfopt::GradeLibrary& lib) {
    return wfopt::load_design_file(data_dir() + "/designs/" + file, lib);
}

// Fresh private directory for tests that write files.
inline std::string temp_dir() {
    std::string tmpl = "/tmp/wfopt_test_XXXXXX";
    char* made = mkdtemp(tmpl.data());
    if (!made) throw std::runtime_error("mkdtemp failed");
    return made;
}

// Exhaustive reference for the torque-tracking solvers: a dense grid of
// current angles and field currents, with the stator current magnitude
// bisected on each ray until the torque target is met exactly. Entirely
// independent of the production pattern search.
struct DenseReference {
    bool found = false;
    double i_d = 0.0;
    double i_q = 0.0;
    double i_f = 0.0;
    double magnitude = 0.0;
    double loss = 0.0;
};

inline DenseReference dense_reference(const wfopt::MachineDesign& design,
                                      const wfopt::FluxLinkageMap& map,
                                      wfopt::ControlStrategy strategy,
                                      double t_req, double speed_rpm,
                                      double v_dc, int n_angle = 101,
                                      int n_if = 33, int n_mag = 101) {
    using namespace wfopt;
    const MachineGeometry geo = derive_geometry(design);
    const LossModelParams loss_params{};
    const double w_mech = rpm_to_rad_s(speed_rpm);
    const double w_elec = design.pole_pairs * w_mech;
    const double r_s = resistance_at(geo.stator_resistance_20c, loss_params.winding_temp);
    const double v_limit = kModulationLimit * v_dc;
    const double i_max = design.ratings.max_stator_current * std::sqrt(2.0);
    double i_f_cap = 0.0;
    if (design.topology == Topology::wfsm) {
        const double r_f = resistance_at(design.field_resistance_20c,
                                         loss_params.winding_temp);
        i_f_cap = std::min(design.ratings.max_field_current,
                           std::sqrt(design.ratings.max_field_power / r_f));
    }
    const double t_sign = t_req < 0.0 ? -1.0 : 1.0;
    const double t_tgt = std::abs(t_req);
    const double t_inner = 1e-9 * std::max(1.0, t_tgt);

    auto torque_of = [&](double i_d, double i_q, double i_f) {
        const auto s = map.sample(i_d, i_q, i_f);
        return 1.5 * design.pole_pairs * (s.psi_d * i_q - s.psi_q * i_d);
    };
    auto voltage_of = [&](double i_d, double i_q, double i_f) {
        const auto s = map.sample(i_d, i_q, i_f);
        return std::sqrt(3.0) * std::hypot(r_s * i_d - w_elec * s.psi_q,
                                           r_s * i_q + w_elec * s.psi_d);
    };

    DenseReference best;
    const int nf = design.topology == Topology::wfsm ? n_if : 1;
    for (int fi = 0; fi < nf; ++fi) {
        const double i_f = nf == 1 ? 0.0 : i_f_cap * fi / (nf - 1);
        for (int ai = 0; ai < n_angle; ++ai) {
            const double angle = wfopt::kPi * ai / (n_angle - 1);
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            // Torque along a ray is not monotone in magnitude; every
            // bracketed crossing is a distinct candidate (at high speed only
            // a descending-branch crossing may satisfy the voltage limit).
            auto consider = [&](double mid) {
                if (voltage_of(mid * c, mid * s, i_f) > v_limit) return;
                double objective;
                if (strategy == ControlStrategy::mtpa) {
                    objective = mid;
                } else {
                    objective = machine_losses(design, geo, map, mid * c,
                                               mid * s, i_f, w_mech,
                                               loss_params)
                                    .total();
                }
                const bool take =
                    !best.found || objective < best.loss ||
                    (objective == best.loss &&
                     (i_f < best.i_f ||
                      (i_f == best.i_f && mid < best.magnitude)));
                if (take) {
                    best.found = true;
                    best.i_d = mid * c;
                    best.i_q = t_sign * mid * s;
                    best.i_f = i_f;
                    best.magnitude = mid;
                    best.loss = objective;
                }
            };
            double prev_m = 0.0;
            double prev_f = -t_tgt;
            for (int j = 1; j < n_mag; ++j) {
                const double m = i_max * j / (n_mag - 1);
                const double f = torque_of(m * c, m * s, i_f) - t_tgt;
                if (prev_f * f <= 0.0 && (prev_f != 0.0 || f != 0.0)) {
                    double lo = prev_m, f_lo = prev_f, hi = m;
                    double mid = hi;
                    for (int it = 0; it < 90; ++it) {
                        mid = 0.5 * (lo + hi);
                        const double f_mid =
                            torque_of(mid * c, mid * s, i_f) - t_tgt;
                        if (std::abs(f_mid) <= t_inner) break;
                        if ((f_mid < 0.0) == (f_lo < 0.0)) {
                            lo = mid;
                            f_lo = f_mid;
                        } else {
                            hi = mid;
                        }
                    }
                    consider(mid);
                }
                prev_m = m;
                prev_f = f;
            }
        }
    }
    if (best.found && strategy == ControlStrategy::mtpa) {
        // Normalize: for MTPA the objective stored above is the magnitude.
        best.loss = best.magnitude;
    }
    return best;
}

// Quadratic-time dominance oracle over (maximize f1, maximize f2).
inline std::vector<std::size_t> slow_front(
    const std::vector<std::pair<double, double>>& pts) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
            if (j == i) continue;
            const bool ge = pts[j].first >= pts[i].first &&
                            pts[j].second >= pts[i].second;
            const bool gt = pts[j].first > pts[i].first ||
                            pts[j].second > pts[i].second;
            dominated = ge && gt;
        }
        if (!dominated) keep.push_back(i);
    }
    return keep;
}

}  // namespace testutil
