#include "wfopt/mec.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wfopt/textfile.hpp"

namespace wfopt {
namespace {

using json = nlohmann::ordered_json;

constexpr double kNewtonTarget = 1e-12;  // inner relative residual target
constexpr double kAcceptBound = 1e-9;    // contract bound on node imbalance
constexpr int kMaxIterations = 50;

struct BranchState {
    double flux_d = 0.0;
    double flux_q = 0.0;
    Eigen::Matrix2d conductance = Eigen::Matrix2d::Zero();
};

// Flux and flux-MMF Jacobian of one branch for MMF drop m = (m_d, m_q).
// Iron branches saturate at |m|: h = |m|/length, B = bh(h), flux = area*B*m_hat.
// The tangent along m_hat uses dB/dH, transverse uses the secant B/H, which
// keeps the Jacobian symmetric positive definite for concave B-H curves.
BranchState eval_branch(const NetworkBranch& br, double m_d, double m_q) {
    BranchState st;
    if (br.kind == BranchKind::airgap_d) {
        st.flux_d = br.permeance * m_d;
        st.conductance(0, 0) = br.permeance;
        return st;
    }
    if (br.kind == BranchKind::airgap_q) {
        st.flux_q = br.permeance * m_q;
        st.conductance(1, 1) = br.permeance;
        return st;
    }
    const double mag = std::hypot(m_d, m_q);
    const double h = mag / br.length;
    const double tangent = bh_slope(*br.material, h);
    if (mag == 0.0) {
        const double g = br.area * tangent / br.length;
        st.conductance(0, 0) = g;
        st.conductance(1, 1) = g;
        return st;
    }
    const double b = bh_lookup(*br.material, h);
    const double secant = b / h;
    const double ud = m_d / mag;
    const double uq = m_q / mag;
    st.flux_d = br.area * b * ud;
    st.flux_q = br.area * b * uq;
    const double gt = br.area * tangent / br.length;
    const double gs = br.area * secant / br.length;
    st.conductance(0, 0) = gt * ud * ud + gs * uq * uq;
    st.conductance(1, 1) = gt * uq * uq + gs * ud * ud;
    st.conductance(0, 1) = (gt - gs) * ud * uq;
    st.conductance(1, 0) = st.conductance(0, 1);
    return st;
}

void branch_source(const NetworkBranch& br, const MmfSources& src, double* f_d,
                   double* f_q) {
    *f_d = br.fixed_mmf;
    *f_q = 0.0;
    switch (br.source) {
        case MmfTerminal::field: *f_d += src.field; break;
        case MmfTerminal::stator_d: *f_d += src.stator_d; break;
        case MmfTerminal::stator_q: *f_q += src.stator_q; break;
        case MmfTerminal::none: break;
    }
}

}  // namespace

ReluctanceNetwork build_reluctance_network(const MachineDesign& design) {
    design.validate();
    const MachineGeometry geo = derive_geometry(design);

    ReluctanceNetwork net;
    net.node_count = 5;
    net.pole_pairs = design.pole_pairs;
    net.stator_mmf_per_amp = 3.0 * design.winding_factor * design.turns_per_phase /
                             (kPi * design.pole_pairs);
    net.turns_factor = design.winding_factor * design.turns_per_phase;
    net.leakage_inductance = geo.leakage_inductance;
    if (design.topology == Topology::wfsm) {
        net.field_mmf_per_amp = design.field_turns;
    } else {
        net.magnet_mmf = design.magnet_remanence * design.magnet_thickness / kMu0;
    }

    auto iron = [&](BranchKind kind, int from, int to, const MaterialSpec* mat,
                    double area, double length, MmfTerminal source,
                    double fixed_mmf) {
        NetworkBranch br;
        br.kind = kind;
        br.node_from = from;
        br.node_to = to;
        br.material = mat;
        br.area = area;
        br.length = length;
        br.source = source;
        br.fixed_mmf = fixed_mmf;
        net.branches.push_back(br);
    };
    auto gap = [&](BranchKind kind, double length, MmfTerminal source) {
        NetworkBranch br;
        br.kind = kind;
        br.node_from = 2;
        br.node_to = 3;
        br.area = geo.gap_area;
        br.length = length;
        br.permeance = kMu0 * geo.gap_area / length;
        br.source = source;
        net.branches.push_back(br);
    };

    iron(BranchKind::rotor_yoke, 0, 1, design.rotor_mat, geo.rotor_yoke_area,
         geo.rotor_yoke_length, MmfTerminal::none, 0.0);
    iron(BranchKind::rotor_pole, 1, 2, design.rotor_mat, geo.rotor_pole_area,
         geo.rotor_pole_length,
         design.topology == Topology::wfsm ? MmfTerminal::field : MmfTerminal::none,
         design.topology == Topology::pmsm ? net.magnet_mmf : 0.0);
    gap(BranchKind::airgap_d, geo.gap_d_effective, MmfTerminal::stator_d);
    gap(BranchKind::airgap_q, geo.gap_q_effective, MmfTerminal::stator_q);
    iron(BranchKind::stator_tooth, 3, 4, design.stator_mat, geo.tooth_area,
         geo.tooth_length, MmfTerminal::none, 0.0);
    iron(BranchKind::stator_yoke, 4, 0, design.stator_mat, geo.yoke_area,
         geo.yoke_length, MmfTerminal::none, 0.0);

    net.leakage.reserve(design.slot_count);
    for (int s = 0; s < design.slot_count; ++s) {
        NetworkBranch br;
        br.kind = BranchKind::slot_leakage;
        br.permeance = geo.slot_leakage_permeance;
        net.leakage.push_back(br);
    }
    return net;
}

NetworkSolution solve_network(const ReluctanceNetwork& network,
                              const MmfSources& sources) {
    const int free_nodes = network.node_count - 1;
    const int dim = 2 * free_nodes;
    const auto& branches = network.branches;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);

    struct Evaluation {
        Eigen::VectorXd residual;
        std::vector<BranchState> states;
        double max_flux = 0.0;
        double worst = 0.0;
    };
    auto evaluate = [&](const Eigen::VectorXd& pot) {
        Evaluation ev;
        ev.residual = Eigen::VectorXd::Zero(dim);
        ev.states.resize(branches.size());
        for (std::size_t k = 0; k < branches.size(); ++k) {
            const NetworkBranch& br = branches[k];
            const auto node_val = [&](int n, int comp) {
                return n == 0 ? 0.0 : pot[2 * (n - 1) + comp];
            };
            double f_d, f_q;
            branch_source(br, sources, &f_d, &f_q);
            const double m_d = node_val(br.node_from, 0) - node_val(br.node_to, 0) + f_d;
            const double m_q = node_val(br.node_from, 1) - node_val(br.node_to, 1) + f_q;
            ev.states[k] = eval_branch(br, m_d, m_q);
            const double mag = std::hypot(ev.states[k].flux_d, ev.states[k].flux_q);
            ev.max_flux = std::max(ev.max_flux, mag);
            if (br.node_from != 0) {
                ev.residual[2 * (br.node_from - 1)] += ev.states[k].flux_d;
                ev.residual[2 * (br.node_from - 1) + 1] += ev.states[k].flux_q;
            }
            if (br.node_to != 0) {
                ev.residual[2 * (br.node_to - 1)] -= ev.states[k].flux_d;
                ev.residual[2 * (br.node_to - 1) + 1] -= ev.states[k].flux_q;
            }
        }
        ev.worst = ev.residual.lpNorm<Eigen::Infinity>();
        return ev;
    };

    Evaluation ev = evaluate(u);
    int it = 0;
    for (; it < kMaxIterations; ++it) {
        if (ev.worst <= kNewtonTarget * ev.max_flux || ev.worst == 0.0) break;

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
        for (std::size_t k = 0; k < branches.size(); ++k) {
            const NetworkBranch& br = branches[k];
            const Eigen::Matrix2d& g = ev.states[k].conductance;
            const int f = br.node_from - 1;
            const int t = br.node_to - 1;
            if (f >= 0) jac.block<2, 2>(2 * f, 2 * f) += g;
            if (t >= 0) jac.block<2, 2>(2 * t, 2 * t) += g;
            if (f >= 0 && t >= 0) {
                jac.block<2, 2>(2 * f, 2 * t) -= g;
                jac.block<2, 2>(2 * t, 2 * f) -= g;
            }
        }
        const Eigen::VectorXd step = jac.partialPivLu().solve(-ev.residual);

        double t = 1.0;
        Evaluation next = evaluate(u + step);
        while (next.worst > (1.0 - 1e-4 * t) * ev.worst && t > 1.0 / 4096.0) {
            t *= 0.5;
            next = evaluate(u + t * step);
        }
        u += t * step;
        ev = std::move(next);
    }

    if (ev.worst > kAcceptBound * std::max(ev.max_flux, 1e-30)) {
        std::ostringstream msg;
        msg << "reluctance network did not converge in " << kMaxIterations
            << " iterations (residual " << ev.worst << " Wb against flux scale "
            << ev.max_flux << " Wb)";
        throw SolverDivergence(msg.str(), ev.worst);
    }

    NetworkSolution sol;
    sol.node_potentials.assign(network.node_count, {0.0, 0.0});
    for (int n = 1; n < network.node_count; ++n) {
        sol.node_potentials[n] = {u[2 * (n - 1)], u[2 * (n - 1) + 1]};
    }
    sol.branch_fluxes.resize(branches.size());
    for (std::size_t k = 0; k < branches.size(); ++k) {
        sol.branch_fluxes[k] = {ev.states[k].flux_d, ev.states[k].flux_q};
    }
    sol.iterations = it;
    sol.residual = ev.worst;
    sol.max_branch_flux = ev.max_flux;
    return sol;
}

namespace {

std::vector<double> symmetric_axis(double peak, int count) {
    const int center = count / 2;
    const double step = peak / center;
    std::vector<double> axis(count);
    for (int j = 0; j < count; ++j) {
        axis[j] = (j - center) * step;  // exactly antisymmetric about 0
    }
    return axis;
}

int branch_index(const ReluctanceNetwork& net, BranchKind kind) {
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        if (net.branches[k].kind == kind) return static_cast<int>(k);
    }
    throw std::logic_error("network template missing a branch kind");
}

}  // namespace

FluxLinkageMap build_flux_map(const MachineDesign& design, const GridSpec& grid) {
    if (grid.n_id < 2 || grid.n_iq < 3 || grid.n_if < 1) {
        throw ConfigError("flux map grid must be at least 2 x 3 x 1");
    }
    if (grid.n_iq % 2 == 0) {
        throw ConfigError("flux map i_q axis needs an odd point count so i_q = 0 is on the grid");
    }
    const ReluctanceNetwork net = build_reluctance_network(design);
    const MachineGeometry geo = derive_geometry(design);

    FluxLinkageMap map;
    map.design_name = design.name;
    map.topology = design.topology == Topology::wfsm ? "wfsm" : "pmsm";
    map.pole_pairs = design.pole_pairs;
    map.leakage_inductance = geo.leakage_inductance;

    const double i_peak = design.ratings.max_stator_current * std::sqrt(2.0);
    map.id_axis = symmetric_axis(i_peak, grid.n_id % 2 == 1 ? grid.n_id : grid.n_id + 1);
    map.iq_axis = symmetric_axis(i_peak, grid.n_iq);
    if (design.topology == Topology::wfsm) {
        map.if_axis.resize(grid.n_if);
        const double step = design.ratings.max_field_current /
                            std::max(1, grid.n_if - 1);
        for (int c = 0; c < grid.n_if; ++c) map.if_axis[c] = c * step;
    } else {
        map.if_axis = {0.0};
    }

    const std::size_t total =
        map.id_axis.size() * map.iq_axis.size() * map.if_axis.size();
    map.psi_d.assign(total, 0.0);
    map.psi_q.assign(total, 0.0);
    map.b_tooth.assign(total, 0.0);
    map.b_yoke.assign(total, 0.0);
    map.b_rotor.assign(total, 0.0);

    const int k_gap_d = branch_index(net, BranchKind::airgap_d);
    const int k_gap_q = branch_index(net, BranchKind::airgap_q);
    const int k_tooth = branch_index(net, BranchKind::stator_tooth);
    const int k_yoke = branch_index(net, BranchKind::stator_yoke);
    const int k_pole = branch_index(net, BranchKind::rotor_pole);
    const auto& tooth = net.branches[k_tooth];
    const auto& yoke = net.branches[k_yoke];
    const auto& pole = net.branches[k_pole];

    const int nq = static_cast<int>(map.iq_axis.size());
    const int center = nq / 2;
    for (std::size_t a = 0; a < map.id_axis.size(); ++a) {
        for (int b = center; b < nq; ++b) {
            for (std::size_t c = 0; c < map.if_axis.size(); ++c) {
                MmfSources src;
                src.stator_d = net.stator_mmf_per_amp * map.id_axis[a];
                src.stator_q = net.stator_mmf_per_amp * map.iq_axis[b];
                src.field = net.field_mmf_per_amp * map.if_axis[c];
                NetworkSolution sol;
                try {
                    sol = solve_network(net, src);
                } catch (const SolverDivergence& e) {
                    std::ostringstream msg;
                    msg << "flux map grid point (i_d=" << map.id_axis[a]
                        << " A, i_q=" << map.iq_axis[b] << " A, i_f="
                        << map.if_axis[c] << " A): " << e.what();
                    throw SolverDivergence(msg.str(), e.last_residual);
                }
                const std::size_t idx = map.index(static_cast<int>(a), b,
                                                  static_cast<int>(c));
                const double psi_d = net.turns_factor * sol.branch_fluxes[k_gap_d][0] +
                                     geo.leakage_inductance * map.id_axis[a];
                const double psi_q = net.turns_factor * sol.branch_fluxes[k_gap_q][1] +
                                     geo.leakage_inductance * map.iq_axis[b];
                const auto region_b = [&](int k, const NetworkBranch& br) {
                    return std::hypot(sol.branch_fluxes[k][0],
                                      sol.branch_fluxes[k][1]) / br.area;
                };
                map.psi_d[idx] = psi_d;
                map.psi_q[idx] = psi_q;
                map.b_tooth[idx] = region_b(k_tooth, tooth);
                map.b_yoke[idx] = region_b(k_yoke, yoke);
                map.b_rotor[idx] = region_b(k_pole, pole);

                const int bm = nq - 1 - b;  // mirror: psi_d even, psi_q odd
                const std::size_t midx = map.index(static_cast<int>(a), bm,
                                                   static_cast<int>(c));
                map.psi_d[midx] = map.psi_d[idx];
                map.psi_q[midx] = -map.psi_q[idx];
                map.b_tooth[midx] = map.b_tooth[idx];
                map.b_yoke[midx] = map.b_yoke[idx];
                map.b_rotor[midx] = map.b_rotor[idx];
            }
        }
    }
    map.validate();
    return map;
}

void FluxLinkageMap::validate() const {
    auto check_axis = [](const std::vector<double>& axis, const char* name) {
        if (axis.empty()) throw ValidationError(std::string("flux map: empty ") + name);
        for (std::size_t i = 1; i < axis.size(); ++i) {
            if (!(axis[i] > axis[i - 1])) {
                throw ValidationError(std::string("flux map: ") + name +
                                      " must be strictly increasing");
            }
        }
    };
    check_axis(id_axis, "id_axis");
    if (iq_axis.size() < 3 || iq_axis.size() % 2 == 0)
        throw ValidationError("flux map: iq_axis must have an odd count >= 3");
    check_axis(iq_axis, "iq_axis");
    check_axis(if_axis, "if_axis");
    const std::size_t total = id_axis.size() * iq_axis.size() * if_axis.size();
    for (const auto* arr : {&psi_d, &psi_q, &b_tooth, &b_yoke, &b_rotor}) {
        if (arr->size() != total)
            throw ValidationError("flux map: array size does not match the axes");
        for (double v : *arr) {
            if (!std::isfinite(v))
                throw ValidationError("flux map: non-finite array entry");
        }
    }
    for (const auto* arr : {&b_tooth, &b_yoke, &b_rotor}) {
        for (double v : *arr) {
            if (v < 0.0)
                throw ValidationError("flux map: negative region flux density");
        }
    }
    if (pole_pairs < 1) throw ValidationError("flux map: pole_pairs must be >= 1");
}

namespace {

struct AxisLocation {
    int lo;
    double weight;  // weight of the upper node
};

AxisLocation locate(const std::vector<double>& axis, double v, const char* name) {
    if (axis.size() == 1) return {0, 0.0};  // constant in this dimension
    const double span = axis.back() - axis.front();
    const double slack = 1e-9 * span;
    if (v < axis.front() - slack || v > axis.back() + slack) {
        std::ostringstream msg;
        msg << name << " = " << v << " A outside map range [" << axis.front()
            << ", " << axis.back() << "]";
        throw std::out_of_range(msg.str());
    }
    const double clamped = std::clamp(v, axis.front(), axis.back());
    auto it = std::upper_bound(axis.begin(), axis.end(), clamped);
    int hi = static_cast<int>(it - axis.begin());
    hi = std::clamp(hi, 1, static_cast<int>(axis.size()) - 1);
    const int lo = hi - 1;
    const double w = (clamped - axis[lo]) / (axis[hi] - axis[lo]);
    return {lo, w};
}

}  // namespace

FluxLinkageMap::Sample FluxLinkageMap::sample(double i_d, double i_q,
                                              double i_f) const {
    if (i_q < 0.0) {
        // Fold through the dq symmetry so psi_d is exactly even and psi_q
        // exactly odd in i_q, independent of interpolation rounding.
        Sample s = sample(i_d, -i_q, i_f);
        s.psi_q = -s.psi_q;
        return s;
    }
    const AxisLocation la = locate(id_axis, i_d, "i_d");
    const AxisLocation lb = locate(iq_axis, i_q, "i_q");
    const AxisLocation lc = locate(if_axis, i_f, "i_f");

    auto interp = [&](const std::vector<double>& arr) {
        double acc = 0.0;
        for (int da = 0; da < 2; ++da) {
            const double wa = da ? la.weight : 1.0 - la.weight;
            if (wa == 0.0) continue;
            for (int db = 0; db < 2; ++db) {
                const double wb = db ? lb.weight : 1.0 - lb.weight;
                if (wb == 0.0) continue;
                for (int dc = 0; dc < 2; ++dc) {
                    const double wc = dc ? lc.weight : 1.0 - lc.weight;
                    if (wc == 0.0) continue;
                    const int cc = if_axis.size() == 1 ? 0 : lc.lo + dc;
                    acc += wa * wb * wc *
                           arr[index(la.lo + da, lb.lo + db, cc)];
                }
            }
        }
        return acc;
    };
    return {interp(psi_d), interp(psi_q), interp(b_tooth), interp(b_yoke),
            interp(b_rotor)};
}

double torque(const FluxLinkageMap& map, int pole_pairs, double i_d, double i_q,
              double i_f) {
    const auto s = map.sample(i_d, i_q, i_f);
    return 1.5 * pole_pairs * (s.psi_d * i_q - s.psi_q * i_d);
}

VoltageResult steady_voltage(const FluxLinkageMap& map, double i_d, double i_q,
                             double i_f, double speed_elec, double r_s) {
    const auto s = map.sample(i_d, i_q, i_f);
    VoltageResult v;
    v.v_d = r_s * i_d - speed_elec * s.psi_q;
    v.v_q = r_s * i_q + speed_elec * s.psi_d;
    v.v_peak_lineline = std::sqrt(3.0) * std::hypot(v.v_d, v.v_q);
    return v;
}

void save_flux_map(const FluxLinkageMap& map, const std::string& path) {
    json j;
    j["format"] = "flux_map/1";
    j["design"] = map.design_name;
    j["topology"] = map.topology;
    j["pole_pairs"] = map.pole_pairs;
    j["leakage_inductance"] = map.leakage_inductance;
    j["axis_order"] = "i_d,i_q,i_f";
    j["id_axis"] = map.id_axis;
    j["iq_axis"] = map.iq_axis;
    j["if_axis"] = map.if_axis;
    j["psi_d"] = map.psi_d;
    j["psi_q"] = map.psi_q;
    j["b_tooth"] = map.b_tooth;
    j["b_yoke"] = map.b_yoke;
    j["b_rotor"] = map.b_rotor;
    write_file_atomic(path, j.dump(1) + "\n");
}

FluxLinkageMap load_flux_map(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!j.contains("format") || j["format"] != "flux_map/1") {
        throw ConfigError(path + ": not a flux map file");
    }
    FluxLinkageMap map;
    try {
        map.design_name = j.at("design").get<std::string>();
        map.topology = j.at("topology").get<std::string>();
        map.pole_pairs = j.at("pole_pairs").get<int>();
        map.leakage_inductance = j.at("leakage_inductance").get<double>();
        map.id_axis = j.at("id_axis").get<std::vector<double>>();
        map.iq_axis = j.at("iq_axis").get<std::vector<double>>();
        map.if_axis = j.at("if_axis").get<std::vector<double>>();
        map.psi_d = j.at("psi_d").get<std::vector<double>>();
        map.psi_q = j.at("psi_q").get<std::vector<double>>();
        map.b_tooth = j.at("b_tooth").get<std::vector<double>>();
        map.b_yoke = j.at("b_yoke").get<std::vector<double>>();
        map.b_rotor = j.at("b_rotor").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    map.validate();
    return map;
}

}  // namespace wfopt
