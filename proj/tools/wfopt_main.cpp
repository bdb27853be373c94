#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfopt/config.hpp"
#include "wfopt/control.hpp"
#include "wfopt/machine.hpp"
#include "wfopt/material.hpp"
#include "wfopt/mec.hpp"
#include "wfopt/optimize.hpp"
#include "wfopt/powertrain.hpp"
#include "wfopt/textfile.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wfopt;

namespace {

std::vector<std::string> material_files(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".mat")
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<ManifestEntry> hash_inputs(const std::vector<std::string>& paths) {
    std::vector<ManifestEntry> entries;
    for (const auto& p : paths) entries.push_back({p, hash_file_hex(p)});
    return entries;
}

json losses_json(const LossBreakdown& l) {
    return json{{"iron_stator", l.iron_stator},
                {"iron_rotor", l.iron_rotor},
                {"copper_dc", l.copper_dc},
                {"copper_ac", l.copper_ac},
                {"field_copper", l.field_copper},
                {"transformer", l.transformer},
                {"inverter", l.inverter},
                {"gearbox", l.gearbox},
                {"total", l.total()}};
}

std::vector<double> linspace_from(double lo, double hi, int n) {
    std::vector<double> v;
    if (n == 1) {
        v.push_back(hi);
        return v;
    }
    for (int i = 0; i < n; ++i)
        v.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    return v;
}

int cmd_materials_validate(const RunConfig& cfg) {
    require_inputs(cfg, {"materials"});
    const auto files = material_files(cfg.materials_dir);
    if (files.empty())
        throw ConfigError(cfg.materials_dir + ": no .mat files found");
    for (const auto& path : files) {
        const MaterialSpec mat = load_material_file(path);
        std::printf("ok %-12s kind=%-9s sf=%.3f w_1t_50hz=%.4f W/kg\n",
                    mat.name.c_str(),
                    mat.kind == MaterialKind::smc ? "smc" : "laminated",
                    mat.stacking_factor, iron_loss_density(mat, 1.0, 50.0));
    }
    std::printf("validated %zu material grades in %s\n", files.size(),
                cfg.materials_dir.c_str());
    return 0;
}

int cmd_map_build(const RunConfig& cfg) {
    require_inputs(cfg, {"materials", "design"});
    const GradeLibrary lib = GradeLibrary::load_directory(cfg.materials_dir);
    const MachineDesign design = load_design_file(cfg.design_path, lib);

    OutputLock lock(cfg.output_dir);
    OutputTransaction txn;
    const FluxLinkageMap map = build_flux_map(design, cfg.map_grid);

    const std::string out = cfg.output_dir + "/flux_map_" + design.name + ".json";
    txn.track(out);
    save_flux_map(map, out);

    auto inputs = hash_inputs(material_files(cfg.materials_dir));
    inputs.push_back({cfg.design_path, hash_file_hex(cfg.design_path)});
    write_manifest(cfg.output_dir + "/manifest_map_build.json", "map build",
                   cfg, inputs, {{out, hash_file_hex(out)}});
    txn.commit();
    std::printf("flux map %dx%dx%d for %s -> %s\n",
                static_cast<int>(map.id_axis.size()),
                static_cast<int>(map.iq_axis.size()),
                static_cast<int>(map.if_axis.size()), design.name.c_str(),
                out.c_str());
    return 0;
}

FluxLinkageMap obtain_map(const RunConfig& cfg, const MachineDesign& design,
                          const std::string& map_path) {
    if (!map_path.empty()) {
        std::error_code ec;
        if (!fs::is_regular_file(map_path, ec))
            throw ConfigError(map_path + ": flux map file not found");
        FluxLinkageMap map = load_flux_map(map_path);
        if (map.design_name != design.name)
            throw ValidationError("flux map '" + map.design_name +
                                  "' does not match design '" + design.name +
                                  "'");
        return map;
    }
    return build_flux_map(design, cfg.map_grid);
}

int cmd_control_mtpl(const RunConfig& cfg, double torque, double speed_rpm,
                     double v_dc, bool sweep, const std::string& map_path) {
    require_inputs(cfg, {"materials", "design"});
    const GradeLibrary lib = GradeLibrary::load_directory(cfg.materials_dir);
    const MachineDesign design = load_design_file(cfg.design_path, lib);
    const FluxLinkageMap map = obtain_map(cfg, design, map_path);

    OutputLock lock(cfg.output_dir);
    OutputTransaction txn;
    std::vector<ManifestEntry> outputs;

    const ControlSolution sol = solve_operating_point(
        design, map, cfg.strategy, torque, speed_rpm, v_dc, cfg.solver);
    json doc;
    doc["schema"] = "operating_point/1";
    doc["config_hash"] = cfg.config_hash;
    doc["design"] = design.name;
    doc["strategy"] = cfg.strategy == ControlStrategy::mtpl ? "mtpl" : "mtpa";
    doc["dc_voltage_v"] = v_dc;
    doc["request"] = {{"torque_nm", torque}, {"speed_rpm", speed_rpm}};
    doc["solution"] = {{"i_d_a", sol.i_d},
                       {"i_q_a", sol.i_q},
                       {"i_f_a", sol.i_f},
                       {"v_d_v", sol.v_d},
                       {"v_q_v", sol.v_q},
                       {"torque_nm", sol.torque_achieved},
                       {"shaft_power_w", sol.shaft_power},
                       {"electrical_input_w", sol.electrical_input_power},
                       {"efficiency", sol.efficiency},
                       {"losses_w", losses_json(sol.losses)}};
    const std::string out = cfg.output_dir + "/operating_point.json";
    txn.track(out);
    write_file_atomic(out, doc.dump(2) + "\n");
    outputs.push_back({out, hash_file_hex(out)});

    if (sweep) {
        const auto t_axis = linspace_from(cfg.sweep.torque_max / cfg.sweep.n_torque,
                                          cfg.sweep.torque_max, cfg.sweep.n_torque);
        const auto s_axis = linspace_from(cfg.sweep.speed_max_rpm / cfg.sweep.n_speed,
                                          cfg.sweep.speed_max_rpm, cfg.sweep.n_speed);
        const EfficiencyMap eff = build_efficiency_map(
            design, map, cfg.strategy, t_axis, s_axis, v_dc, cfg.solver);
        const std::string eff_json = cfg.output_dir + "/efficiency_map.json";
        const std::string eff_csv = cfg.output_dir + "/efficiency_map.csv";
        txn.track(eff_json);
        txn.track(eff_csv);
        save_efficiency_map(eff, eff_json);
        export_efficiency_csv(eff, eff_csv);
        outputs.push_back({eff_json, hash_file_hex(eff_json)});
        outputs.push_back({eff_csv, hash_file_hex(eff_csv)});
    }

    std::vector<ManifestEntry> inputs = {
        {cfg.design_path, hash_file_hex(cfg.design_path)}};
    if (!map_path.empty()) inputs.push_back({map_path, hash_file_hex(map_path)});
    write_manifest(cfg.output_dir + "/manifest_control_mtpl.json",
                   "control mtpl", cfg, inputs, outputs);
    txn.commit();
    std::printf("%s at %.1f N*m, %.0f rpm: i_d=%.1f i_q=%.1f i_f=%.2f "
                "eff=%.4f -> %s\n",
                design.name.c_str(), sol.torque_achieved, speed_rpm, sol.i_d,
                sol.i_q, sol.i_f, sol.efficiency, out.c_str());
    return 0;
}

int cmd_control_envelope(const RunConfig& cfg, double v_dc,
                         const std::string& map_path) {
    require_inputs(cfg, {"materials", "design"});
    const GradeLibrary lib = GradeLibrary::load_directory(cfg.materials_dir);
    const MachineDesign design = load_design_file(cfg.design_path, lib);
    const FluxLinkageMap map = obtain_map(cfg, design, map_path);

    OutputLock lock(cfg.output_dir);
    OutputTransaction txn;
    const PeakEnvelope env =
        peak_envelope(design, map, v_dc, cfg.envelope_speeds_rpm, cfg.solver);

    std::ostringstream out;
    out << "speed_rpm,torque_nm,power_w\n";
    for (std::size_t i = 0; i < env.speed_rpm.size(); ++i) {
        out << format_double(env.speed_rpm[i]) << ','
            << format_double(env.torque[i]) << ','
            << format_double(env.power[i]) << '\n';
    }
    const std::string path = cfg.output_dir + "/envelope_" + design.name + ".csv";
    txn.track(path);
    write_file_atomic(path, out.str());
    write_manifest(cfg.output_dir + "/manifest_control_envelope.json",
                   "control envelope", cfg,
                   {{cfg.design_path, hash_file_hex(cfg.design_path)}},
                   {{path, hash_file_hex(path)}});
    txn.commit();

    double p_max = 0.0;
    for (double p : env.power) p_max = std::max(p_max, p);
    std::printf("envelope for %s: peak torque %.1f N*m, peak power %.1f kW -> %s\n",
                design.name.c_str(),
                env.torque.empty() ? 0.0 : *std::max_element(env.torque.begin(),
                                                             env.torque.end()),
                p_max / 1e3, path.c_str());
    return 0;
}

struct EduBundle {
    MachineDesign design;
    FluxLinkageMap map;
    DeviceParams device;
    GearParams gear;
    VehicleParams vehicle;
};

EduBundle load_edu(const RunConfig& cfg, const GradeLibrary& lib,
                   const std::string& design_path,
                   const std::string& vehicle_path,
                   const std::string& device_path,
                   const std::string& gear_path) {
    EduBundle b{load_design_file(design_path, lib),
                FluxLinkageMap{},
                load_device_file(device_path),
                load_gear_file(gear_path),
                load_vehicle_file(vehicle_path)};
    b.map = build_flux_map(b.design, cfg.map_grid);
    return b;
}

int cmd_cycle_run(const RunConfig& cfg) {
    require_inputs(cfg, {"materials", "design", "vehicle", "cycle", "device",
                         "gear"});
    const GradeLibrary lib = GradeLibrary::load_directory(cfg.materials_dir);
    const EduBundle b = load_edu(cfg, lib, cfg.design_path, cfg.vehicle_path,
                                 cfg.device_path, cfg.gear_path);
    const DriveCycle cycle = load_cycle_csv(cfg.cycle_path);

    OutputLock lock(cfg.output_dir);
    OutputTransaction txn;

    EduSpec edu;
    edu.design = &b.design;
    edu.map = &b.map;
    edu.device = b.device;
    edu.gear = b.gear;
    edu.strategy = cfg.strategy;
    edu.v_dc = cfg.cycle_dc_voltage;
    edu.f_sw = cfg.switching_frequency;
    edu.solver = cfg.solver;

    const auto trace = demand_trace(cycle, b.vehicle);
    const CycleResult result = run_cycle(trace, edu, b.vehicle, cycle.name);
    const EnergyHistogram hist = energy_histogram(
        result, cfg.histogram_torque_bins, cfg.histogram_speed_bins);

    const std::string summary = cfg.output_dir + "/cycle_summary.json";
    const std::string steps = cfg.output_dir + "/cycle_steps.csv";
    const std::string histo = cfg.output_dir + "/cycle_histogram.csv";
    txn.track(summary);
    txn.track(steps);
    txn.track(histo);
    export_cycle_summary_json(result, summary, cfg.config_hash);
    export_cycle_steps_csv(result, steps);
    export_histogram_csv(hist, histo);

    write_manifest(
        cfg.output_dir + "/manifest_cycle_run.json", "cycle run", cfg,
        hash_inputs({cfg.design_path, cfg.vehicle_path, cfg.cycle_path,
                     cfg.device_path, cfg.gear_path}),
        hash_inputs({summary, steps, histo}));
    txn.commit();
    std::printf("cycle %s on %s: EDU efficiency %.4f, battery %.3f kWh -> %s\n",
                cycle.name.c_str(), b.design.name.c_str(),
                result.edu_efficiency, result.battery_energy / 3.6e6,
                summary.c_str());
    return 0;
}

int cmd_optimize_run(const RunConfig& cfg) {
    require_inputs(cfg, {"materials", "design", "vehicle", "cycle", "device",
                         "gear", "economics"});
    const GradeLibrary lib = GradeLibrary::load_directory(cfg.materials_dir);

    OptimizationSetup setup;
    setup.base_design = load_design_file(cfg.design_path, lib);
    setup.bounds = cfg.bounds;
    setup.constraints = cfg.constraints;
    setup.points = cfg.points;
    setup.ga = cfg.ga;
    setup.search_grid = cfg.search_grid;
    setup.solver = cfg.solver;
    setup.dc_link_voltage = cfg.dc_link_voltage;

    CycleContext ctx;
    ctx.vehicle = load_vehicle_file(cfg.vehicle_path);
    ctx.cycle = load_cycle_csv(cfg.cycle_path);
    ctx.device = load_device_file(cfg.device_path);
    ctx.gear = load_gear_file(cfg.gear_path);
    ctx.strategy = cfg.strategy;
    ctx.v_dc = cfg.cycle_dc_voltage;
    ctx.f_sw = cfg.switching_frequency;
    ctx.fine_grid = cfg.map_grid;

    const EconomicsParams econ = load_economics_file(cfg.economics_path);

    OutputLock lock(cfg.output_dir);
    OutputTransaction txn;
    std::vector<ManifestEntry> outputs;

    const OptimizationResult result = optimize_run(setup);

    const std::string hv_path = cfg.output_dir + "/optimize_hypervolume.csv";
    {
        std::ostringstream out;
        out << "generation,hypervolume\n";
        for (std::size_t g = 0; g < result.hypervolume_history.size(); ++g)
            out << (g + 1) << ',' << format_double(result.hypervolume_history[g])
                << '\n';
        txn.track(hv_path);
        write_file_atomic(hv_path, out.str());
        outputs.push_back({hv_path, hash_file_hex(hv_path)});
    }

    const std::string archive_path = cfg.output_dir + "/optimize_archive.csv";
    txn.track(archive_path);
    write_candidates_csv(result.archive, archive_path);
    outputs.push_back({archive_path, hash_file_hex(archive_path)});

    const auto manifest_inputs =
        hash_inputs({cfg.design_path, cfg.vehicle_path, cfg.cycle_path,
                     cfg.device_path, cfg.gear_path, cfg.economics_path});

    if (result.all_infeasible) {
        json doc;
        doc["schema"] = "optimize_result/1";
        doc["config_hash"] = cfg.config_hash;
        doc["all_infeasible"] = true;
        doc["best_infeasible"] = {
            {"slot_width_m", result.best_infeasible.vars.slot_width},
            {"slot_depth_m", result.best_infeasible.vars.slot_depth},
            {"stator_yoke_width_m", result.best_infeasible.vars.stator_yoke_width},
            {"turns_per_phase", result.best_infeasible.vars.turns_per_phase},
            {"penalty", result.best_infeasible.penalty}};
        const std::string best_path = cfg.output_dir + "/optimize_best.json";
        txn.track(best_path);
        write_file_atomic(best_path, doc.dump(2) + "\n");
        outputs.push_back({best_path, hash_file_hex(best_path)});
        write_manifest(cfg.output_dir + "/manifest_optimize_run.json",
                       "optimize run", cfg, manifest_inputs, outputs);
        txn.commit();
        throw Infeasible("optimization found no feasible candidate",
                         result.best_infeasible.penalty);
    }

    // Re-score the nondominated set at full fidelity, including the drive
    // cycle, then price each member.
    std::vector<EvaluatedCandidate> front;
    for (const auto& cand : result.archive) {
        EvaluatedCandidate full = reevaluate_full(setup, ctx, cand.vars);
        if (!full.failed && std::isfinite(full.wltp_efficiency))
            full.tbv = tbv_score(full, econ);
        front.push_back(std::move(full));
    }
    std::vector<EvaluatedCandidate> front_members;
    for (std::size_t i : pareto_front(front))
        front_members.push_back(front[i]);

    const std::string front_path = cfg.output_dir + "/optimize_front.csv";
    txn.track(front_path);
    write_candidates_csv(front_members, front_path);
    outputs.push_back({front_path, hash_file_hex(front_path)});

    std::size_t best_idx;
    try {
        best_idx = select_best(front_members, econ);
    } catch (const std::invalid_argument& e) {
        throw Infeasible(e.what());
    }
    const EvaluatedCandidate& best = front_members[best_idx];

    json doc;
    doc["schema"] = "optimize_result/1";
    doc["config_hash"] = cfg.config_hash;
    doc["all_infeasible"] = false;
    doc["design"] = setup.base_design.name;
    doc["front_size"] = front_members.size();
    doc["best"] = {{"slot_width_m", best.vars.slot_width},
                   {"slot_depth_m", best.vars.slot_depth},
                   {"stator_yoke_width_m", best.vars.stator_yoke_width},
                   {"turns_per_phase", best.vars.turns_per_phase},
                   {"op1_efficiency", best.op1_efficiency},
                   {"op2_efficiency", best.op2_efficiency},
                   {"peak_torque_nm", best.peak_torque},
                   {"peak_power_w", best.peak_power},
                   {"required_dc_voltage_v", best.required_dc_voltage},
                   {"wltp_efficiency", best.wltp_efficiency},
                   {"penalty", best.penalty},
                   {"tbv", best.tbv}};
    const std::string best_path = cfg.output_dir + "/optimize_best.json";
    txn.track(best_path);
    write_file_atomic(best_path, doc.dump(2) + "\n");
    outputs.push_back({best_path, hash_file_hex(best_path)});

    write_manifest(cfg.output_dir + "/manifest_optimize_run.json",
                   "optimize run", cfg, manifest_inputs, outputs);
    txn.commit();
    std::printf("optimize: %zu archive members, front %zu, best slot_w=%.2f mm "
                "slot_d=%.2f mm yoke=%.2f mm tbv=%.2f\n",
                result.archive.size(), front_members.size(),
                best.vars.slot_width * 1e3, best.vars.slot_depth * 1e3,
                best.vars.stator_yoke_width * 1e3, best.tbv);
    return 0;
}

int cmd_report_compare(const RunConfig& cfg) {
    require_inputs(cfg, {"materials", "design", "reference_design", "vehicle",
                         "cycle", "device", "gear"});
    const GradeLibrary lib = GradeLibrary::load_directory(cfg.materials_dir);

    const std::string ref_vehicle = cfg.reference_vehicle_path.empty()
                                        ? cfg.vehicle_path
                                        : cfg.reference_vehicle_path;
    const std::string ref_device = cfg.reference_device_path.empty()
                                       ? cfg.device_path
                                       : cfg.reference_device_path;
    const std::string ref_gear =
        cfg.reference_gear_path.empty() ? cfg.gear_path : cfg.reference_gear_path;

    const EduBundle main_b = load_edu(cfg, lib, cfg.design_path,
                                      cfg.vehicle_path, cfg.device_path,
                                      cfg.gear_path);
    const EduBundle ref_b =
        load_edu(cfg, lib, cfg.reference_design_path, ref_vehicle, ref_device,
                 ref_gear);
    const DriveCycle cycle = load_cycle_csv(cfg.cycle_path);

    OutputLock lock(cfg.output_dir);
    OutputTransaction txn;

    struct EduReport {
        double wltp = 0.0, cruise70 = 0.0, cruise130 = 0.0;
        CycleResult cycle_result;
    };
    auto report_for = [&](const EduBundle& b) {
        EduSpec edu;
        edu.design = &b.design;
        edu.map = &b.map;
        edu.device = b.device;
        edu.gear = b.gear;
        edu.strategy = cfg.strategy;
        edu.v_dc = cfg.cycle_dc_voltage;
        edu.f_sw = cfg.switching_frequency;
        edu.solver = cfg.solver;
        EduReport r;
        r.cycle_result = run_cycle(demand_trace(cycle, b.vehicle), edu,
                                   b.vehicle, cycle.name);
        r.wltp = r.cycle_result.edu_efficiency;
        r.cruise70 = cruise_efficiency(70.0, b.vehicle, edu);
        r.cruise130 = cruise_efficiency(130.0, b.vehicle, edu);
        return r;
    };
    const EduReport main_r = report_for(main_b);
    const EduReport ref_r = report_for(ref_b);

    std::ostringstream out;
    out << "quantity," << main_b.design.name << ',' << ref_b.design.name
        << ",delta\n";
    auto row = [&](const char* name, double a, double b) {
        out << name << ',' << format_double(a) << ',' << format_double(b) << ','
            << format_double(a - b) << '\n';
    };
    row("wltp_efficiency", main_r.wltp, ref_r.wltp);
    row("cruise70_efficiency", main_r.cruise70, ref_r.cruise70);
    row("cruise130_efficiency", main_r.cruise130, ref_r.cruise130);
    const std::string cmp_path = cfg.output_dir + "/comparison.csv";
    txn.track(cmp_path);
    write_file_atomic(cmp_path, out.str());

    const EnergyHistogram main_h = energy_histogram(
        main_r.cycle_result, cfg.histogram_torque_bins, cfg.histogram_speed_bins);
    const EnergyHistogram ref_h = energy_histogram(
        ref_r.cycle_result, cfg.histogram_torque_bins, cfg.histogram_speed_bins);
    const std::string main_h_path =
        cfg.output_dir + "/histogram_" + main_b.design.name + ".csv";
    const std::string ref_h_path =
        cfg.output_dir + "/histogram_" + ref_b.design.name + ".csv";
    txn.track(main_h_path);
    txn.track(ref_h_path);
    export_histogram_csv(main_h, main_h_path);
    export_histogram_csv(ref_h, ref_h_path);

    write_manifest(
        cfg.output_dir + "/manifest_report_compare.json", "report compare",
        cfg,
        hash_inputs({cfg.design_path, cfg.reference_design_path,
                     cfg.vehicle_path, ref_vehicle, cfg.cycle_path,
                     cfg.device_path, ref_device, cfg.gear_path, ref_gear}),
        hash_inputs({cmp_path, main_h_path, ref_h_path}));
    txn.commit();
    std::printf("compare %s vs %s: wltp %.4f vs %.4f, 70 km/h %.4f vs %.4f, "
                "130 km/h %.4f vs %.4f -> %s\n",
                main_b.design.name.c_str(), ref_b.design.name.c_str(),
                main_r.wltp, ref_r.wltp, main_r.cruise70, ref_r.cruise70,
                main_r.cruise130, ref_r.cruise130, cmp_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wound-field/PM synchronous machine design and drive-cycle toolkit"};
    app.require_subcommand(1);
    // Global options remain usable after the subcommand, e.g.
    // `wfopt map build --config run.json`.
    app.fallthrough();

    std::string config_path = "wfopt.json";
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "run configuration JSON")
        ->envname("WFOPT_CONFIG");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "random seed (overrides config)");
    app.add_option("--threads", threads, "worker threads (overrides config)");

    auto* materials = app.add_subcommand("materials", "material grade operations");
    materials->require_subcommand(1);
    auto* mat_validate = materials->add_subcommand(
        "validate", "load and validate every grade in the materials directory");

    auto* map_cmd = app.add_subcommand("map", "flux-linkage map operations");
    map_cmd->require_subcommand(1);
    auto* map_build = map_cmd->add_subcommand(
        "build", "solve the reluctance network over the current grid");

    auto* control = app.add_subcommand("control", "operating-point solvers");
    control->require_subcommand(1);
    double op_torque = 0.0, op_speed = 0.0, op_vdc = -1.0, env_vdc = -1.0;
    bool op_sweep = false;
    std::string op_map_path, env_map_path;
    auto* control_mtpl = control->add_subcommand(
        "mtpl", "minimum-loss operating point (plus optional efficiency sweep)");
    control_mtpl->add_option("--torque", op_torque, "requested torque, N*m")
        ->required();
    control_mtpl->add_option("--speed", op_speed, "mechanical speed, rpm")
        ->required();
    control_mtpl->add_option("--vdc", op_vdc, "DC link voltage, V");
    control_mtpl->add_flag("--sweep", op_sweep,
                           "also sweep the efficiency map grid");
    control_mtpl->add_option("--map", op_map_path, "prebuilt flux map JSON");
    auto* control_env = control->add_subcommand(
        "envelope", "peak torque/power vs speed");
    control_env->add_option("--vdc", env_vdc, "DC link voltage, V");
    control_env->add_option("--map", env_map_path, "prebuilt flux map JSON");

    auto* cycle_cmd = app.add_subcommand("cycle", "drive-cycle simulation");
    cycle_cmd->require_subcommand(1);
    auto* cycle_run_cmd = cycle_cmd->add_subcommand(
        "run", "simulate the configured drive cycle through the EDU");

    auto* optimize = app.add_subcommand("optimize", "design optimization");
    optimize->require_subcommand(1);
    auto* optimize_run_cmd = optimize->add_subcommand(
        "run", "NSGA-II stator search with cycle-level re-scoring");

    auto* report = app.add_subcommand("report", "study reports");
    report->require_subcommand(1);
    auto* report_compare = report->add_subcommand(
        "compare", "design vs reference EDU on cycle and cruise points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_run_config(config_path);
        apply_env_overrides(cfg);
        if (app.count("--out") > 0) cfg.output_dir = out_dir;
        if (app.count("--seed") > 0) {
            cfg.seed = seed;
            cfg.ga.seed = seed;
        }
        if (app.count("--threads") > 0) {
            if (threads < 1) throw ConfigError("--threads: must be positive");
            cfg.threads = threads;
        }

        if (mat_validate->parsed()) return cmd_materials_validate(cfg);
        if (map_build->parsed()) return cmd_map_build(cfg);
        if (control_mtpl->parsed())
            return cmd_control_mtpl(cfg, op_torque, op_speed,
                                    op_vdc > 0 ? op_vdc : cfg.cycle_dc_voltage,
                                    op_sweep, op_map_path);
        if (control_env->parsed())
            return cmd_control_envelope(
                cfg, env_vdc > 0 ? env_vdc : cfg.cycle_dc_voltage, env_map_path);
        if (cycle_run_cmd->parsed()) return cmd_cycle_run(cfg);
        if (optimize_run_cmd->parsed()) return cmd_optimize_run(cfg);
        if (report_compare->parsed()) return cmd_report_compare(cfg);
        std::fprintf(stderr, "error: no command selected\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 3;
    } catch (const SolverDivergence& e) {
        std::fprintf(stderr, "solver divergence: %s\n", e.what());
        return 4;
    } catch (const CycleError& e) {
        std::fprintf(stderr, "cycle infeasible: %s\n", e.what());
        return 5;
    } catch (const Infeasible& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
