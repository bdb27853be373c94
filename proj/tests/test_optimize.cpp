#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "wfopt/optimize.hpp"
#include "wfopt/textfile.hpp"

using namespace wfopt;

namespace {

const GradeLibrary& grades() {
    static const GradeLibrary lib = testutil::shipped_grades();
    return lib;
}

OptimizationSetup m0_setup() {
    OptimizationSetup setup;
    setup.base_design = testutil::shipped_design("wfsm_m0.design", grades());
    setup.search_grid = GridSpec{5, 5, 3};
    return setup;
}

DesignVariables base_vars(const MachineDesign& d) {
    DesignVariables v;
    v.slot_width = d.slot_width;
    v.slot_depth = d.slot_depth;
    v.stator_yoke_width = d.stator_yoke_width;
    return v;
}

}  // namespace

TEST_CASE("traction requirement table") {
    const ConstraintSpec spec = ConstraintSpec::benchmark();
    spec.validate();
    REQUIRE(spec.items.size() == 7);
    CHECK(spec.items[0].name == "op1_torque");
    CHECK(spec.items[0].kind == ConstraintKind::lower_bound);
    CHECK(spec.items[0].threshold == 145.0);
    CHECK(spec.items[0].weight == 6.0);
    CHECK(spec.items[1].name == "op1_efficiency");
    CHECK(spec.items[1].kind == ConstraintKind::maximize);
    CHECK(spec.items[1].weight == 8.0);
    CHECK(spec.items[2].threshold == 40.0);
    CHECK(spec.items[3].name == "op2_efficiency");
    CHECK(spec.items[3].weight == 7.0);
    CHECK(spec.items[4].name == "peak_torque");
    CHECK(spec.items[4].threshold == 550.0);
    CHECK(spec.items[4].weight == 10.0);
    CHECK(spec.items[5].name == "peak_power");
    CHECK(spec.items[5].threshold == 200e3);
    CHECK(spec.items[6].name == "dc_voltage");
    CHECK(spec.items[6].kind == ConstraintKind::upper_bound);
    CHECK(spec.items[6].threshold == 625.0);
}

TEST_CASE("requirement table validation") {
    ConstraintSpec spec;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.items = {{"", ConstraintKind::lower_bound, 1.0, 5.0}};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.items = {{"x", ConstraintKind::lower_bound, 1.0, 0.5}};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.items = {{"x", ConstraintKind::lower_bound, 1.0, 11.0}};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.items = {{"x", ConstraintKind::lower_bound, 0.0, 5.0}};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.items = {{"x", ConstraintKind::maximize, 0.0, 5.0}};
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("design bounds validation") {
    DesignBounds b;
    CHECK_NOTHROW(b.validate());
    CHECK(b.n_vars() == 3);
    b.optimize_turns = true;
    CHECK(b.n_vars() == 4);
    b.turns_max = b.turns_min;
    CHECK_THROWS_AS(b.validate(), ValidationError);
    b = DesignBounds{};
    b.slot_width_min = 0.0;
    CHECK_THROWS_AS(b.validate(), ValidationError);
    b = DesignBounds{};
    b.slot_depth_max = b.slot_depth_min;
    CHECK_THROWS_AS(b.validate(), ValidationError);
}

TEST_CASE("variables overlay the base design") {
    const MachineDesign base = testutil::shipped_design("wfsm_m0.design", grades());
    DesignVariables v{6.0e-3, 21.0e-3, 14.0e-3, 0};
    const MachineDesign d = apply_variables(base, v);
    CHECK(d.slot_width == 6.0e-3);
    CHECK(d.slot_depth == 21.0e-3);
    CHECK(d.stator_yoke_width == 14.0e-3);
    CHECK(d.turns_per_phase == base.turns_per_phase);
    CHECK(d.rotor_pole_width == base.rotor_pole_width);
    CHECK(d.stator_mat == base.stator_mat);
    v.turns_per_phase = 40;
    CHECK(apply_variables(base, v).turns_per_phase == 40);
}

TEST_CASE("candidate penalty follows the weighted relative violation rule") {
    OptimizationSetup setup = m0_setup();
    const DesignVariables vars = base_vars(setup.base_design);

    const EvaluatedCandidate probe = evaluate_candidate(setup, vars);
    REQUIRE_FALSE(probe.failed);
    REQUIRE(probe.constraint_values.size() == 7);
    CHECK(probe.constraint_values[0].first == "op1_torque");
    CHECK(probe.op1_efficiency > 0.0);
    CHECK(probe.op1_efficiency < 1.0);
    CHECK(probe.peak_torque > 0.0);
    CHECK(probe.stator_core_mass > 0.0);
    CHECK(probe.rotor_core_mass > 0.0);
    CHECK(probe.magnet_mass == 0.0);
    CHECK(probe.core_material_cost ==
          probe.stator_core_mass * setup.base_design.stator_mat->cost +
              probe.rotor_core_mass * setup.base_design.rotor_mat->cost);

    SUBCASE("satisfied bounds cost nothing") {
        setup.constraints.items = {
            {"peak_torque", ConstraintKind::lower_bound, 0.5 * probe.peak_torque, 10.0},
            {"dc_voltage", ConstraintKind::upper_bound,
             2.0 * probe.required_dc_voltage, 8.0},
            {"op1_efficiency", ConstraintKind::maximize, 0.0, 8.0},
        };
        const EvaluatedCandidate c = evaluate_candidate(setup, vars);
        CHECK(c.penalty == 0.0);
        CHECK(c.feasible());
    }

    SUBCASE("violations add weight times relative shortfall") {
        const double t_hi = 1.25 * probe.peak_torque;
        const double v_lo = 0.5 * probe.required_dc_voltage;
        setup.constraints.items = {
            {"peak_torque", ConstraintKind::lower_bound, t_hi, 10.0},
            {"dc_voltage", ConstraintKind::upper_bound, v_lo, 8.0},
            {"op2_efficiency", ConstraintKind::maximize, 0.0, 7.0},
        };
        const EvaluatedCandidate c = evaluate_candidate(setup, vars);
        double expect = 0.0;
        expect += 10.0 * (t_hi - c.peak_torque) / t_hi;
        expect += 8.0 * (c.required_dc_voltage - v_lo) / v_lo;
        CHECK(c.penalty == expect);
        CHECK_FALSE(c.feasible());
        CHECK(c.penalty > 0.0);
    }
}

TEST_CASE("invalid geometry fails the candidate instead of throwing") {
    const OptimizationSetup setup = m0_setup();
    DesignVariables vars = base_vars(setup.base_design);
    vars.slot_width = 20.0e-3;  // wider than the slot pitch
    const EvaluatedCandidate c = evaluate_candidate(setup, vars);
    CHECK(c.failed);
    CHECK_FALSE(c.failure_reason.empty());
    CHECK(c.penalty == std::numeric_limits<double>::infinity());
    CHECK_FALSE(c.feasible());
}

TEST_CASE("pareto filter equals the quadratic oracle on random candidates") {
    std::mt19937_64 rng(1234);
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<EvaluatedCandidate> cands(1000);
    std::vector<std::pair<double, double>> pts;
    for (auto& c : cands) {
        c.op1_efficiency = 0.85 + 0.10 * std::floor(unit() * 50.0) / 50.0;
        c.op2_efficiency = 0.85 + 0.10 * std::floor(unit() * 50.0) / 50.0;
        pts.emplace_back(c.op1_efficiency, c.op2_efficiency);
    }
    CHECK(pareto_front(cands) == testutil::slow_front(pts));
}

TEST_CASE("pareto filter on the published seven-variant table") {
    const std::vector<std::pair<double, double>> table{
        {90.7, 94.8}, {89.7, 93.6}, {90.5, 94.6}, {91.0, 94.9},
        {89.9, 93.6}, {91.3, 94.6}, {91.5, 94.8},
    };
    std::vector<EvaluatedCandidate> cands(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        cands[i].op1_efficiency = table[i].first;
        cands[i].op2_efficiency = table[i].second;
    }
    CHECK(pareto_front(cands) == std::vector<std::size_t>{3, 6});
}

TEST_CASE("economics file and business-value scoring") {
    const EconomicsParams econ =
        load_economics_file(testutil::data_dir() + "/economics.eco");
    CHECK(econ.value_per_pp_wltp == 180.0);
    CHECK(econ.wltp_reference == 0.88);
    CHECK(econ.value_per_nm == 0.5);
    CHECK(econ.torque_reference == 550.0);
    CHECK(econ.magnet_price == 90.0);
    CHECK(econ.production_adder == 40.0);

    EvaluatedCandidate c;
    c.wltp_efficiency = 0.92;
    c.peak_torque = 620.0;
    c.core_material_cost = 100.0;
    c.magnet_mass = 0.0;
    CHECK(tbv_score(c, econ) == doctest::Approx(615.0).epsilon(1e-12));

    // Below the torque reference the margin term clamps to zero.
    c.peak_torque = 500.0;
    CHECK(tbv_score(c, econ) == doctest::Approx(580.0).epsilon(1e-12));

    // Magnet mass is a cost.
    c.magnet_mass = 2.0;
    CHECK(tbv_score(c, econ) == doctest::Approx(400.0).epsilon(1e-12));

    EvaluatedCandidate unscored;
    CHECK_THROWS_AS(tbv_score(unscored, econ), std::invalid_argument);

    EconomicsParams bad = econ;
    bad.wltp_reference = 1.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = econ;
    bad.torque_reference = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = econ;
    bad.magnet_price = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("best-candidate selection and tie breaks") {
    EconomicsParams econ;
    econ.value_per_pp_wltp = 100.0;
    econ.wltp_reference = 0.90;
    econ.value_per_nm = 0.0;
    econ.torque_reference = 550.0;
    econ.magnet_price = 0.0;
    econ.production_adder = 0.0;

    auto cand = [](double wltp, double op2, double slot_w) {
        EvaluatedCandidate c;
        c.wltp_efficiency = wltp;
        c.op2_efficiency = op2;
        c.vars.slot_width = slot_w;
        return c;
    };

    std::vector<EvaluatedCandidate> front{
        cand(0.92, 0.940, 5e-3),   // tbv 200
        cand(0.93, 0.941, 5e-3),   // tbv 300, best
        cand(0.93, 0.942, 6e-3),   // tbv 300, higher op2: wins the tie
        cand(0.91, 0.950, 4e-3),   // tbv 100
    };
    CHECK(select_best(front, econ) == 2);

    // Same tbv and op2: smaller variables win.
    front = {cand(0.93, 0.94, 6e-3), cand(0.93, 0.94, 5e-3)};
    CHECK(select_best(front, econ) == 1);

    // Unscored candidates are skipped.
    front = {EvaluatedCandidate{}, cand(0.91, 0.94, 5e-3)};
    CHECK(select_best(front, econ) == 1);

    front = {EvaluatedCandidate{}, EvaluatedCandidate{}};
    CHECK_THROWS_AS(select_best(front, econ), std::invalid_argument);
}

TEST_CASE("candidate csv export") {
    std::vector<EvaluatedCandidate> cands(2);
    cands[0].vars = {5e-3, 20e-3, 15e-3, 32};
    cands[1].vars = {6e-3, 18e-3, 12e-3, 0};
    const std::string dir = testutil::temp_dir();
    write_candidates_csv(cands, dir + "/cands.csv");
    const std::string csv = read_file(dir + "/cands.csv");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 3);
    CHECK(csv.rfind("slot_width_m,slot_depth_m,", 0) == 0);
}

TEST_CASE("tiny optimization run is deterministic") {
    OptimizationSetup setup = m0_setup();
    setup.ga.population = 4;
    setup.ga.generations = 1;
    setup.ga.seed = 7;

    const OptimizationResult a = optimize_run(setup);
    const OptimizationResult b = optimize_run(setup);
    CHECK(a.all_infeasible == b.all_infeasible);
    CHECK(a.hypervolume_history == b.hypervolume_history);
    REQUIRE(a.archive.size() == b.archive.size());
    for (std::size_t i = 0; i < a.archive.size(); ++i) {
        CHECK(a.archive[i].vars.slot_width == b.archive[i].vars.slot_width);
        CHECK(a.archive[i].vars.slot_depth == b.archive[i].vars.slot_depth);
        CHECK(a.archive[i].vars.stator_yoke_width ==
              b.archive[i].vars.stator_yoke_width);
        CHECK(a.archive[i].op1_efficiency == b.archive[i].op1_efficiency);
        CHECK(a.archive[i].op2_efficiency == b.archive[i].op2_efficiency);
        CHECK(a.archive[i].penalty == b.archive[i].penalty);
    }
    for (const auto& c : a.archive) {
        CHECK_FALSE(c.failed);
        CHECK(c.penalty == 0.0);
    }
}

TEST_CASE("full re-evaluation attaches a cycle efficiency") {
    OptimizationSetup setup = m0_setup();
    CycleContext ctx;
    ctx.vehicle = load_vehicle_file(testutil::data_dir() +
                                    "/vehicles/small_ev_wfsm.veh");
    DriveCycle cycle;
    cycle.name = "mini";
    cycle.time_s = {0.0, 5.0, 10.0, 15.0};
    cycle.speed_ms = {0.0, 30.0 / 3.6, 30.0 / 3.6, 0.0};
    ctx.cycle = cycle;
    ctx.device = load_device_file(testutil::data_dir() + "/devices/sic_440.dev");
    ctx.gear = load_gear_file(testutil::data_dir() + "/gears/single_stage_7.gear");
    ctx.fine_grid = GridSpec{5, 5, 3};

    const EvaluatedCandidate c =
        reevaluate_full(setup, ctx, base_vars(setup.base_design));
    REQUIRE_FALSE(c.failed);
    CHECK(std::isfinite(c.wltp_efficiency));
    CHECK(c.wltp_efficiency > 0.0);
    CHECK(c.wltp_efficiency < 1.0);

    const EconomicsParams econ =
        load_economics_file(testutil::data_dir() + "/economics.eco");
    CHECK(std::isfinite(tbv_score(c, econ)));
}
