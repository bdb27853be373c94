#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "helpers.hpp"
#include "wfopt/powertrain.hpp"
#include "wfopt/textfile.hpp"

using namespace wfopt;

namespace {

const GradeLibrary& grades() {
    static const GradeLibrary lib = testutil::shipped_grades();
    return lib;
}

const MachineDesign& m0() {
    static const MachineDesign d = testutil::shipped_design("wfsm_m0.design", grades());
    return d;
}

const FluxLinkageMap& m0_map() {
    static const FluxLinkageMap m = build_flux_map(m0(), GridSpec{9, 9, 5});
    return m;
}

VehicleParams vehicle() {
    return load_vehicle_file(testutil::data_dir() + "/vehicles/small_ev_wfsm.veh");
}

EduSpec m0_edu() {
    EduSpec edu;
    edu.design = &m0();
    edu.map = &m0_map();
    edu.device = load_device_file(testutil::data_dir() + "/devices/sic_440.dev");
    edu.gear = load_gear_file(testutil::data_dir() + "/gears/single_stage_7.gear");
    edu.strategy = ControlStrategy::mtpl;
    edu.v_dc = 800.0;
    edu.f_sw = 10e3;
    return edu;
}

DriveCycle make_cycle(std::vector<double> t, std::vector<double> v_kmh) {
    DriveCycle c;
    c.name = "synthetic";
    c.time_s = std::move(t);
    for (double v : v_kmh) c.speed_ms.push_back(v / 3.6);
    return c;
}

}  // namespace

TEST_CASE("vehicle file loads and validates") {
    const VehicleParams v = vehicle();
    CHECK(v.name == "small_ev_wfsm");
    CHECK(v.mass == 1900.0);
    CHECK(v.gear_ratio == 7.0);
    CHECK(v.regen_fraction == 0.85);

    VehicleParams bad = v;
    bad.mass = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = v;
    bad.regen_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = v;
    bad.driveline = "awd";
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("drive cycle csv loader") {
    const std::string dir = testutil::temp_dir();

    write_file_atomic(dir + "/ok.csv",
                      "time_s,speed_kmh\n0,0\n10,20\n20,20\n30,0\n");
    const DriveCycle c = load_cycle_csv(dir + "/ok.csv");
    CHECK(c.time_s.size() == 4);
    CHECK(c.speed_ms[1] == 20.0 / 3.6);
    CHECK(c.duration() == 30.0);

    write_file_atomic(dir + "/hdr.csv", "time,speed\n0,0\n1,1\n");
    CHECK_THROWS_AS(load_cycle_csv(dir + "/hdr.csv"), ConfigError);
    write_file_atomic(dir + "/num.csv", "time_s,speed_kmh\n0,zero\n");
    CHECK_THROWS_AS(load_cycle_csv(dir + "/num.csv"), ConfigError);
    write_file_atomic(dir + "/time.csv", "time_s,speed_kmh\n0,0\n0,10\n");
    CHECK_THROWS_AS(load_cycle_csv(dir + "/time.csv"), ValidationError);
    write_file_atomic(dir + "/neg.csv", "time_s,speed_kmh\n0,0\n1,-5\n");
    CHECK_THROWS_AS(load_cycle_csv(dir + "/neg.csv"), ValidationError);
    CHECK_THROWS_AS(load_cycle_csv(dir + "/missing.csv"), ConfigError);

    const DriveCycle w = load_cycle_csv(testutil::data_dir() + "/cycles/wltp_like.csv");
    CHECK(w.duration() > 1000.0);
    double vmax = 0.0;
    for (double v : w.speed_ms) vmax = std::max(vmax, v);
    CHECK(vmax > 120.0 / 3.6);
}

TEST_CASE("machine-shaft demand from a speed trace") {
    const VehicleParams v = vehicle();

    SUBCASE("acceleration interval") {
        const auto trace = demand_trace(make_cycle({0.0, 2.0}, {0.0, 20.0}), v);
        REQUIRE(trace.size() == 1);
        CHECK(trace[0].time == 0.0);
        CHECK(trace[0].duration == 2.0);
        CHECK(trace[0].torque ==
              doctest::Approx(272.41995740740737).epsilon(1e-12));
        CHECK(trace[0].speed ==
              doctest::Approx(55.55555555555556).epsilon(1e-12));
    }

    SUBCASE("braking interval is scaled by the regen fraction") {
        const auto trace = demand_trace(make_cycle({0.0, 2.0}, {30.0, 10.0}), v);
        REQUIRE(trace.size() == 1);
        CHECK(trace[0].torque ==
              doctest::Approx(-216.6881750925926).epsilon(1e-12));

        VehicleParams coast = v;
        coast.regen_fraction = 0.0;
        const auto none = demand_trace(make_cycle({0.0, 2.0}, {30.0, 10.0}), coast);
        CHECK(none[0].torque == 0.0);
        coast.regen_fraction = 1.0;
        const auto full = demand_trace(make_cycle({0.0, 2.0}, {30.0, 10.0}), coast);
        CHECK(full[0].torque ==
              doctest::Approx(-254.9272648148148).epsilon(1e-12));
    }

    SUBCASE("standstill interval carries no demand") {
        const auto trace = demand_trace(make_cycle({0.0, 5.0, 10.0}, {0.0, 0.0, 40.0}), v);
        REQUIRE(trace.size() == 2);
        CHECK(trace[0].torque == 0.0);
        CHECK(trace[0].speed == 0.0);
        CHECK(trace[1].torque > 0.0);
    }
}

TEST_CASE("cycle run keeps exact energy books") {
    const VehicleParams v = vehicle();
    const EduSpec edu = m0_edu();
    const DriveCycle cycle =
        make_cycle({0.0, 5.0, 15.0, 20.0, 30.0, 40.0},
                   {0.0, 30.0, 50.0, 50.0, 0.0, 0.0});
    const auto trace = demand_trace(cycle, v);
    const CycleResult res = run_cycle(trace, edu, v, cycle.name);

    REQUIRE(res.steps.size() == 5);
    CHECK(res.cycle_name == "synthetic");
    CHECK(res.design_name == m0().name);

    for (const CycleStep& s : res.steps) {
        CHECK(s.battery_power == s.wheel_power + s.losses.total());
        CHECK_FALSE(s.clipped);
    }
    const CycleStep& stop = res.steps.back();
    CHECK(stop.speed_rpm == 0.0);
    CHECK(stop.battery_power == 0.0);
    CHECK(stop.losses.total() == 0.0);

    CHECK(res.battery_energy == res.net_wheel_energy + res.loss_energy.total());
    CHECK(res.net_wheel_energy ==
          doctest::Approx(res.traction_energy - res.regen_energy).epsilon(1e-12));
    CHECK(res.traction_energy > 0.0);
    CHECK(res.regen_energy > 0.0);
    CHECK(res.aux_energy == 300.0 * 40.0);
    CHECK(res.clipped_energy == 0.0);
    CHECK(res.clipped_fraction == 0.0);
    CHECK(res.edu_efficiency == res.net_wheel_energy / res.battery_energy);
    CHECK(res.edu_efficiency > 0.0);
    CHECK(res.edu_efficiency < 1.0);

    double backsum = 0.0;
    for (const CycleStep& s : res.steps) backsum += s.battery_power * s.duration;
    CHECK(backsum == doctest::Approx(res.battery_energy).epsilon(1e-12));
}

TEST_CASE("demands beyond the envelope clip and eventually raise") {
    const VehicleParams v = vehicle();
    const EduSpec edu = m0_edu();
    // 0 to 100 km/h in 2 s needs far more torque than the machine has.
    const auto trace = demand_trace(make_cycle({0.0, 2.0, 4.0}, {0.0, 100.0, 100.0}), v);
    CHECK_THROWS_AS(run_cycle(trace, edu, v, "sprint"), CycleError);
}

TEST_CASE("energy histogram conserves the processed energy") {
    const VehicleParams v = vehicle();
    const EduSpec edu = m0_edu();
    const DriveCycle cycle =
        make_cycle({0.0, 5.0, 15.0, 20.0, 30.0, 40.0},
                   {0.0, 30.0, 50.0, 50.0, 0.0, 0.0});
    const CycleResult res = run_cycle(demand_trace(cycle, v), edu, v, cycle.name);

    const EnergyHistogram h = energy_histogram(res, 4, 4);
    double sum = 0.0;
    for (double e : h.energy) sum += e;
    CHECK(sum == doctest::Approx(h.total_energy).epsilon(1e-12));
    CHECK(h.total_energy ==
          doctest::Approx(res.traction_energy + res.regen_energy).epsilon(1e-12));
    CHECK(h.torque_edges.front() == 0.0);
    CHECK(h.speed_edges.front() == 0.0);
    REQUIRE(h.normalized.size() == 16);
    double nmax = 0.0;
    for (double n : h.normalized) nmax = std::max(nmax, n);
    CHECK(nmax == 1.0);

    REQUIRE(h.hot_torque[0] >= 0);
    REQUIRE(h.hot_torque[1] >= 0);
    const double e0 = h.energy[h.index(h.hot_torque[0], h.hot_speed[0])];
    const double e1 = h.energy[h.index(h.hot_torque[1], h.hot_speed[1])];
    CHECK(e0 >= e1);
    for (int t = 0; t < 4; ++t) {
        for (int s = 0; s < 4; ++s) {
            const double e = h.energy[h.index(t, s)];
            CHECK(e <= e0);
            if (t != h.hot_torque[0] || s != h.hot_speed[0]) CHECK(e <= e1);
        }
    }

    const EnergyHistogram hl = energy_histogram(res, 3, 3, HistogramMode::loss);
    double lsum = 0.0;
    for (const CycleStep& s : res.steps) lsum += s.losses.total() * s.duration;
    CHECK(hl.total_energy == doctest::Approx(lsum).epsilon(1e-12));

    CHECK_THROWS_AS(energy_histogram(res, 0, 4), ConfigError);
}

TEST_CASE("steady cruise efficiency") {
    const VehicleParams v = vehicle();
    const EduSpec edu = m0_edu();
    const double e80 = cruise_efficiency(80.0, v, edu);
    CHECK(e80 > 0.5);
    CHECK(e80 < 1.0);
    CHECK(e80 > cruise_efficiency(10.0, v, edu));
    CHECK_THROWS_AS(cruise_efficiency(0.0, v, edu), Infeasible);
}

TEST_CASE("cycle exporters") {
    const VehicleParams v = vehicle();
    const EduSpec edu = m0_edu();
    const DriveCycle cycle = make_cycle({0.0, 5.0, 10.0}, {0.0, 40.0, 40.0});
    const CycleResult res = run_cycle(demand_trace(cycle, v), edu, v, cycle.name);
    const std::string dir = testutil::temp_dir();

    export_cycle_summary_json(res, dir + "/summary.json", "cafef00d");
    const auto j = nlohmann::json::parse(read_file(dir + "/summary.json"));
    CHECK(j.at("format") == "cycle_summary/1");
    CHECK(j.at("config_hash") == "cafef00d");
    CHECK(j.at("battery_energy_j").get<double>() == res.battery_energy);
    CHECK(j.at("edu_efficiency").get<double>() == res.edu_efficiency);
    CHECK(j.at("loss_energy").at("inverter_j").get<double>() ==
          res.loss_energy.inverter);
    CHECK(j.at("loss_energy").at("gearbox_j").get<double>() ==
          res.loss_energy.gearbox);

    export_cycle_steps_csv(res, dir + "/steps.csv");
    const std::string steps = read_file(dir + "/steps.csv");
    std::size_t lines = 0;
    for (char c : steps) lines += c == '\n';
    CHECK(lines == 1 + res.steps.size());
    CHECK(steps.rfind("time_s,duration_s,speed_rpm,", 0) == 0);

    const EnergyHistogram h = energy_histogram(res, 2, 3);
    export_histogram_csv(h, dir + "/hist.csv");
    const std::string hist = read_file(dir + "/hist.csv");
    lines = 0;
    for (char c : hist) lines += c == '\n';
    CHECK(lines == 1 + 2 * 3);
}
