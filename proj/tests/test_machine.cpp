#include <doctest.h>

#include "helpers.hpp"
#include "wfopt/machine.hpp"
#include "wfopt/textfile.hpp"

using namespace wfopt;

TEST_CASE("baseline design geometry matches hand calculation") {
    const GradeLibrary lib = testutil::shipped_grades();
    const MachineDesign d = testutil::shipped_design("wfsm_m0.design", lib);
    const MachineGeometry g = derive_geometry(d);

    CHECK(g.slot_pitch == doctest::Approx(0.010799224746714915).epsilon(1e-14));
    CHECK(g.tooth_width == doctest::Approx(0.005999224746714916).epsilon(1e-14));
    CHECK(g.carter_factor == doctest::Approx(1.0482319756559326).epsilon(1e-12));
    CHECK(g.gap_d_effective ==
          doctest::Approx(0.0008385855805247461).epsilon(1e-12));
    CHECK(g.gap_q_effective ==
          doctest::Approx(4.0 * 0.0008385855805247461).epsilon(1e-12));
    CHECK(g.gap_area == doctest::Approx(0.006032446943514951).epsilon(1e-12));
    CHECK(g.mean_turn_length ==
          doctest::Approx(0.4474269757448106).epsilon(1e-12));
    CHECK(g.stator_resistance_20c ==
          doctest::Approx(0.024002320414224534).epsilon(1e-12));
    CHECK(g.leakage_inductance ==
          doctest::Approx(6.287161868769908e-05).epsilon(1e-12));
    CHECK(g.stator_tooth_mass ==
          doctest::Approx(5.253863786415783).epsilon(1e-12));
    CHECK(g.stator_yoke_mass ==
          doctest::Approx(11.282629148145139).epsilon(1e-12));
    CHECK(g.rotor_pole_mass == doctest::Approx(8.4297000256).epsilon(1e-12));
    CHECK(g.rotor_yoke_mass ==
          doctest::Approx(3.639281416886731).epsilon(1e-12));
    CHECK(g.stator_core_mass() ==
          doctest::Approx(g.stator_tooth_mass + g.stator_yoke_mass));
    CHECK(g.magnet_mass == 0.0);
}

TEST_CASE("open slots raise the carter factor") {
    const GradeLibrary lib = testutil::shipped_grades();
    const MachineDesign m6 = testutil::shipped_design("wfsm_m6.design", lib);
    const MachineGeometry g6 = derive_geometry(m6);
    CHECK(g6.carter_factor == doctest::Approx(1.2487532620364532).epsilon(1e-12));
    const MachineDesign m0 = testutil::shipped_design("wfsm_m0.design", lib);
    CHECK(g6.carter_factor > derive_geometry(m0).carter_factor);
}

TEST_CASE("magnet recoil widens the d gap on the reference machine") {
    const GradeLibrary lib = testutil::shipped_grades();
    const MachineDesign pm = testutil::shipped_design("pmsm_ref.design", lib);
    const MachineGeometry g = derive_geometry(pm);
    CHECK(g.gap_d_effective ==
          doctest::Approx(g.carter_factor * pm.airgap_length +
                          pm.magnet_thickness / 1.05)
              .epsilon(1e-12));
    CHECK(g.gap_q_effective ==
          doctest::Approx(pm.q_gap_factor * g.gap_d_effective).epsilon(1e-12));
    CHECK(g.gap_q_effective < g.gap_d_effective);
    CHECK(g.magnet_mass > 0.0);
}

TEST_CASE("resistance temperature scaling") {
    CHECK(resistance_at(0.02, 120.0) == doctest::Approx(0.02786).epsilon(1e-14));
    CHECK(resistance_at(0.02, 20.0) == 0.02);
}

TEST_CASE("design validation rejects inconsistent geometry") {
    const GradeLibrary lib = testutil::shipped_grades();
    MachineDesign d = testutil::shipped_design("wfsm_m0.design", lib);

    SUBCASE("slots wider than the bore circumference") {
        d.slot_width = 11e-3;
        CHECK_THROWS_AS(d.validate(), ValidationError);
    }
    SUBCASE("slot plus yoke exceeding the stator ring") {
        d.slot_depth = 30e-3;
        CHECK_THROWS_AS(d.validate(), ValidationError);
    }
    SUBCASE("slot count must align with phases and poles") {
        d.slot_count = 50;
        CHECK_THROWS_AS(d.validate(), ValidationError);
    }
    SUBCASE("smc stator demands open slots") {
        d.stator_material = "smc700";
        d.bind_materials(lib);
        d.tooth_tip = ToothTip::semi_closed;
        CHECK_THROWS_AS(d.validate(), ValidationError);
        d.tooth_tip = ToothTip::open_slot;
        CHECK_NOTHROW(d.validate());
    }
    SUBCASE("wound-field designs must not declare magnets") {
        d.magnet_thickness = 3e-3;
        CHECK_THROWS_AS(d.validate(), ValidationError);
    }
    SUBCASE("rotor yoke must leave pole room") {
        d.rotor_yoke_width = 60e-3;
        CHECK_THROWS_AS(d.validate(), ValidationError);
    }
    SUBCASE("ratings sanity") {
        d.ratings.max_voltage = 100.0;
        CHECK_THROWS_AS(d.validate(), ValidationError);
    }
}

TEST_CASE("design file parsing errors carry context") {
    const GradeLibrary lib = testutil::shipped_grades();
    const std::string dir = testutil::temp_dir();
    SUBCASE("unknown topology") {
        write_file_atomic(dir + "/x.design",
                          "name x\ntopology srm\npole_pairs 4\n");
        CHECK_THROWS_AS(load_design_file(dir + "/x.design", lib), ConfigError);
    }
    SUBCASE("missing required key") {
        write_file_atomic(dir + "/y.design", "name y\ntopology wfsm\n");
        CHECK_THROWS_AS(load_design_file(dir + "/y.design", lib), ConfigError);
    }
    SUBCASE("unknown material name") {
        std::string text = read_file(testutil::data_dir() +
                                     "/designs/wfsm_m0.design");
        const auto pos = text.find("stator_material no25");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 20, "stator_material nope");
        write_file_atomic(dir + "/z.design", text);
        CHECK_THROWS_AS(load_design_file(dir + "/z.design", lib), ConfigError);
    }
}

TEST_CASE("all shipped designs load and validate") {
    const GradeLibrary lib = testutil::shipped_grades();
    for (const char* f :
         {"wfsm_m0.design", "wfsm_m6.design", "pmsm_ref.design"}) {
        const MachineDesign d = testutil::shipped_design(f, lib);
        CHECK_NOTHROW(d.validate());
        const MachineGeometry g = derive_geometry(d);
        CHECK(g.tooth_width > 0.0);
        CHECK(g.conductor_area > 0.0);
        CHECK(g.rotor_pole_length > 0.0);
    }
}
