#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wfopt/common.hpp"

namespace wfopt {

enum class MaterialKind { laminated, smc };

// Reference lamination thickness at which k_e_ref is specified.
inline constexpr double kEddyRefThickness = 0.25e-3;  // m

// Soft-magnetic material: B-H curve plus loss-separation coefficients.
// Immutable after construction; all member functions are pure.
struct MaterialSpec {
    std::string name;
    MaterialKind kind = MaterialKind::laminated;
    std::vector<std::pair<double, double>> bh_curve;  // (H A/m, B T), first point (0,0)
    double k_h = 0.0;      // hysteresis coefficient, W*s/kg per T^alpha
    double alpha = 2.0;    // Steinmetz exponent
    double k_e_ref = 0.0;  // eddy coefficient at kEddyRefThickness, W*s^2/kg/T^2
    double k_exc = 0.0;    // excess-loss coefficient, W*s^1.5/kg/T^1.5
    double thickness = 0.0;       // lamination thickness, m (laminated only)
    double stacking_factor = 1.0;
    double density = 0.0;  // kg/m^3
    double cost = 0.0;     // currency/kg

    // Throws ValidationError naming the violated invariant.
    void validate() const;

    // Effective eddy coefficient: d^2 scaling for laminations, thickness-free
    // particle-level term for SMC.
    double eddy_coefficient() const;
};

// Monotone piecewise-linear B(H); slope exactly mu0 beyond the last knot.
double bh_lookup(const MaterialSpec& material, double h);

// Derivative dB/dH of the interpolant (piecewise constant, right-continuous).
double bh_slope(const MaterialSpec& material, double h);

// Three-term loss separation: k_h*f*B^alpha + k_e*f^2*B^2 + k_exc*f^1.5*B^1.5.
double iron_loss_density(const MaterialSpec& material, double b_peak, double f);

struct StackProperties {
    double magnetic_length = 0.0;     // m of actual iron along the stack
    double core_mass_per_area = 0.0;  // kg/m^2 of stack cross-section
};

StackProperties effective_stack_properties(const MaterialSpec& material, double gross_length);

MaterialSpec load_material_file(const std::string& path);

// Named grade set loaded from a directory of *.mat files.
class GradeLibrary {
public:
    static GradeLibrary load_directory(const std::string& dir);

    const MaterialSpec& get(const std::string& name) const;
    bool has(const std::string& name) const { return grades_.count(name) > 0; }
    const std::map<std::string, MaterialSpec>& grades() const { return grades_; }

    void add(MaterialSpec spec);

private:
    std::map<std::string, MaterialSpec> grades_;
};

}  // namespace wfopt
