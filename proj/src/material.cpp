#include "wfopt/material.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "wfopt/textfile.hpp"

namespace wfopt {

void MaterialSpec::validate() const {
    if (name.empty()) throw ValidationError("material: name is empty");
    const std::string tag = "material '" + name + "': ";
    if (bh_curve.size() < 2) throw ValidationError(tag + "bh_curve needs at least 2 points");
    if (bh_curve.front().first != 0.0 || bh_curve.front().second != 0.0)
        throw ValidationError(tag + "bh_curve must start at (0, 0)");
    for (std::size_t i = 1; i < bh_curve.size(); ++i) {
        if (!(bh_curve[i].first > bh_curve[i - 1].first))
            throw ValidationError(tag + "bh_curve H not strictly increasing at knot " +
                                  std::to_string(i));
        if (!(bh_curve[i].second > bh_curve[i - 1].second))
            throw ValidationError(tag + "bh_curve B not strictly increasing at knot " +
                                  std::to_string(i));
    }
    if (k_h < 0.0) throw ValidationError(tag + "k_h must be >= 0");
    if (k_e_ref < 0.0) throw ValidationError(tag + "k_e_ref must be >= 0");
    if (k_exc < 0.0) throw ValidationError(tag + "k_exc must be >= 0");
    if (alpha < 1.5 || alpha > 2.5) throw ValidationError(tag + "alpha must be in [1.5, 2.5]");
    if (density <= 0.0) throw ValidationError(tag + "density must be positive");
    if (cost < 0.0) throw ValidationError(tag + "cost must be >= 0");
    if (stacking_factor < 0.90 || stacking_factor > 1.0)
        throw ValidationError(tag + "stacking_factor must be in [0.90, 1.0]");
    if (kind == MaterialKind::smc) {
        if (stacking_factor != 1.0)
            throw ValidationError(tag + "smc stacking_factor must be exactly 1.0");
    } else {
        if (thickness <= 0.0) throw ValidationError(tag + "laminated thickness must be positive");
    }
}

double MaterialSpec::eddy_coefficient() const {
    if (kind == MaterialKind::smc) return k_e_ref;
    const double r = thickness / kEddyRefThickness;
    return k_e_ref * r * r;
}

double bh_lookup(const MaterialSpec& material, double h) {
    if (h < 0.0) throw std::domain_error("bh_lookup: h must be >= 0");
    const auto& c = material.bh_curve;
    if (h >= c.back().first) {
        return c.back().second + kMu0 * (h - c.back().first);
    }
    // first knot with H > h; curve starts at (0,0) so h >= c[0].first
    auto it = std::upper_bound(c.begin(), c.end(), h,
                               [](double v, const std::pair<double, double>& p) {
                                   return v < p.first;
                               });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double t = (h - lo.first) / (hi.first - lo.first);
    return lo.second + t * (hi.second - lo.second);
}

double bh_slope(const MaterialSpec& material, double h) {
    if (h < 0.0) throw std::domain_error("bh_slope: h must be >= 0");
    const auto& c = material.bh_curve;
    if (h >= c.back().first) return kMu0;
    auto it = std::upper_bound(c.begin(), c.end(), h,
                               [](double v, const std::pair<double, double>& p) {
                                   return v < p.first;
                               });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    return (hi.second - lo.second) / (hi.first - lo.first);
}

double iron_loss_density(const MaterialSpec& material, double b_peak, double f) {
    if (b_peak < 0.0) throw std::domain_error("iron_loss_density: b_peak must be >= 0");
    if (f < 0.0) throw std::domain_error("iron_loss_density: f must be >= 0");
    const double k_e = material.eddy_coefficient();
    const double hyst = material.k_h * f * std::pow(b_peak, material.alpha);
    const double eddy = k_e * f * f * b_peak * b_peak;
    const double excess = material.k_exc * std::pow(f, 1.5) * std::pow(b_peak, 1.5);
    return hyst + eddy + excess;
}

StackProperties effective_stack_properties(const MaterialSpec& material, double gross_length) {
    if (gross_length <= 0.0)
        throw std::domain_error("effective_stack_properties: gross_length must be positive");
    StackProperties p;
    p.magnetic_length = material.stacking_factor * gross_length;
    p.core_mass_per_area = material.density * p.magnetic_length;
    return p;
}

MaterialSpec load_material_file(const std::string& path) {
    const TextRecord rec = TextRecord::parse_file(path);
    MaterialSpec m;
    m.name = rec.get_string("name");
    const std::string kind = rec.get_string("kind");
    if (kind == "laminated")
        m.kind = MaterialKind::laminated;
    else if (kind == "smc")
        m.kind = MaterialKind::smc;
    else
        throw ConfigError(path + ": kind must be 'laminated' or 'smc', got '" + kind + "'");
    m.k_h = rec.get_double("k_h");
    m.alpha = rec.get_double("alpha");
    m.k_e_ref = rec.get_double("k_e_ref");
    m.k_exc = rec.get_double("k_exc");
    m.thickness = rec.get_double_or("thickness", 0.0);
    m.stacking_factor = rec.get_double("stacking_factor");
    m.density = rec.get_double("density");
    m.cost = rec.get_double("cost");
    for (const auto& row : rec.get_table("bh")) {
        if (row.size() != 2)
            throw ConfigError(path + ": bh rows must be 'H B' pairs");
        m.bh_curve.emplace_back(row[0], row[1]);
    }
    m.validate();
    return m;
}

GradeLibrary GradeLibrary::load_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    GradeLibrary lib;
    if (!fs::is_directory(dir)) throw ConfigError("material directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".mat") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("no .mat files in " + dir);
    for (const auto& p : paths) lib.add(load_material_file(p));
    return lib;
}

const MaterialSpec& GradeLibrary::get(const std::string& name) const {
    auto it = grades_.find(name);
    if (it == grades_.end()) throw ConfigError("unknown material grade: " + name);
    return it->second;
}

void GradeLibrary::add(MaterialSpec spec) {
    spec.validate();
    grades_[spec.name] = std::move(spec);
}

}  // namespace wfopt
