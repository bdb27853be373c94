#pragma once

#include <map>
#include <string>
#include <vector>

#include "wfopt/common.hpp"

namespace wfopt {

// Line-oriented parameter file:
//   key value            one scalar/string per line
//   table <name> ... end block of whitespace-separated numeric rows
//   # comment / blank    ignored
// Used for material, design, vehicle, device, gear and economics files.
class TextRecord {
public:
    static TextRecord parse_file(const std::string& path);
    static TextRecord parse_string(const std::string& text, const std::string& origin);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::string& get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    const std::vector<std::vector<double>>& get_table(const std::string& name) const;
    bool has_table(const std::string& name) const { return tables_.count(name) > 0; }

    const std::string& origin() const { return origin_; }
    const std::string& raw_text() const { return raw_; }

private:
    std::string origin_;
    std::string raw_;
    std::map<std::string, std::string> values_;
    std::map<std::string, std::vector<std::vector<double>>> tables_;
};

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace wfopt
