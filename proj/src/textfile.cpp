#include "wfopt/textfile.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wfopt {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write file: " + tmp);
        out << content;
        if (!out) throw ConfigError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw ConfigError("rename failed for " + path + ": " + std::strerror(errno));
    }
}

TextRecord TextRecord::parse_file(const std::string& path) {
    return parse_string(read_file(path), path);
}

TextRecord TextRecord::parse_string(const std::string& text, const std::string& origin) {
    TextRecord rec;
    rec.origin_ = origin;
    rec.raw_ = text;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::string open_table;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        if (!open_table.empty()) {
            std::string tok;
            ls >> tok;
            if (tok == "end") {
                open_table.clear();
                continue;
            }
            std::vector<double> row;
            ls.clear();
            ls.seekg(0);
            double v = 0.0;
            while (ls >> v) row.push_back(v);
            if (row.empty() || !ls.eof())
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected numeric row or 'end' in table '" + open_table + "'");
            rec.tables_[open_table].push_back(std::move(row));
            continue;
        }
        std::string key;
        ls >> key;
        if (key == "table") {
            std::string name;
            ls >> name;
            if (name.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": table needs a name");
            open_table = name;
            rec.tables_[name];  // register even if empty
            continue;
        }
        std::string rest;
        std::getline(ls, rest);
        const auto b = rest.find_first_not_of(" \t");
        const auto e = rest.find_last_not_of(" \t");
        if (b == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                              "' has no value");
        rec.values_[key] = rest.substr(b, e - b + 1);
    }
    if (!open_table.empty())
        throw ConfigError(origin + ": table '" + open_table + "' not terminated by 'end'");
    return rec;
}

const std::string& TextRecord::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return it->second;
}

double TextRecord::get_double(const std::string& key) const {
    const std::string& s = get_string(key);
    char* endp = nullptr;
    double v = std::strtod(s.c_str(), &endp);
    if (endp == s.c_str() || *endp != '\0')
        throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + s + "'");
    return v;
}

int TextRecord::get_int(const std::string& key) const {
    double v = get_double(key);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError(origin_ + ": key '" + key + "' is not an integer");
    return i;
}

double TextRecord::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

const std::vector<std::vector<double>>& TextRecord::get_table(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end()) throw ConfigError(origin_ + ": missing table '" + name + "'");
    return it->second;
}

}  // namespace wfopt
