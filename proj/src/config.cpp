#include "damctl/config.hpp"

#include "damctl/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

namespace damctl {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

using Slot = std::variant<double*, int*, long*, std::vector<double>*, BetaFloorMode*>;

struct Entry {
    const char* section;
    const char* key;
    Slot slot;
};

std::vector<Entry> schema(ModelConfig& c) {
    return {
        {"dam", "h_max", &c.h_max},
        {"dam", "h_min", &c.h_min},
        {"dam", "h0", &c.h0},
        {"dam", "beta_max", &c.beta_max},
        {"dam", "beta_min_base", &c.beta_min_base},
        {"dam", "surface", &c.surface},
        {"dam", "gravity", &c.gravity},
        {"economics", "h_plus", &c.h_plus},
        {"economics", "h_minus", &c.h_minus},
        {"economics", "ell_bar", &c.ell_bar},
        {"economics", "mu", &c.mu},
        {"economics", "P", &c.P},
        {"economics", "energy", &c.energy},
        {"economics", "efficiency", &c.efficiency},
        {"economics", "kappa", &c.kappa},
        {"economics", "rho", &c.rho},
        {"economics", "penalty_coeff", &c.penalty_coeff},
        {"economics", "beta_floor_mode", &c.beta_floor_mode},
        {"hawkes", "a", &c.a},
        {"hawkes", "b", &c.b},
        {"hawkes", "c", &c.c},
        {"marks", "values", &c.marks.values},
        {"marks", "probs", &c.marks.probs},
        {"grid", "nh", &c.grid.nh},
        {"grid", "nl", &c.grid.nl},
        {"grid", "ell_min", &c.grid.ell_min},
        {"grid", "ell_max", &c.grid.ell_max},
        {"numerics", "tol", &c.numerics.tol},
        {"numerics", "max_iter", &c.numerics.max_iter},
        {"simulation", "dt_int", &c.simulation.dt_int},
        {"simulation", "dt_dec", &c.simulation.dt_dec},
        {"simulation", "t_cut", &c.simulation.t_cut},
        {"simulation", "max_events", &c.simulation.max_events},
    };
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& text, const std::string& path) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || text.empty())
        throw ConfigError(path, "malformed number '" + text + "'");
    return value;
}

std::string render(const Slot& slot) {
    struct {
        std::string operator()(double* p) const { return format_double(*p); }
        std::string operator()(int* p) const { return std::to_string(*p); }
        std::string operator()(long* p) const { return std::to_string(*p); }
        std::string operator()(std::vector<double>* p) const {
            std::string s;
            for (std::size_t i = 0; i < p->size(); ++i) s += (i ? ", " : "") + format_double((*p)[i]);
            return s;
        }
        std::string operator()(BetaFloorMode* p) const { return *p == BetaFloorMode::Paper ? "paper" : "outflow"; }
    } visitor;
    return std::visit(visitor, slot);
}

void assign(const Slot& slot, const std::string& value, const std::string& path) {
    struct {
        const std::string& value;
        const std::string& path;
        void operator()(double* p) const { *p = parse_number<double>(value, path); }
        void operator()(int* p) const { *p = parse_number<int>(value, path); }
        void operator()(long* p) const { *p = parse_number<long>(value, path); }
        void operator()(std::vector<double>* p) const {
            p->clear();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) p->push_back(parse_number<double>(trim(item), path));
        }
        void operator()(BetaFloorMode* p) const {
            if (value == "paper")
                *p = BetaFloorMode::Paper;
            else if (value == "outflow")
                *p = BetaFloorMode::Outflow;
            else
                throw ConfigError(path, "expected 'paper' or 'outflow', got '" + value + "'");
        }
    } visitor{value, path};
    std::visit(visitor, slot);
}

} // namespace

LoadedConfig parse_config(const std::string& text, const std::string& origin) {
    LoadedConfig out;
    auto entries = schema(out.config);
    std::set<std::string> sections;
    for (const auto& e : entries) sections.insert(e.section);

    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(std::string_view(raw).substr(0, raw.find('#')));
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where, "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!sections.count(section)) throw ConfigError(section, "unknown section (" + where + ")");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) throw ConfigError(key, "key outside of any section (" + where + ")");
        const std::string path = section + "." + key;
        const auto it = std::find_if(entries.begin(), entries.end(),
                                     [&](const Entry& e) { return e.section == section && e.key == key; });
        if (it == entries.end()) throw ConfigError(path, "unknown key (" + where + ")");
        if (!seen.insert(path).second) throw ConfigError(path, "duplicate key (" + where + ")");
        assign(it->slot, value, path);
    }
    out.warnings = validate(out.config);
    return out;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError(path, "cannot open configuration file");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

std::string serialize_config(const ModelConfig& cfg) {
    ModelConfig copy = cfg;
    std::string out;
    std::string section;
    for (const auto& e : schema(copy)) {
        if (section != e.section) {
            if (!section.empty()) out += "\n";
            section = e.section;
            out += "[" + section + "]\n";
        }
        out += std::string(e.key) + " = " + render(e.slot) + "\n";
    }
    return out;
}

std::uint64_t config_hash(const ModelConfig& cfg) {
    ModelConfig copy = cfg;
    std::vector<std::string> lines;
    for (const auto& e : schema(copy)) lines.push_back(std::string(e.section) + "." + e.key + "=" + render(e.slot));
    std::sort(lines.begin(), lines.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : lines)
        for (unsigned char ch : l + "\n") {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    return h;
}

namespace {

Slot find_slot(ModelConfig& cfg, const std::string& key) {
    for (const auto& e : schema(cfg))
        if (key == std::string(e.section) + "." + e.key) return e.slot;
    throw ConfigError(key, "unknown key");
}

} // namespace

double get_numeric(const ModelConfig& cfg, const std::string& key) {
    ModelConfig copy = cfg;
    const Slot slot = find_slot(copy, key);
    if (auto p = std::get_if<double*>(&slot)) return **p;
    if (auto p = std::get_if<int*>(&slot)) return **p;
    if (auto p = std::get_if<long*>(&slot)) return static_cast<double>(**p);
    throw ConfigError(key, "not a scalar field");
}

void set_numeric(ModelConfig& cfg, const std::string& key, double value) {
    const Slot slot = find_slot(cfg, key);
    if (auto p = std::get_if<double*>(&slot)) {
        **p = value;
        return;
    }
    const bool integral = std::trunc(value) == value;
    if (auto p = std::get_if<int*>(&slot)) {
        if (!integral) throw ConfigError(key, "expected an integer");
        **p = static_cast<int>(value);
        return;
    }
    if (auto p = std::get_if<long*>(&slot)) {
        if (!integral) throw ConfigError(key, "expected an integer");
        **p = static_cast<long>(value);
        return;
    }
    throw ConfigError(key, "not a scalar field");
}

} // namespace damctl
