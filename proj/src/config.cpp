#include "vrfb/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace vrfb {

double CaseConfig::permeability() const {
    const double e = porosity;
    if (e >= 1.0)
        throw std::invalid_argument("porosity: Kozeny-Carman undefined at porosity >= 1");
    const double df = fiber_diameter;
    return df * df * e * e * e / (16.0 * kozeny_carman * (1.0 - e) * (1.0 - e));
}

namespace {

enum class Kind { Double, Int, Kappa, Span, Update };

struct KeyDesc {
    const char* name;
    Kind kind;
    std::function<void(CaseConfig&, double)> set_d;
    std::function<double(const CaseConfig&)> get_d;
    std::function<void(CaseConfig&, int)> set_i;
    std::function<int(const CaseConfig&)> get_i;
};

KeyDesc dkey(const char* name, double CaseConfig::*m) {
    KeyDesc k;
    k.name = name;
    k.kind = Kind::Double;
    k.set_d = [m](CaseConfig& c, double v) { c.*m = v; };
    k.get_d = [m](const CaseConfig& c) { return c.*m; };
    return k;
}

KeyDesc ikey(const char* name, int CaseConfig::*m) {
    KeyDesc k;
    k.name = name;
    k.kind = Kind::Int;
    k.set_i = [m](CaseConfig& c, int v) { c.*m = v; };
    k.get_i = [m](const CaseConfig& c) { return c.*m; };
    return k;
}

const std::vector<KeyDesc>& key_table() {
    static const std::vector<KeyDesc> table = [] {
        std::vector<KeyDesc> t;
        t.push_back(dkey("porosity", &CaseConfig::porosity));
        t.push_back(dkey("specific_area", &CaseConfig::specific_area));
        t.push_back(dkey("fiber_diameter", &CaseConfig::fiber_diameter));
        t.push_back(dkey("sigma_s", &CaseConfig::sigma_s));
        t.push_back(dkey("kozeny_carman", &CaseConfig::kozeny_carman));
        t.push_back(dkey("length", &CaseConfig::length));
        t.push_back(dkey("width", &CaseConfig::width));
        t.push_back(dkey("electrode_thickness", &CaseConfig::electrode_thickness));
        t.push_back(dkey("viscosity", &CaseConfig::viscosity));
        t.push_back(dkey("c_in_v2", &CaseConfig::c_in_v2));
        t.push_back(dkey("c_in_v3", &CaseConfig::c_in_v3));
        t.push_back(dkey("diff_v2", &CaseConfig::diff_v2));
        t.push_back(dkey("diff_v3", &CaseConfig::diff_v3));
        t.push_back(dkey("kappa_e_const", &CaseConfig::kappa_e_const));
        {
            KeyDesc k;
            k.name = "kappa_mode";
            k.kind = Kind::Kappa;
            t.push_back(k);
        }
        t.push_back(dkey("rate_constant", &CaseConfig::rate_constant));
        t.push_back(dkey("alpha_c", &CaseConfig::alpha_c));
        t.push_back(dkey("alpha_a", &CaseConfig::alpha_a));
        t.push_back(dkey("u0", &CaseConfig::u0));
        t.push_back(dkey("temperature", &CaseConfig::temperature));
        t.push_back(dkey("p_in", &CaseConfig::p_in));
        t.push_back(dkey("p_out", &CaseConfig::p_out));
        t.push_back(dkey("current", &CaseConfig::current));
        t.push_back(dkey("faraday", &CaseConfig::faraday));
        t.push_back(dkey("gas_constant", &CaseConfig::gas_constant));
        t.push_back(dkey("z_v2", &CaseConfig::z_v2));
        t.push_back(dkey("z_v3", &CaseConfig::z_v3));
        t.push_back(ikey("nx", &CaseConfig::nx));
        t.push_back(ikey("ny", &CaseConfig::ny));
        t.push_back(ikey("nz_channel", &CaseConfig::nz_channel));
        t.push_back(ikey("nz_electrode", &CaseConfig::nz_electrode));
        t.push_back(dkey("channel_thickness", &CaseConfig::channel_thickness));
        t.push_back(dkey("inlet_width", &CaseConfig::inlet_width));
        {
            KeyDesc k;
            k.name = "inlet_span";
            k.kind = Kind::Span;
            t.push_back(k);
        }
        t.push_back(dkey("flow_rel_tol", &CaseConfig::flow_rel_tol));
        t.push_back(dkey("picard_tol", &CaseConfig::picard_tol));
        t.push_back(ikey("picard_max_iter", &CaseConfig::picard_max_iter));
        t.push_back(dkey("under_relax_j", &CaseConfig::under_relax_j));
        t.push_back(dkey("bv_exp_clamp", &CaseConfig::bv_exp_clamp));
        t.push_back(dkey("km_floor", &CaseConfig::km_floor));
        t.push_back(dkey("q_convexity", &CaseConfig::q_convexity));
        t.push_back(dkey("alpha_fic_multiplier", &CaseConfig::alpha_fic_multiplier));
        t.push_back(dkey("filter_radius", &CaseConfig::filter_radius));
        {
            KeyDesc k;
            k.name = "update_rule";
            k.kind = Kind::Update;
            t.push_back(k);
        }
        t.push_back(dkey("move_limit", &CaseConfig::move_limit));
        t.push_back(ikey("continuation_stages", &CaseConfig::continuation_stages));
        t.push_back(ikey("opt_max_iter", &CaseConfig::opt_max_iter));
        t.push_back(dkey("opt_tol", &CaseConfig::opt_tol));
        t.push_back(ikey("opt_tol_window", &CaseConfig::opt_tol_window));
        t.push_back(dkey("rho_init", &CaseConfig::rho_init));
        t.push_back(dkey("threshold", &CaseConfig::threshold));
        t.push_back(dkey("channel_width", &CaseConfig::channel_width));
        t.push_back(dkey("channel_pitch", &CaseConfig::channel_pitch));
        t.push_back(dkey("manifold_width", &CaseConfig::manifold_width));
        t.push_back(ikey("snapshot_every", &CaseConfig::snapshot_every));
        t.push_back(ikey("seed", &CaseConfig::seed));
        return t;
    }();
    return table;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

void apply_value(CaseConfig& cfg, const KeyDesc& key, const std::string& raw) {
    const std::string value = trim(raw);
    if (value.empty())
        throw std::invalid_argument(std::string(key.name) + ": empty value");
    switch (key.kind) {
        case Kind::Double: {
            char* end = nullptr;
            double v = std::strtod(value.c_str(), &end);
            if (end == value.c_str() || *end != '\0')
                throw std::invalid_argument(std::string(key.name) + ": not a number: '" + value + "'");
            key.set_d(cfg, v);
            break;
        }
        case Kind::Int: {
            char* end = nullptr;
            long v = std::strtol(value.c_str(), &end, 10);
            if (end == value.c_str() || *end != '\0')
                throw std::invalid_argument(std::string(key.name) + ": not an integer: '" + value + "'");
            key.set_i(cfg, static_cast<int>(v));
            break;
        }
        case Kind::Kappa: {
            if (value == "computed")
                cfg.kappa_mode = KappaMode::Computed;
            else if (value == "constant")
                cfg.kappa_mode = KappaMode::Constant;
            else
                throw std::invalid_argument("kappa_mode: expected 'computed' or 'constant', got '" + value + "'");
            break;
        }
        case Kind::Span: {
            if (value == "design_layer")
                cfg.inlet_span = InletSpan::DesignLayer;
            else if (value == "full_height")
                cfg.inlet_span = InletSpan::FullHeight;
            else
                throw std::invalid_argument("inlet_span: expected 'design_layer' or 'full_height', got '" + value + "'");
            break;
        }
        case Kind::Update: {
            if (value == "scaled")
                cfg.slp_signed = false;
            else if (value == "signed")
                cfg.slp_signed = true;
            else
                throw std::invalid_argument("update_rule: expected 'scaled' or 'signed', got '" + value + "'");
            break;
        }
    }
}

void require(bool ok, const char* key, const char* what) {
    if (!ok)
        throw std::invalid_argument(std::string(key) + ": " + what);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void CaseConfig::validate() const {
    require(porosity > 0.0 && porosity < 1.0, "porosity", "must lie in (0, 1)");
    require(specific_area > 0.0, "specific_area", "must be positive");
    require(fiber_diameter > 0.0, "fiber_diameter", "must be positive");
    require(sigma_s > 0.0, "sigma_s", "must be positive");
    require(kozeny_carman > 0.0, "kozeny_carman", "must be positive");
    require(length > 0.0, "length", "must be positive");
    require(width > 0.0, "width", "must be positive");
    require(electrode_thickness > 0.0, "electrode_thickness", "must be positive");
    require(viscosity > 0.0, "viscosity", "must be positive");
    require(c_in_v2 > 0.0, "c_in_v2", "must be positive");
    require(c_in_v3 > 0.0, "c_in_v3", "must be positive");
    require(diff_v2 > 0.0, "diff_v2", "must be positive");
    require(diff_v3 > 0.0, "diff_v3", "must be positive");
    require(kappa_e_const > 0.0, "kappa_e_const", "must be positive");
    require(rate_constant > 0.0, "rate_constant", "must be positive");
    require(alpha_c > 0.0, "alpha_c", "must be positive");
    require(alpha_a > 0.0, "alpha_a", "must be positive");
    require(temperature > 0.0, "temperature", "must be positive");
    require(p_out >= 0.0, "p_out", "must be non-negative");
    require(p_in > p_out, "p_in", "must exceed p_out");
    require(current >= 0.0, "current", "must be non-negative");
    require(faraday > 0.0, "faraday", "must be positive");
    require(gas_constant > 0.0, "gas_constant", "must be positive");
    require(nx > 0 && ny > 0, "nx", "cell counts must be positive");
    require(nz_channel > 0, "nz_channel", "must be positive");
    require(nz_electrode > 0, "nz_electrode", "must be positive");
    require(channel_thickness > 0.0, "channel_thickness", "must be positive");
    require(inlet_width > 0.0, "inlet_width", "must be positive");
    require(inlet_width <= width, "inlet_width", "patch wider than the cell");
    require(flow_rel_tol > 0.0, "flow_rel_tol", "must be positive");
    require(picard_tol > 0.0, "picard_tol", "must be positive");
    require(picard_max_iter > 0, "picard_max_iter", "must be positive");
    require(under_relax_j > 0.0 && under_relax_j <= 1.0, "under_relax_j", "must lie in (0, 1]");
    require(bv_exp_clamp > 0.0, "bv_exp_clamp", "must be positive");
    require(km_floor > 0.0, "km_floor", "must be positive");
    require(q_convexity > 0.0, "q_convexity", "must be positive");
    require(alpha_fic_multiplier > 0.0, "alpha_fic_multiplier", "must be positive");
    require(move_limit > 0.0 && move_limit <= 1.0, "move_limit", "must lie in (0, 1]");
    require(continuation_stages > 0, "continuation_stages", "must be positive");
    require(opt_max_iter > 0, "opt_max_iter", "must be positive");
    require(opt_tol > 0.0, "opt_tol", "must be positive");
    require(opt_tol_window > 0, "opt_tol_window", "must be positive");
    require(rho_init >= 0.0 && rho_init <= 1.0, "rho_init", "must lie in [0, 1]");
    require(threshold > 0.0 && threshold < 1.0, "threshold", "must lie in (0, 1)");
    require(channel_width > 0.0, "channel_width", "must be positive");
    require(channel_pitch > channel_width, "channel_pitch", "must exceed channel_width");
    require(manifold_width > 0.0, "manifold_width", "must be positive");
    require(snapshot_every > 0, "snapshot_every", "must be positive");
}

CaseConfig parse_config_text(const std::string& text) {
    CaseConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = stripped.substr(eq + 1);
        const KeyDesc* desc = nullptr;
        for (const auto& k : key_table())
            if (key == k.name) { desc = &k; break; }
        if (!desc)
            throw std::invalid_argument("unknown config key '" + key + "'");
        apply_value(cfg, *desc, value);
    }
    cfg.validate();
    return cfg;
}

CaseConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    CaseConfig cfg = parse_config_text(buf.str());

    // Environment overrides: VRFB_<KEY>, applied after the file.
    bool overridden = false;
    for (const auto& k : key_table()) {
        std::string env = "VRFB_";
        for (const char* p = k.name; *p; ++p)
            env += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
        if (const char* v = std::getenv(env.c_str())) {
            apply_value(cfg, k, v);
            overridden = true;
        }
    }
    if (overridden) cfg.validate();
    return cfg;
}

std::string serialize_config(const CaseConfig& cfg) {
    std::ostringstream out;
    for (const auto& k : key_table()) {
        out << k.name << " = ";
        switch (k.kind) {
            case Kind::Double: out << fmt_double(k.get_d(cfg)); break;
            case Kind::Int: out << k.get_i(cfg); break;
            case Kind::Kappa:
                out << (cfg.kappa_mode == KappaMode::Computed ? "computed" : "constant");
                break;
            case Kind::Span:
                out << (cfg.inlet_span == InletSpan::DesignLayer ? "design_layer" : "full_height");
                break;
            case Kind::Update:
                out << (cfg.slp_signed ? "signed" : "scaled");
                break;
        }
        out << "\n";
    }
    return out.str();
}

std::string config_hash(const CaseConfig& cfg) {
    const std::string s = serialize_config(cfg);
    uint64_t h = 1469598103934665603ull; // FNV-1a offset basis
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace vrfb
