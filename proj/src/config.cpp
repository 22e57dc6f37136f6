#include "squeezesim/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string_view>
#include <sstream>

namespace squeeze {

namespace {

using Kind = ConfigEntry::Kind;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Shortest decimal that parses back to v.
std::string shortest(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

constexpr std::string_view kAngularSuffix = " rad/s";

// Decimal d with d * scale == v exactly, when one exists near v / scale;
// otherwise the unscaled value tagged with kAngularSuffix.
std::string scaled_repr(double v, double scale) {
    if (scale == 1) return shortest(v);
    double d = v / scale;
    if (d * scale == v) return shortest(d);
    double lo = d, hi = d;
    for (int k = 0; k < 16; ++k) {
        lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
        hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
        if (lo * scale == v) return shortest(lo);
        if (hi * scale == v) return shortest(hi);
    }
    return shortest(v) + std::string(kAngularSuffix);
}

double parse_real(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError("config key '" + key + "': malformed number '" + s + "'");
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    Int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("config key '" + key + "': malformed integer '" + s + "'");
    return v;
}

struct Range {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool open_lo = false;
    bool open_hi = false;
    void check(const std::string& key, double v) const {
        if (v < lo || (open_lo && v == lo) || v > hi || (open_hi && v == hi))
            throw ConfigError("config key '" + key + "': value " + shortest(v) + " out of range");
    }
};
const Range kPositive{0, std::numeric_limits<double>::infinity(), true, false};
const Range kNonNeg{0, std::numeric_limits<double>::infinity(), false, false};
const Range kProb{0, 1, false, true};
const Range kUnit{0, 1, true, false};

struct Field {
    std::string key;
    Kind kind;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

using RealRef = std::function<double&(RunConfig&)>;
using IntRef = std::function<int&(RunConfig&)>;

Field real(std::string key, RealRef ref, Range r, double scale = 1) {
    return {key, Kind::real,
            [=](RunConfig& c, const std::string& raw) {
                std::string s = trim(raw);
                const bool angular = scale != 1 && s.size() > kAngularSuffix.size() &&
                                     s.compare(s.size() - kAngularSuffix.size(), kAngularSuffix.size(),
                                               kAngularSuffix) == 0;
                if (angular) s.resize(s.size() - kAngularSuffix.size());
                const double v = parse_real(key, s);
                r.check(key, angular ? v / scale : v);
                ref(c) = angular ? v : v * scale;
            },
            [=](const RunConfig& c) { return scaled_repr(ref(const_cast<RunConfig&>(c)), scale); }};
}

Field integer(std::string key, IntRef ref, int lo) {
    return {key, Kind::integer,
            [=](RunConfig& c, const std::string& raw) {
                const int v = parse_int<int>(key, raw);
                if (v < lo) throw ConfigError("config key '" + key + "': value " + std::to_string(v) + " out of range");
                ref(c) = v;
            },
            [=](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

Field boolean(std::string key, std::function<bool&(RunConfig&)> ref) {
    return {key, Kind::boolean,
            [=](RunConfig& c, const std::string& raw) {
                const std::string s = trim(raw);
                if (s == "true" || s == "1")
                    ref(c) = true;
                else if (s == "false" || s == "0")
                    ref(c) = false;
                else
                    throw ConfigError("config key '" + key + "': expected true or false");
            },
            [=](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

Field list(std::string key, std::function<std::vector<double>&(RunConfig&)> ref, Range r) {
    return {key, Kind::list,
            [=](RunConfig& c, const std::string& raw) {
                std::string s = trim(raw);
                if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
                std::vector<double> out;
                std::stringstream in(s);
                for (std::string item; std::getline(in, item, ',');) {
                    if (trim(item).empty()) continue;
                    const double v = parse_real(key, item);
                    r.check(key, v);
                    out.push_back(v);
                }
                if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
                ref(c) = out;
            },
            [=](const RunConfig& c) {
                std::string s = "[";
                const auto& v = ref(const_cast<RunConfig&>(c));
                for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + shortest(v[i]);
                return s + "]";
            }};
}

#define REF(expr) [](RunConfig & c) -> decltype(auto) { return (expr); }

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        v.push_back(real("cavity.g_hz", REF(c.sim.cavity.g), kPositive, kTwoPi));
        v.push_back(real("cavity.kappa_hz", REF(c.sim.cavity.kappa), kPositive, kTwoPi));
        v.push_back(real("cavity.kappa0_hz", REF(c.sim.cavity.kappa0), kPositive, kTwoPi));
        v.push_back(real("cavity.delta_hz", REF(c.sim.cavity.delta), kPositive, kTwoPi));
        v.push_back(real("cavity.gamma_hz", REF(c.sim.cavity.gamma), kPositive, kTwoPi));
        v.push_back(real("cavity.omega_ax_hz", REF(c.sim.cavity.omega_ax), kPositive, kTwoPi));
        v.push_back(real("cavity.omega_hf_hz", REF(c.sim.cavity.omega_hf), kPositive, kTwoPi));
        v.push_back(real("cavity.recoil_shift_hz", REF(c.sim.cavity.recoil_shift_hz), kNonNeg));

        v.push_back(real("ensemble.n_effective", REF(c.sim.ensemble.n_effective), kPositive));
        v.push_back(real("ensemble.n_loaded", REF(c.sim.ensemble.n_loaded), kPositive));
        v.push_back(real("ensemble.coupling_fraction", REF(c.sim.ensemble.coupling_fraction), kUnit));
        v.push_back(real("ensemble.initial_contrast", REF(c.sim.ensemble.initial_contrast), kUnit));

        v.push_back(real("probe.m_t", REF(c.sim.probe.m_t), kNonNeg));
        v.push_back(real("probe.window", REF(c.sim.probe.window), kPositive));
        v.push_back(real("probe.detuning_spread_hz", REF(c.sim.probe.detuning_spread), kNonNeg, kTwoPi));
        v.push_back(real("probe.ms_classical_frac", REF(c.sim.probe.ms_classical_frac), kNonNeg));

        v.push_back(real("transition.p_ud", REF(c.sim.transition.p_ud), kProb));
        v.push_back(real("transition.p_du", REF(c.sim.transition.p_du), kProb));
        v.push_back(real("transition.p_u1", REF(c.sim.transition.p_u1), kProb));
        v.push_back(real("transition.p_d1", REF(c.sim.transition.p_d1), kProb));

        v.push_back(real("noise.r_psn", REF(c.sim.noise.r_psn), kNonNeg));
        v.push_back(real("noise.r_tf", REF(c.sim.noise.r_tf), kNonNeg));
        v.push_back(real("noise.r_q", REF(c.sim.noise.r_q), kNonNeg));
        v.push_back(real("noise.r_c", REF(c.sim.noise.r_c), kNonNeg));

        v.push_back(real("model.reference_n", REF(c.sim.model.reference_n), kPositive));
        v.push_back(real("model.c1", REF(c.sim.model.c1), kNonNeg));
        v.push_back(real("model.beta", REF(c.sim.model.beta), kUnit));
        v.push_back(real("model.opto_r_inv", REF(c.sim.model.opto_r_inv), kPositive));
        v.push_back(real("model.opto_ref_mt", REF(c.sim.model.opto_ref_mt), kPositive));
        v.push_back(real("model.opto_tau0", REF(c.sim.model.opto_tau0), kPositive));
        v.push_back(real("model.opto_asymmetry", REF(c.sim.model.opto_asymmetry), {}));
        v.push_back(real("model.laser_linewidth_r_inv", REF(c.sim.model.laser_linewidth_r_inv), kPositive));
        v.push_back(real("model.detuning_penalty", REF(c.sim.model.detuning_penalty), kNonNeg));
        v.push_back(real("model.excess_dephasing", REF(c.sim.model.excess_dephasing), kNonNeg));
        v.push_back(real("model.light_shift", REF(c.sim.model.light_shift), kNonNeg));
        v.push_back(real("model.rotation_amp_noise", REF(c.sim.model.rotation_amp_noise), kNonNeg));
        v.push_back(real("model.rotation_phase_noise", REF(c.sim.model.rotation_phase_noise), kNonNeg));
        v.push_back(boolean("model.raman", REF(c.sim.model.raman)));
        v.push_back(boolean("model.recoil", REF(c.sim.model.recoil)));
        v.push_back(boolean("model.repump_one_to_up", REF(c.sim.model.repump_one_to_up)));

        v.push_back(integer("experiment.trials", REF(c.experiment.trials), 2));
        v.push_back(real("experiment.sweep_mt_min", REF(c.experiment.sweep_mt_min), kPositive));
        v.push_back(real("experiment.sweep_mt_max", REF(c.experiment.sweep_mt_max), kPositive));
        v.push_back(integer("experiment.sweep_points", REF(c.experiment.sweep_points), 1));
        v.push_back(real("experiment.excess_target_w_inv", REF(c.experiment.excess_target_w_inv), kNonNeg));
        v.push_back(real("experiment.phase_psi", REF(c.experiment.phase_psi), kNonNeg));
        v.push_back(real("experiment.phase_n", REF(c.experiment.phase_n), kPositive));
        v.push_back(integer("experiment.phase_trials", REF(c.experiment.phase_trials), 1000));
        v.push_back(real("experiment.phase_target_w_inv", REF(c.experiment.phase_target_w_inv), kPositive));
        v.push_back(list("experiment.scaling_n", REF(c.experiment.scaling_n), kPositive));
        v.push_back(integer("experiment.scaling_points_per_decade", REF(c.experiment.scaling_points_per_decade), 2));
        v.push_back(integer("experiment.scaling_trials", REF(c.experiment.scaling_trials), 2));
        v.push_back(real("experiment.fringe_mt", REF(c.experiment.fringe_mt), kNonNeg));
        v.push_back(real("experiment.fringe_readout_mt", REF(c.experiment.fringe_readout_mt), kPositive));
        v.push_back(integer("experiment.fringe_points", REF(c.experiment.fringe_points), 6));
        v.push_back(integer("experiment.fringe_trials", REF(c.experiment.fringe_trials), 1));
        v.push_back(real("experiment.budget_mt", REF(c.experiment.budget_mt), kPositive));
        v.push_back(real("experiment.calibration_n", REF(c.experiment.calibration_n), kPositive));
        v.push_back(list("experiment.calibration_mt", REF(c.experiment.calibration_mt), kNonNeg));
        v.push_back(integer("experiment.calibration_trials", REF(c.experiment.calibration_trials), 1));
        v.push_back(integer("experiment.bootstrap", REF(c.experiment.bootstrap), 0));

        v.push_back({"run.master_seed", Kind::integer,
                     [](RunConfig& c, const std::string& raw) {
                         c.master_seed = parse_int<std::uint64_t>("run.master_seed", raw);
                     },
                     [](const RunConfig& c) { return std::to_string(c.master_seed); }});
        v.push_back({"run.output_dir", Kind::text,
                     [](RunConfig& c, const std::string& raw) {
                         std::string s = trim(raw);
                         if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
                         if (s.empty()) throw ConfigError("config key 'run.output_dir': empty path");
                         c.output_dir = s;
                     },
                     [](const RunConfig& c) { return "\"" + c.output_dir + "\""; }});
        v.push_back(integer("run.threads", REF(c.threads), 0));
        return v;
    }();
    return f;
}

#undef REF

}  // namespace

RunConfig parse_config(const std::string& text) {
    std::map<std::string, const Field*> index;
    for (const auto& f : fields()) index[f.key] = &f;

    RunConfig c;
    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
        const auto it = index.find(key);
        if (it == index.end()) throw ConfigError("unknown config key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
        it->second->set(c, line.substr(eq + 1));
    }

    auto& ens = c.sim.ensemble;
    const bool has_n = seen.count("ensemble.n_effective"), has_n0 = seen.count("ensemble.n_loaded");
    if (has_n0 && !has_n)
        ens.n_effective = ens.coupling_fraction * ens.n_loaded;
    else if (!has_n0)
        ens.n_loaded = ens.n_effective / ens.coupling_fraction;
    if (std::abs(ens.coupling_fraction * ens.n_loaded - ens.n_effective) > 1e-6 * ens.n_effective + 0.5)
        throw ConfigError("config key 'ensemble.n_effective': inconsistent with coupling_fraction * n_loaded");
    if (c.sim.cavity.kappa0 > c.sim.cavity.kappa)
        throw ConfigError("config key 'cavity.kappa0_hz': exceeds kappa");
    if (c.experiment.sweep_mt_max < c.experiment.sweep_mt_min)
        throw ConfigError("config key 'experiment.sweep_mt_max': below sweep_mt_min");
    try {
        c.sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::vector<ConfigEntry> config_entries(const RunConfig& c) {
    std::vector<ConfigEntry> out;
    for (const auto& f : fields()) out.push_back({f.key, f.get(c), f.kind});
    return out;
}

std::string echo_config(const RunConfig& c) {
    std::string out, section;
    for (const auto& e : config_entries(c)) {
        const auto dot = e.key.find('.');
        const std::string sec = e.key.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += e.key.substr(dot + 1) + " = " + e.value + "\n";
    }
    return out;
}

std::string git_blob_sha1(const std::string& content) {
    const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr))
        throw std::runtime_error("sha1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

std::string config_hash(const RunConfig& c) { return git_blob_sha1(echo_config(c)); }

}  // namespace squeeze
