#include "squeezesim/records_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace squeeze {

namespace {

const char* kSimSections[] = {"cavity.", "ensemble.", "probe.", "transition.", "noise.", "model."};

bool is_sim_key(const std::string& key) {
    for (const char* s : kSimSections)
        if (key.rfind(s, 0) == 0) return true;
    return false;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream in(line);
    for (std::string item; std::getline(in, item, sep);) out.push_back(item);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

double to_double(const std::string& s, const std::string& column) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw SchemaError("bad numeric value '" + s + "' in column '" + column + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& column) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw SchemaError("bad integer value '" + s + "' in column '" + column + "'");
    return v;
}

struct Table {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<size_t>(it - header.begin());
    }
};

Table parse_table(const std::string& text) {
    Table t;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.comments.push_back(line);
            continue;
        }
        auto cells = split(line, ',');
        for (auto& c : cells) {
            const auto b = c.find_first_not_of(' ');
            c = b == std::string::npos ? "" : c.substr(b, c.find_last_not_of(' ') - b + 1);
        }
        if (t.header.empty()) {
            t.header = cells;
        } else {
            if (cells.size() != t.header.size())
                throw SchemaError("row has " + std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw SchemaError("missing header row");
    return t;
}

std::string schema_line() { return "# schema=1\n"; }

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string records_to_csv(const RecordSet& rs) {
    RunConfig cfg;
    cfg.sim = rs.params;
    std::string out = schema_line();
    out += "# master_seed=" + std::to_string(rs.master_seed) + "\n";
    for (const auto& e : config_entries(cfg))
        if (is_sim_key(e.key)) out += "# param " + e.key + " = " + e.value + "\n";
    out += "trial,seed";
    for (const auto& l : rs.labels) out += "," + l;
    out += ",omega_p_offset_hz";
    for (const auto& l : rs.labels) out += "," + l + "_hz";
    for (const auto& l : rs.labels) out += "," + l + "_true_jz";
    out += "\n";
    for (size_t i = 0; i < rs.trials.size(); ++i) {
        const auto& t = rs.trials[i];
        out += std::to_string(i) + "," + std::to_string(t.seed);
        for (const auto& l : rs.labels) out += "," + format_double(t.at(l).n_up);
        out += "," + format_double(t.detuning_offset_hz);
        for (const auto& l : rs.labels) out += "," + format_double(t.at(l).frequency_hz);
        for (const auto& l : rs.labels) out += "," + format_double(t.at(l).true_jz);
        out += "\n";
    }
    return out;
}

RecordSet records_from_csv(const std::string& text) {
    const Table t = parse_table(text);
    if (std::find(t.comments.begin(), t.comments.end(), "# schema=1") == t.comments.end())
        throw SchemaError("missing '# schema=1' header line");
    RecordSet rs;
    std::string params;
    for (const auto& c : t.comments) {
        if (c.rfind("# master_seed=", 0) == 0) rs.master_seed = to_u64(c.substr(14), "master_seed");
        if (c.rfind("# param ", 0) == 0) params += c.substr(8) + "\n";
    }
    rs.params = parse_config(params).sim;

    const size_t c_trial = t.column("trial"), c_seed = t.column("seed"), c_off = t.column("omega_p_offset_hz");
    (void)c_trial;
    if (c_off <= c_seed) throw SchemaError("column 'omega_p_offset_hz' must follow the label columns");
    rs.labels.assign(t.header.begin() + c_seed + 1, t.header.begin() + c_off);
    std::vector<size_t> c_n, c_hz, c_jz;
    for (const auto& l : rs.labels) {
        c_n.push_back(t.column(l));
        c_hz.push_back(t.column(l + "_hz"));
        c_jz.push_back(t.column(l + "_true_jz"));
    }
    for (const auto& row : t.rows) {
        TrialRecord tr;
        tr.seed = to_u64(row[c_seed], "seed");
        tr.detuning_offset_hz = to_double(row[c_off], "omega_p_offset_hz");
        for (size_t k = 0; k < rs.labels.size(); ++k) {
            const auto& l = rs.labels[k];
            tr.outcomes.push_back({l, to_double(row[c_n[k]], l), to_double(row[c_hz[k]], l + "_hz"),
                                   to_double(row[c_jz[k]], l + "_true_jz")});
        }
        rs.trials.push_back(std::move(tr));
    }
    return rs;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << content;
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_records(const RecordSet& rs, const std::string& path) { write_text(path, records_to_csv(rs)); }

RecordSet read_records(const std::string& path) { return records_from_csv(read_text(path)); }

std::string sweep_to_csv(const SweepResult& s) {
    std::string out = schema_line();
    out += "mt,R,C,Winv,R_model,R_psn,R_tf,R_q,R_c,R_o,R_ext_c,R_pop_c,R_ext_q,R_pop_q\n";
    for (const auto& r : s.rows) {
        const double v[] = {r.m_t,   r.r,   r.contrast, r.w_inv, r.r_model, r.r_psn, r.r_tf,
                            r.r_q,   r.r_c, r.backaction.r_o,   r.backaction.r_ext_c, r.backaction.r_pop_c,
                            r.backaction.r_ext_q, r.backaction.r_pop_q};
        for (size_t i = 0; i < std::size(v); ++i) out += (i ? "," : "") + format_double(v[i]);
        out += "\n";
    }
    return out;
}

std::vector<RPoint> read_r_points(const std::string& path) {
    const Table t = parse_table(read_text(path));
    const size_t cm = t.column("mt"), cr = t.column("R");
    const auto w = std::find(t.header.begin(), t.header.end(), "weight");
    std::vector<RPoint> pts;
    for (const auto& row : t.rows) {
        RPoint p{to_double(row[cm], "mt"), to_double(row[cr], "R"), 0};
        if (w != t.header.end()) p.weight = to_double(row[w - t.header.begin()], "weight");
        pts.push_back(p);
    }
    return pts;
}

std::string phase_histograms_to_csv(const std::vector<PhaseDetectionResult>& cases) {
    std::string out = schema_line() + "case,bin_lo,bin_hi,applied,reference\n";
    for (const auto& c : cases) {
        const auto& h = c.histogram;
        const size_t bins = h.applied.size();
        const double w = bins ? (h.hi - h.lo) / bins : 0;
        for (size_t i = 0; i < bins; ++i)
            out += std::string(c.premeasure ? "squeezed" : "css") + "," + format_double(h.lo + w * i) + "," +
                   format_double(h.lo + w * (i + 1)) + "," + std::to_string(h.applied[i]) + "," +
                   std::to_string(h.reference[i]) + "\n";
    }
    return out;
}

std::string scaling_to_csv(const ScalingResult& s) {
    std::string out = schema_line() + "N,best_mt,best_Winv,raw_max_Winv,dtheta2,dtheta_sql,r_psn,r_tf,r_q,r_c\n";
    for (const auto& p : s.points) {
        const double v[] = {p.n, p.best_m_t, p.best_w_inv, p.raw_max_w_inv, p.dtheta2, p.dtheta_sql,
                            p.fit.r_psn, p.fit.r_tf, p.fit.r_q, p.fit.r_c};
        for (size_t i = 0; i < std::size(v); ++i) out += (i ? "," : "") + format_double(v[i]);
        out += "\n";
    }
    return out;
}

std::string calibration_to_csv(const RamanCalibration& c) {
    std::string out = schema_line() + "mt,down_hz,up_hz\n";
    for (const auto& p : c.points)
        out += format_double(p.m_t) + "," + format_double(p.down_hz) + "," + format_double(p.up_hz) + "\n";
    return out;
}

std::string sidecar_json(const std::string& experiment, const RunConfig& cfg, const std::string& extra_json) {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    j["schema"] = 1;
    j["master_seed"] = cfg.master_seed;
    j["config_hash"] = config_hash(cfg);
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& e : config_entries(cfg)) {
        const auto dot = e.key.find('.');
        auto v = nlohmann::ordered_json::parse(e.value, nullptr, false);
        params[e.key.substr(0, dot)][e.key.substr(dot + 1)] = v.is_discarded() ? nlohmann::ordered_json(e.value) : v;
    }
    j["params"] = params;
    j["result"] = extra_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(extra_json);
    return j.dump(2) + "\n";
}

}  // namespace squeeze
