#include "squeezesim/sequence.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

namespace squeeze {

namespace {

constexpr double kDeg = kTwoPi / 360;

std::optional<double> to_double(const std::string& s) {
    double v = 0;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::string> Protocol::labels() const {
    std::vector<std::string> out;
    for (const auto& s : steps)
        if (auto* p = std::get_if<ProbeStep>(&s)) out.push_back(p->label);
    return out;
}

std::string Protocol::to_text() const {
    std::string out;
    for (const auto& s : steps) {
        if (auto* p = std::get_if<PumpStep>(&s)) {
            out += std::string("pump ") + to_string(p->target);
        } else if (auto* p = std::get_if<PulseStep>(&s)) {
            out += "pulse " + fmt(p->angle / kDeg) + " " + fmt(p->phase / kDeg);
        } else if (auto* p = std::get_if<ProbeStep>(&s)) {
            out += "probe " + p->label;
            if (p->m_t) out += " mt=" + fmt(*p->m_t);
        } else if (std::holds_alternative<PrealignStep>(s)) {
            out += "prealign";
        } else if (auto* p = std::get_if<WaitStep>(&s)) {
            out += "wait " + fmt(p->duration);
        }
        out += "\n";
    }
    return out;
}

Protocol parse_protocol(const std::string& text) {
    Protocol proto;
    std::set<std::string> seen;
    std::istringstream in(text);
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::stringstream parts(line);
        // '/' separates steps written on one line
        for (std::string part; std::getline(parts, part, '/');) {
            const auto tok = tokens(part);
            if (tok.empty()) continue;
            const std::string& kw = tok[0];
            auto number = [&](size_t i, const char* what) {
                if (i >= tok.size()) throw ProtocolParseError(lineno, std::string("missing ") + what);
                auto v = to_double(tok[i]);
                if (!v) throw ProtocolParseError(lineno, "malformed number '" + tok[i] + "'");
                return *v;
            };
            if (kw == "pump") {
                if (tok.size() != 2 || (tok[1] != "up" && tok[1] != "down"))
                    throw ProtocolParseError(lineno, "expected 'pump <up|down>'");
                proto.steps.push_back(PumpStep{parse_spin_level(tok[1])});
            } else if (kw == "pulse") {
                if (tok.size() != 3) throw ProtocolParseError(lineno, "expected 'pulse <deg> <phase_deg>'");
                proto.steps.push_back(PulseStep{number(1, "angle") * kDeg, number(2, "phase") * kDeg});
            } else if (kw == "probe") {
                if (tok.size() < 2 || tok.size() > 3)
                    throw ProtocolParseError(lineno, "expected 'probe <label> [mt=<float>]'");
                ProbeStep ps{tok[1], std::nullopt};
                if (!seen.insert(ps.label).second) throw ProtocolParseError(lineno, "duplicate label '" + ps.label + "'");
                if (tok.size() == 3) {
                    if (tok[2].rfind("mt=", 0) != 0) throw ProtocolParseError(lineno, "unknown probe option '" + tok[2] + "'");
                    auto v = to_double(tok[2].substr(3));
                    if (!v || *v < 0) throw ProtocolParseError(lineno, "malformed number '" + tok[2].substr(3) + "'");
                    ps.m_t = *v;
                }
                proto.steps.push_back(ps);
            } else if (kw == "prealign") {
                if (tok.size() != 1) throw ProtocolParseError(lineno, "'prealign' takes no arguments");
                proto.steps.push_back(PrealignStep{});
            } else if (kw == "wait") {
                if (tok.size() != 2) throw ProtocolParseError(lineno, "expected 'wait <seconds>'");
                const double d = number(1, "duration");
                if (d < 0) throw ProtocolParseError(lineno, "negative wait");
                proto.steps.push_back(WaitStep{d});
            } else {
                throw ProtocolParseError(lineno, "unknown step '" + kw + "'");
            }
        }
    }
    return proto;
}

Protocol squeezing_protocol(std::optional<double> m_t) {
    Protocol p;
    p.steps = {PrealignStep{},
               PumpStep{SpinLevel::down},
               PulseStep{kTwoPi / 4, 0},
               ProbeStep{"Nd", m_t},
               PulseStep{kTwoPi / 2, 0},
               ProbeStep{"Np", m_t},
               ProbeStep{"Nf", m_t}};
    return p;
}

const LabeledOutcome& TrialRecord::at(const std::string& label) const {
    for (const auto& o : outcomes)
        if (o.label == label) return o;
    throw std::out_of_range("no outcome labelled '" + label + "'");
}

TrialRecord run_trial(const Protocol& p, const SimParams& params, std::uint64_t seed) {
    return run_trial(p, params, seed, nullptr);
}

TrialRecord run_trial(const Protocol& p, const SimParams& params, std::uint64_t seed, EnsembleState* final_state) {
    Rng rng(seed);
    const double n = params.ensemble.n_effective;
    ProbeContext ctx;
    ctx.power_factor = 1 + params.probe.ms_classical_frac * rng.normal();
    EnsembleState state = optically_pump(n, SpinLevel::down, params.ensemble, rng);

    TrialRecord rec;
    rec.seed = seed;
    for (const auto& step : p.steps) {
        if (auto* s = std::get_if<PumpStep>(&step)) {
            state = optically_pump(n, s->target, params.ensemble, rng);
        } else if (auto* s = std::get_if<PulseStep>(&step)) {
            double angle = s->angle, phase = s->phase;
            if (params.model.rotation_amp_noise > 0) angle *= 1 + params.model.rotation_amp_noise * rng.normal();
            if (params.model.rotation_phase_noise > 0) phase += params.model.rotation_phase_noise * rng.normal();
            state = rotate(state, angle, phase);
        } else if (auto* s = std::get_if<ProbeStep>(&step)) {
            ProbeConfig cfg = params.probe;
            if (s->m_t) cfg.m_t = *s->m_t;
            if (!(cfg.m_t > 0)) throw ConfigError("probe '" + s->label + "' has m_t = 0");
            ProbeResult r = probe_measure(state, cfg, params, ctx, rng);
            state = std::move(r.state);
            rec.outcomes.push_back({s->label, r.outcome.n_up, r.outcome.frequency / kTwoPi, r.outcome.true_jz});
        } else if (std::holds_alternative<PrealignStep>(step)) {
            ctx.detuning_offset = params.probe.detuning_spread * rng.normal();
        }
        // WaitStep: no clock-driven physics
    }
    rec.detuning_offset_hz = ctx.detuning_offset / kTwoPi;
    if (final_state) *final_state = state;
    return rec;
}

int worker_count(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("SQUEEZE_SIM_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

RecordSet run_trials(const Protocol& p, const SimParams& params, int n_trials, std::uint64_t master_seed,
                     int threads) {
    if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
    params.validate();
    RecordSet rs;
    rs.labels = p.labels();
    rs.params = params;
    rs.master_seed = master_seed;
    rs.trials.resize(n_trials);
    parallel_for(n_trials, worker_count(threads), [&](int i) {
        rs.trials[i] = run_trial(p, params, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
    });
    return rs;
}

std::vector<double> label_difference(const RecordSet& rs, const std::string& a, const std::string& b) {
    for (const auto& l : {a, b})
        if (std::find(rs.labels.begin(), rs.labels.end(), l) == rs.labels.end())
            throw std::invalid_argument("record set has no label '" + l + "'");
    std::vector<double> d;
    d.reserve(rs.trials.size());
    for (const auto& t : rs.trials) d.push_back(t.at(a).n_up - t.at(b).n_up);
    return d;
}

double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) throw std::invalid_argument("sample_variance: need >= 2 values");
    double mean = 0;
    for (double v : x) mean += v;
    mean /= x.size();
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / (x.size() - 1);
}

double spin_noise_reduction(const RecordSet& rs, const std::string& final_label, const std::string& pre_label) {
    if (rs.trials.size() < 2) throw std::invalid_argument("spin_noise_reduction: need >= 2 trials");
    return sample_variance(label_difference(rs, final_label, pre_label)) / (rs.params.ensemble.n_effective / 4);
}

}  // namespace squeeze
