#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "squeezesim/params.hpp"
#include "squeezesim/physics.hpp"
#include "squeezesim/spin_state.hpp"

namespace squeeze {

struct ProtocolParseError : std::runtime_error {
    ProtocolParseError(int line, const std::string& msg)
        : std::runtime_error("protocol line " + std::to_string(line) + ": " + msg), line(line) {}
    int line;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PumpStep {
    SpinLevel target = SpinLevel::down;
};
struct PulseStep {
    double angle = 0;  // rad
    double phase = 0;  // rad
};
struct ProbeStep {
    std::string label;
    std::optional<double> m_t;  // falls back to SimParams::probe
};
struct PrealignStep {};
struct WaitStep {
    double duration = 0;
};
using Step = std::variant<PumpStep, PulseStep, ProbeStep, PrealignStep, WaitStep>;

struct Protocol {
    std::vector<Step> steps;
    std::vector<std::string> labels() const;
    std::string to_text() const;
};

Protocol parse_protocol(const std::string& text);
// prealign, pump down, pi/2, Nd, pi, Np, Nf
Protocol squeezing_protocol(std::optional<double> m_t = std::nullopt);

struct LabeledOutcome {
    std::string label;
    double n_up = 0;          // atoms
    double frequency_hz = 0;  // raw dressed shift / 2pi
    double true_jz = 0;       // diagnostic

    bool operator==(const LabeledOutcome&) const = default;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    std::vector<LabeledOutcome> outcomes;  // protocol order
    double detuning_offset_hz = 0;

    const LabeledOutcome& at(const std::string& label) const;
    bool operator==(const TrialRecord&) const = default;
};

struct RecordSet {
    std::vector<std::string> labels;
    std::vector<TrialRecord> trials;
    SimParams params;
    std::uint64_t master_seed = 0;
};

TrialRecord run_trial(const Protocol& p, const SimParams& params, std::uint64_t seed);
// Also returns the state after the last step.
TrialRecord run_trial(const Protocol& p, const SimParams& params, std::uint64_t seed, EnsembleState* final_state);

// Requested worker count (0 = hardware), capped by SQUEEZE_SIM_THREADS.
int worker_count(int requested = 0);
RecordSet run_trials(const Protocol& p, const SimParams& params, int n_trials, std::uint64_t master_seed,
                     int threads = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn);

std::vector<double> label_difference(const RecordSet& rs, const std::string& a, const std::string& b);
double sample_variance(const std::vector<double>& x);
double spin_noise_reduction(const RecordSet& rs, const std::string& final_label, const std::string& pre_label);

}  // namespace squeeze

#include "squeezesim/detail/parallel.hpp"
