#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "phaseflip/adversary.hpp"
#include "phaseflip/protocol.hpp"
#include "phaseflip/rng.hpp"

namespace phaseflip::experiment {

/// Parsed `--adversary` specification: "none", "full-mitm",
/// "intercept-resend", or "beam-split:T" with T in (0,1).
struct AdversarySpec {
    enum class Kind { none, full_mitm, intercept_resend, beam_split };
    Kind kind = Kind::none;
    double transmittance = 1.0;

    std::string label() const {
        switch (kind) {
            case Kind::none: return "none";
            case Kind::full_mitm: return "full-mitm";
            case Kind::intercept_resend: return "intercept-resend";
            case Kind::beam_split: return "beam-split:" + std::to_string(transmittance);
        }
        return "?";
    }
};

inline AdversarySpec parse_adversary_spec(const std::string& text) {
    AdversarySpec spec;
    if (text == "none") {
        spec.kind = AdversarySpec::Kind::none;
    } else if (text == "full-mitm") {
        spec.kind = AdversarySpec::Kind::full_mitm;
    } else if (text == "intercept-resend") {
        spec.kind = AdversarySpec::Kind::intercept_resend;
    } else if (text.rfind("beam-split:", 0) == 0) {
        spec.kind = AdversarySpec::Kind::beam_split;
        try {
            spec.transmittance = std::stod(text.substr(11));
        } catch (const std::exception&) {
            throw std::invalid_argument("adversary: beam-split needs a numeric transmittance, e.g. beam-split:0.5");
        }
        if (!(spec.transmittance > 0.0 && spec.transmittance < 1.0)) {
            throw std::invalid_argument("adversary: beam-split transmittance must be in (0,1)");
        }
    } else {
        throw std::invalid_argument("adversary: expected none, full-mitm, intercept-resend, or beam-split:T");
    }
    return spec;
}

/// Fresh strategy instance for one protocol run (strategies hold per-run
/// memory, so every run gets its own).
inline std::unique_ptr<adversary::AdversaryStrategy> make_strategy(const AdversarySpec& spec,
                                                                   int M) {
    using Kind = AdversarySpec::Kind;
    switch (spec.kind) {
        case Kind::none: return std::make_unique<adversary::NoAttack>();
        case Kind::full_mitm: return std::make_unique<adversary::FullMitm>(M);
        case Kind::intercept_resend: return std::make_unique<adversary::InterceptResend>(M);
        case Kind::beam_split: return std::make_unique<adversary::BeamSplit>(spec.transmittance);
    }
    throw std::logic_error("make_strategy: unreachable");
}

/// Run `count` index-addressed jobs on `workers` threads. Results must be
/// written into per-index slots by the job itself, which keeps outputs
/// deterministic regardless of scheduling.
inline void parallel_for(int count, int workers, const std::function<void(int)>& job) {
    if (count <= 0) return;
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < count; i += workers) job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Cross-run aggregate of a Monte Carlo batch of protocol runs.
struct SimulationSummary {
    int runs = 0;
    int completed = 0;
    int aborted_2c = 0;
    int aborted_3a = 0;
    double key_match_rate = 0.0;  // among completed runs; 0 when none completed
    double mean_key_length = 0.0; // among completed runs
    double holevo_bound_bits = 0.0;
    double mitm_overall_pass = -1.0; // < 0 when not applicable
    adversary::LeakageReport leak;
    long disclosed_tested_2c = 0;
    long disclosed_passed_2c = 0;
    long key_bits_compared = 0;
    long key_bit_errors = 0;
};

/// Run `runs` independent protocol executions. Run i consumes the stream
/// (seed, "run-i"); transcripts are reported in index order.
inline SimulationSummary run_batch(const protocol::ProtocolConfig& config,
                                   const AdversarySpec& spec, int runs, int workers,
                                   std::vector<protocol::ProtocolTranscript>* transcripts_out = nullptr) {
    config.validate();
    if (runs < 1) throw std::invalid_argument("run_batch: runs must be >= 1");
    std::vector<protocol::ProtocolTranscript> transcripts(runs);
    parallel_for(runs, workers, [&](int i) {
        RngStream rng(config.seed, "run-" + std::to_string(i));
        auto strategy = make_strategy(spec, config.M);
        transcripts[i] = protocol::run_protocol(config, *strategy, rng);
    });

    SimulationSummary s;
    s.runs = runs;
    int matched = 0;
    long key_len_total = 0;
    for (const auto& t : transcripts) {
        s.disclosed_tested_2c += t.bob_tested;
        s.disclosed_passed_2c += t.bob_tested - t.bob_fidelity_failures;
        switch (t.outcome) {
            case protocol::Outcome::aborted_step_2c: ++s.aborted_2c; break;
            case protocol::Outcome::aborted_step_3a: ++s.aborted_3a; break;
            case protocol::Outcome::completed: {
                ++s.completed;
                key_len_total += static_cast<long>(t.alice_key->size());
                bool match = *t.alice_key == *t.bob_key;
                if (match) ++matched;
                for (std::size_t b = 0; b < t.alice_key->size(); ++b) {
                    ++s.key_bits_compared;
                    if ((*t.alice_key)[b] != (*t.bob_key)[b]) ++s.key_bit_errors;
                }
                break;
            }
        }
    }
    if (s.completed > 0) {
        s.key_match_rate = static_cast<double>(matched) / s.completed;
        s.mean_key_length = static_cast<double>(key_len_total) / s.completed;
    }
    s.leak = adversary::holevo_leak(config.mean_n, config.M, config.K);
    s.holevo_bound_bits = s.leak.holevo_bound_bits;
    if (spec.kind == AdversarySpec::Kind::full_mitm) {
        s.mitm_overall_pass = s.leak.mitm_overall_pass;
    }
    if (transcripts_out) *transcripts_out = std::move(transcripts);
    return s;
}

} // namespace phaseflip::experiment
