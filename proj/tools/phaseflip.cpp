// Command-line surface: reproducible, file-emitting experiments over the
// phase-flip QKD simulator and its security scans.
//
// Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaseflip/phaseflip.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phaseflip;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int default_workers() {
    if (const char* env = std::getenv("PHASEFLIP_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Relative output paths land under PHASEFLIP_OUTDIR when it is set.
fs::path resolve_out(const std::string& path) {
    fs::path p(path);
    if (p.is_relative()) {
        if (const char* env = std::getenv("PHASEFLIP_OUTDIR")) {
            p = fs::path(env) / p;
        }
    }
    return p;
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.flush();
    if (!out.good()) throw IoError("cannot write " + path.string());
}

/// Expand a scan-value list: comma-separated numbers, "a..b" for a doubling
/// run from a to b (b appended if the doubling overshoots), and "..." to
/// continue the progression implied by the previous two values up to the
/// value that follows. Examples: "1..4096", "1,2,4,...,4096", "8,50,200".
std::vector<double> parse_value_list(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            tokens.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    tokens.push_back(cur);

    std::vector<double> vals;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (tok.empty()) throw UsageError("empty token in value list '" + text + "'");
        if (tok == "...") {
            if (vals.size() < 2 || i + 1 >= tokens.size()) {
                throw UsageError("'...' needs two preceding values and one following value");
            }
            const double ratio = vals[vals.size() - 1] / vals[vals.size() - 2];
            const double stop = std::stod(tokens[i + 1]);
            if (!(ratio > 1.0)) throw UsageError("'...' needs an increasing progression");
            double next = vals.back() * ratio;
            while (next < stop * (1.0 - 1e-12)) {
                vals.push_back(next);
                next *= ratio;
            }
            continue;
        }
        const auto dots = tok.find("..");
        if (dots != std::string::npos) {
            const double lo = std::stod(tok.substr(0, dots));
            const double hi = std::stod(tok.substr(dots + 2));
            if (!(lo > 0.0) || hi < lo) throw UsageError("bad range '" + tok + "'");
            double v = lo;
            while (v < hi * (1.0 - 1e-12)) {
                vals.push_back(v);
                v *= 2.0;
            }
            vals.push_back(hi);
            continue;
        }
        vals.push_back(std::stod(tok));
    }
    if (vals.empty()) throw UsageError("empty value list");
    return vals;
}

std::vector<int> to_int_list(const std::vector<double>& vals, const char* what) {
    std::vector<int> out;
    out.reserve(vals.size());
    for (double v : vals) {
        const int i = static_cast<int>(std::llround(v));
        if (i < 1 || std::abs(v - i) > 1e-9) throw UsageError(std::string(what) + " values must be positive integers");
        out.push_back(i);
    }
    return out;
}

json manifest_skeleton(const std::string& command, std::uint64_t seed) {
    json m;
    m["command"] = command;
    m["seed"] = seed;
    m["tool_version"] = kVersion;
    m["outputs"] = json::array();
    return m;
}

void finish_manifest(json& m, const fs::path& out_path,
                     std::chrono::steady_clock::time_point start) {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    m["duration_seconds"] = elapsed.count();
    fs::path manifest_path = out_path;
    manifest_path += ".manifest.json";
    write_file(manifest_path, m.dump(2) + "\n");
}

// ---------------------------------------------------------------- commands

int cmd_entropy_scan(double mean_n, const std::string& m_list, double eps_tail,
                     const std::string& out) {
    const auto start = std::chrono::steady_clock::now();
    const auto m_values = to_int_list(parse_value_list(m_list), "--m");
    const auto reports =
        ensemble::entropy_scan(fock::Amplitude::from_mean_photons(mean_n), m_values, eps_tail);
    const fs::path out_path = resolve_out(out);
    write_file(out_path, ensemble::to_csv(reports));

    json m = manifest_skeleton("entropy-scan", 0);
    m["parameters"] = {{"mean_n", mean_n}, {"m", m_list}, {"eps_tail", eps_tail}};
    m["outputs"].push_back(out_path.string());
    finish_manifest(m, out_path, start);
    std::cout << "entropy-scan: " << reports.size() << " rows -> " << out_path.string() << "\n";
    return 0;
}

int cmd_smax_scan(const std::string& mean_n_list, double plateau_tol, int m_cap, double eps_tail,
                  const std::string& out) {
    const auto start = std::chrono::steady_clock::now();
    const auto mean_values = parse_value_list(mean_n_list);
    const auto points = ensemble::smax_scan(mean_values, plateau_tol, m_cap, eps_tail);
    const fs::path out_path = resolve_out(out);
    write_file(out_path, ensemble::to_csv(points));

    // Least-squares slope of S_max against ln(mean_n), printed for the scan summary.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : points) {
        const double x = std::log(p.mean_n);
        sx += x;
        sy += p.s_max_nats;
        sxx += x * x;
        sxy += x * p.s_max_nats;
    }
    const double n = static_cast<double>(points.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    json m = manifest_skeleton("smax-scan", 0);
    m["parameters"] = {{"mean_n", mean_n_list},
                       {"plateau_tol", plateau_tol},
                       {"m_cap", m_cap},
                       {"eps_tail", eps_tail}};
    m["outputs"].push_back(out_path.string());
    m["slope_nats_per_ln_mean_n"] = slope;
    finish_manifest(m, out_path, start);
    std::cout << "smax-scan: " << points.size() << " rows -> " << out_path.string()
              << " (slope " << slope << " nats per ln mean_n)\n";
    return 0;
}

json summary_json(const protocol::ProtocolConfig& config, const experiment::AdversarySpec& spec,
                  const experiment::SimulationSummary& s) {
    json j;
    j["adversary"] = spec.label();
    j["K"] = config.K;
    j["M"] = config.M;
    j["mean_n"] = config.mean_n;
    j["significance"] = config.significance;
    j["transmittance"] = config.expected_transmittance;
    j["seed"] = config.seed;
    j["runs"] = s.runs;
    j["completed"] = s.completed;
    j["aborted_2c"] = s.aborted_2c;
    j["aborted_3a"] = s.aborted_3a;
    j["abort_rate"] = static_cast<double>(s.aborted_2c + s.aborted_3a) / s.runs;
    j["key_match_rate"] = s.key_match_rate;
    j["mean_key_length"] = s.mean_key_length;
    j["holevo_bound_bits"] = s.holevo_bound_bits;
    j["basis_entropy_bits"] = s.leak.basis_entropy_bits;
    j["basis_entropy_stated_bits"] = s.leak.basis_entropy_stated_bits;
    j["disclosed_tested_2c"] = s.disclosed_tested_2c;
    j["disclosed_passed_2c"] = s.disclosed_passed_2c;
    j["key_bits_compared"] = s.key_bits_compared;
    j["key_bit_errors"] = s.key_bit_errors;
    if (spec.kind == experiment::AdversarySpec::Kind::full_mitm) {
        j["mitm_overall_pass"] = s.mitm_overall_pass;
        j["expected_mitm_pass_prob"] = s.leak.mitm_per_pulse_pass;
    }
    return j;
}

int cmd_simulate(const protocol::ProtocolConfig& config, const std::string& adversary, int runs,
                 int workers, const std::string& out, const std::string& transcript_dir) {
    const auto start = std::chrono::steady_clock::now();
    const auto spec = experiment::parse_adversary_spec(adversary);
    std::vector<protocol::ProtocolTranscript> transcripts;
    const auto summary = experiment::run_batch(config, spec, runs, workers,
                                               transcript_dir.empty() ? nullptr : &transcripts);
    const fs::path out_path = resolve_out(out);
    write_file(out_path, summary_json(config, spec, summary).dump(2) + "\n");

    json m = manifest_skeleton("simulate", config.seed);
    m["parameters"] = {{"K", config.K},
                       {"M", config.M},
                       {"mean_n", config.mean_n},
                       {"theta_ref", config.theta_ref},
                       {"significance", config.significance},
                       {"transmittance", config.expected_transmittance},
                       {"adversary", adversary},
                       {"runs", runs}};
    m["outputs"].push_back(out_path.string());
    if (!transcript_dir.empty()) {
        const fs::path dir = resolve_out(transcript_dir);
        for (std::size_t i = 0; i < transcripts.size(); ++i) {
            const fs::path p = dir / ("run-" + std::to_string(i) + ".txt");
            write_file(p, transcripts[i].serialize());
        }
        m["outputs"].push_back(dir.string());
    }
    finish_manifest(m, out_path, start);
    std::cout << "simulate: " << summary.completed << "/" << runs << " completed -> "
              << out_path.string() << "\n";
    return 0;
}

int cmd_attack_sweep(int K, const std::string& mean_n_list, const std::string& m_list,
                     const std::string& t_list, const std::string& adversary, int runs,
                     std::uint64_t seed, double significance, int workers,
                     const std::string& out) {
    const auto start = std::chrono::steady_clock::now();
    const auto spec_base = experiment::parse_adversary_spec(adversary);
    if (spec_base.kind == experiment::AdversarySpec::Kind::none) {
        throw UsageError("attack-sweep: pick an attacking adversary");
    }
    const auto mean_values = parse_value_list(mean_n_list);
    const auto m_values = to_int_list(parse_value_list(m_list), "--m");
    std::vector<double> t_values{1.0};
    if (spec_base.kind == experiment::AdversarySpec::Kind::beam_split) {
        t_values = parse_value_list(t_list.empty() ? "0.5" : t_list);
    }

    std::string csv = "adversary,mean_n,M,T,K,runs,aborted,abort_rate,analytic_abort_bound\n";
    char buf[256];
    for (double mean_n : mean_values) {
        for (int M : m_values) {
            for (double T : t_values) {
                experiment::AdversarySpec spec = spec_base;
                protocol::ProtocolConfig config;
                config.K = K;
                config.M = M;
                config.mean_n = mean_n;
                config.seed = seed;
                config.significance = significance;
                double bound = 0.0;
                switch (spec.kind) {
                    case experiment::AdversarySpec::Kind::full_mitm:
                        bound = 1.0 - std::pow(adversary::expected_mitm_pass_prob(mean_n, M), K / 2);
                        break;
                    case experiment::AdversarySpec::Kind::intercept_resend:
                        bound = 1.0 - std::pow(adversary::expected_resend_pass_prob(mean_n, M), K / 2);
                        break;
                    case experiment::AdversarySpec::Kind::beam_split: {
                        spec.transmittance = T;
                        // normal-approximation power of Bob's photon test
                        const double nu = (K / 2) * mean_n;
                        const double mu = nu * T;
                        const double zc = [&] {
                            // two-sided critical z at the configured significance
                            double lo = 0.0, hi = 40.0;
                            for (int it = 0; it < 200; ++it) {
                                const double mid = 0.5 * (lo + hi);
                                (std::erfc(mid / std::numbers::sqrt2) < significance ? hi : lo) = mid;
                            }
                            return 0.5 * (lo + hi);
                        }();
                        const double t_lo = nu - zc * std::sqrt(nu);
                        const double t_hi = nu + zc * std::sqrt(nu);
                        const double z_lo = (t_lo - mu) / std::sqrt(mu);
                        const double z_hi = (t_hi - mu) / std::sqrt(mu);
                        bound = 0.5 * std::erfc(-z_lo / std::numbers::sqrt2) +
                                0.5 * std::erfc(z_hi / std::numbers::sqrt2);
                        break;
                    }
                    default:
                        break;
                }
                const auto summary = experiment::run_batch(config, spec, runs, workers);
                const int aborted = summary.aborted_2c + summary.aborted_3a;
                std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%.17g,%d,%d,%d,%.17g,%.17g\n",
                              spec_base.label().c_str(), mean_n, M,
                              spec.kind == experiment::AdversarySpec::Kind::beam_split ? T : 1.0,
                              K, runs, aborted, static_cast<double>(aborted) / runs, bound);
                csv += buf;
            }
        }
    }
    const fs::path out_path = resolve_out(out);
    write_file(out_path, csv);

    json m = manifest_skeleton("attack-sweep", seed);
    m["parameters"] = {{"K", K},          {"mean_n", mean_n_list}, {"m", m_list},
                       {"t", t_list},     {"adversary", adversary}, {"runs", runs},
                       {"significance", significance}};
    m["outputs"].push_back(out_path.string());
    finish_manifest(m, out_path, start);
    std::cout << "attack-sweep -> " << out_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"phase-flip coherent-state QKD: simulator and security scans"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    int workers = default_workers();
    app.add_option("--workers", workers, "worker threads for Monte Carlo batches");

    // entropy-scan
    auto* scan = app.add_subcommand("entropy-scan", "S(rho) as a function of M at fixed mean_n");
    double scan_mean_n = 0.0;
    std::string scan_m = "1..4096";
    double scan_eps = fock::kDefaultTailEps;
    std::string scan_out = "entropy_scan.csv";
    scan->add_option("--mean-n", scan_mean_n, "mean photon number |alpha|^2")->required();
    scan->add_option("--m", scan_m, "M values: list, a..b doubling range, or 1,2,...,N");
    scan->add_option("--eps-tail", scan_eps, "Fock truncation tail bound");
    scan->add_option("--out,-o", scan_out, "output CSV path");

    // smax-scan
    auto* smax = app.add_subcommand("smax-scan", "plateau entropy S_max vs mean_n");
    std::string smax_mean = "8..128,200";
    double smax_tol = ensemble::kDefaultPlateauTol;
    int smax_cap = ensemble::kDefaultMCap;
    double smax_eps = fock::kDefaultTailEps;
    std::string smax_out = "smax_scan.csv";
    smax->add_option("--mean-n", smax_mean, "mean_n values (list or range)");
    smax->add_option("--plateau-tol", smax_tol, "plateau detection tolerance in nats");
    smax->add_option("--m-cap", smax_cap, "largest M tried before giving up");
    smax->add_option("--eps-tail", smax_eps, "Fock truncation tail bound");
    smax->add_option("--out,-o", smax_out, "output CSV path");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo batch of full protocol runs");
    protocol::ProtocolConfig config;
    std::string sim_adversary = "none";
    int sim_runs = 1000;
    std::string sim_out = "simulate.json";
    std::string sim_tdir;
    sim->add_option("--k", config.K, "number of pulses K (multiple of 4)")->required();
    sim->add_option("--m", config.M, "M (2M bases)")->required();
    sim->add_option("--mean-n", config.mean_n, "mean photon number |alpha|^2")->required();
    sim->add_option("--theta-ref", config.theta_ref, "reference phase of alpha");
    sim->add_option("--adversary", sim_adversary,
                    "none | full-mitm | intercept-resend | beam-split:T");
    sim->add_option("--runs", sim_runs, "number of independent runs");
    sim->add_option("--seed", config.seed, "base seed; run i uses stream (seed, run-i)");
    sim->add_option("--significance", config.significance, "photon-number test significance");
    sim->add_option("--transmittance", config.expected_transmittance,
                    "known per-leg channel transmittance");
    sim->add_option("--out,-o", sim_out, "output JSON summary path");
    sim->add_option("--transcript-dir", sim_tdir, "also write one transcript file per run");

    // attack-sweep
    auto* sweep = app.add_subcommand("attack-sweep", "detection rate over a parameter grid");
    int sweep_k = 256;
    std::string sweep_mean = "100";
    std::string sweep_m = "64";
    std::string sweep_t;
    std::string sweep_adversary = "full-mitm";
    int sweep_runs = 200;
    std::uint64_t sweep_seed = 0;
    double sweep_sig = 0.01;
    std::string sweep_out = "attack_sweep.csv";
    sweep->add_option("--k", sweep_k, "number of pulses K (multiple of 4)");
    sweep->add_option("--mean-n", sweep_mean, "mean_n grid values");
    sweep->add_option("--m", sweep_m, "M grid values");
    sweep->add_option("--t", sweep_t, "beam-split transmittance grid values");
    sweep->add_option("--adversary", sweep_adversary,
                      "full-mitm | intercept-resend | beam-split");
    sweep->add_option("--runs", sweep_runs, "runs per grid cell");
    sweep->add_option("--seed", sweep_seed, "base seed");
    sweep->add_option("--significance", sweep_sig, "photon-number test significance");
    sweep->add_option("--out,-o", sweep_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (scan->parsed()) return cmd_entropy_scan(scan_mean_n, scan_m, scan_eps, scan_out);
        if (smax->parsed()) return cmd_smax_scan(smax_mean, smax_tol, smax_cap, smax_eps, smax_out);
        if (sim->parsed()) {
            return cmd_simulate(config, sim_adversary, sim_runs, workers, sim_out, sim_tdir);
        }
        if (sweep->parsed()) {
            return cmd_attack_sweep(sweep_k, sweep_mean, sweep_m, sweep_t, sweep_adversary,
                                    sweep_runs, sweep_seed, sweep_sig, workers, sweep_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
