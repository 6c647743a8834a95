// SPDX-License-Identifier: Apache-2.0
//
// cfisac - cell-free massive MIMO ISAC analysis and power allocation
// Copyright (C) 2026 The cfisac authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------



#pragma once

#include "validation.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

namespace cfisac
{

enum class ExperimentKind
{
    rate_vs_L,
    convergence,
    rate_vs_crlb_threshold,
    validate_closed_forms
};

inline const char *to_string(ExperimentKind k)
{
    switch (k)
    {
    case ExperimentKind::rate_vs_L:
        return "rate_vs_L";
    case ExperimentKind::convergence:
        return "convergence";
    case ExperimentKind::rate_vs_crlb_threshold:
        return "rate_vs_crlb_threshold";
    case ExperimentKind::validate_closed_forms:
        return "validate_closed_forms";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string &s)
{
    for (auto k : {ExperimentKind::rate_vs_L, ExperimentKind::convergence, ExperimentKind::rate_vs_crlb_threshold,
                   ExperimentKind::validate_closed_forms})
        if (s == to_string(k))
            return k;
    throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

/// System parameters plus sweep and trial settings of one batch run.
struct ExperimentConfig
{
    SystemConfig system;
    std::uint64_t seed = 1;
    int large_scale = 5;
    int small_scale = 50;
    std::optional<double> snr_db; // overrides power_budget when set
    double crlb_threshold_db = -5.0;
    EchoModel echo_model = EchoModel::multistatic;
    double rho = 0.3;
    double convergence_tol = 1e-4;
    int max_outer_iter = 50;
    int threads = 1;
    std::string dump_dir; // empty: no debug dumps

    std::vector<int> aps{8, 16, 32};
    std::vector<int> tx_antennas{4, 8};
    std::vector<int> pilot_lengths{2, 4};
    std::vector<double> crlb_thresholds_db{-10.0, -7.5, -5.0, -2.5, 0.0};

    ExperimentConfig() { system.distance_policy = DistancePolicy::clamp; }

    /// Restores the 100 small-scale x 10 large-scale counts.
    void use_paper_scale()
    {
        large_scale = 10;
        small_scale = 100;
    }

    /// System config with the SNR override applied.
    SystemConfig effective_system() const
    {
        SystemConfig c = system;
        if (snr_db)
            c.power_budget = power_from_snr(*snr_db, c.comm_noise);
        return c;
    }

    void validate() const
    {
        effective_system().validate();
        auto need = [](bool ok, const char *what) {
            if (!ok)
                throw std::invalid_argument(std::string("ExperimentConfig: ") + what);
        };
        need(large_scale >= 1, "large_scale must be >= 1");
        need(small_scale >= 2, "small_scale must be >= 2");
        need(!aps.empty() && !tx_antennas.empty() && !pilot_lengths.empty() && !crlb_thresholds_db.empty(),
             "sweeps must be nonempty");
        for (int v : aps)
            need(v >= 1, "aps entries must be >= 1");
        for (int v : tx_antennas)
            need(v >= 1, "tx_antennas entries must be >= 1");
        for (int v : pilot_lengths)
            need(v >= 1 && v <= system.coherence_length, "pilot_lengths entries must lie in [1, coherence_length]");
        need(threads >= 1, "threads must be >= 1");
        need(max_outer_iter >= 1, "max_outer_iter must be >= 1");
        need(convergence_tol > 0.0, "convergence_tol must be positive");
        need(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
    }

    ScaOptions sca_options(int L, double threshold_db) const
    {
        ScaOptions o;
        o.crlb_thresholds = uniform_thresholds(L, db_to_linear(threshold_db));
        o.rho = rho;
        o.convergence_tol = convergence_tol;
        o.max_outer_iter = max_outer_iter;
        o.echo_model = echo_model;
        return o;
    }
};

namespace detail
{

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline double parse_double(const std::string &key, const std::string &v)
{
    std::size_t pos = 0;
    double d = 0.0;
    try
    {
        d = std::stod(v, &pos);
    }
    catch (const std::exception &)
    {
        pos = 0;
    }
    if (pos == 0 || trim(v.substr(pos)) != "")
        throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
    return d;
}

inline long parse_long(const std::string &key, const std::string &v)
{
    const double d = parse_double(key, v);
    if (d != std::floor(d))
        throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + v + "'");
    return long(d);
}

template <class T, class F> std::vector<T> parse_list(const std::string &key, const std::string &v, F one)
{
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(T(one(key, trim(item))));
    if (out.empty())
        throw std::invalid_argument("config: '" + key + "' expects a comma-separated list");
    return out;
}

template <class T> std::string join(const std::vector<T> &v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + format_g(double(v[i]), 17);
    return s;
}

} // namespace detail

/// Applies one key=value setting. Keys ending in _dbm / _db take dB values;
/// _mw and unsuffixed power keys are linear mW.
inline void apply_setting(ExperimentConfig &c, const std::string &raw_key, const std::string &raw_value)
{
    using namespace detail;
    const std::string key = trim(raw_key), v = trim(raw_value);
    SystemConfig &s = c.system;
    auto num = [&] { return parse_double(key, v); };
    auto integer = [&] { return int(parse_long(key, v)); };
    auto dbm = [&] { return db_to_linear(num()); };

    static const std::map<std::string, int SystemConfig::*> ints = {
        {"aps", &SystemConfig::aps},
        {"ues", &SystemConfig::ues},
        {"tx_antennas", &SystemConfig::tx_antennas},
        {"rx_antennas", &SystemConfig::rx_antennas},
        {"frame_length", &SystemConfig::frame_length},
        {"coherence_length", &SystemConfig::coherence_length},
        {"pilot_length", &SystemConfig::pilot_length},
    };
    static const std::map<std::string, double SystemConfig::*> mw = {
        {"pilot_power", &SystemConfig::pilot_power},
        {"power_budget", &SystemConfig::power_budget},
        {"comm_noise", &SystemConfig::comm_noise},
        {"sensing_noise", &SystemConfig::sensing_noise},
    };
    static const std::map<std::string, double SystemConfig::*> reals = {
        {"pathloss_exponent", &SystemConfig::pathloss_exponent},
        {"shadowing_db", &SystemConfig::shadowing_db},
        {"reference_distance_m", &SystemConfig::reference_distance},
        {"area_side_m", &SystemConfig::area_side},
        {"sensing_gain", &SystemConfig::sensing_gain},
    };

    if (auto it = ints.find(key); it != ints.end())
        s.*(it->second) = integer();
    else if (auto it2 = reals.find(key); it2 != reals.end())
        s.*(it2->second) = num();
    else if (key.size() > 4 && key.ends_with("_dbm") && mw.count(key.substr(0, key.size() - 4)))
        s.*(mw.at(key.substr(0, key.size() - 4))) = dbm();
    else if (key.size() > 3 && key.ends_with("_mw") && mw.count(key.substr(0, key.size() - 3)))
        s.*(mw.at(key.substr(0, key.size() - 3))) = num();
    else if (mw.count(key))
        s.*(mw.at(key)) = num();
    else if (key == "max_placement_attempts")
        s.max_placement_attempts = parse_long(key, v);
    else if (key == "distance_policy")
    {
        if (v == "reject")
            s.distance_policy = DistancePolicy::reject;
        else if (v == "clamp")
            s.distance_policy = DistancePolicy::clamp;
        else
            throw std::invalid_argument("config: distance_policy must be reject or clamp");
    }
    else if (key == "array_indexing")
    {
        if (v == "zero_based")
            s.array_indexing = ArrayIndexing::zero_based;
        else if (v == "one_based")
            s.array_indexing = ArrayIndexing::one_based;
        else
            throw std::invalid_argument("config: array_indexing must be zero_based or one_based");
    }
    else if (key == "xi_normalization")
    {
        if (v == "total")
            s.xi_normalization = XiNormalization::total;
        else if (v == "per_ap")
            s.xi_normalization = XiNormalization::per_ap;
        else
            throw std::invalid_argument("config: xi_normalization must be total or per_ap");
    }
    else if (key == "echo_model")
    {
        if (v == "multistatic")
            c.echo_model = EchoModel::multistatic;
        else if (v == "own_link")
            c.echo_model = EchoModel::own_link;
        else
            throw std::invalid_argument("config: echo_model must be multistatic or own_link");
    }
    else if (key == "seed")
        c.seed = std::uint64_t(parse_long(key, v));
    else if (key == "large_scale")
        c.large_scale = integer();
    else if (key == "small_scale")
        c.small_scale = integer();
    else if (key == "snr_db")
    {
        if (v == "none" || v.empty())
            c.snr_db.reset();
        else
            c.snr_db = num();
    }
    else if (key == "crlb_threshold_db")
        c.crlb_threshold_db = num();
    else if (key == "rho")
        c.rho = num();
    else if (key == "convergence_tol")
        c.convergence_tol = num();
    else if (key == "max_outer_iter")
        c.max_outer_iter = integer();
    else if (key == "threads")
        c.threads = integer();
    else if (key == "dump_dir")
        c.dump_dir = v;
    else if (key == "sweep_aps")
        c.aps = parse_list<int>(key, v, parse_long);
    else if (key == "sweep_tx_antennas")
        c.tx_antennas = parse_list<int>(key, v, parse_long);
    else if (key == "sweep_pilot_lengths")
        c.pilot_lengths = parse_list<int>(key, v, parse_long);
    else if (key == "sweep_crlb_thresholds_db")
        c.crlb_thresholds_db = parse_list<double>(key, v, parse_double);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Parses "key=value" lines; '#' starts a comment.
inline void apply_config_text(ExperimentConfig &c, std::istream &in, const std::string &origin = "<input>")
{
    std::string line;
    int n = 0;
    while (std::getline(in, line))
    {
        ++n;
        if (const auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        if (detail::trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(n) + ": expected key=value");
        try
        {
            apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
        }
        catch (const std::invalid_argument &e)
        {
            throw std::invalid_argument(origin + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

inline ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config " + path);
    ExperimentConfig c;
    apply_config_text(c, in, path);
    return c;
}

/// Every parameter that affects results, one key=value per line in fixed
/// order, linear units, 17 significant digits. `threads` and `dump_dir` are
/// excluded since they do not change output.
inline std::string canonical_text(const ExperimentConfig &c)
{
    const SystemConfig s = c.effective_system();
    std::ostringstream o;
    auto kv = [&](const char *k, const std::string &v) { o << k << '=' << v << '\n'; };
    auto num = [](double v) { return format_g(v, 17); };
    kv("aps", num(s.aps));
    kv("ues", num(s.ues));
    kv("tx_antennas", num(s.tx_antennas));
    kv("rx_antennas", num(s.rx_antennas));
    kv("frame_length", num(s.frame_length));
    kv("coherence_length", num(s.coherence_length));
    kv("pilot_length", num(s.pilot_length));
    kv("pilot_power", num(s.pilot_power));
    kv("power_budget", num(s.power_budget));
    kv("comm_noise", num(s.comm_noise));
    kv("sensing_noise", num(s.sensing_noise));
    kv("pathloss_exponent", num(s.pathloss_exponent));
    kv("shadowing_db", num(s.shadowing_db));
    kv("reference_distance_m", num(s.reference_distance));
    kv("area_side_m", num(s.area_side));
    kv("sensing_gain", num(s.sensing_gain));
    kv("distance_policy", s.distance_policy == DistancePolicy::reject ? "reject" : "clamp");
    kv("max_placement_attempts", std::to_string(s.max_placement_attempts));
    kv("array_indexing", s.array_indexing == ArrayIndexing::zero_based ? "zero_based" : "one_based");
    kv("xi_normalization", s.xi_normalization == XiNormalization::total ? "total" : "per_ap");
    kv("echo_model", c.echo_model == EchoModel::multistatic ? "multistatic" : "own_link");
    kv("seed", std::to_string(c.seed));
    kv("large_scale", num(c.large_scale));
    kv("small_scale", num(c.small_scale));
    kv("crlb_threshold_db", num(c.crlb_threshold_db));
    kv("rho", num(c.rho));
    kv("convergence_tol", num(c.convergence_tol));
    kv("max_outer_iter", num(c.max_outer_iter));
    kv("sweep_aps", detail::join(c.aps));
    kv("sweep_tx_antennas", detail::join(c.tx_antennas));
    kv("sweep_pilot_lengths", detail::join(c.pilot_lengths));
    kv("sweep_crlb_thresholds_db", detail::join(c.crlb_thresholds_db));
    return o.str();
}

/// FNV-1a 64.
inline std::uint64_t fnv1a64(const std::string &s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s)
    {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig &c)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(c))));
    return buf;
}

/// Minimal RFC 4180 writer: fields containing ',', '"' or newlines are quoted.
class CsvWriter
{
  public:
    explicit CsvWriter(std::ostream &out) : out_(out) {}

    void row(const std::vector<std::string> &fields)
    {
        for (std::size_t i = 0; i < fields.size(); ++i)
        {
            if (i)
                out_ << ',';
            out_ << quote(fields[i]);
        }
        out_ << '\n';
    }

    static std::string quote(const std::string &f)
    {
        if (f.find_first_of(",\"\n\r") == std::string::npos)
            return f;
        std::string q = "\"";
        for (char ch : f)
        {
            if (ch == '"')
                q += '"';
            q += ch;
        }
        return q + '"';
    }

  private:
    std::ostream &out_;
};

inline std::string csv_num(double v)
{
    return format_g(v, 10);
}

/// Runs fn(i) for i in [0, n) on `threads` workers; results land by index so
/// the output order never depends on scheduling.
template <class R, class F> std::vector<R> parallel_map(int n, int threads, F fn)
{
    std::vector<R> out(std::size_t(std::max(n, 0)));
    if (threads <= 1 || n <= 1)
    {
        for (int i = 0; i < n; ++i)
            out[i] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, n); ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++)
            {
                try
                {
                    out[i] = fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err)
                        err = std::current_exception();
                }
            }
        });
    for (auto &th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
    return out;
}

inline void dump_scenario_realization(const ExperimentConfig &c, const Scenario &sc, std::uint64_t draw_seed_value,
                                      const std::string &tag)
{
    if (c.dump_dir.empty())
        return;
    std::filesystem::create_directories(c.dump_dir);
    write_realization((std::filesystem::path(c.dump_dir) / (tag + ".bin")).string(),
                      sample_realization(sc, draw_seed_value, 0));
}

inline void dump_subproblem(const ExperimentConfig &c, const Scenario &sc, const ScaOptions &opt,
                            const PowerAllocation &at, const std::string &tag)
{
    if (c.dump_dir.empty())
        return;
    std::filesystem::create_directories(c.dump_dir);
    const CrlbEvaluator ev(sc, opt.echo_model);
    const Subproblem sp = build_subproblem(sc, at, surrogate_constants(sc, at), ev, opt);
    std::ofstream out(std::filesystem::path(c.dump_dir) / (tag + ".txt"));
    sp.program.write_text(out);
}

/// Sum rate versus L, N_t and pilot length at equal power: one row per
/// triple, closed form and Monte Carlo averaged over the large-scale draws.
/// Draw d uses the same topology seed for every triple.
inline void run_rate_vs_L(const ExperimentConfig &c, std::ostream &out)
{
    struct Task
    {
        int L, nt, tau;
    };
    std::vector<Task> tasks;
    for (int L : c.aps)
        for (int nt : c.tx_antennas)
            for (int tau : c.pilot_lengths)
                tasks.push_back({L, nt, tau});
    const std::string hash = config_hash(c);
    const int D = c.large_scale;

    struct Cell
    {
        double cf = 0.0, mc = 0.0, mc_var = 0.0;
    };
    const auto cells = parallel_map<Cell>(int(tasks.size()) * D, c.threads, [&](int i) {
        const Task &t = tasks[i / D];
        const int d = i % D;
        SystemConfig s = c.effective_system();
        s.aps = t.L;
        s.tx_antennas = t.nt;
        s.pilot_length = t.tau;
        const std::uint64_t ds = draw_seed(c.seed, std::uint64_t(d));
        const Scenario sc = make_scenario(s, ds);
        const PowerAllocation a = equal_power_allocation(sc);
        Cell cell;
        cell.cf = sum_rate(sc, a);
        for (const auto &m : monte_carlo_rates(sc, a, c.small_scale, ds))
        {
            cell.mc += m.rate;
            cell.mc_var += m.standard_error * m.standard_error;
        }
        return cell;
    });
    if (!c.dump_dir.empty())
    {
        SystemConfig s = c.effective_system();
        s.aps = tasks[0].L;
        s.tx_antennas = tasks[0].nt;
        s.pilot_length = tasks[0].tau;
        const std::uint64_t ds = draw_seed(c.seed, 0);
        dump_scenario_realization(c, make_scenario(s, ds), ds, "rate_vs_L_realization");
    }

    CsvWriter w(out);
    w.row({"seed", "config_hash", "L", "N_t", "tau_p", "large_scale", "small_scale", "cf_sum_rate", "mc_sum_rate",
           "mc_se", "cf_min_draw", "cf_max_draw"});
    for (std::size_t t = 0; t < tasks.size(); ++t)
    {
        double cf = 0.0, mc = 0.0, var = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int d = 0; d < D; ++d)
        {
            const Cell &cell = cells[t * D + d];
            cf += cell.cf;
            mc += cell.mc;
            var += cell.mc_var;
            lo = std::min(lo, cell.cf);
            hi = std::max(hi, cell.cf);
        }
        // UE rates treated as independent for the standard error of the sum.
        w.row({std::to_string(c.seed), hash, std::to_string(tasks[t].L), std::to_string(tasks[t].nt),
               std::to_string(tasks[t].tau), std::to_string(D), std::to_string(c.small_scale), csv_num(cf / D),
               csv_num(mc / D), csv_num(std::sqrt(var) / D), csv_num(lo), csv_num(hi)});
    }
}

namespace detail
{

struct ScaOutcome
{
    std::string status = "ok";
    std::string message;
    ScaResult result;
};

inline ScaOutcome run_sca_guarded(const Scenario &sc, const ScaOptions &opt)
{
    ScaOutcome o;
    try
    {
        o.result = sca_solve(sc, opt);
    }
    catch (const InfeasibleThresholdError &e)
    {
        o.status = "infeasible";
        o.message = e.what();
    }
    catch (const SingularFimError &e)
    {
        o.status = "infeasible";
        o.message = e.what();
    }
    catch (const SolverError &e)
    {
        o.status = "solver_error";
        o.message = e.what();
    }
    return o;
}

inline Scenario experiment_scenario(const ExperimentConfig &c, int L, int draw)
{
    SystemConfig s = c.effective_system();
    s.aps = L;
    return make_scenario(s, draw_seed(c.seed, std::uint64_t(draw)));
}

} // namespace detail

/// Per-iteration SCA trace for every L in the sweep and every large-scale
/// draw, at the single threshold `crlb_threshold_db`.
inline void run_convergence(const ExperimentConfig &c, std::ostream &out)
{
    const std::string hash = config_hash(c);
    const int D = c.large_scale;
    const int n = int(c.aps.size()) * D;
    const auto runs = parallel_map<detail::ScaOutcome>(n, c.threads, [&](int i) {
        const int L = c.aps[i / D];
        return detail::run_sca_guarded(detail::experiment_scenario(c, L, i % D),
                                       c.sca_options(L, c.crlb_threshold_db));
    });
    if (!c.dump_dir.empty() && runs[0].status == "ok")
        dump_subproblem(c, detail::experiment_scenario(c, c.aps[0], 0), c.sca_options(c.aps[0], c.crlb_threshold_db),
                        runs[0].result.initial, "convergence_first_subproblem");

    CsvWriter w(out);
    w.row({"seed", "config_hash", "L", "draw", "crlb_threshold_db", "status", "iter", "surrogate", "sum_rate",
           "max_crlb_slack", "power", "solver_iterations"});
    for (int i = 0; i < n; ++i)
    {
        const int L = c.aps[i / D], d = i % D;
        const std::vector<std::string> head = {std::to_string(c.seed), hash, std::to_string(L), std::to_string(d),
                                               csv_num(c.crlb_threshold_db), runs[i].status};
        if (runs[i].status != "ok")
        {
            auto row = head;
            row.insert(row.end(), {"", "", "", "", "", ""});
            w.row(row);
            continue;
        }
        for (const ScaIterate &it : runs[i].result.trace)
        {
            auto row = head;
            row.insert(row.end(), {std::to_string(it.iter), csv_num(it.surrogate), csv_num(it.sum_rate),
                                   csv_num(it.max_crlb_slack), csv_num(it.power), std::to_string(it.solver_iterations)});
            w.row(row);
        }
    }
}

/// SCA against its heuristic start over the threshold sweep, one row per
/// (L, threshold, draw). Infeasible thresholds give status "infeasible".
inline void run_rate_vs_crlb_threshold(const ExperimentConfig &c, std::ostream &out)
{
    const std::string hash = config_hash(c);
    const int D = c.large_scale;
    const int T = int(c.crlb_thresholds_db.size());
    const int n = int(c.aps.size()) * T * D;
    const auto runs = parallel_map<detail::ScaOutcome>(n, c.threads, [&](int i) {
        const int L = c.aps[i / (T * D)];
        const double thr = c.crlb_thresholds_db[(i / D) % T];
        return detail::run_sca_guarded(detail::experiment_scenario(c, L, i % D), c.sca_options(L, thr));
    });

    CsvWriter w(out);
    w.row({"seed", "config_hash", "L", "crlb_threshold_db", "draw", "status", "heuristic_sum_rate", "sca_sum_rate",
           "iterations", "converged", "message"});
    for (int i = 0; i < n; ++i)
    {
        const int L = c.aps[i / (T * D)];
        const double thr = c.crlb_thresholds_db[(i / D) % T];
        const int d = i % D;
        const auto &o = runs[i];
        std::vector<std::string> row = {std::to_string(c.seed), hash, std::to_string(L), csv_num(thr),
                                        std::to_string(d), o.status};
        if (o.status == "ok")
        {
            const Scenario sc = detail::experiment_scenario(c, L, d);
            row.insert(row.end(), {csv_num(sum_rate(sc, o.result.initial)), csv_num(sum_rate(sc, o.result.alloc)),
                                   std::to_string(o.result.iterations), o.result.converged ? "1" : "0", ""});
        }
        else
            row.insert(row.end(), {"", "", "", "", o.message});
        w.row(row);
    }
}

inline ValidationSettings validation_settings(const ExperimentConfig &c)
{
    ValidationSettings vs;
    vs.base = c.effective_system();
    vs.seed = c.seed;
    vs.large_scale = c.large_scale;
    vs.crlb_threshold_db = c.crlb_threshold_db;
    vs.echo_model = c.echo_model;
    vs.max_outer_iter = c.max_outer_iter;
    vs.convergence_tol = c.convergence_tol;
    return vs;
}

/// Oracle suite, one row per check. Returns the number of failed checks.
inline int run_validate_closed_forms(const ExperimentConfig &c, std::ostream &out,
                                     const std::function<void(const CheckResult &)> &on_result = {})
{
    const auto results = run_all_checks(validation_settings(c), on_result);
    const std::string hash = config_hash(c);
    CsvWriter w(out);
    w.row({"seed", "config_hash", "check", "name", "passed", "residual", "tolerance", "detail"});
    int failed = 0;
    for (const auto &r : results)
    {
        failed += r.passed ? 0 : 1;
        w.row({std::to_string(c.seed), hash, r.id, r.name, r.passed ? "1" : "0", csv_num(r.residual),
               csv_num(r.tolerance), r.detail});
    }
    return failed;
}

inline int run_experiment(ExperimentKind kind, const ExperimentConfig &c, std::ostream &out)
{
    c.validate();
    switch (kind)
    {
    case ExperimentKind::rate_vs_L:
        run_rate_vs_L(c, out);
        return 0;
    case ExperimentKind::convergence:
        run_convergence(c, out);
        return 0;
    case ExperimentKind::rate_vs_crlb_threshold:
        run_rate_vs_crlb_threshold(c, out);
        return 0;
    case ExperimentKind::validate_closed_forms:
        return run_validate_closed_forms(c, out);
    }
    return 0;
}

} // namespace cfisac
