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


// cfisac: batch experiments and oracle checks.
//
//   cfisac rate_vs_L --config configs/default.cfg -o rate_vs_L.csv
//   cfisac convergence --aps 8,16 --crlb-threshold-db -5
//   cfisac rate_vs_crlb_threshold --crlb-thresholds-db=-10,-5,0 --threads 4
//   cfisac validate_closed_forms --seed 3
//   cfisac show_config --set aps=16

#include "cfisac/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace cfisac;

namespace
{

struct Flags
{
    std::string config_path;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<int> large_scale, small_scale, threads;
    bool paper_scale = false;
    std::optional<double> snr_db, crlb_threshold_db;
    std::vector<int> aps, tx, pilots;
    std::vector<double> thresholds_db;
    std::string dump_dir;
    std::vector<std::string> sets;
};

void add_common(CLI::App *cmd, Flags &f)
{
    cmd->add_option("-c,--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("-o,--output", f.output, "CSV output path (default stdout)");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--large-scale", f.large_scale, "large-scale draws per point");
    cmd->add_option("--small-scale", f.small_scale, "small-scale trials per draw");
    cmd->add_flag("--paper-scale", f.paper_scale, "100 small-scale x 10 large-scale");
    cmd->add_option("--snr-db", f.snr_db, "transmit SNR P_t / sigma^2 in dB (sets the power budget)");
    cmd->add_option("--crlb-threshold-db", f.crlb_threshold_db, "CRLB threshold in dB (rad^2)");
    cmd->add_option("--crlb-thresholds-db", f.thresholds_db, "threshold sweep in dB")->delimiter(',');
    cmd->add_option("--aps", f.aps, "AP count sweep")->delimiter(',');
    cmd->add_option("--tx-antennas", f.tx, "transmit antenna sweep")->delimiter(',');
    cmd->add_option("--pilot-lengths", f.pilots, "pilot length sweep")->delimiter(',');
    cmd->add_option("--threads", f.threads, "worker threads (output does not depend on it)");
    cmd->add_option("--dump-dir", f.dump_dir, "write debug dumps here");
    cmd->add_option("--set", f.sets, "override one config key (key=value), repeatable");
}

ExperimentConfig resolve(const Flags &f)
{
    ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : load_config(f.config_path);
    if (f.paper_scale)
        c.use_paper_scale();
    if (f.seed)
        c.seed = *f.seed;
    if (f.large_scale)
        c.large_scale = *f.large_scale;
    if (f.small_scale)
        c.small_scale = *f.small_scale;
    if (f.threads)
        c.threads = *f.threads;
    if (f.snr_db)
        c.snr_db = f.snr_db;
    if (f.crlb_threshold_db)
        c.crlb_threshold_db = *f.crlb_threshold_db;
    if (!f.thresholds_db.empty())
        c.crlb_thresholds_db = f.thresholds_db;
    if (!f.aps.empty())
        c.aps = f.aps;
    if (!f.tx.empty())
        c.tx_antennas = f.tx;
    if (!f.pilots.empty())
        c.pilot_lengths = f.pilots;
    if (!f.dump_dir.empty())
        c.dump_dir = f.dump_dir;
    for (const auto &kv : f.sets)
    {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
}

int run(ExperimentKind kind, const Flags &f)
{
    const ExperimentConfig c = resolve(f);
    std::ofstream file;
    if (!f.output.empty())
    {
        file.open(f.output, std::ios::binary);
        if (!file)
            throw std::runtime_error("cannot open " + f.output);
    }
    std::ostream &out = f.output.empty() ? std::cout : file;
    std::cerr << to_string(kind) << ": seed " << c.seed << ", config " << config_hash(c) << '\n';
    if (kind == ExperimentKind::validate_closed_forms)
    {
        const int failed = run_validate_closed_forms(c, out, [](const CheckResult &r) {
            std::cerr << (r.passed ? "PASS " : "FAIL ") << r.id << ": " << r.detail << " (" << format_g(r.seconds, 3)
                      << " s)\n";
        });
        return failed == 0 ? 0 : 2;
    }
    return run_experiment(kind, c, out);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"cell-free massive MIMO ISAC experiments"};
    app.require_subcommand(1);

    Flags f;
    std::vector<std::pair<CLI::App *, ExperimentKind>> kinds;
    for (auto k : {ExperimentKind::rate_vs_L, ExperimentKind::convergence, ExperimentKind::rate_vs_crlb_threshold,
                   ExperimentKind::validate_closed_forms})
    {
        static const std::map<ExperimentKind, std::string> help = {
            {ExperimentKind::rate_vs_L, "equal-power sum rate vs L, N_t and pilot length"},
            {ExperimentKind::convergence, "per-iteration SCA trace"},
            {ExperimentKind::rate_vs_crlb_threshold, "SCA vs heuristic over CRLB thresholds"},
            {ExperimentKind::validate_closed_forms, "oracle checks with residuals; exit 2 if any fails"},
        };
        CLI::App *cmd = app.add_subcommand(to_string(k), help.at(k));
        add_common(cmd, f);
        kinds.emplace_back(cmd, k);
    }
    CLI::App *show = app.add_subcommand("show_config", "print the canonical config and its hash");
    add_common(show, f);

    CLI11_PARSE(app, argc, argv);
    try
    {
        if (show->parsed())
        {
            const ExperimentConfig c = resolve(f);
            std::cout << canonical_text(c) << "config_hash=" << config_hash(c) << '\n';
            return 0;
        }
        for (const auto &[cmd, kind] : kinds)
            if (cmd->parsed())
                return run(kind, f);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
