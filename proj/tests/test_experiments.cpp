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


#include "cfisac/experiments.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace cfisac;
using Catch::Approx;

namespace
{

ExperimentConfig parse(const std::string &text)
{
    ExperimentConfig c;
    std::istringstream in(text);
    apply_config_text(c, in);
    return c;
}

std::vector<std::vector<std::string>> read_csv(const std::string &text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
    {
        std::vector<std::string> f;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i)
        {
            const char ch = line[i];
            if (quoted)
            {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"')
                    cur += '"', ++i;
                else if (ch == '"')
                    quoted = false;
                else
                    cur += ch;
            }
            else if (ch == '"')
                quoted = true;
            else if (ch == ',')
                f.push_back(cur), cur.clear();
            else
                cur += ch;
        }
        f.push_back(cur);
        rows.push_back(f);
    }
    return rows;
}

ExperimentConfig small_run()
{
    ExperimentConfig c;
    c.aps = {2, 3};
    c.tx_antennas = {2};
    c.pilot_lengths = {2, 4};
    c.large_scale = 2;
    c.small_scale = 20;
    return c;
}

} // namespace

TEST_CASE("config text: comments, units and lists")
{
    const auto c = parse("# header\n"
                         "aps = 16   # trailing\n"
                         "\n"
                         "comm_noise_dbm = -20\n"
                         "sensing_noise_mw = 0.5\n"
                         "pilot_power = 2\n"
                         "snr_db = 20\n"
                         "distance_policy = reject\n"
                         "echo_model = own_link\n"
                         "sweep_aps = 4, 8\n"
                         "sweep_crlb_thresholds_db = -3,-1.5\n"
                         "seed = 42\n");
    CHECK(c.system.aps == 16);
    CHECK(c.system.comm_noise == Approx(1e-2).epsilon(1e-12));
    CHECK(c.system.sensing_noise == 0.5);
    CHECK(c.system.pilot_power == 2.0);
    CHECK(c.system.distance_policy == DistancePolicy::reject);
    CHECK(c.echo_model == EchoModel::own_link);
    CHECK(c.aps == std::vector<int>{4, 8});
    CHECK(c.crlb_thresholds_db == std::vector<double>{-3.0, -1.5});
    CHECK(c.seed == 42u);
    // 20 dB over 1e-2 mW
    CHECK(c.effective_system().power_budget == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config text: errors name the line")
{
    auto fails_with = [](const std::string &text, const std::string &fragment) {
        try
        {
            parse(text);
        }
        catch (const std::invalid_argument &e)
        {
            INFO(e.what());
            return std::string(e.what()).find(fragment) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_with("aps = 8\nbogus = 1\n", ":2: config: unknown key 'bogus'"));
    CHECK(fails_with("aps = eight\n", "expects a number"));
    CHECK(fails_with("aps = 8.5\n", "expects an integer"));
    CHECK(fails_with("aps 8\n", ":1: expected key=value"));
    CHECK(fails_with("distance_policy = sometimes\n", "reject or clamp"));
}

TEST_CASE("config validation rejects bad sweeps and counts")
{
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    c.aps.clear();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.small_scale = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.pilot_lengths = {0};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.rho = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("paper scale restores 100 x 10")
{
    ExperimentConfig c;
    CHECK(c.small_scale == 50);
    CHECK(c.large_scale == 5);
    c.use_paper_scale();
    CHECK(c.small_scale == 100);
    CHECK(c.large_scale == 10);
}

TEST_CASE("FNV-1a 64 reference vectors")
{
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("canonical text round-trips and drives the hash")
{
    ExperimentConfig c;
    c.system.aps = 12;
    c.snr_db = 25.0;
    c.crlb_thresholds_db = {-7.25, 1.0 / 3.0};
    const ExperimentConfig back = parse(canonical_text(c));
    CHECK(canonical_text(back) == canonical_text(c));
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);

    ExperimentConfig d = c;
    d.threads = 8;
    d.dump_dir = "/tmp/x";
    CHECK(config_hash(d) == config_hash(c));
    d.seed += 1;
    CHECK(config_hash(d) != config_hash(c));
    d = c;
    d.system.shadowing_db += 1e-9;
    CHECK(config_hash(d) != config_hash(c));
}

TEST_CASE("shipped default config equals the built-in defaults")
{
    const ExperimentConfig c = load_config(CFISAC_SOURCE_DIR "/configs/default.cfg");
    CHECK(config_hash(c) == config_hash(ExperimentConfig{}));
}

TEST_CASE("CSV quoting")
{
    CHECK(CsvWriter::quote("plain") == "plain");
    CHECK(CsvWriter::quote("a,b") == "\"a,b\"");
    CHECK(CsvWriter::quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
    std::ostringstream o;
    CsvWriter w(o);
    w.row({"x", "1,2", ""});
    CHECK(o.str() == "x,\"1,2\",\n");
    CHECK(read_csv(o.str())[0] == std::vector<std::string>{"x", "1,2", ""});
}

TEST_CASE("parallel_map keeps index order and rethrows")
{
    const auto v = parallel_map<int>(50, 4, [](int i) { return i * i; });
    for (int i = 0; i < 50; ++i)
        CHECK(v[i] == i * i);
    CHECK_THROWS_AS(parallel_map<int>(10, 3,
                                      [](int i) {
                                          if (i == 7)
                                              throw std::runtime_error("boom");
                                          return i;
                                      }),
                    std::runtime_error);
}

TEST_CASE("rate_vs_L: schema, provenance and byte-identical reruns")
{
    ExperimentConfig c = small_run();
    std::ostringstream a, b, t;
    run_experiment(ExperimentKind::rate_vs_L, c, a);
    run_experiment(ExperimentKind::rate_vs_L, c, b);
    c.threads = 3;
    run_experiment(ExperimentKind::rate_vs_L, c, t);
    CHECK(a.str() == b.str());
    CHECK(a.str() == t.str());

    const auto rows = read_csv(a.str());
    REQUIRE(rows.size() == 1 + 2 * 1 * 2);
    CHECK(rows[0][0] == "seed");
    CHECK(rows[0][1] == "config_hash");
    const std::string hash = config_hash(c);
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        CHECK(rows[i].size() == rows[0].size());
        CHECK(rows[i][0] == "1");
        CHECK(rows[i][1] == hash);
    }
    CHECK(a.str().find(';') == std::string::npos);

    c.seed = 2;
    std::ostringstream other;
    run_experiment(ExperimentKind::rate_vs_L, c, other);
    CHECK(other.str() != a.str());
}

TEST_CASE("rate_vs_L closed-form column matches a direct evaluation")
{
    ExperimentConfig c = small_run();
    c.aps = {3};
    c.pilot_lengths = {4};
    std::ostringstream o;
    run_rate_vs_L(c, o);
    const auto rows = read_csv(o.str());
    double expect = 0.0;
    for (int d = 0; d < c.large_scale; ++d)
    {
        SystemConfig s = c.effective_system();
        s.aps = 3;
        s.tx_antennas = 2;
        s.pilot_length = 4;
        const Scenario sc = make_scenario(s, draw_seed(c.seed, std::uint64_t(d)));
        expect += sum_rate(sc, equal_power_allocation(sc));
    }
    CHECK(std::stod(rows[1][7]) == Approx(expect / c.large_scale).epsilon(1e-9));
}

TEST_CASE("unreachable thresholds give explicit infeasible rows")
{
    ExperimentConfig c;
    c.aps = {3};
    c.large_scale = 1;
    c.crlb_thresholds_db = {-80.0, 20.0};
    std::ostringstream o;
    run_experiment(ExperimentKind::rate_vs_crlb_threshold, c, o);
    const auto rows = read_csv(o.str());
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][5] == "infeasible");
    CHECK(rows[1][6].empty());
    CHECK(!rows[1][10].empty());
    CHECK(rows[2][5] == "ok");
    CHECK(std::stod(rows[2][7]) >= std::stod(rows[2][6]));
}

TEST_CASE("convergence trace starts at iteration 0 and never descends")
{
    ExperimentConfig c;
    c.aps = {3};
    c.large_scale = 1;
    std::ostringstream o;
    run_experiment(ExperimentKind::convergence, c, o);
    const auto rows = read_csv(o.str());
    REQUIRE(rows.size() >= 3);
    CHECK(rows[1][6] == "0");
    for (std::size_t i = 2; i < rows.size(); ++i)
    {
        CHECK(std::stoi(rows[i][6]) == std::stoi(rows[i - 1][6]) + 1);
        CHECK(std::stod(rows[i][8]) >= std::stod(rows[i - 1][8]) - 1e-6);
    }
}

TEST_CASE("experiment kinds parse by name")
{
    CHECK(parse_experiment_kind("rate_vs_L") == ExperimentKind::rate_vs_L);
    CHECK(parse_experiment_kind("validate_closed_forms") == ExperimentKind::validate_closed_forms);
    CHECK_THROWS_AS(parse_experiment_kind("fig2"), std::invalid_argument);
}
