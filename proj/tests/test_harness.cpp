// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/harness.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace beamtrack;
using Catch::Approx;
namespace fs = std::filesystem;

namespace
{
    ExperimentConfig tiny_config(const fs::path &out, std::uint64_t seed = 3)
    {
        std::istringstream in("scenario = synth\n"
                              "synth.episodes = 6\n"
                              "synth.receivers = 2\n"
                              "synth.scenes = 12\n"
                              "synth.nlos_fraction = 0.3\n"
                              "array.n_tx = 8\n"
                              "model.hidden = 6\n"
                              "train.epochs = 2\n"
                              "train.batch_size = 16\n"
                              "metrics.k = 1,2,4\n"
                              "test_fraction = 0.34\n");
        auto cfg = parse_config(in);
        cfg.out_dir = out;
        cfg.seed = seed;
        return cfg;
    }

    fs::path scratch(const std::string &name)
    {
        const auto dir = fs::temp_directory_path() / ("beamtrack_harness_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::vector<std::string> data_lines(const fs::path &csv)
    {
        std::vector<std::string> out;
        std::istringstream in(slurp(csv));
        std::string line;
        bool header = false;
        while (std::getline(in, line))
        {
            if (line.empty() || line[0] == '#')
                continue;
            if (!header)
            {
                header = true;
                continue;
            }
            out.push_back(line);
        }
        return out;
    }
}

TEST_CASE("empty config uses documented defaults", "[harness]")
{
    std::istringstream in("# nothing but a comment\n\n");
    const auto cfg = parse_config(in);
    CHECK(cfg.scenario == "synth");
    CHECK(cfg.n_tx == 16);
    CHECK(cfg.window.window_len == 4);
    CHECK(cfg.hidden_dims == std::vector<Eigen::Index>{128, 128});
    CHECK(cfg.dropout_rate == 0.2);
    CHECK(cfg.schedules == std::vector<int>{0, 1, 2, 3});
    CHECK(cfg.ks == std::vector<int>{1, 5, 10});
    CHECK(cfg.train.learning_rate == 1e-3);
    CHECK(cfg.train.gradient_clip_norm == 5.0);
    CHECK(cfg.synth.scene_interval_ms == 80.0);
    CHECK_FALSE(cfg.prefilter.enabled);
}

TEST_CASE("config parsing and validation", "[harness]")
{
    std::istringstream in("seed = 9   # trailing comment\nschedules = 0, 2\nprefilter.enabled = true\nprefilter.n = 4\n"
                          "synth.bs_x = 50\nwindow.features = rsrp_vector\nwindow.normalization = zscore_db\n");
    const auto cfg = parse_config(in);
    CHECK(cfg.seed == 9);
    CHECK(cfg.schedules == std::vector<int>{0, 2});
    CHECK(cfg.prefilter.enabled);
    CHECK(cfg.prefilter.subset_size == 4);
    CHECK(cfg.prefilter.bs_position.x() == 50.0);
    CHECK(cfg.window.feature_mode == FeatureMode::rsrp_vector);
    CHECK(cfg.window.normalization == Normalization::zscore_db);

    const auto parse = [](const std::string &s)
    {
        std::istringstream i(s);
        return parse_config(i);
    };
    try
    {
        parse("seed = 1\nbogus.key = 3\n");
        FAIL("expected a parse error");
    }
    catch (const ParseError &e)
    {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(parse("seed = x\n"), ParseError);
    CHECK_THROWS_AS(parse("just words\n"), ParseError);
    CHECK_THROWS_AS(parse("schedules = \n"), InvalidInput);
    CHECK_THROWS_AS(parse("metrics.k = 5,1\n"), InvalidInput);
    CHECK_THROWS_AS(parse("metrics.k = 1,17\n"), InvalidInput);
    CHECK_THROWS_AS(parse("test_fraction = 1\n"), InvalidInput);
}

TEST_CASE("config digest tracks effective values", "[harness]")
{
    std::istringstream a("seed = 1\n"), b("seed = 1\n# a comment changes nothing\n"), c("seed = 2\n");
    const auto ca = parse_config(a), cb = parse_config(b), cc = parse_config(c);
    CHECK(ca.digest() == cb.digest());
    CHECK(ca.digest() != cc.digest());
    std::istringstream again(ca.canonical());
    CHECK(parse_config(again).digest() == ca.digest());
}

TEST_CASE("sub-seeds are distinct and stable", "[harness]")
{
    CHECK(derive_seed(1, SeedStage::synth) == derive_seed(1, SeedStage::synth));
    CHECK(derive_seed(1, SeedStage::synth) != derive_seed(1, SeedStage::split));
    CHECK(derive_seed(1, SeedStage::synth) != derive_seed(2, SeedStage::synth));
}

TEST_CASE("minimal run writes every artifact and a valid report", "[harness]")
{
    const auto dir = scratch("smoke");
    const auto cfg = tiny_config(dir);
    const auto report = run(cfg);

    for (const char *f : {"dataset.txt", "stats.json", "split.json", "normalizer.json", "checkpoint_classification.json",
                          "checkpoint_regression.json", "report.json", "topk_vs_k.csv", "throughput_ratio.csv", "mafd.csv"})
        CHECK(fs::exists(dir / f));
    for (int p = 0; p <= 3; ++p)
    {
        CHECK(fs::exists(dir / "tracks" / ("DeepBT-C_p" + std::to_string(p) + ".jsonl")));
        CHECK(fs::exists(dir / "tracks" / ("DeepBT-R_p" + std::to_string(p) + ".jsonl")));
    }

    std::ifstream in(dir / "report.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("format") == "beamtrack-report");
    const auto back = report_from_json(j);
    CHECK(back.config_digest.size() == 16);
    CHECK(back.seed == 3);
    CHECK(back.episodes == 6);
    CHECK(back.test_episodes + back.train_episodes == 6);
    CHECK(back.stats.los_count + back.stats.nlos_count == back.scenes);
    CHECK(back.rows.size() == 2 * 4 + 1);
    CHECK(back.models.size() == 2);
    CHECK(back.models[0].loss_curve.size() == 2);
    CHECK(report.rows.size() == back.rows.size());

    // the schedule list 0..3 maps onto the expected overhead reductions
    const double mor_expect[] = {0.0, 50.0, 200.0 / 3.0, 75.0};
    for (const auto &row : back.rows)
    {
        if (row.model == persistence_model)
        {
            CHECK(row.topk.size() == 1);
            continue;
        }
        REQUIRE(row.topk.size() == 3);
        CHECK(row.measurement_interval_ms == 80.0 * (row.schedule + 1));
        CHECK(std::abs(row.mor - mor_expect[row.schedule]) <= 5.0); // tiny series: edge effects
    }
    fs::remove_all(dir);
}

TEST_CASE("rerunning with the same seed reproduces the report", "[harness]")
{
    const auto d1 = scratch("det1"), d2 = scratch("det2");
    auto c1 = tiny_config(d1, 5), c2 = tiny_config(d2, 5);
    run(c1);
    run(c2);
    auto j1 = nlohmann::json::parse(slurp(d1 / "report.json"));
    auto j2 = nlohmann::json::parse(slurp(d2 / "report.json"));
    j1.erase("runtime_s");
    j2.erase("runtime_s");
    // the output directory is part of the config, so digests differ by design
    j1.erase("config_digest");
    j2.erase("config_digest");
    CHECK(j1.dump() == j2.dump());
    CHECK(slurp(d1 / "dataset.txt") == slurp(d2 / "dataset.txt"));
    CHECK(slurp(d1 / "checkpoint_regression.json") == slurp(d2 / "checkpoint_regression.json"));
    CHECK(slurp(d1 / "tracks" / "DeepBT-C_p2.jsonl") == slurp(d2 / "tracks" / "DeepBT-C_p2.jsonl"));

    auto c3 = tiny_config(scratch("det3"), 6);
    run(c3);
    CHECK(slurp(c3.out_dir / "dataset.txt") != slurp(d1 / "dataset.txt"));
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::remove_all(c3.out_dir);
}

TEST_CASE("report metrics are reproducible from stored track records", "[harness]")
{
    const auto dir = scratch("integrity");
    const auto cfg = tiny_config(dir, 8);
    run(cfg);
    const auto r = report_from_json(nlohmann::json::parse(slurp(dir / "report.json")));
    for (const auto &row : r.rows)
    {
        const auto recs = read_tracks(dir / "tracks" / (row.model + "_p" + std::to_string(row.schedule) + ".jsonl"));
        std::size_t measured = 0, full = 0;
        double num = 0, den = 0;
        std::vector<std::size_t> hits(row.topk.size(), 0);
        for (const auto &rec : recs)
            for (const auto &s : rec.slots)
            {
                ++full;
                measured += s.kind == SlotKind::measured ? 1 : 0;
                const auto &g = s.true_gains;
                num += std::log2(1.0 + g(s.chosen) * g(s.chosen));
                den += std::log2(1.0 + g(s.true_best) * g(s.true_best));
                const Eigen::VectorXd scores = mask_scores(s.output, s.candidates);
                for (std::size_t k = 0; k < row.topk.size(); ++k)
                {
                    const int kk = row.topk[k].k;
                    if (row.head == Head::classification)
                    {
                        // rank of the true best among the scores, ties to the lower index
                        int ahead = 0;
                        for (Eigen::Index i = 0; i < scores.size(); ++i)
                            if (scores(i) > scores(s.true_best) || (scores(i) == scores(s.true_best) && i < s.true_best))
                                ++ahead;
                        hits[k] += ahead < kk ? 1 : 0;
                    }
                    else
                    {
                        Eigen::Index arg = 0;
                        for (Eigen::Index i = 1; i < scores.size(); ++i)
                            if (scores(i) > scores(arg))
                                arg = i;
                        int ahead = 0;
                        for (Eigen::Index i = 0; i < g.size(); ++i)
                            if (g(i) > g(arg) || (g(i) == g(arg) && i < arg))
                                ++ahead;
                        hits[k] += ahead < kk ? 1 : 0;
                    }
                }
            }
        CHECK(row.n_full == full);
        CHECK(row.n_measured == measured);
        CHECK(std::abs(row.mor - (1.0 - static_cast<double>(measured) / static_cast<double>(full)) * 100.0) <= 1e-12);
        CHECK(std::abs(row.tr.ratio - num / den) <= 1e-12);
        for (std::size_t k = 0; k < hits.size(); ++k)
        {
            CHECK(row.topk[k].hits == hits[k]);
            CHECK(std::abs(row.topk[k].accuracy - static_cast<double>(hits[k]) / static_cast<double>(full)) <= 1e-12);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("plot tables mirror report values", "[harness]")
{
    Report r;
    r.scenario = "synth";
    r.stats = {90, 10, 0.375, 12.5};
    for (int p : {0, 1})
    {
        ResultRow row;
        row.model = "DeepBT-C";
        row.schedule = p;
        row.measurement_interval_ms = 80.0 * (p + 1);
        row.topk = {{1, 0.625, 5, 8}, {5, 0.875, 7, 8}, {10, 1.0, 8, 8}};
        row.tr = {0.8125, 13.0, 16.0};
        row.n_full = 8;
        row.n_measured = p ? 4 : 8;
        row.mor = p ? 50.0 : 0.0;
        r.rows.push_back(row);
    }
    const auto dir = scratch("plots");
    emit_plot_data(r, dir);
    const auto topk = data_lines(dir / "topk_vs_k.csv");
    REQUIRE(topk.size() == 6);
    CHECK(topk[0] == "DeepBT-C,classification,0,1,0.625,5,8");
    CHECK(topk[4] == "DeepBT-C,classification,1,5,0.875,7,8");
    const auto tr = data_lines(dir / "throughput_ratio.csv");
    REQUIRE(tr.size() == 2);
    CHECK(tr[1] == "DeepBT-C,classification,1,160,0.8125,4,8,50");
    const auto m = data_lines(dir / "mafd.csv");
    REQUIRE(m.size() == 1);
    CHECK(m[0] == "synth,90,10,0.375,12.5");

    CHECK_THROWS_AS(emit_plot_data(Report{}, dir), ValidationError);
    auto incomplete = r;
    incomplete.rows[0].topk.clear();
    CHECK_THROWS_AS(emit_plot_data(incomplete, dir), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("report JSON round-trips", "[harness]")
{
    Report r;
    r.config_digest = "0123456789abcdef";
    r.seed = 42;
    r.scenario = "synth";
    r.episodes = 10;
    r.train_episodes = 8;
    r.test_episodes = 2;
    r.scenes = 400;
    r.stats = {380, 20, 0.1, 3.3};
    r.models.push_back({Head::regression, 1234, {0.5, 0.25}});
    ResultRow row;
    row.model = "DeepBT-R";
    row.head = Head::regression;
    row.schedule = 2;
    row.measurement_interval_ms = 240;
    row.topk = {{1, 0.1, 1, 10}};
    row.tr = {0.3, 3, 10};
    row.n_full = 10;
    row.n_measured = 4;
    row.mor = 60;
    r.rows.push_back(row);
    r.runtime_s = 1.5;
    const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
    CHECK(to_json(back).dump() == to_json(r).dump());
    CHECK_THROWS_AS(report_from_json(nlohmann::json::object()), ValidationError);
}

TEST_CASE("stages fail with their name and keep earlier artifacts", "[harness]")
{
    const auto dir = scratch("stages");
    const auto cfg = tiny_config(dir);
    try
    {
        stage_eval(cfg);
        FAIL("eval without data should fail");
    }
    catch (const StageError &e)
    {
        CHECK(e.stage == "eval");
    }
    stage_data(cfg);
    stage_stats(cfg);
    try
    {
        stage_report(cfg);
        FAIL("report without tracks should fail");
    }
    catch (const StageError &e)
    {
        CHECK(e.stage == "report");
    }
    CHECK(fs::exists(dir / "dataset.txt"));
    CHECK(fs::exists(dir / "stats.json"));

    stage_train(cfg);
    stage_track(cfg, Head::regression, 1);
    CHECK(fs::exists(dir / "tracks" / "DeepBT-R_p1.jsonl"));
    CHECK_FALSE(fs::exists(dir / "tracks" / "DeepBT-C_p0.jsonl"));
    CHECK_THROWS_AS(run(cfg, "nonsense"), StageError);
    fs::remove_all(dir);
}

TEST_CASE("ingested scenarios run through the pipeline", "[harness]")
{
    const auto dir = scratch("ingest");
    SynthConfig sc;
    sc.num_episodes = 5;
    sc.scenes_per_episode = 10;
    const auto ds = synth_generate(sc, synth_tx_array(8), synth_rx_array(1));
    write_scene_records(dir / "scenario.txt", ds);

    auto cfg = tiny_config(dir / "out");
    cfg.scenario = (dir / "scenario.txt").string();
    const auto r = run(cfg);
    CHECK(r.episodes == 5);
    CHECK(r.scenario == cfg.scenario);

    cfg.n_tx = 4;
    cfg.ks = {1, 2};
    CHECK_THROWS_AS(stage_data(cfg), StageError);
    fs::remove_all(dir);
}

TEST_CASE("prefiltered evaluation restricts choices", "[harness]")
{
    const auto dir = scratch("prefilter");
    auto cfg = tiny_config(dir);
    cfg.prefilter.enabled = true;
    cfg.prefilter.subset_size = 3;
    cfg.prefilter.bs_position = cfg.synth.bs_position;
    run(cfg);
    for (const auto &rec : read_tracks(dir / "tracks" / "DeepBT-C_p1.jsonl"))
        for (const auto &s : rec.slots)
        {
            REQUIRE(s.candidates.size() == 3);
            CHECK(std::find(s.candidates.begin(), s.candidates.end(), s.chosen) != s.candidates.end());
        }
    fs::remove_all(dir);
}

TEST_CASE("command line reports the failing stage", "[harness][cli]")
{
    const auto dir = scratch("cli");
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "seed = 1\nnot.a.key = 2\n";
    }
    {
        std::ofstream cfg(dir / "tiny.cfg");
        cfg << "synth.episodes = 4\nsynth.scenes = 10\narray.n_tx = 4\nmodel.hidden = 4\ntrain.epochs = 1\nmetrics.k = 1,2\n";
    }
    const std::string cli = BEAMTRACK_CLI;
    const auto err = (dir / "stderr.txt").string();

    int rc = std::system((cli + " run --config " + (dir / "bad.cfg").string() + " 2> " + err).c_str());
    CHECK(rc != 0);
    CHECK(slurp(err).find("stage 'config'") != std::string::npos);

    rc = std::system((cli + " eval --config " + (dir / "tiny.cfg").string() + " --out " + (dir / "o").string() +
                      " 2> " + err)
                         .c_str());
    CHECK(rc != 0);
    CHECK(slurp(err).find("stage 'eval'") != std::string::npos);

    rc = std::system((cli + " run --stage stats --seed 4 --config " + (dir / "tiny.cfg").string() + " --out " +
                      (dir / "o").string() + " > " + (dir / "stdout.txt").string())
                         .c_str());
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "o" / "stats.json"));
    CHECK_FALSE(fs::exists(dir / "o" / "split.json"));

    rc = std::system((cli + " run --config " + (dir / "tiny.cfg").string() + " --out " + (dir / "o").string() +
                      " > " + (dir / "stdout.txt").string())
                         .c_str());
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "o" / "report.json"));
    fs::remove_all(dir);
}
