// SPDX-License-Identifier: Apache-2.0
//
// beamtrack command line: each subcommand runs one pipeline stage against --out.
#include "beamtrack/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace bt = beamtrack;

namespace
{
    struct Common
    {
        std::string config;
        std::string out;
        std::int64_t seed = -1;
    };

    void add_common(CLI::App *sub, Common &c)
    {
        sub->add_option("--config", c.config, "experiment config (key = value lines)");
        sub->add_option("--out", c.out, "output directory (overrides the config)");
        sub->add_option("--seed", c.seed, "master seed (overrides the config)")->check(CLI::NonNegativeNumber);
    }

    bt::ExperimentConfig resolve(const Common &c)
    {
        bt::ExperimentConfig cfg;
        try
        {
            if (!c.config.empty())
                cfg = bt::load_config(c.config);
            if (!c.out.empty())
                cfg.out_dir = c.out;
            if (c.seed >= 0)
                cfg.seed = static_cast<std::uint64_t>(c.seed);
            cfg.validate();
        }
        catch (const std::exception &e)
        {
            throw bt::StageError("config", e.what());
        }
        return cfg;
    }

    void print_summary(const bt::Report &r)
    {
        std::cout << "model        p  interval_ms  top1     TR       MOR%\n";
        for (const auto &row : r.rows)
        {
            std::printf("%-12s %d  %-11g  %.4f   %.4f   %.2f\n", row.model.c_str(), row.schedule,
                        row.measurement_interval_ms, row.topk.empty() ? 0.0 : row.topk.front().accuracy,
                        row.tr.ratio, row.mor);
        }
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Beam tracking experiments: synthetic data, LSTM beam predictors and evaluation"};
    app.require_subcommand(1);

    Common common;
    std::string stage = "report";
    std::string head = "classification";
    int p = 0;

    auto *synth = app.add_subcommand("synth", "generate the synthetic scenario into <out>/dataset.txt");
    auto *ingest = app.add_subcommand("ingest", "ingest the configured scene-records file into <out>/dataset.txt");
    auto *stats = app.add_subcommand("stats", "scenario statistics into <out>/stats.json");
    auto *train = app.add_subcommand("train", "split, fit the normalizer and train both heads");
    auto *eval = app.add_subcommand("eval", "roll out every configured schedule on the test split");
    auto *track = app.add_subcommand("track", "roll out a single head and schedule");
    auto *report = app.add_subcommand("report", "aggregate tracks into report.json and plot tables");
    auto *runc = app.add_subcommand("run", "run the pipeline through --stage");
    for (auto *s : {synth, ingest, stats, train, eval, track, report, runc})
        add_common(s, common);
    runc->add_option("--stage", stage, "last stage to run")
        ->check(CLI::IsMember({"data", "stats", "train", "eval", "report"}));
    track->add_option("--head", head, "model head")->check(CLI::IsMember({"classification", "regression"}));
    track->add_option("-p,--predictions", p, "predictions per measurement")->check(CLI::NonNegativeNumber);

    CLI11_PARSE(app, argc, argv);

    try
    {
        auto cfg = resolve(common);
        if (synth->parsed())
        {
            if (cfg.scenario != "synth")
                throw bt::StageError("data", "synth requires scenario = synth");
            bt::stage_data(cfg);
        }
        else if (ingest->parsed())
        {
            if (cfg.scenario == "synth")
                throw bt::StageError("data", "ingest requires scenario = <scene-records file>");
            bt::stage_data(cfg);
        }
        else if (stats->parsed())
            bt::stage_stats(cfg);
        else if (train->parsed())
            bt::stage_train(cfg);
        else if (eval->parsed())
            bt::stage_eval(cfg);
        else if (track->parsed())
            bt::stage_track(cfg, bt::head_from_string(head), p);
        else if (report->parsed())
            print_summary(bt::stage_report(cfg));
        else if (runc->parsed())
        {
            const auto r = bt::run(cfg, stage);
            if (stage == "report")
                print_summary(r);
        }
        std::cout << "done: " << cfg.out_dir.string() << "\n";
    }
    catch (const bt::StageError &e)
    {
        std::cerr << "stage '" << e.stage << "' failed: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "stage 'cli' failed: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
