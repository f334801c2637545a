// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace beamtrack
{
    using nlohmann::json;
    using nlohmann::ordered_json;
    namespace fs = std::filesystem;

    const char *model_name(Head head)
    {
        return head == Head::classification ? "DeepBT-C" : "DeepBT-R";
    }

    namespace
    {
        std::string real(double v)
        {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof(buf), v);
            return {buf, r.ptr};
        }

        std::string hex(std::uint64_t v)
        {
            char buf[17];
            std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
            return buf;
        }

        void write_text(const fs::path &path, const std::string &text)
        {
            std::ofstream out(path);
            if (!out)
                throw InvalidInput("cannot write " + path.string());
            out << text;
        }

        json read_json(const fs::path &path)
        {
            std::ifstream in(path);
            if (!in)
                throw InvalidInput("missing artifact " + path.string() + " (run the earlier stages first)");
            return json::parse(in);
        }

        fs::path track_path(const ExperimentConfig &cfg, const std::string &model, int p)
        {
            return cfg.out_dir / "tracks" / (model + "_p" + std::to_string(p) + ".jsonl");
        }

        fs::path checkpoint_path(const ExperimentConfig &cfg, Head head)
        {
            return cfg.out_dir / (std::string("checkpoint_") + to_string(head) + ".json");
        }

        // Runs `fn` and rethrows any failure tagged with the stage name
        template <typename Fn>
        auto staged(const std::string &stage, Fn &&fn)
        {
            try
            {
                return fn();
            }
            catch (const StageError &)
            {
                throw;
            }
            catch (const std::exception &e)
            {
                throw StageError(stage, e.what());
            }
        }

        Dataset read_dataset(const ExperimentConfig &cfg)
        {
            return ingest(cfg.out_dir / "dataset.txt", synth_tx_array(cfg.n_tx), synth_rx_array(cfg.n_rx));
        }

        RsrpNormalizer read_normalizer(const ExperimentConfig &cfg)
        {
            const auto j = read_json(cfg.out_dir / "normalizer.json");
            RsrpNormalizer n;
            n.mode = normalization_from_string(j.at("mode").get<std::string>());
            n.offset = j.at("offset").get<double>();
            n.scale = j.at("scale").get<double>();
            return n;
        }

        Dataset test_split(const ExperimentConfig &cfg, const Dataset &ds)
        {
            const auto j = read_json(cfg.out_dir / "split.json");
            const auto ids = j.at("test").get<std::set<std::int64_t>>();
            Dataset test = ds;
            test.episodes.clear();
            for (const auto &ep : ds.episodes)
                if (ids.count(ep.id))
                    test.episodes.push_back(ep);
            return test;
        }

        ordered_json topk_json(const std::vector<TopKResult> &v)
        {
            ordered_json a = ordered_json::array();
            for (const auto &t : v)
                a.push_back({{"k", t.k}, {"accuracy", t.accuracy}, {"hits", t.hits}, {"total", t.total}});
            return a;
        }
    }

    // ------------------------------------------------------------------------
    // report

    ordered_json to_json(const Report &r)
    {
        ordered_json j;
        j["format"] = "beamtrack-report";
        j["config_digest"] = r.config_digest;
        j["seed"] = r.seed;
        j["dataset"] = {{"scenario", r.scenario},
                        {"episodes", r.episodes},
                        {"train_episodes", r.train_episodes},
                        {"test_episodes", r.test_episodes},
                        {"scenes", r.scenes},
                        {"los_count", r.stats.los_count},
                        {"nlos_count", r.stats.nlos_count},
                        {"mafd", r.stats.mafd},
                        {"beam_gain_variance_db", r.stats.beam_gain_variance_db}};
        ordered_json models = ordered_json::array();
        for (const auto &m : r.models)
            models.push_back({{"model", model_name(m.head)},
                              {"head", to_string(m.head)},
                              {"parameters", m.parameters},
                              {"loss_curve", m.loss_curve}});
        j["models"] = std::move(models);
        ordered_json rows = ordered_json::array();
        for (const auto &row : r.rows)
            rows.push_back({{"model", row.model},
                            {"head", to_string(row.head)},
                            {"schedule", row.schedule},
                            {"measurement_interval_ms", row.measurement_interval_ms},
                            {"topk", topk_json(row.topk)},
                            {"throughput_ratio", row.tr.ratio},
                            {"tr_numerator", row.tr.numerator},
                            {"tr_denominator", row.tr.denominator},
                            {"n_measured", row.n_measured},
                            {"n_full", row.n_full},
                            {"mor_percent", row.mor}});
        j["results"] = std::move(rows);
        j["runtime_s"] = r.runtime_s;
        return j;
    }

    Report report_from_json(const json &j)
    {
        if (j.value("format", "") != "beamtrack-report")
            throw ValidationError("not a beamtrack report");
        Report r;
        r.config_digest = j.at("config_digest").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        const auto &d = j.at("dataset");
        r.scenario = d.at("scenario").get<std::string>();
        r.episodes = d.at("episodes").get<std::size_t>();
        r.train_episodes = d.at("train_episodes").get<std::size_t>();
        r.test_episodes = d.at("test_episodes").get<std::size_t>();
        r.scenes = d.at("scenes").get<std::size_t>();
        r.stats.los_count = d.at("los_count").get<std::size_t>();
        r.stats.nlos_count = d.at("nlos_count").get<std::size_t>();
        r.stats.mafd = d.at("mafd").get<double>();
        r.stats.beam_gain_variance_db = d.at("beam_gain_variance_db").get<double>();
        for (const auto &m : j.at("models"))
            r.models.push_back({head_from_string(m.at("head").get<std::string>()), m.at("parameters").get<std::size_t>(),
                                m.at("loss_curve").get<std::vector<double>>()});
        for (const auto &row : j.at("results"))
        {
            ResultRow x;
            x.model = row.at("model").get<std::string>();
            x.head = head_from_string(row.at("head").get<std::string>());
            x.schedule = row.at("schedule").get<int>();
            x.measurement_interval_ms = row.at("measurement_interval_ms").get<double>();
            for (const auto &t : row.at("topk"))
                x.topk.push_back({t.at("k").get<int>(), t.at("accuracy").get<double>(), t.at("hits").get<std::size_t>(),
                                  t.at("total").get<std::size_t>()});
            x.tr = {row.at("throughput_ratio").get<double>(), row.at("tr_numerator").get<double>(),
                    row.at("tr_denominator").get<double>()};
            x.n_measured = row.at("n_measured").get<std::size_t>();
            x.n_full = row.at("n_full").get<std::size_t>();
            x.mor = row.at("mor_percent").get<double>();
            r.rows.push_back(std::move(x));
        }
        r.runtime_s = j.value("runtime_s", 0.0);
        return r;
    }

    void emit_plot_data(const Report &r, const fs::path &dir)
    {
        if (r.rows.empty())
            throw ValidationError("report has no result rows");
        for (const auto &row : r.rows)
            if (row.topk.empty() || row.n_full == 0)
                throw ValidationError("report row for " + row.model + " is incomplete");

        fs::create_directories(dir);
        std::string topk = "# one row per (model, schedule, K); accuracy = hits / total\n"
                           "model,head,schedule,k,accuracy,hits,total\n";
        std::string tr = "# throughput_ratio over power gains |y|^2; mor_percent = (1 - n_measured / n_full) * 100\n"
                         "model,head,schedule,measurement_interval_ms,throughput_ratio,n_measured,n_full,mor_percent\n";
        for (const auto &row : r.rows)
        {
            for (const auto &t : row.topk)
                topk += row.model + ',' + to_string(row.head) + ',' + std::to_string(row.schedule) + ',' +
                        std::to_string(t.k) + ',' + real(t.accuracy) + ',' + std::to_string(t.hits) + ',' +
                        std::to_string(t.total) + '\n';
            tr += row.model + ',' + to_string(row.head) + ',' + std::to_string(row.schedule) + ',' +
                  real(row.measurement_interval_ms) + ',' + real(row.tr.ratio) + ',' + std::to_string(row.n_measured) +
                  ',' + std::to_string(row.n_full) + ',' + real(row.mor) + '\n';
        }
        std::string mafd = "# beam_gain_variance_db is the variance of the per-scene best-beam gain in dB\n"
                           "scenario,los_count,nlos_count,mafd,beam_gain_variance_db\n";
        mafd += r.scenario + ',' + std::to_string(r.stats.los_count) + ',' + std::to_string(r.stats.nlos_count) + ',' +
                real(r.stats.mafd) + ',' + real(r.stats.beam_gain_variance_db) + '\n';

        write_text(dir / "topk_vs_k.csv", topk);
        write_text(dir / "throughput_ratio.csv", tr);
        write_text(dir / "mafd.csv", mafd);
    }

    // ------------------------------------------------------------------------
    // track records

    void write_tracks(const fs::path &path, std::span<const TrackRecord> records)
    {
        fs::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out)
            throw InvalidInput("cannot write " + path.string());
        for (const auto &r : records)
        {
            ordered_json j;
            j["episode"] = r.episode_id;
            j["receiver"] = r.receiver_id;
            j["head"] = to_string(r.head);
            j["p"] = r.predictions_per_measurement;
            ordered_json slots = ordered_json::array();
            for (const auto &s : r.slots)
            {
                ordered_json window = ordered_json::array();
                for (const auto &w : s.window)
                    window.push_back({w.slot, w.measured ? 1 : 0});
                slots.push_back({{"slot", s.slot},
                                 {"kind", s.kind == SlotKind::measured ? "M" : "P"},
                                 {"window", window},
                                 {"output", std::vector<double>(s.output.begin(), s.output.end())},
                                 {"candidates", s.candidates},
                                 {"chosen", s.chosen},
                                 {"true_best", s.true_best},
                                 {"true_gains", std::vector<double>(s.true_gains.begin(), s.true_gains.end())}});
            }
            j["slots"] = std::move(slots);
            out << j.dump() << '\n';
        }
    }

    std::vector<TrackRecord> read_tracks(const fs::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw InvalidInput("missing track file " + path.string());
        std::vector<TrackRecord> out;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            if (line.empty())
                continue;
            try
            {
                const auto j = json::parse(line);
                TrackRecord r;
                r.episode_id = j.at("episode").get<std::int64_t>();
                r.receiver_id = j.at("receiver").get<std::int64_t>();
                r.head = head_from_string(j.at("head").get<std::string>());
                r.predictions_per_measurement = j.at("p").get<int>();
                for (const auto &s : j.at("slots"))
                {
                    SlotRecord x;
                    x.slot = s.at("slot").get<Eigen::Index>();
                    x.kind = s.at("kind").get<std::string>() == "M" ? SlotKind::measured : SlotKind::predicted;
                    for (const auto &w : s.at("window"))
                        x.window.push_back({w.at(0).get<Eigen::Index>(), w.at(1).get<int>() == 1});
                    const auto o = s.at("output").get<std::vector<double>>();
                    x.output = Eigen::Map<const Eigen::VectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
                    x.candidates = s.at("candidates").get<std::vector<Eigen::Index>>();
                    x.chosen = s.at("chosen").get<Eigen::Index>();
                    x.true_best = s.at("true_best").get<Eigen::Index>();
                    const auto g = s.at("true_gains").get<std::vector<double>>();
                    x.true_gains = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
                    r.slots.push_back(std::move(x));
                }
                out.push_back(std::move(r));
            }
            catch (const json::exception &e)
            {
                throw ParseError(lineno, e.what());
            }
        }
        return out;
    }

    // ------------------------------------------------------------------------
    // pipeline pieces

    Dataset load_dataset(const ExperimentConfig &cfg)
    {
        const auto tx = synth_tx_array(cfg.n_tx);
        const auto rx = synth_rx_array(cfg.n_rx);
        if (cfg.scenario == "synth")
        {
            SynthConfig sc = cfg.synth;
            sc.seed = derive_seed(cfg.seed, SeedStage::synth);
            return synth_generate(sc, tx, rx);
        }
        Dataset ds = ingest(fs::path(cfg.scenario), tx, rx);
        if (ds.n_tx != cfg.n_tx || ds.n_rx != cfg.n_rx)
            throw ValidationError("scenario file declares n_tx/n_rx different from the config");
        return ds;
    }

    TrainedModels train_models(const ExperimentConfig &cfg, const Dataset &train_set)
    {
        TrainedModels out;
        out.norm = RsrpNormalizer::fit(train_set, cfg.window);
        const SequenceBatch data = build_batch(train_set, cfg.window, out.norm);

        const auto fit = [&](Head head, SeedStage init, SeedStage tr, Checkpoint &ck, std::vector<double> &curve)
        {
            ck.spec = cfg.model_spec(head);
            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(cfg.seed, tr);
            auto res = train(Parameters::init(ck.spec, derive_seed(cfg.seed, init)), ck.spec, tc, data);
            ck.params = std::move(res.params);
            ck.train_seed = tc.seed;
            ck.epochs = tc.epochs;
            curve = std::move(res.loss_curve);
        };
        fit(Head::classification, SeedStage::init_classification, SeedStage::train_classification, out.classification,
            out.loss_classification);
        fit(Head::regression, SeedStage::init_regression, SeedStage::train_regression, out.regression,
            out.loss_regression);
        return out;
    }

    ResultRow summarize_row(const std::string &model, Head head, int schedule, double slot_interval_ms,
                            std::span<const TrackRecord> records, std::span<const int> ks)
    {
        const auto m = summarize(records, head, ks);
        ResultRow row;
        row.model = model;
        row.head = head;
        row.schedule = schedule;
        row.measurement_interval_ms = (schedule + 1) * slot_interval_ms;
        row.topk = m.topk;
        row.tr = m.tr;
        row.n_measured = m.n_measured;
        row.n_full = m.n_full;
        row.mor = m.mor;
        return row;
    }

    std::vector<TrackRecord> evaluate_schedule(const Predictor &predictor, const Dataset &test,
                                               const ExperimentConfig &cfg, const RsrpNormalizer &norm, int p)
    {
        Schedule sched;
        sched.predictions_per_measurement = p;
        sched.slot_interval_ms = test.scene_interval_ms;
        RolloutOptions opts;
        if (cfg.prefilter.enabled)
            opts.prefilter = cfg.prefilter;
        opts.tx = synth_tx_array(cfg.n_tx);
        opts.n_rx = cfg.n_rx;

        std::vector<TrackRecord> out;
        for (const auto &ep : test.episodes)
            for (const auto &rs : ep.receivers)
                out.push_back(rollout(predictor, sched, rs, cfg.window, norm, opts));
        return out;
    }

    std::vector<TrackRecord> evaluate_persistence(const Dataset &test, const ExperimentConfig &cfg)
    {
        const auto w = cfg.window.window_len;
        std::vector<TrackRecord> out;
        for (const auto &ep : test.episodes)
            for (const auto &rs : ep.receivers)
            {
                const auto best = rs.best_beams();
                if (static_cast<Eigen::Index>(best.size()) <= w)
                    throw InvalidInput("series is too short for the window length");
                const auto pred = persistence_baseline(best);
                TrackRecord rec;
                rec.episode_id = ep.id;
                rec.receiver_id = rs.receiver_id;
                rec.head = Head::classification;
                for (Eigen::Index t = w; t < static_cast<Eigen::Index>(best.size()); ++t)
                {
                    SlotRecord s;
                    s.slot = t;
                    s.kind = SlotKind::measured;
                    s.window.push_back({t - 1, true});
                    const auto &gains = rs.scenes[static_cast<std::size_t>(t)].gains;
                    s.output = Eigen::VectorXd::Zero(gains.size());
                    s.chosen = pred[static_cast<std::size_t>(t - 1)];
                    s.output(s.chosen) = 1.0;
                    s.true_best = best[static_cast<std::size_t>(t)];
                    s.true_gains = gains;
                    rec.slots.push_back(std::move(s));
                }
                out.push_back(std::move(rec));
            }
        return out;
    }

    // ------------------------------------------------------------------------
    // stages

    void stage_data(const ExperimentConfig &cfg)
    {
        staged("data", [&]
               {
                   fs::create_directories(cfg.out_dir);
                   write_scene_records(cfg.out_dir / "dataset.txt", load_dataset(cfg));
               });
    }

    void stage_stats(const ExperimentConfig &cfg)
    {
        staged("stats", [&]
               {
                   const auto st = stats(read_dataset(cfg));
                   ordered_json j = {{"los_count", st.los_count},
                                     {"nlos_count", st.nlos_count},
                                     {"mafd", st.mafd},
                                     {"beam_gain_variance_db", st.beam_gain_variance_db}};
                   write_text(cfg.out_dir / "stats.json", j.dump(2) + "\n");
               });
    }

    void stage_train(const ExperimentConfig &cfg)
    {
        staged("train", [&]
               {
                   const Dataset ds = read_dataset(cfg);
                   auto [train, test] = split(ds, cfg.test_fraction, derive_seed(cfg.seed, SeedStage::split));
                   ordered_json sj;
                   sj["train"] = json::array();
                   sj["test"] = json::array();
                   for (const auto &e : train.episodes)
                       sj["train"].push_back(e.id);
                   for (const auto &e : test.episodes)
                       sj["test"].push_back(e.id);
                   write_text(cfg.out_dir / "split.json", sj.dump() + "\n");

                   const TrainedModels tm = train_models(cfg, train);
                   ordered_json nj = {{"mode", to_string(tm.norm.mode)}, {"offset", tm.norm.offset}, {"scale", tm.norm.scale}};
                   write_text(cfg.out_dir / "normalizer.json", nj.dump() + "\n");
                   save_checkpoint(checkpoint_path(cfg, Head::classification), tm.classification);
                   save_checkpoint(checkpoint_path(cfg, Head::regression), tm.regression);
                   ordered_json lj = {{"classification", tm.loss_classification}, {"regression", tm.loss_regression}};
                   write_text(cfg.out_dir / "loss_curves.json", lj.dump() + "\n");
               });
    }

    namespace
    {
        std::vector<TrackRecord> run_tracks(const ExperimentConfig &cfg, const Dataset &test, const RsrpNormalizer &norm,
                                            Head head, int p)
        {
            const Checkpoint ck = load_checkpoint(checkpoint_path(cfg, head));
            if (ck.spec.head != head || ck.spec.num_beams != cfg.n_tx * cfg.n_rx)
                throw ValidationError("checkpoint does not match the configured head and beam count");
            const ModelPredictor predictor(ck.spec, ck.params);
            auto records = evaluate_schedule(predictor, test, cfg, norm, p);
            write_tracks(track_path(cfg, model_name(head), p), records);
            return records;
        }
    }

    void stage_eval(const ExperimentConfig &cfg)
    {
        staged("eval", [&]
               {
                   const Dataset test = test_split(cfg, read_dataset(cfg));
                   const RsrpNormalizer norm = read_normalizer(cfg);
                   for (Head head : {Head::classification, Head::regression})
                       for (int p : cfg.schedules)
                           run_tracks(cfg, test, norm, head, p);
                   write_tracks(track_path(cfg, persistence_model, 0), evaluate_persistence(test, cfg));
               });
    }

    void stage_track(const ExperimentConfig &cfg, Head head, int p)
    {
        staged("track", [&]
               {
                   const Dataset test = test_split(cfg, read_dataset(cfg));
                   run_tracks(cfg, test, read_normalizer(cfg), head, p);
               });
    }

    Report stage_report(const ExperimentConfig &cfg, double runtime_s)
    {
        return staged("report", [&]
                      {
                          const Dataset ds = read_dataset(cfg);
                          const Dataset test = test_split(cfg, ds);
                          const auto sj = read_json(cfg.out_dir / "stats.json");
                          const auto lj = read_json(cfg.out_dir / "loss_curves.json");

                          Report r;
                          r.config_digest = hex(cfg.digest());
                          r.seed = cfg.seed;
                          r.scenario = cfg.scenario;
                          r.episodes = ds.episodes.size();
                          r.test_episodes = test.episodes.size();
                          r.train_episodes = r.episodes - r.test_episodes;
                          r.scenes = ds.num_scenes();
                          r.stats.los_count = sj.at("los_count").get<std::size_t>();
                          r.stats.nlos_count = sj.at("nlos_count").get<std::size_t>();
                          r.stats.mafd = sj.at("mafd").get<double>();
                          r.stats.beam_gain_variance_db = sj.at("beam_gain_variance_db").get<double>();

                          for (Head head : {Head::classification, Head::regression})
                          {
                              const auto spec = cfg.model_spec(head);
                              r.models.push_back({head, spec.parameter_count(),
                                                  lj.at(to_string(head)).get<std::vector<double>>()});
                          }
                          for (Head head : {Head::classification, Head::regression})
                              for (int p : cfg.schedules)
                              {
                                  const auto records = read_tracks(track_path(cfg, model_name(head), p));
                                  r.rows.push_back(summarize_row(model_name(head), head, p, ds.scene_interval_ms, records, cfg.ks));
                              }
                          const auto base = read_tracks(track_path(cfg, persistence_model, 0));
                          const int top1[] = {1};
                          r.rows.push_back(summarize_row(persistence_model, Head::classification, 0, ds.scene_interval_ms, base, top1));
                          r.runtime_s = runtime_s;

                          write_text(cfg.out_dir / "report.json", to_json(r).dump(2) + "\n");
                          emit_plot_data(r, cfg.out_dir);
                          return r;
                      });
    }

    Report run(const ExperimentConfig &cfg, const std::string &last_stage)
    {
        static const std::vector<std::string> order = {"data", "stats", "train", "eval", "report"};
        const auto it = std::find(order.begin(), order.end(), last_stage);
        if (it == order.end())
            throw StageError(last_stage, "unknown stage (expected data, stats, train, eval or report)");
        const auto upto = static_cast<std::size_t>(it - order.begin());

        staged("config", [&]
               { cfg.validate(); });
        const auto t0 = std::chrono::steady_clock::now();
        stage_data(cfg);
        if (upto >= 1)
            stage_stats(cfg);
        if (upto >= 2)
            stage_train(cfg);
        if (upto >= 3)
            stage_eval(cfg);
        if (upto < 4)
            return {};
        const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return stage_report(cfg, runtime);
    }
}
