// SPDX-License-Identifier: Apache-2.0
//
// Pipeline orchestration: data -> split -> train both heads -> evaluate every schedule -> report.
// Each stage reads and writes its artifacts under the output directory so stages can be run one
// at a time:
//
//   dataset.txt                    scene-records file of the full dataset
//   stats.json                     ScenarioStats of the full dataset
//   split.json                     train/test episode ids
//   normalizer.json                RSRP normalization fitted on the training split
//   checkpoint_<head>.json         trained parameters
//   tracks/<model>_p<p>.jsonl      one TrackRecord per line
//   report.json                    the report
//   topk_vs_k.csv, throughput_ratio.csv, mafd.csv   plot tables
// ------------------------------------------------------------------------

#pragma once

#include "beamtrack/config.hpp"
#include "beamtrack/dataset.hpp"
#include "beamtrack/metrics.hpp"
#include "beamtrack/model.hpp"
#include "beamtrack/tracking.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace beamtrack
{
    inline constexpr const char *persistence_model = "persistence";

    const char *model_name(Head head); // "DeepBT-C" / "DeepBT-R"

    struct ResultRow
    {
        std::string model;
        Head head = Head::classification;
        int schedule = 0;
        double measurement_interval_ms = 0;
        std::vector<TopKResult> topk;
        TrResult tr;
        std::size_t n_measured = 0;
        std::size_t n_full = 0;
        double mor = 0;
    };

    struct ModelSummary
    {
        Head head = Head::classification;
        std::size_t parameters = 0;
        std::vector<double> loss_curve;
    };

    struct Report
    {
        std::string config_digest;
        std::uint64_t seed = 0;
        std::string scenario;
        std::size_t episodes = 0;
        std::size_t train_episodes = 0;
        std::size_t test_episodes = 0;
        std::size_t scenes = 0;
        ScenarioStats stats;
        std::vector<ModelSummary> models;
        std::vector<ResultRow> rows;
        double runtime_s = 0;
    };

    nlohmann::ordered_json to_json(const Report &r);
    Report report_from_json(const nlohmann::json &j);

    // Writes topk_vs_k.csv, throughput_ratio.csv and mafd.csv into `dir`
    void emit_plot_data(const Report &r, const std::filesystem::path &dir);

    // Track-record persistence, one JSON object per line
    void write_tracks(const std::filesystem::path &path, std::span<const TrackRecord> records);
    std::vector<TrackRecord> read_tracks(const std::filesystem::path &path);

    struct TrainedModels
    {
        RsrpNormalizer norm;
        Checkpoint classification;
        Checkpoint regression;
        std::vector<double> loss_classification;
        std::vector<double> loss_regression;
    };

    Dataset load_dataset(const ExperimentConfig &cfg);
    TrainedModels train_models(const ExperimentConfig &cfg, const Dataset &train);

    // Rollouts of every test series, ordered by (episode, receiver)
    std::vector<TrackRecord> evaluate_schedule(const Predictor &predictor, const Dataset &test,
                                               const ExperimentConfig &cfg, const RsrpNormalizer &norm,
                                               int predictions_per_measurement);
    // Previous-scene best beam over the same target slots as the rollouts
    std::vector<TrackRecord> evaluate_persistence(const Dataset &test, const ExperimentConfig &cfg);

    ResultRow summarize_row(const std::string &model, Head head, int schedule, double slot_interval_ms,
                            std::span<const TrackRecord> records, std::span<const int> ks);

    // Individual stages; each throws StageError tagged with its name
    void stage_data(const ExperimentConfig &cfg);
    void stage_stats(const ExperimentConfig &cfg);
    void stage_train(const ExperimentConfig &cfg);
    void stage_eval(const ExperimentConfig &cfg);
    void stage_track(const ExperimentConfig &cfg, Head head, int predictions_per_measurement);
    Report stage_report(const ExperimentConfig &cfg, double runtime_s = 0);

    // Full pipeline through `last_stage` (data, stats, train, eval, report)
    Report run(const ExperimentConfig &cfg, const std::string &last_stage = "report");
}
