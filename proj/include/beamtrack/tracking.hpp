// SPDX-License-Identifier: Apache-2.0
//
// Sliding-window features, measurement schedules and autoregressive rollouts in which
// model predictions stand in for skipped beam measurements.
// ------------------------------------------------------------------------

#pragma once

#include "beamtrack/dataset.hpp"
#include "beamtrack/metrics.hpp"
#include "beamtrack/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beamtrack
{
    enum class FeatureMode
    {
        rsrp_vector,           // normalized RSRP of every beam
        rsrp_plus_onehot_index // RSRP vector followed by a one-hot of the best beam
    };

    enum class Normalization
    {
        minmax_db,
        zscore_db
    };

    const char *to_string(FeatureMode m);
    const char *to_string(Normalization n);
    FeatureMode feature_mode_from_string(const std::string &s);
    Normalization normalization_from_string(const std::string &s);

    struct WindowConfig
    {
        Eigen::Index window_len = 4;
        FeatureMode feature_mode = FeatureMode::rsrp_plus_onehot_index;
        Normalization normalization = Normalization::minmax_db;
        double rsrp_floor_db = -200.0; // zero gains are clamped here before normalization

        void validate() const;
        Eigen::Index input_dim(Eigen::Index num_beams) const;
    };

    // Scalar affine map of RSRP dB values, fitted once on training scenes.
    // A degenerate fit (zero range or zero spread) maps every value to 0.
    struct RsrpNormalizer
    {
        Normalization mode = Normalization::minmax_db;
        double offset = 0; // min or mean
        double scale = 0;  // range or standard deviation; 0 when degenerate

        static RsrpNormalizer fit(const Dataset &train, const WindowConfig &wcfg);
        static RsrpNormalizer fit(std::span<const Eigen::VectorXd> rsrp_db, Normalization mode);

        Eigen::VectorXd normalize(const Eigen::VectorXd &db) const;
        Eigen::VectorXd denormalize(const Eigen::VectorXd &x) const;
    };

    Eigen::VectorXd rsrp_db(const Eigen::VectorXd &gains, const WindowConfig &wcfg);

    // One window slot as seen by the model
    struct SlotEntry
    {
        Eigen::VectorXd rsrp_db;
        Eigen::Index best = 0;
    };

    Eigen::VectorXd encode(const SlotEntry &e, const WindowConfig &wcfg, const RsrpNormalizer &norm);

    struct WindowPair
    {
        Eigen::MatrixXd window;            // input_dim x window_len
        std::vector<Eigen::Index> sources; // scene index of each window column
        Eigen::Index target_slot = 0;
        Eigen::Index target_best = 0;
        Eigen::VectorXd target_rsrp; // normalized
    };

    std::vector<WindowPair> build_windows(const ReceiverSeries &series, const WindowConfig &wcfg,
                                          const RsrpNormalizer &norm);

    // Windows of every series in the dataset stacked into one batch
    SequenceBatch to_batch(std::span<const WindowPair> pairs);
    SequenceBatch build_batch(const Dataset &ds, const WindowConfig &wcfg, const RsrpNormalizer &norm);

    struct Schedule
    {
        int predictions_per_measurement = 0; // p: 0 = every slot measured
        double slot_interval_ms = 80.0;

        void validate() const;
        double measurement_interval_ms() const { return (predictions_per_measurement + 1) * slot_interval_ms; }
        // k counts rollout slots from the first predicted target; the pattern is [M, P x p] repeated
        bool is_measured(Eigen::Index k) const { return k % (predictions_per_measurement + 1) == 0; }
    };

    enum class SlotKind
    {
        measured,
        predicted
    };

    struct WindowSource
    {
        Eigen::Index slot = 0;
        bool measured = true;
    };

    struct SlotRecord
    {
        Eigen::Index slot = 0;
        SlotKind kind = SlotKind::measured;
        std::vector<WindowSource> window;     // provenance of each window column
        Eigen::VectorXd output;               // raw model output (logits or normalized RSRP)
        std::vector<Eigen::Index> candidates; // prefilter subset; empty = all beams
        Eigen::Index chosen = 0;
        Eigen::Index true_best = 0;
        Eigen::VectorXd true_gains; // |y_i| of the target scene
    };

    struct TrackRecord
    {
        std::int64_t episode_id = 0;
        std::int64_t receiver_id = 0;
        Head head = Head::classification;
        int predictions_per_measurement = 0;
        std::vector<SlotRecord> slots;

        std::size_t n_measured() const;
        std::size_t n_full() const { return slots.size(); }
    };

    class Predictor
    {
    public:
        virtual ~Predictor() = default;
        virtual Head head() const = 0;
        // `target_slot` is the scene being predicted; learned predictors ignore it
        virtual Eigen::VectorXd predict(const Eigen::MatrixXd &window, Eigen::Index target_slot) const = 0;
    };

    class ModelPredictor final : public Predictor
    {
    public:
        ModelPredictor(ModelSpec spec, Parameters params);
        Head head() const override { return spec_.head; }
        Eigen::VectorXd predict(const Eigen::MatrixXd &window, Eigen::Index target_slot) const override;

    private:
        ModelSpec spec_;
        Parameters params_;
    };

    // Returns the true next-slot quantity of one series: normalized RSRP (regression) or a one-hot of
    // the best beam (classification)
    class OraclePredictor final : public Predictor
    {
    public:
        OraclePredictor(Head head, const ReceiverSeries &series, WindowConfig wcfg, RsrpNormalizer norm);
        Head head() const override { return head_; }
        Eigen::VectorXd predict(const Eigen::MatrixXd &window, Eigen::Index target_slot) const override;

    private:
        Head head_;
        std::vector<Eigen::VectorXd> outputs_;
    };

    struct PrefilterConfig
    {
        bool enabled = false;
        Eigen::Index subset_size = 8; // N transmit beams
        Eigen::Vector2d bs_position{0.0, 0.0};
    };

    // N transmit beams whose boresight is closest (circularly) to the BS->UE azimuth; ties to the lower index
    std::vector<Eigen::Index> prefilter(const Eigen::Vector2d &ue_position, const PrefilterConfig &pcfg,
                                        std::span<const double> boresights_deg);

    // Pair indices (t * n_rx + r) of every receive beam combined with the given transmit beams
    std::vector<Eigen::Index> expand_to_pairs(std::span<const Eigen::Index> tx_beams, Eigen::Index n_rx);

    // Scores outside the subset are set to -inf; an empty subset leaves the scores untouched
    Eigen::VectorXd mask_scores(const Eigen::VectorXd &scores, std::span<const Eigen::Index> subset);

    struct RolloutOptions
    {
        std::optional<PrefilterConfig> prefilter;
        ArrayConfig tx{}; // used for boresights when prefiltering
        Eigen::Index n_rx = 1;
    };

    TrackRecord rollout(const Predictor &predictor, const Schedule &schedule, const ReceiverSeries &series,
                        const WindowConfig &wcfg, const RsrpNormalizer &norm, const RolloutOptions &opts = {});

    // Entry j predicts scene j + 1: the best beam of scene j
    std::vector<Eigen::Index> persistence_baseline(std::span<const Eigen::Index> best_sequence);

    struct ScheduleMetrics
    {
        std::vector<TopKResult> topk;
        TrResult tr;
        std::size_t n_measured = 0;
        std::size_t n_full = 0;
        double mor = 0;
    };

    // Top-K, throughput ratio (power gains |y|^2) and overhead reduction from stored records
    ScheduleMetrics summarize(std::span<const TrackRecord> records, Head head, std::span<const int> ks);
}
