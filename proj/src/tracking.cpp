// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace beamtrack
{
    const char *to_string(FeatureMode m)
    {
        return m == FeatureMode::rsrp_vector ? "rsrp_vector" : "rsrp_plus_onehot_index";
    }

    const char *to_string(Normalization n)
    {
        return n == Normalization::minmax_db ? "minmax_db" : "zscore_db";
    }

    FeatureMode feature_mode_from_string(const std::string &s)
    {
        if (s == "rsrp_vector")
            return FeatureMode::rsrp_vector;
        if (s == "rsrp_plus_onehot_index")
            return FeatureMode::rsrp_plus_onehot_index;
        throw InvalidInput("unknown feature mode '" + s + "'");
    }

    Normalization normalization_from_string(const std::string &s)
    {
        if (s == "minmax_db")
            return Normalization::minmax_db;
        if (s == "zscore_db")
            return Normalization::zscore_db;
        throw InvalidInput("unknown normalization '" + s + "'");
    }

    void WindowConfig::validate() const
    {
        if (window_len < 1)
            throw InvalidInput("window_len must be at least 1");
        if (!std::isfinite(rsrp_floor_db))
            throw InvalidInput("rsrp floor must be finite");
    }

    Eigen::Index WindowConfig::input_dim(Eigen::Index num_beams) const
    {
        return feature_mode == FeatureMode::rsrp_vector ? num_beams : 2 * num_beams;
    }

    Eigen::VectorXd rsrp_db(const Eigen::VectorXd &gains, const WindowConfig &wcfg)
    {
        Eigen::VectorXd out(gains.size());
        for (Eigen::Index k = 0; k < gains.size(); ++k)
            out(k) = gains(k) > 0.0 ? std::max(20.0 * std::log10(gains(k)), wcfg.rsrp_floor_db) : wcfg.rsrp_floor_db;
        return out;
    }

    // ------------------------------------------------------------------------

    RsrpNormalizer RsrpNormalizer::fit(std::span<const Eigen::VectorXd> rsrp, Normalization mode)
    {
        if (rsrp.empty())
            throw InvalidInput("normalizer needs at least one RSRP vector");
        RsrpNormalizer n;
        n.mode = mode;
        if (mode == Normalization::minmax_db)
        {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto &v : rsrp)
            {
                lo = std::min(lo, v.minCoeff());
                hi = std::max(hi, v.maxCoeff());
            }
            n.offset = lo;
            n.scale = hi - lo;
        }
        else
        {
            double sum = 0, sq = 0;
            double count = 0;
            for (const auto &v : rsrp)
            {
                sum += v.sum();
                count += static_cast<double>(v.size());
            }
            const double mean = sum / count;
            for (const auto &v : rsrp)
                sq += (v.array() - mean).square().sum();
            n.offset = mean;
            n.scale = std::sqrt(sq / count);
        }
        if (!(n.scale > 0.0))
            n.scale = 0.0;
        return n;
    }

    RsrpNormalizer RsrpNormalizer::fit(const Dataset &train, const WindowConfig &wcfg)
    {
        std::vector<Eigen::VectorXd> all;
        for (const auto &ep : train.episodes)
            for (const auto &rs : ep.receivers)
                for (const auto &sc : rs.scenes)
                    all.push_back(rsrp_db(sc.gains, wcfg));
        return fit(all, wcfg.normalization);
    }

    Eigen::VectorXd RsrpNormalizer::normalize(const Eigen::VectorXd &db) const
    {
        if (scale == 0.0)
            return Eigen::VectorXd::Zero(db.size());
        return (db.array() - offset) / scale;
    }

    Eigen::VectorXd RsrpNormalizer::denormalize(const Eigen::VectorXd &x) const
    {
        return (x.array() * scale + offset).matrix();
    }

    Eigen::VectorXd encode(const SlotEntry &e, const WindowConfig &wcfg, const RsrpNormalizer &norm)
    {
        const auto m = e.rsrp_db.size();
        if (wcfg.feature_mode == FeatureMode::rsrp_vector)
            return norm.normalize(e.rsrp_db);
        Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * m);
        f.head(m) = norm.normalize(e.rsrp_db);
        f(m + e.best) = 1.0;
        return f;
    }

    namespace
    {
        SlotEntry measured_entry(const Scene &sc, const WindowConfig &wcfg)
        {
            return {rsrp_db(sc.gains, wcfg), best_beam(sc.gains)};
        }
    }

    std::vector<WindowPair> build_windows(const ReceiverSeries &series, const WindowConfig &wcfg,
                                          const RsrpNormalizer &norm)
    {
        wcfg.validate();
        const auto s_len = static_cast<Eigen::Index>(series.scenes.size());
        const auto w = wcfg.window_len;
        if (s_len <= w)
            throw InvalidInput("series of " + std::to_string(s_len) + " scenes is too short for window " + std::to_string(w));

        std::vector<Eigen::VectorXd> features;
        std::vector<SlotEntry> entries;
        for (const auto &sc : series.scenes)
        {
            entries.push_back(measured_entry(sc, wcfg));
            features.push_back(encode(entries.back(), wcfg, norm));
        }

        std::vector<WindowPair> out;
        out.reserve(static_cast<std::size_t>(s_len - w));
        for (Eigen::Index t = 0; t + w < s_len; ++t)
        {
            WindowPair p;
            p.window.resize(features.front().size(), w);
            for (Eigen::Index k = 0; k < w; ++k)
            {
                p.window.col(k) = features[static_cast<std::size_t>(t + k)];
                p.sources.push_back(t + k);
            }
            p.target_slot = t + w;
            const auto &target = entries[static_cast<std::size_t>(t + w)];
            p.target_best = target.best;
            p.target_rsrp = norm.normalize(target.rsrp_db);
            out.push_back(std::move(p));
        }
        return out;
    }

    SequenceBatch to_batch(std::span<const WindowPair> pairs)
    {
        SequenceBatch b;
        if (pairs.empty())
            return b;
        const auto w = pairs.front().window.cols();
        const auto dim = pairs.front().window.rows();
        const auto m = pairs.front().target_rsrp.size();
        const auto n = static_cast<Eigen::Index>(pairs.size());
        b.steps.assign(static_cast<std::size_t>(w), Eigen::MatrixXd(dim, n));
        b.regression_targets.resize(m, n);
        for (Eigen::Index c = 0; c < n; ++c)
        {
            const auto &p = pairs[static_cast<std::size_t>(c)];
            if (p.window.cols() != w || p.window.rows() != dim)
                throw ShapeError("windows differ in shape");
            for (Eigen::Index t = 0; t < w; ++t)
                b.steps[static_cast<std::size_t>(t)].col(c) = p.window.col(t);
            b.regression_targets.col(c) = p.target_rsrp;
            b.class_targets.push_back(p.target_best);
        }
        return b;
    }

    SequenceBatch build_batch(const Dataset &ds, const WindowConfig &wcfg, const RsrpNormalizer &norm)
    {
        std::vector<WindowPair> all;
        for (const auto &ep : ds.episodes)
            for (const auto &rs : ep.receivers)
            {
                auto pairs = build_windows(rs, wcfg, norm);
                std::move(pairs.begin(), pairs.end(), std::back_inserter(all));
            }
        return to_batch(all);
    }

    // ------------------------------------------------------------------------

    void Schedule::validate() const
    {
        if (predictions_per_measurement < 0)
            throw InvalidInput("predictions per measurement must be non-negative");
        if (!(slot_interval_ms > 0.0))
            throw InvalidInput("slot interval must be positive");
    }

    std::size_t TrackRecord::n_measured() const
    {
        return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const SlotRecord &s)
                                                      { return s.kind == SlotKind::measured; }));
    }

    ModelPredictor::ModelPredictor(ModelSpec spec, Parameters params)
        : spec_(std::move(spec)), params_(std::move(params))
    {
        spec_.validate();
        params_.check_shapes(spec_);
    }

    Eigen::VectorXd ModelPredictor::predict(const Eigen::MatrixXd &window, Eigen::Index) const
    {
        return beamtrack::predict(params_, spec_, window);
    }

    OraclePredictor::OraclePredictor(Head head, const ReceiverSeries &series, WindowConfig wcfg, RsrpNormalizer norm)
        : head_(head)
    {
        for (const auto &sc : series.scenes)
        {
            if (head == Head::regression)
                outputs_.push_back(norm.normalize(rsrp_db(sc.gains, wcfg)));
            else
            {
                Eigen::VectorXd onehot = Eigen::VectorXd::Zero(sc.gains.size());
                onehot(best_beam(sc.gains)) = 1.0;
                outputs_.push_back(std::move(onehot));
            }
        }
    }

    Eigen::VectorXd OraclePredictor::predict(const Eigen::MatrixXd &, Eigen::Index target_slot) const
    {
        if (target_slot < 0 || target_slot >= static_cast<Eigen::Index>(outputs_.size()))
            throw InvalidState("oracle asked for a slot outside its series");
        return outputs_[static_cast<std::size_t>(target_slot)];
    }

    // ------------------------------------------------------------------------

    std::vector<Eigen::Index> prefilter(const Eigen::Vector2d &ue_position, const PrefilterConfig &pcfg,
                                        std::span<const double> boresights_deg)
    {
        if (!pcfg.enabled)
            throw InvalidState("prefilter is disabled");
        const auto n_beams = static_cast<Eigen::Index>(boresights_deg.size());
        if (pcfg.subset_size < 1 || pcfg.subset_size > n_beams)
            throw InvalidInput("prefilter subset size must lie in [1, number of beams]");

        const Eigen::Vector2d d = ue_position - pcfg.bs_position;
        const double theta = wrap_degrees(std::atan2(d.y(), d.x()) * rad2deg);

        std::vector<Eigen::Index> idx(boresights_deg.size());
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::vector<double> dist(boresights_deg.size());
        for (std::size_t k = 0; k < dist.size(); ++k)
            dist[k] = angular_distance(boresights_deg[k], theta);
        std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b)
                         { return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)]; });
        idx.resize(static_cast<std::size_t>(pcfg.subset_size));
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    std::vector<Eigen::Index> expand_to_pairs(std::span<const Eigen::Index> tx_beams, Eigen::Index n_rx)
    {
        std::vector<Eigen::Index> out;
        for (auto t : tx_beams)
            for (Eigen::Index r = 0; r < n_rx; ++r)
                out.push_back(t * n_rx + r);
        return out;
    }

    Eigen::VectorXd mask_scores(const Eigen::VectorXd &scores, std::span<const Eigen::Index> subset)
    {
        if (subset.empty())
            return scores;
        Eigen::VectorXd out = Eigen::VectorXd::Constant(scores.size(), -std::numeric_limits<double>::infinity());
        for (auto i : subset)
        {
            if (i < 0 || i >= scores.size())
                throw InvalidInput("subset index outside the score vector");
            out(i) = scores(i);
        }
        return out;
    }

    TrackRecord rollout(const Predictor &predictor, const Schedule &schedule, const ReceiverSeries &series,
                        const WindowConfig &wcfg, const RsrpNormalizer &norm, const RolloutOptions &opts)
    {
        wcfg.validate();
        schedule.validate();
        const auto s_len = static_cast<Eigen::Index>(series.scenes.size());
        const auto w = wcfg.window_len;
        if (s_len <= w)
            throw InvalidInput("series is too short for the window length");
        if (s_len >= 2)
        {
            const double interval = series.scenes[1].timestamp_ms - series.scenes[0].timestamp_ms;
            if (std::abs(interval - schedule.slot_interval_ms) > 1e-9 * std::max(1.0, interval))
                throw InvalidState("schedule slot interval does not match the scene interval");
        }

        std::vector<double> boresights;
        if (opts.prefilter && opts.prefilter->enabled)
            boresights = codebook_boresights(opts.tx);

        TrackRecord rec;
        rec.episode_id = series.scenes.front().episode_id;
        rec.receiver_id = series.receiver_id;
        rec.head = predictor.head();
        rec.predictions_per_measurement = schedule.predictions_per_measurement;

        // warm start: the first window is fully measured
        std::vector<SlotEntry> history;
        std::vector<bool> measured;
        for (Eigen::Index s = 0; s < w; ++s)
        {
            history.push_back(measured_entry(series.scenes[static_cast<std::size_t>(s)], wcfg));
            measured.push_back(true);
        }

        for (Eigen::Index t = w; t < s_len; ++t)
        {
            SlotRecord slot;
            slot.slot = t;
            Eigen::MatrixXd window(wcfg.input_dim(series.scenes.front().gains.size()), w);
            for (Eigen::Index k = 0; k < w; ++k)
            {
                const auto src = static_cast<std::size_t>(t - w + k);
                window.col(k) = encode(history[src], wcfg, norm);
                slot.window.push_back({static_cast<Eigen::Index>(src), measured[src]});
            }

            slot.output = predictor.predict(window, t);
            const auto &scene = series.scenes[static_cast<std::size_t>(t)];
            if (slot.output.size() != scene.gains.size())
                throw ShapeError("predictor output length differs from M");

            if (!boresights.empty())
            {
                const auto tx_subset = prefilter(scene.rx_position.head<2>(), *opts.prefilter, boresights);
                slot.candidates = expand_to_pairs(tx_subset, opts.n_rx);
            }
            slot.chosen = best_beam(mask_scores(slot.output, slot.candidates));
            slot.true_best = best_beam(scene.gains);
            slot.true_gains = scene.gains;

            const bool is_measured = schedule.is_measured(t - w);
            slot.kind = is_measured ? SlotKind::measured : SlotKind::predicted;
            if (is_measured)
                history.push_back(measured_entry(scene, wcfg));
            else if (predictor.head() == Head::regression)
                history.push_back({norm.denormalize(slot.output), best_beam(slot.output)});
            else
                history.push_back({history.back().rsrp_db, best_beam(slot.output)});
            measured.push_back(is_measured);

            rec.slots.push_back(std::move(slot));
        }
        return rec;
    }

    std::vector<Eigen::Index> persistence_baseline(std::span<const Eigen::Index> best_sequence)
    {
        if (best_sequence.size() < 2)
            throw InvalidInput("persistence baseline needs at least two scenes");
        return {best_sequence.begin(), best_sequence.end() - 1};
    }

    ScheduleMetrics summarize(std::span<const TrackRecord> records, Head head, std::span<const int> ks)
    {
        std::vector<Eigen::VectorXd> scores, truths;
        std::vector<Eigen::Index> best;
        std::vector<double> chosen_power, best_power;
        ScheduleMetrics out;
        for (const auto &r : records)
        {
            out.n_measured += r.n_measured();
            out.n_full += r.n_full();
            for (const auto &s : r.slots)
            {
                scores.push_back(mask_scores(s.output, s.candidates));
                truths.push_back(s.true_gains);
                best.push_back(s.true_best);
                chosen_power.push_back(s.true_gains(s.chosen) * s.true_gains(s.chosen));
                best_power.push_back(s.true_gains(s.true_best) * s.true_gains(s.true_best));
            }
        }
        for (int k : ks)
            out.topk.push_back(head == Head::classification ? topk_accuracy(scores, best, k)
                                                            : topk_regression(scores, truths, k));
        out.tr = throughput_ratio(chosen_power, best_power);
        out.mor = mor(out.n_measured, out.n_full);
        return out;
    }
}
