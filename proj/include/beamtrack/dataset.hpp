// SPDX-License-Identifier: Apache-2.0
//
// Episode/scene data model, scene-records file I/O, the synthetic vehicular generator and
// dataset statistics.
// ------------------------------------------------------------------------

#pragma once

#include "beamtrack/channel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

namespace beamtrack
{
    struct Scene
    {
        std::int64_t episode_id = 0;
        std::int64_t scene_id = 0;
        std::int64_t receiver_id = 0;
        Eigen::Vector3d rx_position = Eigen::Vector3d::Zero();
        bool los = true;
        std::vector<Mpc> mpcs;    // raw paths, empty when the scene was given as precomputed gains
        Eigen::VectorXd gains;    // |y_i|, length M; always populated after ingest or generation
        double timestamp_ms = 0;  // scene_id * scene_interval
    };

    struct ReceiverSeries
    {
        std::int64_t receiver_id = 0;
        std::vector<Scene> scenes;

        std::vector<Eigen::Index> best_beams() const;
    };

    struct Episode
    {
        std::int64_t id = 0;
        std::vector<ReceiverSeries> receivers;
        double scene_interval_ms = 80.0;
    };

    // Episodes plus the header fields every scene-records file declares
    struct Dataset
    {
        Eigen::Index n_tx = 1;
        Eigen::Index n_rx = 1;
        double scene_interval_ms = 80.0;
        std::vector<Episode> episodes;

        Eigen::Index num_beams() const { return n_tx * n_rx; }
        std::size_t num_scenes() const;
    };

    struct ScenarioStats
    {
        std::size_t los_count = 0;
        std::size_t nlos_count = 0;
        double mafd = 0;
        double beam_gain_variance_db = 0;
    };

    struct SynthConfig
    {
        int num_episodes = 50;
        int receivers_per_episode = 2;
        int scenes_per_episode = 40;
        double street_length = 200.0;              // meters, street runs along x
        Eigen::Vector2d bs_position{100.0, -15.0}; // meters
        double bs_height = 10.0;                   // meters
        double ue_height = 1.5;                    // meters
        double speed_min = 8.0;                    // m/s
        double speed_max = 20.0;                   // m/s
        double lane_min = 2.0;                     // lateral UE offset range, meters
        double lane_max = 12.0;
        double scene_interval_ms = 80.0;
        double target_nlos_fraction = 0.1;
        double mean_blockage_scenes = 3.0;
        int nlos_paths = 3;
        double nlos_gain_penalty_db = 10.0;
        double carrier_ghz = 28.0;
        std::uint64_t seed = 1;

        void validate() const;
    };

    void validate(const Dataset &ds);

    // scene-records reader/writer. Header line:
    //   scene-records n_tx=<int> n_rx=<int> scene_interval_ms=<real> M=<int>
    // Record lines (whitespace separated):
    //   episode_id scene_id receiver_id x y z los mpc <6*L reals>
    //   episode_id scene_id receiver_id x y z los gains <M reals>
    // '#' starts a comment line; blank lines are ignored.
    Dataset ingest(std::istream &in, const ArrayConfig &tx, const ArrayConfig &rx);
    Dataset ingest(const std::filesystem::path &path, const ArrayConfig &tx, const ArrayConfig &rx);
    Dataset ingest(const std::filesystem::path &path);

    void write_scene_records(std::ostream &out, const Dataset &ds);
    void write_scene_records(const std::filesystem::path &path, const Dataset &ds);

    // Transmit array faces the street (broadside +y); receive array faces the BS side (-y).
    ArrayConfig synth_tx_array(Eigen::Index n_tx);
    ArrayConfig synth_rx_array(Eigen::Index n_rx);

    Dataset synth_generate(const SynthConfig &cfg, const ArrayConfig &tx, const ArrayConfig &rx);

    ScenarioStats stats(const Dataset &ds);

    std::pair<Dataset, Dataset> split(const Dataset &ds, double test_fraction, std::uint64_t seed);

    // Field-wise comparison with a tolerance on reals
    bool approx_equal(const Dataset &a, const Dataset &b, double tol = 1e-9);
}
