// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: a flat `key = value` document. Every key has a default, so an
// empty document is a valid configuration. Lists are comma separated; '#' starts a comment.
// ------------------------------------------------------------------------

#pragma once

#include "beamtrack/dataset.hpp"
#include "beamtrack/model.hpp"
#include "beamtrack/tracking.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace beamtrack
{
    struct ExperimentConfig
    {
        std::string scenario = "synth"; // "synth" or a scene-records file
        SynthConfig synth;
        Eigen::Index n_tx = 16;
        Eigen::Index n_rx = 1;
        WindowConfig window;
        std::vector<Eigen::Index> hidden_dims{128, 128};
        double dropout_rate = 0.2;
        TrainConfig train;
        std::vector<int> schedules{0, 1, 2, 3};
        std::vector<int> ks{1, 5, 10};
        PrefilterConfig prefilter;
        double test_fraction = 0.2;
        std::filesystem::path out_dir = "out";
        std::uint64_t seed = 1;

        void validate() const;
        ModelSpec model_spec(Head head) const;

        // Every key with its effective value, one per line in a fixed order
        std::string canonical() const;
        std::uint64_t digest() const;
    };

    ExperimentConfig parse_config(std::istream &in);
    ExperimentConfig load_config(const std::filesystem::path &path);

    // Per-stage seeds derived from the master seed (splitmix64 of master + stage tag)
    enum class SeedStage : std::uint64_t
    {
        synth = 1,
        split = 2,
        init_classification = 3,
        train_classification = 4,
        init_regression = 5,
        train_regression = 6,
    };

    std::uint64_t derive_seed(std::uint64_t master, SeedStage stage);
}
