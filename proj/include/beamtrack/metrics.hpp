// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "beamtrack/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace beamtrack
{
    struct TopKResult
    {
        int k = 0;
        double accuracy = 0;
        std::size_t hits = 0;
        std::size_t total = 0;
    };

    struct TrResult
    {
        double ratio = 0;
        double numerator = 0;
        double denominator = 0;
    };

    // Indices of the k largest entries, ordered by decreasing value, ties to the lower index
    std::vector<Eigen::Index> top_k_indices(const Eigen::Ref<const Eigen::VectorXd> &scores, int k);

    // True best index among the k highest-scoring entries of each example
    TopKResult topk_accuracy(std::span<const Eigen::VectorXd> predicted_scores,
                             std::span<const Eigen::Index> true_best, int k);

    // Argmax of the predicted gains among the k highest true gains of each example
    TopKResult topk_regression(std::span<const Eigen::VectorXd> predicted_gains,
                               std::span<const Eigen::VectorXd> true_gains, int k);

    // sum log2(1 + predicted) / sum log2(1 + best), gains in linear power
    TrResult throughput_ratio(std::span<const double> predicted_gain, std::span<const double> best_gain);

    // min((prev - curr) mod n, (curr - prev) mod n)
    int circular_diff(Eigen::Index prev, Eigen::Index curr, Eigen::Index n_total);

    // Mean over receivers of the mean circular first difference of each sequence
    double mafd(std::span<const std::vector<Eigen::Index>> sequences, Eigen::Index n_total);

    // Measurement overhead reduction in percent
    double mor(std::size_t n_measured, std::size_t n_full);
}
