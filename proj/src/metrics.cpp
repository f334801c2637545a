// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/metrics.hpp"

#include "beamtrack/channel.hpp"
#include "beamtrack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace beamtrack
{
    std::vector<Eigen::Index> top_k_indices(const Eigen::Ref<const Eigen::VectorXd> &scores, int k)
    {
        if (k < 1 || k > scores.size())
            throw InvalidInput("k must lie in [1, M]");
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(scores.size()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Eigen::Index a, Eigen::Index b)
                          { return scores(a) > scores(b) || (scores(a) == scores(b) && a < b); });
        idx.resize(static_cast<std::size_t>(k));
        return idx;
    }

    namespace
    {
        TopKResult finish(int k, std::size_t hits, std::size_t total)
        {
            TopKResult r;
            r.k = k;
            r.hits = hits;
            r.total = total;
            r.accuracy = total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
            return r;
        }

        // true when `target` ranks among the k highest of `scores` under the lowest-index tie rule
        bool in_top_k(const Eigen::VectorXd &scores, Eigen::Index target, int k)
        {
            // count entries that outrank the target
            const double v = scores(target);
            int better = 0;
            for (Eigen::Index j = 0; j < scores.size(); ++j)
                if (scores(j) > v || (scores(j) == v && j < target))
                    ++better;
            return better < k;
        }
    }

    TopKResult topk_accuracy(std::span<const Eigen::VectorXd> predicted_scores,
                             std::span<const Eigen::Index> true_best, int k)
    {
        if (predicted_scores.size() != true_best.size())
            throw ShapeError("one true index is required per example");
        std::size_t hits = 0;
        Eigen::Index m = predicted_scores.empty() ? 0 : predicted_scores.front().size();
        for (std::size_t n = 0; n < predicted_scores.size(); ++n)
        {
            const auto &s = predicted_scores[n];
            if (s.size() != m)
                throw ShapeError("score vectors differ in length");
            if (k < 1 || k > m)
                throw InvalidInput("k must lie in [1, M]");
            if (true_best[n] < 0 || true_best[n] >= m)
                throw InvalidInput("true index out of range");
            if (in_top_k(s, true_best[n], k))
                ++hits;
        }
        return finish(k, hits, predicted_scores.size());
    }

    TopKResult topk_regression(std::span<const Eigen::VectorXd> predicted_gains,
                               std::span<const Eigen::VectorXd> true_gains, int k)
    {
        if (predicted_gains.size() != true_gains.size())
            throw ShapeError("predicted and true batches differ in size");
        std::size_t hits = 0;
        for (std::size_t n = 0; n < predicted_gains.size(); ++n)
        {
            const auto &p = predicted_gains[n];
            const auto &t = true_gains[n];
            if (p.size() != t.size())
                throw ShapeError("predicted and true gain vectors differ in length");
            if (k < 1 || k > t.size())
                throw InvalidInput("k must lie in [1, M]");
            if (in_top_k(t, best_beam(p), k))
                ++hits;
        }
        return finish(k, hits, predicted_gains.size());
    }

    TrResult throughput_ratio(std::span<const double> predicted_gain, std::span<const double> best_gain)
    {
        if (predicted_gain.size() != best_gain.size())
            throw ShapeError("predicted and best gain lists differ in length");
        TrResult r;
        for (std::size_t n = 0; n < predicted_gain.size(); ++n)
        {
            if (!(predicted_gain[n] >= 0.0) || !(best_gain[n] >= 0.0))
                throw InvalidInput("gains must be non-negative");
            r.numerator += std::log2(1.0 + predicted_gain[n]);
            r.denominator += std::log2(1.0 + best_gain[n]);
        }
        if (r.denominator == 0.0)
            throw DegenerateInput("throughput ratio denominator is zero");
        r.ratio = r.numerator / r.denominator;
        return r;
    }

    int circular_diff(Eigen::Index prev, Eigen::Index curr, Eigen::Index n_total)
    {
        if (n_total < 1)
            throw InvalidInput("n_total must be positive");
        if (prev < 0 || curr < 0 || prev >= n_total || curr >= n_total)
            throw InvalidInput("beam index outside [0, n_total)");
        const auto mod = [n_total](Eigen::Index v)
        { return ((v % n_total) + n_total) % n_total; };
        return static_cast<int>(std::min(mod(prev - curr), mod(curr - prev)));
    }

    double mafd(std::span<const std::vector<Eigen::Index>> sequences, Eigen::Index n_total)
    {
        if (sequences.empty())
            throw InvalidInput("mafd needs at least one sequence");
        double acc = 0;
        for (const auto &seq : sequences)
        {
            if (seq.size() < 2)
                throw InvalidInput("mafd sequences need at least two scenes");
            long sum = 0;
            for (std::size_t s = 1; s < seq.size(); ++s)
                sum += circular_diff(seq[s - 1], seq[s], n_total);
            acc += static_cast<double>(sum) / static_cast<double>(seq.size() - 1);
        }
        return acc / static_cast<double>(sequences.size());
    }

    double mor(std::size_t n_measured, std::size_t n_full)
    {
        if (n_full == 0)
            throw InvalidInput("n_full must be positive");
        if (n_measured > n_full)
            throw InvalidInput("n_measured exceeds n_full");
        return (1.0 - static_cast<double>(n_measured) / static_cast<double>(n_full)) * 100.0;
    }
}
