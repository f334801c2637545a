// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

using namespace beamtrack;
using Catch::Approx;

namespace
{
    // Full stable sort by decreasing score; equal scores keep ascending index order
    std::vector<Eigen::Index> sorted_desc(const Eigen::VectorXd &v)
    {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b)
                         { return v(a) > v(b); });
        return idx;
    }

    bool in_first_k(const std::vector<Eigen::Index> &order, Eigen::Index x, int k)
    {
        return std::find(order.begin(), order.begin() + k, x) != order.begin() + k;
    }

    Eigen::VectorXd random_scores(std::mt19937_64 &rng, Eigen::Index m, bool coarse)
    {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<int> level(0, 5);
        Eigen::VectorXd v(m);
        for (auto &x : v)
            x = coarse ? level(rng) : u(rng);
        return v;
    }

    int naive_circ(Eigen::Index a, Eigen::Index b, Eigen::Index n)
    {
        int best = static_cast<int>(n);
        for (Eigen::Index step = 0; step < n; ++step)
            if ((a + step) % n == b || (b + step) % n == a)
                best = std::min(best, static_cast<int>(step));
        return best;
    }
}

TEST_CASE("top-k indices order and ties", "[metrics]")
{
    const auto idx = top_k_indices(Eigen::Vector4d(0.2, 0.9, 0.2, 0.5), 3);
    REQUIRE(idx.size() == 3);
    CHECK(idx[0] == 1);
    CHECK(idx[1] == 3);
    CHECK(idx[2] == 0);
    CHECK_THROWS_AS(top_k_indices(Eigen::Vector2d(1, 2), 3), InvalidInput);
    CHECK_THROWS_AS(top_k_indices(Eigen::Vector2d(1, 2), 0), InvalidInput);
}

TEST_CASE("classification top-k examples", "[metrics]")
{
    const std::vector<Eigen::VectorXd> s{Eigen::Vector3d(0.1, 0.9, 0.3)};
    const std::vector<Eigen::Index> t1{1}, t0{0};
    const auto r1 = topk_accuracy(s, t1, 1);
    CHECK(r1.hits == 1);
    CHECK(r1.total == 1);
    CHECK(r1.accuracy == 1.0);
    CHECK(topk_accuracy(s, t0, 3).accuracy == 1.0);
    CHECK(topk_accuracy(s, t0, 1).accuracy == 0.0);
    CHECK_THROWS_AS(topk_accuracy(s, t0, 4), InvalidInput);
}

TEST_CASE("classification top-k matches a full-sort oracle", "[metrics][property]")
{
    std::mt19937_64 rng(17);
    const Eigen::Index m = 16;
    std::uniform_int_distribution<Eigen::Index> beam(0, m - 1);
    std::vector<Eigen::VectorXd> scores;
    std::vector<Eigen::Index> truth;
    for (int n = 0; n < 1000; ++n)
    {
        scores.push_back(random_scores(rng, m, n % 2 == 0));
        truth.push_back(beam(rng));
    }
    double prev = 0;
    for (int k = 1; k <= m; ++k)
    {
        std::size_t hits = 0;
        for (std::size_t n = 0; n < scores.size(); ++n)
            hits += in_first_k(sorted_desc(scores[n]), truth[n], k) ? 1 : 0;
        const auto r = topk_accuracy(scores, truth, k);
        CHECK(r.hits == hits);
        CHECK(r.total == scores.size());
        CHECK(r.accuracy == static_cast<double>(hits) / static_cast<double>(scores.size()));
        CHECK(r.accuracy >= prev);
        prev = r.accuracy;
    }
    CHECK(prev == 1.0);
}

TEST_CASE("regression top-k examples", "[metrics]")
{
    const std::vector<Eigen::VectorXd> truth{Eigen::Vector4d(0.1, 0.8, 0.5, 0.2)};
    CHECK(topk_regression(truth, truth, 1).accuracy == 1.0);
    CHECK(topk_regression(truth, truth, 4).accuracy == 1.0);

    // predicted argmax is the true second best
    const std::vector<Eigen::VectorXd> pred{Eigen::Vector4d(0.0, 0.1, 0.9, 0.3)};
    CHECK(topk_regression(pred, truth, 1).accuracy == 0.0);
    CHECK(topk_regression(pred, truth, 2).accuracy == 1.0);

    const std::vector<Eigen::VectorXd> short_pred{Eigen::Vector3d(0.0, 0.1, 0.9)};
    CHECK_THROWS_AS(topk_regression(short_pred, truth, 1), ShapeError);
}

TEST_CASE("regression top-k matches a full-sort oracle", "[metrics][property]")
{
    std::mt19937_64 rng(23);
    std::vector<Eigen::VectorXd> pred, truth;
    for (int n = 0; n < 500; ++n)
    {
        pred.push_back(random_scores(rng, 12, n % 3 == 0));
        truth.push_back(random_scores(rng, 12, n % 4 == 0));
    }
    for (int k : {1, 3, 5, 12})
    {
        std::size_t hits = 0;
        for (std::size_t n = 0; n < pred.size(); ++n)
            hits += in_first_k(sorted_desc(truth[n]), sorted_desc(pred[n]).front(), k) ? 1 : 0;
        CHECK(topk_regression(pred, truth, k).hits == hits);
    }
}

TEST_CASE("top-k is invariant to example order", "[metrics][property]")
{
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<Eigen::Index> beam(0, 7);
    std::vector<Eigen::VectorXd> scores;
    std::vector<Eigen::Index> truth;
    for (int n = 0; n < 300; ++n)
    {
        scores.push_back(random_scores(rng, 8, false));
        truth.push_back(beam(rng));
    }
    std::vector<std::size_t> perm(scores.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Eigen::VectorXd> s2;
    std::vector<Eigen::Index> t2;
    for (auto p : perm)
    {
        s2.push_back(scores[p]);
        t2.push_back(truth[p]);
    }
    for (int k = 1; k <= 8; ++k)
        CHECK(topk_accuracy(scores, truth, k).hits == topk_accuracy(s2, t2, k).hits);
}

TEST_CASE("throughput ratio examples", "[metrics]")
{
    const std::vector<double> best{3.0, 1.0, 0.5};
    CHECK(throughput_ratio(best, best).ratio == 1.0);

    const std::vector<double> p1{1.0}, b1{3.0};
    const auto r = throughput_ratio(p1, b1);
    CHECK(r.ratio == Approx(0.5).epsilon(1e-15));
    CHECK(r.numerator == Approx(1.0));
    CHECK(r.denominator == Approx(2.0));

    const std::vector<double> zeros{0.0, 0.0};
    CHECK_THROWS_AS(throughput_ratio(zeros, zeros), DegenerateInput);
    const std::vector<double> neg{-1.0};
    CHECK_THROWS_AS(throughput_ratio(neg, b1), InvalidInput);
}

TEST_CASE("throughput ratio never exceeds one with true best gains", "[metrics][property]")
{
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<Eigen::Index> beam(0, 15);
    for (int trial = 0; trial < 50; ++trial)
    {
        std::vector<double> pred, best;
        for (int n = 0; n < 40; ++n)
        {
            const auto g = random_scores(rng, 16, false);
            pred.push_back(g(beam(rng)));
            best.push_back(g.maxCoeff());
        }
        const auto r = throughput_ratio(pred, best);
        CHECK(r.ratio <= 1.0);
        CHECK(r.ratio >= 0.0);
        CHECK(r.ratio == r.numerator / r.denominator);
    }
}

TEST_CASE("circular difference", "[metrics]")
{
    CHECK(circular_diff(2, 0, 3) == 1);
    for (Eigen::Index n = 1; n <= 8; ++n)
        for (Eigen::Index a = 0; a < n; ++a)
        {
            CHECK(circular_diff(a, a, n) == 0);
            for (Eigen::Index b = 0; b < n; ++b)
            {
                CHECK(circular_diff(a, b, n) == circular_diff(b, a, n));
                CHECK(circular_diff(a, b, n) == naive_circ(a, b, n));
            }
        }
    CHECK_THROWS_AS(circular_diff(3, 0, 3), InvalidInput);
    CHECK_THROWS_AS(circular_diff(0, -1, 3), InvalidInput);
}

TEST_CASE("MAFD worked example with wrap-around", "[metrics]")
{
    const std::vector<Eigen::Index> seq{1, 1, 0, 2, 1, 2, 0};
    std::vector<int> d;
    for (std::size_t s = 1; s < seq.size(); ++s)
        d.push_back(circular_diff(seq[s - 1], seq[s], 3));
    CHECK(d == std::vector<int>{0, 1, 1, 1, 1, 1});
    const std::vector<std::vector<Eigen::Index>> seqs{seq};
    CHECK(mafd(seqs, 3) == 5.0 / 6.0);
}

TEST_CASE("MAFD basics and errors", "[metrics]")
{
    const std::vector<std::vector<Eigen::Index>> flat{{4, 4, 4, 4}, {0, 0}};
    CHECK(mafd(flat, 8) == 0.0);
    const std::vector<std::vector<Eigen::Index>> short_seq{{1}};
    CHECK_THROWS_AS(mafd(short_seq, 3), InvalidInput);
    // per-receiver means are averaged, not pooled
    const std::vector<std::vector<Eigen::Index>> mixed{{0, 1}, {0, 0, 0, 0, 0}};
    CHECK(mafd(mixed, 8) == 0.5);
}

TEST_CASE("MAFD properties", "[metrics][property]")
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial)
    {
        const Eigen::Index n = 2 + trial % 30;
        std::uniform_int_distribution<Eigen::Index> beam(0, n - 1);
        std::uniform_int_distribution<int> len(2, 20);
        std::vector<std::vector<Eigen::Index>> seqs(3);
        for (auto &s : seqs)
        {
            s.resize(static_cast<std::size_t>(len(rng)));
            for (auto &v : s)
                v = beam(rng);
        }

        // naive double loop
        double acc = 0;
        for (const auto &s : seqs)
        {
            double inner = 0;
            for (std::size_t k = 1; k < s.size(); ++k)
                inner += naive_circ(s[k - 1], s[k], n);
            acc += inner / static_cast<double>(s.size() - 1);
        }
        const double m = mafd(seqs, n);
        CHECK(m == Approx(acc / 3.0).epsilon(1e-14));
        CHECK(m >= 0.0);
        CHECK(m <= static_cast<double>(n / 2));

        const Eigen::Index shift = beam(rng);
        auto shifted = seqs;
        for (auto &s : shifted)
            for (auto &v : s)
                v = (v + shift) % n;
        CHECK(mafd(shifted, n) == Approx(m).epsilon(1e-14));
    }
}

TEST_CASE("MAFD depends on scene order", "[metrics][property]")
{
    const std::vector<std::vector<Eigen::Index>> ordered{{0, 0, 0, 4, 4, 4}};
    const std::vector<std::vector<Eigen::Index>> shuffled{{0, 4, 0, 4, 0, 4}};
    CHECK(mafd(ordered, 8) != mafd(shuffled, 8));
}

TEST_CASE("measurement overhead reduction", "[metrics]")
{
    CHECK(mor(10, 10) == 0.0);
    CHECK(mor(0, 10) == 100.0);
    CHECK(mor(500, 1000) == Approx(50.0));
    CHECK(mor(334, 1000) == Approx(66.6).margin(0.1));
    CHECK(mor(250, 1000) == Approx(75.0));
    CHECK_THROWS_AS(mor(11, 10), InvalidInput);
    CHECK_THROWS_AS(mor(0, 0), InvalidInput);
}
