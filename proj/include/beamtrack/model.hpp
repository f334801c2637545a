// SPDX-License-Identifier: Apache-2.0
//
// Stacked LSTM with a dense head, trained by backpropagation through time.
//
// Layout conventions:
// - Every activation matrix is (features x batch), one column per example.
// - Gate blocks are stacked in the order input, forget, candidate, output, so the per-layer
//   weight matrices are (4H x I) and (4H x H) and the bias has 4H rows.
// ------------------------------------------------------------------------

#pragma once

#include "beamtrack/errors.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace beamtrack
{
    enum class Head
    {
        classification, // logits over M beams, softmax cross-entropy
        regression      // per-beam RSRP, mean squared error
    };

    const char *to_string(Head head);
    Head head_from_string(const std::string &s);

    struct ModelSpec
    {
        Eigen::Index input_dim = 1;
        std::vector<Eigen::Index> hidden_dims{128, 128};
        double dropout_rate = 0.2;
        Head head = Head::classification;
        Eigen::Index num_beams = 1; // M

        void validate() const;
        std::size_t parameter_count() const;
    };

    struct LstmLayer
    {
        Eigen::MatrixXd w_in;  // 4H x I
        Eigen::MatrixXd w_rec; // 4H x H
        Eigen::VectorXd bias;  // 4H
    };

    struct Parameters
    {
        std::vector<LstmLayer> layers;
        Eigen::MatrixXd head_w; // M x H_last
        Eigen::VectorXd head_b; // M

        static Parameters zeros(const ModelSpec &spec);
        // Uniform in +-1/sqrt(fan_in), forget-gate bias +1
        static Parameters init(const ModelSpec &spec, std::uint64_t seed);

        // Views over every tensor in a fixed order (layers, then head weights, then head bias)
        std::vector<std::span<double>> tensors();
        std::vector<std::span<const double>> tensors() const;

        std::size_t size() const;
        bool all_finite() const;
        void check_shapes(const ModelSpec &spec) const;
    };

    bool operator==(const Parameters &a, const Parameters &b);

    struct TrainingFailure : Error
    {
        TrainingFailure(const std::string &what, Parameters last_good, int epoch)
            : Error(what), last_good(std::move(last_good)), epoch(epoch) {}
        Parameters last_good;
        int epoch;
    };

    struct SequenceBatch
    {
        std::vector<Eigen::MatrixXd> steps;       // window entries, each input_dim x batch
        Eigen::MatrixXd regression_targets;       // M x batch
        std::vector<Eigen::Index> class_targets;  // one per example

        Eigen::Index batch_size() const { return steps.empty() ? 0 : steps.front().cols(); }
        Eigen::Index window() const { return static_cast<Eigen::Index>(steps.size()); }

        // Sub-batch of the given example columns, in the given order
        SequenceBatch gather(std::span<const Eigen::Index> columns) const;
        void check(const ModelSpec &spec) const;
    };

    struct LayerCache
    {
        std::vector<Eigen::MatrixXd> inputs; // x_t as seen by the layer
        std::vector<Eigen::MatrixXd> gates;  // activated gates, 4H x B
        std::vector<Eigen::MatrixXd> cells;  // c_t
        std::vector<Eigen::MatrixXd> hidden; // h_t before dropout
        std::vector<Eigen::MatrixXd> masks;  // inverted-dropout masks on h_t; empty when inactive
    };

    struct ForwardCache
    {
        std::vector<LayerCache> layers;
        Eigen::MatrixXd head_input; // final hidden state after dropout, H_last x B
        Eigen::MatrixXd outputs;    // M x B
        std::uint64_t batch_digest = 0;
        std::uint64_t param_digest = 0;
    };

    ForwardCache forward(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch,
                         bool training, std::mt19937_64 &rng);

    // Mean softmax cross-entropy (classification) or mean squared error over all entries (regression)
    double loss(const Eigen::MatrixXd &outputs, const SequenceBatch &batch, Head head);

    // Gradient of loss() w.r.t. every parameter, reusing the forward cache of the same batch
    Parameters backward(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch,
                        const ForwardCache &cache);

    // Column-wise softmax, shifted by the column max
    Eigen::MatrixXd softmax(const Eigen::MatrixXd &logits);
    Eigen::VectorXd softmax(const Eigen::VectorXd &logits);

    enum class Optimizer
    {
        adam,
        sgd
    };

    struct TrainConfig
    {
        double learning_rate = 1e-3;
        Eigen::Index batch_size = 64;
        int epochs = 20;
        Optimizer optimizer = Optimizer::adam;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        double gradient_clip_norm = 5.0; // 0 disables clipping
        std::uint64_t seed = 1;

        void validate() const;
    };

    struct TrainResult
    {
        Parameters params;
        std::vector<double> loss_curve; // mean minibatch loss per epoch
    };

    TrainResult train(Parameters params, const ModelSpec &spec, const TrainConfig &cfg, const SequenceBatch &data);

    // Inference on one window (input_dim x window_len); dropout is never applied
    Eigen::VectorXd predict(const Parameters &params, const ModelSpec &spec, const Eigen::MatrixXd &window);

    // Batched inference: one output column per example
    Eigen::MatrixXd predict(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch);

    struct Checkpoint
    {
        ModelSpec spec;
        Parameters params;
        std::uint64_t train_seed = 0;
        int epochs = 0;
    };

    void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
    Checkpoint load_checkpoint(const std::filesystem::path &path);
}
