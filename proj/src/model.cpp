// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace beamtrack
{
    const char *to_string(Head head)
    {
        return head == Head::classification ? "classification" : "regression";
    }

    Head head_from_string(const std::string &s)
    {
        if (s == "classification")
            return Head::classification;
        if (s == "regression")
            return Head::regression;
        throw InvalidInput("unknown head '" + s + "'");
    }

    void ModelSpec::validate() const
    {
        if (input_dim < 1)
            throw InvalidInput("input_dim must be at least 1");
        if (hidden_dims.empty())
            throw InvalidInput("at least one LSTM layer is required");
        for (auto h : hidden_dims)
            if (h < 1)
                throw InvalidInput("LSTM widths must be positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw InvalidInput("dropout_rate must lie in [0, 1)");
        if (num_beams < 1)
            throw InvalidInput("number of beams must be at least 1");
    }

    std::size_t ModelSpec::parameter_count() const
    {
        std::size_t n = 0;
        Eigen::Index in = input_dim;
        for (auto h : hidden_dims)
        {
            n += static_cast<std::size_t>(4 * h * (in + h + 1));
            in = h;
        }
        return n + static_cast<std::size_t>(num_beams * (in + 1));
    }

    // ------------------------------------------------------------------------

    Parameters Parameters::zeros(const ModelSpec &spec)
    {
        spec.validate();
        Parameters p;
        Eigen::Index in = spec.input_dim;
        for (auto h : spec.hidden_dims)
        {
            p.layers.push_back({Eigen::MatrixXd::Zero(4 * h, in), Eigen::MatrixXd::Zero(4 * h, h), Eigen::VectorXd::Zero(4 * h)});
            in = h;
        }
        p.head_w = Eigen::MatrixXd::Zero(spec.num_beams, in);
        p.head_b = Eigen::VectorXd::Zero(spec.num_beams);
        return p;
    }

    Parameters Parameters::init(const ModelSpec &spec, std::uint64_t seed)
    {
        Parameters p = zeros(spec);
        std::mt19937_64 rng(seed);
        const auto fill = [&rng](Eigen::MatrixXd &m, double fan_in)
        {
            std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                for (Eigen::Index r = 0; r < m.rows(); ++r)
                    m(r, c) = u(rng);
        };
        for (auto &l : p.layers)
        {
            const auto h = l.w_rec.cols();
            fill(l.w_in, static_cast<double>(l.w_in.cols()));
            fill(l.w_rec, static_cast<double>(h));
            l.bias.segment(h, h).setOnes();
        }
        fill(p.head_w, static_cast<double>(p.head_w.cols()));
        return p;
    }

    std::vector<std::span<double>> Parameters::tensors()
    {
        std::vector<std::span<double>> out;
        const auto add = [&out](auto &m)
        { out.emplace_back(m.data(), static_cast<std::size_t>(m.size())); };
        for (auto &l : layers)
        {
            add(l.w_in);
            add(l.w_rec);
            add(l.bias);
        }
        add(head_w);
        add(head_b);
        return out;
    }

    std::vector<std::span<const double>> Parameters::tensors() const
    {
        std::vector<std::span<const double>> out;
        for (auto s : const_cast<Parameters *>(this)->tensors())
            out.emplace_back(s.data(), s.size());
        return out;
    }

    std::size_t Parameters::size() const
    {
        std::size_t n = 0;
        for (auto s : tensors())
            n += s.size();
        return n;
    }

    bool Parameters::all_finite() const
    {
        for (auto s : tensors())
            for (double v : s)
                if (!std::isfinite(v))
                    return false;
        return true;
    }

    void Parameters::check_shapes(const ModelSpec &spec) const
    {
        if (layers.size() != spec.hidden_dims.size())
            throw ShapeError("parameter layer count differs from the model spec");
        Eigen::Index in = spec.input_dim;
        for (std::size_t k = 0; k < layers.size(); ++k)
        {
            const auto h = spec.hidden_dims[k];
            const auto &l = layers[k];
            if (l.w_in.rows() != 4 * h || l.w_in.cols() != in || l.w_rec.rows() != 4 * h || l.w_rec.cols() != h ||
                l.bias.size() != 4 * h)
                throw ShapeError("LSTM layer " + std::to_string(k) + " has inconsistent shapes");
            in = h;
        }
        if (head_w.rows() != spec.num_beams || head_w.cols() != in || head_b.size() != spec.num_beams)
            throw ShapeError("dense head has inconsistent shapes");
    }

    bool operator==(const Parameters &a, const Parameters &b)
    {
        const auto ta = a.tensors();
        const auto tb = b.tensors();
        if (ta.size() != tb.size())
            return false;
        for (std::size_t k = 0; k < ta.size(); ++k)
            if (ta[k].size() != tb[k].size() || std::memcmp(ta[k].data(), tb[k].data(), ta[k].size() * sizeof(double)) != 0)
                return false;
        return true;
    }

    // ------------------------------------------------------------------------

    SequenceBatch SequenceBatch::gather(std::span<const Eigen::Index> columns) const
    {
        SequenceBatch out;
        const auto n = static_cast<Eigen::Index>(columns.size());
        out.steps.reserve(steps.size());
        for (const auto &s : steps)
        {
            Eigen::MatrixXd m(s.rows(), n);
            for (Eigen::Index k = 0; k < n; ++k)
                m.col(k) = s.col(columns[static_cast<std::size_t>(k)]);
            out.steps.push_back(std::move(m));
        }
        if (regression_targets.size() > 0)
        {
            out.regression_targets.resize(regression_targets.rows(), n);
            for (Eigen::Index k = 0; k < n; ++k)
                out.regression_targets.col(k) = regression_targets.col(columns[static_cast<std::size_t>(k)]);
        }
        if (!class_targets.empty())
            for (auto c : columns)
                out.class_targets.push_back(class_targets[static_cast<std::size_t>(c)]);
        return out;
    }

    void SequenceBatch::check(const ModelSpec &spec) const
    {
        if (steps.empty())
            throw ShapeError("batch window must hold at least one step");
        const auto b = batch_size();
        for (const auto &s : steps)
        {
            if (s.rows() != spec.input_dim || s.cols() != b)
                throw ShapeError("batch step shape does not match input_dim x batch");
            if (!s.allFinite())
                throw InvalidInput("batch inputs must be finite");
        }
    }

    namespace
    {
        std::uint64_t fnv1a(std::uint64_t h, const void *data, std::size_t bytes)
        {
            const auto *p = static_cast<const unsigned char *>(data);
            for (std::size_t k = 0; k < bytes; ++k)
            {
                h ^= p[k];
                h *= 1099511628211ull;
            }
            return h;
        }

        constexpr std::uint64_t fnv_offset = 1469598103934665603ull;

        std::uint64_t digest(const SequenceBatch &b)
        {
            std::uint64_t h = fnv_offset;
            for (const auto &s : b.steps)
                h = fnv1a(h, s.data(), static_cast<std::size_t>(s.size()) * sizeof(double));
            h = fnv1a(h, b.regression_targets.data(), static_cast<std::size_t>(b.regression_targets.size()) * sizeof(double));
            h = fnv1a(h, b.class_targets.data(), b.class_targets.size() * sizeof(Eigen::Index));
            return h;
        }

        std::uint64_t digest(const Parameters &p)
        {
            std::uint64_t h = fnv_offset;
            for (auto s : p.tensors())
                h = fnv1a(h, s.data(), s.size() * sizeof(double));
            return h;
        }

        Eigen::MatrixXd sigmoid(const Eigen::MatrixXd &x)
        {
            return (1.0 + (-x.array()).exp()).inverse().matrix();
        }

        ForwardCache forward_impl(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch,
                                  bool training, std::mt19937_64 *rng)
        {
            spec.validate();
            params.check_shapes(spec);
            batch.check(spec);

            const auto b = batch.batch_size();
            const auto steps = batch.steps.size();
            const bool dropout = training && spec.dropout_rate > 0.0;
            const double keep = 1.0 - spec.dropout_rate;
            std::bernoulli_distribution draw(keep);

            ForwardCache cache;
            std::vector<Eigen::MatrixXd> seq = batch.steps;
            for (std::size_t l = 0; l < params.layers.size(); ++l)
            {
                const auto &layer = params.layers[l];
                const auto h_dim = layer.w_rec.cols();
                LayerCache lc;
                Eigen::MatrixXd h = Eigen::MatrixXd::Zero(h_dim, b);
                Eigen::MatrixXd c = Eigen::MatrixXd::Zero(h_dim, b);
                for (std::size_t t = 0; t < steps; ++t)
                {
                    Eigen::MatrixXd a = layer.w_in * seq[t] + layer.w_rec * h;
                    a.colwise() += layer.bias;
                    Eigen::MatrixXd gates(4 * h_dim, b);
                    gates.topRows(h_dim) = sigmoid(a.topRows(h_dim));
                    gates.middleRows(h_dim, h_dim) = sigmoid(a.middleRows(h_dim, h_dim));
                    gates.middleRows(2 * h_dim, h_dim) = a.middleRows(2 * h_dim, h_dim).array().tanh().matrix();
                    gates.bottomRows(h_dim) = sigmoid(a.bottomRows(h_dim));

                    c = gates.middleRows(h_dim, h_dim).cwiseProduct(c) +
                        gates.topRows(h_dim).cwiseProduct(gates.middleRows(2 * h_dim, h_dim));
                    h = gates.bottomRows(h_dim).cwiseProduct(c.array().tanh().matrix());

                    lc.inputs.push_back(std::move(seq[t]));
                    lc.gates.push_back(std::move(gates));
                    lc.cells.push_back(c);
                    lc.hidden.push_back(h);
                }

                for (std::size_t t = 0; t < steps; ++t)
                {
                    if (dropout)
                    {
                        Eigen::MatrixXd mask(h_dim, b);
                        for (Eigen::Index k = 0; k < mask.size(); ++k)
                            mask.data()[k] = draw(*rng) ? 1.0 / keep : 0.0;
                        seq[t] = lc.hidden[t].cwiseProduct(mask);
                        lc.masks.push_back(std::move(mask));
                    }
                    else
                        seq[t] = lc.hidden[t];
                }
                cache.layers.push_back(std::move(lc));
            }

            cache.head_input = seq.back();
            cache.outputs = params.head_w * cache.head_input;
            cache.outputs.colwise() += params.head_b;
            if (!cache.outputs.allFinite())
                throw NumericError("non-finite activation in forward pass");
            cache.batch_digest = digest(batch);
            cache.param_digest = digest(params);
            return cache;
        }
    }

    ForwardCache forward(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch,
                         bool training, std::mt19937_64 &rng)
    {
        return forward_impl(params, spec, batch, training, &rng);
    }

    Eigen::MatrixXd softmax(const Eigen::MatrixXd &logits)
    {
        Eigen::MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
        p = p.array().exp().matrix();
        const Eigen::RowVectorXd sums = p.colwise().sum();
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            p.col(c) /= sums(c);
        return p;
    }

    Eigen::VectorXd softmax(const Eigen::VectorXd &logits)
    {
        return softmax(Eigen::MatrixXd(logits)).col(0);
    }

    double loss(const Eigen::MatrixXd &outputs, const SequenceBatch &batch, Head head)
    {
        const auto b = outputs.cols();
        if (b == 0)
            throw InvalidInput("loss of an empty batch");
        if (head == Head::classification)
        {
            if (static_cast<Eigen::Index>(batch.class_targets.size()) != b)
                throw ShapeError("one class target is required per example");
            double acc = 0;
            for (Eigen::Index c = 0; c < b; ++c)
            {
                const auto target = batch.class_targets[static_cast<std::size_t>(c)];
                if (target < 0 || target >= outputs.rows())
                    throw InvalidInput("class index outside [0, M)");
                const double mx = outputs.col(c).maxCoeff();
                const double lse = mx + std::log((outputs.col(c).array() - mx).exp().sum());
                acc += lse - outputs(target, c);
            }
            return acc / static_cast<double>(b);
        }
        if (batch.regression_targets.rows() != outputs.rows() || batch.regression_targets.cols() != b)
            throw ShapeError("regression targets must be M x batch");
        return (outputs - batch.regression_targets).squaredNorm() / static_cast<double>(outputs.size());
    }

    Parameters backward(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch,
                        const ForwardCache &cache)
    {
        if (cache.layers.size() != params.layers.size() || cache.batch_digest != digest(batch) ||
            cache.param_digest != digest(params))
            throw InvalidState("forward cache does not belong to this batch and parameter set");

        const auto b = batch.batch_size();
        const auto steps = batch.steps.size();
        Parameters grads = Parameters::zeros(spec);

        Eigen::MatrixXd d_out;
        if (spec.head == Head::classification)
        {
            (void)loss(cache.outputs, batch, spec.head); // validates targets
            d_out = softmax(cache.outputs);
            for (Eigen::Index c = 0; c < b; ++c)
                d_out(batch.class_targets[static_cast<std::size_t>(c)], c) -= 1.0;
            d_out /= static_cast<double>(b);
        }
        else
        {
            if (batch.regression_targets.rows() != cache.outputs.rows() || batch.regression_targets.cols() != b)
                throw ShapeError("regression targets must be M x batch");
            d_out = 2.0 * (cache.outputs - batch.regression_targets) / static_cast<double>(cache.outputs.size());
        }

        grads.head_w = d_out * cache.head_input.transpose();
        grads.head_b = d_out.rowwise().sum();

        // gradient w.r.t. each layer's (post-dropout) output sequence
        std::vector<Eigen::MatrixXd> d_seq(steps);
        {
            const auto h_last = params.layers.back().w_rec.cols();
            for (auto &m : d_seq)
                m = Eigen::MatrixXd::Zero(h_last, b);
            d_seq.back() = params.head_w.transpose() * d_out;
        }

        for (std::size_t li = params.layers.size(); li-- > 0;)
        {
            const auto &layer = params.layers[li];
            const auto &lc = cache.layers[li];
            auto &g = grads.layers[li];
            const auto h_dim = layer.w_rec.cols();

            Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h_dim, b);
            Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(h_dim, b);
            std::vector<Eigen::MatrixXd> d_in(steps);
            Eigen::MatrixXd d_pre(4 * h_dim, b);

            for (std::size_t t = steps; t-- > 0;)
            {
                Eigen::MatrixXd dh = lc.masks.empty() ? d_seq[t] : d_seq[t].cwiseProduct(lc.masks[t]);
                dh += dh_next;

                const auto &gates = lc.gates[t];
                const auto i = gates.topRows(h_dim).array();
                const auto f = gates.middleRows(h_dim, h_dim).array();
                const auto cand = gates.middleRows(2 * h_dim, h_dim).array();
                const auto o = gates.bottomRows(h_dim).array();
                const Eigen::ArrayXXd tc = lc.cells[t].array().tanh();

                const Eigen::ArrayXXd dc = dh.array() * o * (1.0 - tc.square()) + dc_next.array();
                if (t > 0)
                    d_pre.middleRows(h_dim, h_dim) = (dc * lc.cells[t - 1].array() * f * (1.0 - f)).matrix();
                else
                    d_pre.middleRows(h_dim, h_dim).setZero();
                d_pre.topRows(h_dim) = (dc * cand * i * (1.0 - i)).matrix();
                d_pre.middleRows(2 * h_dim, h_dim) = (dc * i * (1.0 - cand.square())).matrix();
                d_pre.bottomRows(h_dim) = (dh.array() * tc * o * (1.0 - o)).matrix();
                dc_next = (dc * f).matrix();

                g.w_in.noalias() += d_pre * lc.inputs[t].transpose();
                if (t > 0)
                    g.w_rec.noalias() += d_pre * lc.hidden[t - 1].transpose();
                g.bias += d_pre.rowwise().sum();

                if (li > 0)
                    d_in[t] = layer.w_in.transpose() * d_pre;
                dh_next = layer.w_rec.transpose() * d_pre;
            }
            d_seq = std::move(d_in);
        }
        return grads;
    }

    // ------------------------------------------------------------------------

    void TrainConfig::validate() const
    {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw InvalidInput("learning_rate must be non-negative");
        if (batch_size < 1 || epochs < 0)
            throw InvalidInput("batch_size must be positive and epochs non-negative");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
            throw InvalidInput("invalid Adam hyperparameters");
        if (!(gradient_clip_norm >= 0.0))
            throw InvalidInput("gradient_clip_norm must be non-negative");
    }

    TrainResult train(Parameters params, const ModelSpec &spec, const TrainConfig &cfg, const SequenceBatch &data)
    {
        cfg.validate();
        spec.validate();
        params.check_shapes(spec);
        data.check(spec);
        const auto n = data.batch_size();
        if (n == 0)
            throw InvalidInput("training data is empty");

        std::mt19937_64 rng(cfg.seed);
        Parameters m1 = Parameters::zeros(spec), m2 = Parameters::zeros(spec);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});

        TrainResult res;
        long step = 0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch)
        {
            Parameters last_good = params;
            std::shuffle(order.begin(), order.end(), rng);
            double acc = 0;
            int batches = 0;
            for (Eigen::Index start = 0; start < n; start += cfg.batch_size)
            {
                const auto len = std::min(cfg.batch_size, n - start);
                const SequenceBatch mb = data.gather(std::span<const Eigen::Index>(order).subspan(
                    static_cast<std::size_t>(start), static_cast<std::size_t>(len)));

                ForwardCache cache;
                try
                {
                    cache = forward(params, spec, mb, true, rng);
                }
                catch (const NumericError &e)
                {
                    throw TrainingFailure(std::string("training diverged: ") + e.what(), std::move(last_good), epoch);
                }
                const double l = loss(cache.outputs, mb, spec.head);
                if (!std::isfinite(l))
                    throw TrainingFailure("training diverged: non-finite loss", std::move(last_good), epoch);
                acc += l;
                ++batches;

                Parameters grads = backward(params, spec, mb, cache);
                auto gt = grads.tensors();
                if (cfg.gradient_clip_norm > 0.0)
                {
                    double sq = 0;
                    for (auto s : gt)
                        for (double v : s)
                            sq += v * v;
                    const double norm = std::sqrt(sq);
                    if (norm > cfg.gradient_clip_norm)
                        for (auto s : gt)
                            for (double &v : s)
                                v *= cfg.gradient_clip_norm / norm;
                }

                ++step;
                auto pt = params.tensors();
                if (cfg.optimizer == Optimizer::adam)
                {
                    auto a = m1.tensors();
                    auto v = m2.tensors();
                    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
                    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
                    for (std::size_t k = 0; k < pt.size(); ++k)
                        for (std::size_t j = 0; j < pt[k].size(); ++j)
                        {
                            const double gj = gt[k][j];
                            a[k][j] = cfg.beta1 * a[k][j] + (1.0 - cfg.beta1) * gj;
                            v[k][j] = cfg.beta2 * v[k][j] + (1.0 - cfg.beta2) * gj * gj;
                            pt[k][j] -= cfg.learning_rate * (a[k][j] / c1) / (std::sqrt(v[k][j] / c2) + cfg.epsilon);
                        }
                }
                else
                {
                    for (std::size_t k = 0; k < pt.size(); ++k)
                        for (std::size_t j = 0; j < pt[k].size(); ++j)
                            pt[k][j] -= cfg.learning_rate * gt[k][j];
                }
                if (!params.all_finite())
                    throw TrainingFailure("training diverged: non-finite parameters", std::move(last_good), epoch);
            }
            res.loss_curve.push_back(acc / batches);
        }
        res.params = std::move(params);
        return res;
    }

    Eigen::MatrixXd predict(const Parameters &params, const ModelSpec &spec, const SequenceBatch &batch)
    {
        return forward_impl(params, spec, batch, false, nullptr).outputs;
    }

    Eigen::VectorXd predict(const Parameters &params, const ModelSpec &spec, const Eigen::MatrixXd &window)
    {
        if (window.rows() != spec.input_dim || window.cols() < 1)
            throw ShapeError("window must be input_dim x window_len");
        SequenceBatch b;
        for (Eigen::Index t = 0; t < window.cols(); ++t)
            b.steps.emplace_back(window.col(t));
        return predict(params, spec, b).col(0);
    }

    // ------------------------------------------------------------------------

    namespace
    {
        using nlohmann::json;

        json tensor_json(const std::string &name, const Eigen::MatrixXd &m)
        {
            std::vector<double> row_major;
            row_major.reserve(static_cast<std::size_t>(m.size()));
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    row_major.push_back(m(r, c));
            return {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", row_major}};
        }

        void read_tensor(const json &j, const std::string &name, Eigen::MatrixXd &m)
        {
            if (j.at("name").get<std::string>() != name)
                throw ParseError(0, "checkpoint tensor '" + name + "' missing or out of order");
            const auto rows = j.at("rows").get<Eigen::Index>();
            const auto cols = j.at("cols").get<Eigen::Index>();
            const auto &data = j.at("data");
            if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
                throw ShapeError("checkpoint tensor '" + name + "' has the wrong shape");
            std::size_t k = 0;
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    m(r, c) = data[k++].get<double>();
        }
    }

    void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt)
    {
        ckpt.spec.validate();
        ckpt.params.check_shapes(ckpt.spec);
        json j;
        j["format"] = "beamtrack-checkpoint";
        j["version"] = 1;
        j["spec"] = {{"input_dim", ckpt.spec.input_dim},
                     {"hidden_dims", ckpt.spec.hidden_dims},
                     {"dropout_rate", ckpt.spec.dropout_rate},
                     {"head", to_string(ckpt.spec.head)},
                     {"num_beams", ckpt.spec.num_beams}};
        j["train_seed"] = ckpt.train_seed;
        j["epochs"] = ckpt.epochs;
        json tensors = json::array();
        for (std::size_t l = 0; l < ckpt.params.layers.size(); ++l)
        {
            const auto &layer = ckpt.params.layers[l];
            const auto prefix = "lstm" + std::to_string(l) + ".";
            tensors.push_back(tensor_json(prefix + "w_in", layer.w_in));
            tensors.push_back(tensor_json(prefix + "w_rec", layer.w_rec));
            tensors.push_back(tensor_json(prefix + "bias", layer.bias));
        }
        tensors.push_back(tensor_json("head.w", ckpt.params.head_w));
        tensors.push_back(tensor_json("head.b", ckpt.params.head_b));
        j["tensors"] = std::move(tensors);

        std::ofstream out(path);
        if (!out)
            throw InvalidInput("cannot write " + path.string());
        out << j.dump(1) << '\n';
    }

    Checkpoint load_checkpoint(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw InvalidInput("cannot open " + path.string());
        json j;
        try
        {
            j = json::parse(in);
        }
        catch (const json::parse_error &e)
        {
            throw ParseError(0, std::string("checkpoint: ") + e.what());
        }
        if (j.value("format", "") != "beamtrack-checkpoint")
            throw ParseError(0, "not a beamtrack checkpoint");

        Checkpoint ck;
        try
        {
            const auto &s = j.at("spec");
            ck.spec.input_dim = s.at("input_dim").get<Eigen::Index>();
            ck.spec.hidden_dims = s.at("hidden_dims").get<std::vector<Eigen::Index>>();
            ck.spec.dropout_rate = s.at("dropout_rate").get<double>();
            ck.spec.head = head_from_string(s.at("head").get<std::string>());
            ck.spec.num_beams = s.at("num_beams").get<Eigen::Index>();
            ck.train_seed = j.at("train_seed").get<std::uint64_t>();
            ck.epochs = j.at("epochs").get<int>();

            ck.params = Parameters::zeros(ck.spec);
            const auto &t = j.at("tensors");
            std::size_t k = 0;
            for (std::size_t l = 0; l < ck.params.layers.size(); ++l)
            {
                auto &layer = ck.params.layers[l];
                const auto prefix = "lstm" + std::to_string(l) + ".";
                read_tensor(t.at(k++), prefix + "w_in", layer.w_in);
                read_tensor(t.at(k++), prefix + "w_rec", layer.w_rec);
                Eigen::MatrixXd bias = layer.bias;
                read_tensor(t.at(k++), prefix + "bias", bias);
                layer.bias = bias.col(0);
            }
            read_tensor(t.at(k++), "head.w", ck.params.head_w);
            Eigen::MatrixXd hb = ck.params.head_b;
            read_tensor(t.at(k++), "head.b", hb);
            ck.params.head_b = hb.col(0);
        }
        catch (const json::exception &e)
        {
            throw ParseError(0, std::string("checkpoint: ") + e.what());
        }
        return ck;
    }
}
