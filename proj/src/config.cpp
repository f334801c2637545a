// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace beamtrack
{
    namespace
    {
        std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        template <typename T>
        T to_number(const std::string &v, const std::string &key)
        {
            T out{};
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || ptr != v.data() + v.size())
                throw InvalidInput("config key '" + key + "': cannot parse '" + v + "'");
            return out;
        }

        bool to_bool(const std::string &v, const std::string &key)
        {
            if (v == "true" || v == "1" || v == "yes")
                return true;
            if (v == "false" || v == "0" || v == "no")
                return false;
            throw InvalidInput("config key '" + key + "': expected a boolean, got '" + v + "'");
        }

        template <typename T>
        std::vector<T> to_list(const std::string &v, const std::string &key)
        {
            std::vector<T> out;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ','))
            {
                item = trim(item);
                if (!item.empty())
                    out.push_back(to_number<T>(item, key));
            }
            return out;
        }

        std::string real(double v)
        {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof(buf), v);
            return {buf, r.ptr};
        }

        template <typename T>
        std::string join(const std::vector<T> &v)
        {
            std::string out;
            for (std::size_t k = 0; k < v.size(); ++k)
                out += (k ? "," : "") + std::to_string(v[k]);
            return out;
        }

        struct Key
        {
            const char *name;
            std::function<void(ExperimentConfig &, const std::string &)> set;
            std::function<std::string(const ExperimentConfig &)> get;
        };

#define REAL_KEY(NAME, FIELD)                                                                          \
    Key                                                                                                \
    {                                                                                                  \
        NAME, [](ExperimentConfig &c, const std::string &v) { c.FIELD = to_number<double>(v, NAME); }, \
            [](const ExperimentConfig &c) { return real(c.FIELD); }                                    \
    }
#define INT_KEY(NAME, FIELD, TYPE)                                                                   \
    Key                                                                                              \
    {                                                                                                \
        NAME, [](ExperimentConfig &c, const std::string &v) { c.FIELD = to_number<TYPE>(v, NAME); }, \
            [](const ExperimentConfig &c) { return std::to_string(c.FIELD); }                        \
    }

        const std::vector<Key> &keys()
        {
            static const std::vector<Key> table = {
                Key{"scenario", [](ExperimentConfig &c, const std::string &v)
                    { c.scenario = v; }, [](const ExperimentConfig &c)
                    { return c.scenario; }},
                INT_KEY("seed", seed, std::uint64_t),
                Key{"out", [](ExperimentConfig &c, const std::string &v)
                    { c.out_dir = v; }, [](const ExperimentConfig &c)
                    { return c.out_dir.string(); }},
                REAL_KEY("test_fraction", test_fraction),

                INT_KEY("synth.episodes", synth.num_episodes, int),
                INT_KEY("synth.receivers", synth.receivers_per_episode, int),
                INT_KEY("synth.scenes", synth.scenes_per_episode, int),
                REAL_KEY("synth.street_length", synth.street_length),
                REAL_KEY("synth.bs_x", synth.bs_position.x()),
                REAL_KEY("synth.bs_y", synth.bs_position.y()),
                REAL_KEY("synth.bs_height", synth.bs_height),
                REAL_KEY("synth.ue_height", synth.ue_height),
                REAL_KEY("synth.speed_min", synth.speed_min),
                REAL_KEY("synth.speed_max", synth.speed_max),
                REAL_KEY("synth.lane_min", synth.lane_min),
                REAL_KEY("synth.lane_max", synth.lane_max),
                REAL_KEY("synth.scene_interval_ms", synth.scene_interval_ms),
                REAL_KEY("synth.nlos_fraction", synth.target_nlos_fraction),
                REAL_KEY("synth.mean_blockage_scenes", synth.mean_blockage_scenes),
                INT_KEY("synth.nlos_paths", synth.nlos_paths, int),
                REAL_KEY("synth.nlos_penalty_db", synth.nlos_gain_penalty_db),
                REAL_KEY("synth.carrier_ghz", synth.carrier_ghz),

                INT_KEY("array.n_tx", n_tx, Eigen::Index),
                INT_KEY("array.n_rx", n_rx, Eigen::Index),

                INT_KEY("window.len", window.window_len, Eigen::Index),
                Key{"window.features", [](ExperimentConfig &c, const std::string &v)
                    { c.window.feature_mode = feature_mode_from_string(v); }, [](const ExperimentConfig &c)
                    { return std::string(to_string(c.window.feature_mode)); }},
                Key{"window.normalization", [](ExperimentConfig &c, const std::string &v)
                    { c.window.normalization = normalization_from_string(v); }, [](const ExperimentConfig &c)
                    { return std::string(to_string(c.window.normalization)); }},

                REAL_KEY("window.rsrp_floor_db", window.rsrp_floor_db),

                Key{"model.hidden", [](ExperimentConfig &c, const std::string &v)
                    { c.hidden_dims = to_list<Eigen::Index>(v, "model.hidden"); }, [](const ExperimentConfig &c)
                    { return join(c.hidden_dims); }},
                REAL_KEY("model.dropout", dropout_rate),

                REAL_KEY("train.lr", train.learning_rate),
                INT_KEY("train.batch_size", train.batch_size, Eigen::Index),
                INT_KEY("train.epochs", train.epochs, int),
                Key{"train.optimizer", [](ExperimentConfig &c, const std::string &v)
                    {
                        if (v == "adam")
                            c.train.optimizer = Optimizer::adam;
                        else if (v == "sgd")
                            c.train.optimizer = Optimizer::sgd;
                        else
                            throw InvalidInput("config key 'train.optimizer': expected adam or sgd");
                    },
                    [](const ExperimentConfig &c)
                    { return std::string(c.train.optimizer == Optimizer::adam ? "adam" : "sgd"); }},
                REAL_KEY("train.beta1", train.beta1),
                REAL_KEY("train.beta2", train.beta2),
                REAL_KEY("train.epsilon", train.epsilon),
                REAL_KEY("train.clip", train.gradient_clip_norm),

                Key{"schedules", [](ExperimentConfig &c, const std::string &v)
                    { c.schedules = to_list<int>(v, "schedules"); }, [](const ExperimentConfig &c)
                    { return join(c.schedules); }},
                Key{"metrics.k", [](ExperimentConfig &c, const std::string &v)
                    { c.ks = to_list<int>(v, "metrics.k"); }, [](const ExperimentConfig &c)
                    { return join(c.ks); }},
                Key{"prefilter.enabled", [](ExperimentConfig &c, const std::string &v)
                    { c.prefilter.enabled = to_bool(v, "prefilter.enabled"); }, [](const ExperimentConfig &c)
                    { return std::string(c.prefilter.enabled ? "true" : "false"); }},
                INT_KEY("prefilter.n", prefilter.subset_size, Eigen::Index),
            };
            return table;
        }

#undef REAL_KEY
#undef INT_KEY
    }

    void ExperimentConfig::validate() const
    {
        if (scenario.empty())
            throw InvalidInput("scenario must be 'synth' or a file path");
        if (scenario == "synth")
            synth.validate();
        if (n_tx < 1 || n_rx < 1)
            throw InvalidInput("array sizes must be positive");
        window.validate();
        model_spec(Head::classification).validate();
        train.validate();
        if (schedules.empty())
            throw InvalidInput("schedule list must not be empty");
        for (int p : schedules)
            if (p < 0)
                throw InvalidInput("schedules must be non-negative");
        if (ks.empty() || !std::is_sorted(ks.begin(), ks.end()) ||
            std::adjacent_find(ks.begin(), ks.end()) != ks.end())
            throw InvalidInput("metric K list must be strictly ascending");
        if (ks.front() < 1 || ks.back() > n_tx * n_rx)
            throw InvalidInput("metric K values must lie in [1, M]");
        if (prefilter.enabled && (prefilter.subset_size < 1 || prefilter.subset_size > n_tx))
            throw InvalidInput("prefilter.n must lie in [1, n_tx]");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw InvalidInput("test_fraction must lie in (0, 1)");
    }

    ModelSpec ExperimentConfig::model_spec(Head head) const
    {
        ModelSpec s;
        s.num_beams = n_tx * n_rx;
        s.input_dim = window.input_dim(s.num_beams);
        s.hidden_dims = hidden_dims;
        s.dropout_rate = dropout_rate;
        s.head = head;
        return s;
    }

    std::string ExperimentConfig::canonical() const
    {
        std::string out;
        for (const auto &k : keys())
            out += std::string(k.name) + " = " + k.get(*this) + "\n";
        return out;
    }

    std::uint64_t ExperimentConfig::digest() const
    {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char ch : canonical())
        {
            h ^= ch;
            h *= 1099511628211ull;
        }
        return h;
    }

    ExperimentConfig parse_config(std::istream &in)
    {
        ExperimentConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            line = trim(line);
            if (line.empty())
                continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(lineno, "expected 'key = value'");
            const auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            const auto &table = keys();
            const auto it = std::find_if(table.begin(), table.end(), [&](const Key &k)
                                         { return key == k.name; });
            if (it == table.end())
                throw ParseError(lineno, "unknown config key '" + key + "'");
            try
            {
                it->set(cfg, value);
            }
            catch (const InvalidInput &e)
            {
                throw ParseError(lineno, e.what());
            }
        }
        cfg.prefilter.bs_position = cfg.synth.bs_position;
        cfg.validate();
        return cfg;
    }

    ExperimentConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw InvalidInput("cannot open config " + path.string());
        return parse_config(in);
    }

    std::uint64_t derive_seed(std::uint64_t master, SeedStage stage)
    {
        std::uint64_t z = master + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(stage);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
}
