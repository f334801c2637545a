// SPDX-License-Identifier: Apache-2.0
#include "beamtrack/dataset.hpp"

#include "beamtrack/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace beamtrack
{
    std::vector<Eigen::Index> ReceiverSeries::best_beams() const
    {
        std::vector<Eigen::Index> out;
        out.reserve(scenes.size());
        for (const auto &s : scenes)
            out.push_back(best_beam(s.gains));
        return out;
    }

    std::size_t Dataset::num_scenes() const
    {
        std::size_t n = 0;
        for (const auto &e : episodes)
            for (const auto &r : e.receivers)
                n += r.scenes.size();
        return n;
    }

    void SynthConfig::validate() const
    {
        if (num_episodes < 1 || receivers_per_episode < 1 || scenes_per_episode < 1)
            throw InvalidInput("synth counts must be positive");
        if (!(target_nlos_fraction >= 0.0 && target_nlos_fraction <= 1.0))
            throw InvalidInput("target_nlos_fraction must lie in [0, 1]");
        if (nlos_paths < 1)
            throw InvalidInput("nlos_paths must be positive");
        if (!(street_length > 0.0) || !(scene_interval_ms > 0.0) || !(carrier_ghz > 0.0))
            throw InvalidInput("street length, scene interval and carrier must be positive");
        if (!(speed_min >= 0.0) || speed_max < speed_min)
            throw InvalidInput("invalid speed range");
        if (lane_max < lane_min)
            throw InvalidInput("invalid lane range");
        if (!(mean_blockage_scenes >= 1.0))
            throw InvalidInput("mean blockage length must be at least one scene");
        if (!(nlos_gain_penalty_db >= 0.0))
            throw InvalidInput("nlos gain penalty must be non-negative");
    }

    void validate(const Dataset &ds)
    {
        if (ds.n_tx < 1 || ds.n_rx < 1)
            throw ValidationError("array sizes must be positive");
        if (!(ds.scene_interval_ms > 0.0))
            throw ValidationError("scene interval must be positive");
        for (const auto &ep : ds.episodes)
        {
            std::size_t len = ep.receivers.empty() ? 0 : ep.receivers.front().scenes.size();
            for (const auto &rs : ep.receivers)
            {
                if (rs.scenes.size() != len)
                    throw ValidationError("episode " + std::to_string(ep.id) + " has receiver series of unequal length");
                for (std::size_t s = 0; s < rs.scenes.size(); ++s)
                {
                    const auto &sc = rs.scenes[s];
                    if (sc.gains.size() != ds.num_beams())
                        throw ValidationError("scene gain vector length differs from M");
                    if (!sc.gains.allFinite() || (sc.gains.array() < 0.0).any())
                        throw ValidationError("scene gains must be finite and non-negative");
                    if (s > 0 && sc.scene_id != rs.scenes[s - 1].scene_id + 1)
                        throw ValidationError("scene ids of episode " + std::to_string(ep.id) + ", receiver " +
                                              std::to_string(rs.receiver_id) + " are not consecutive");
                }
            }
        }
    }

    // ------------------------------------------------------------------------
    // scene-records I/O

    namespace
    {
        std::vector<std::string_view> tokenize(std::string_view line)
        {
            std::vector<std::string_view> out;
            std::size_t i = 0;
            while (i < line.size())
            {
                while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
                    ++i;
                std::size_t j = i;
                while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
                    ++j;
                if (j > i)
                    out.push_back(line.substr(i, j - i));
                i = j;
            }
            return out;
        }

        template <typename T>
        T parse_number(std::string_view tok, std::size_t line, const char *what)
        {
            T v{};
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                throw ParseError(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
            if constexpr (std::is_floating_point_v<T>)
                if (!std::isfinite(v))
                    throw ParseError(line, std::string("non-finite ") + what);
            return v;
        }

        std::string_view header_value(std::string_view tok, std::string_view key, std::size_t line)
        {
            if (tok.size() <= key.size() + 1 || tok.substr(0, key.size()) != key || tok[key.size()] != '=')
                throw ParseError(line, "expected header field " + std::string(key));
            return tok.substr(key.size() + 1);
        }

        void append_real(std::string &out, double v)
        {
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof(buf), v);
            out.append(buf, res.ptr);
        }
    }

    Dataset ingest(std::istream &in, const ArrayConfig &tx, const ArrayConfig &rx)
    {
        Dataset ds;
        bool have_header = false;
        Eigen::Index m = 0;
        Codebook<double> ct, cr;

        // episode -> receiver -> scenes, kept sorted by id
        std::map<std::int64_t, std::map<std::int64_t, std::vector<Scene>>> grouped;

        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            const auto toks = tokenize(line);
            if (toks.empty() || toks.front().front() == '#')
                continue;

            if (!have_header)
            {
                if (toks.size() != 5 || toks[0] != "scene-records")
                    throw ParseError(lineno, "expected 'scene-records n_tx=.. n_rx=.. scene_interval_ms=.. M=..' header");
                ds.n_tx = parse_number<Eigen::Index>(header_value(toks[1], "n_tx", lineno), lineno, "n_tx");
                ds.n_rx = parse_number<Eigen::Index>(header_value(toks[2], "n_rx", lineno), lineno, "n_rx");
                ds.scene_interval_ms = parse_number<double>(header_value(toks[3], "scene_interval_ms", lineno), lineno, "scene_interval_ms");
                m = parse_number<Eigen::Index>(header_value(toks[4], "M", lineno), lineno, "M");
                if (ds.n_tx < 1 || ds.n_rx < 1 || !(ds.scene_interval_ms > 0.0))
                    throw ParseError(lineno, "header values must be positive");
                if (m != ds.n_tx * ds.n_rx)
                    throw ParseError(lineno, "M must equal n_tx * n_rx");
                have_header = true;
                continue;
            }

            if (toks.size() < 9)
                throw ParseError(lineno, "record has too few fields");
            Scene sc;
            sc.episode_id = parse_number<std::int64_t>(toks[0], lineno, "episode_id");
            sc.scene_id = parse_number<std::int64_t>(toks[1], lineno, "scene_id");
            sc.receiver_id = parse_number<std::int64_t>(toks[2], lineno, "receiver_id");
            for (int k = 0; k < 3; ++k)
                sc.rx_position(k) = parse_number<double>(toks[3 + k], lineno, "position");
            const int los = parse_number<int>(toks[6], lineno, "los flag");
            if (los != 0 && los != 1)
                throw ParseError(lineno, "los flag must be 0 or 1");
            sc.los = los == 1;
            if (sc.scene_id < 0)
                throw ParseError(lineno, "scene_id must be non-negative");

            const auto kind = toks[7];
            const std::size_t n_vals = toks.size() - 8;
            const bool has_mpc_tag = std::find(toks.begin() + 8, toks.end(), std::string_view("mpc")) != toks.end();
            const bool has_gain_tag = std::find(toks.begin() + 8, toks.end(), std::string_view("gains")) != toks.end();
            if ((kind == "mpc" && has_gain_tag) || (kind == "gains" && has_mpc_tag))
                throw ValidationError("line " + std::to_string(lineno) + ": record carries both mpcs and gains");

            if (kind == "mpc")
            {
                if (n_vals % 6 != 0)
                    throw ParseError(lineno, "mpc payload must hold 6 reals per path");
                if (tx.num_elements != ds.n_tx || rx.num_elements != ds.n_rx)
                    throw ValidationError("array configuration does not match header n_tx/n_rx");
                for (std::size_t p = 0; p < n_vals / 6; ++p)
                {
                    double v[6];
                    for (int k = 0; k < 6; ++k)
                        v[k] = parse_number<double>(toks[8 + 6 * p + static_cast<std::size_t>(k)], lineno, "mpc value");
                    sc.mpcs.push_back({{v[0], v[1]}, v[2], v[3], v[4], v[5]});
                }
                if (ct.size() == 0)
                {
                    ct = dft_codebook<double>(ds.n_tx);
                    cr = dft_codebook<double>(ds.n_rx);
                }
                try
                {
                    sc.gains = beam_gains<double>(channel_matrix<double>(sc.mpcs, tx, rx), ct, cr).magnitudes;
                }
                catch (const EmptyChannel &)
                {
                    throw ParseError(lineno, "mpc record without paths");
                }
                catch (const InvalidInput &e)
                {
                    throw ParseError(lineno, e.what());
                }
            }
            else if (kind == "gains")
            {
                if (static_cast<Eigen::Index>(n_vals) != m)
                    throw ParseError(lineno, "gains record must hold exactly M values");
                sc.gains.resize(m);
                for (Eigen::Index k = 0; k < m; ++k)
                {
                    sc.gains(k) = parse_number<double>(toks[8 + static_cast<std::size_t>(k)], lineno, "gain");
                    if (sc.gains(k) < 0.0)
                        throw ParseError(lineno, "gain magnitudes must be non-negative");
                }
            }
            else
                throw ParseError(lineno, "expected 'mpc' or 'gains' after the los flag");

            sc.timestamp_ms = static_cast<double>(sc.scene_id) * ds.scene_interval_ms;
            grouped[sc.episode_id][sc.receiver_id].push_back(std::move(sc));
        }
        if (!have_header)
            throw ParseError(lineno, "missing scene-records header");

        for (auto &[eid, receivers] : grouped)
        {
            Episode ep;
            ep.id = eid;
            ep.scene_interval_ms = ds.scene_interval_ms;
            for (auto &[rid, scenes] : receivers)
            {
                std::stable_sort(scenes.begin(), scenes.end(), [](const Scene &a, const Scene &b)
                                 { return a.scene_id < b.scene_id; });
                ep.receivers.push_back({rid, std::move(scenes)});
            }
            ds.episodes.push_back(std::move(ep));
        }
        validate(ds);
        return ds;
    }

    Dataset ingest(const std::filesystem::path &path, const ArrayConfig &tx, const ArrayConfig &rx)
    {
        std::ifstream in(path);
        if (!in)
            throw InvalidInput("cannot open " + path.string());
        return ingest(in, tx, rx);
    }

    Dataset ingest(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw InvalidInput("cannot open " + path.string());

        // peek at the header to size the default arrays
        std::string line;
        Eigen::Index n_tx = 1, n_rx = 1;
        while (std::getline(in, line))
        {
            const auto toks = tokenize(line);
            if (toks.empty() || toks.front().front() == '#')
                continue;
            if (toks.size() == 5 && toks[0] == "scene-records")
            {
                n_tx = parse_number<Eigen::Index>(header_value(toks[1], "n_tx", 0), 0, "n_tx");
                n_rx = parse_number<Eigen::Index>(header_value(toks[2], "n_rx", 0), 0, "n_rx");
            }
            break;
        }
        in.clear();
        in.seekg(0);
        return ingest(in, synth_tx_array(std::max<Eigen::Index>(n_tx, 1)), synth_rx_array(std::max<Eigen::Index>(n_rx, 1)));
    }

    void write_scene_records(std::ostream &out, const Dataset &ds)
    {
        std::string buf = "scene-records n_tx=" + std::to_string(ds.n_tx) + " n_rx=" + std::to_string(ds.n_rx) +
                          " scene_interval_ms=";
        append_real(buf, ds.scene_interval_ms);
        buf += " M=" + std::to_string(ds.num_beams()) + "\n";
        out << buf;

        for (const auto &ep : ds.episodes)
            for (const auto &rs : ep.receivers)
                for (const auto &sc : rs.scenes)
                {
                    buf.clear();
                    buf += std::to_string(sc.episode_id) + ' ' + std::to_string(sc.scene_id) + ' ' +
                           std::to_string(sc.receiver_id);
                    for (int k = 0; k < 3; ++k)
                    {
                        buf += ' ';
                        append_real(buf, sc.rx_position(k));
                    }
                    buf += sc.los ? " 1" : " 0";
                    if (!sc.mpcs.empty())
                    {
                        buf += " mpc";
                        for (const auto &p : sc.mpcs)
                            for (double v : {p.gain.real(), p.gain.imag(), p.aod_az, p.aod_el, p.aoa_az, p.aoa_el})
                            {
                                buf += ' ';
                                append_real(buf, v);
                            }
                    }
                    else
                    {
                        buf += " gains";
                        for (Eigen::Index k = 0; k < sc.gains.size(); ++k)
                        {
                            buf += ' ';
                            append_real(buf, sc.gains(k));
                        }
                    }
                    buf += '\n';
                    out << buf;
                }
    }

    void write_scene_records(const std::filesystem::path &path, const Dataset &ds)
    {
        std::ofstream out(path);
        if (!out)
            throw InvalidInput("cannot write " + path.string());
        write_scene_records(out, ds);
    }

    // ------------------------------------------------------------------------
    // synthetic vehicular generator

    ArrayConfig synth_tx_array(Eigen::Index n_tx)
    {
        return ArrayConfig{n_tx, 0.5, 90.0};
    }

    ArrayConfig synth_rx_array(Eigen::Index n_rx)
    {
        return ArrayConfig{n_rx, 0.5, -90.0};
    }

    namespace
    {
        struct Reflector
        {
            double aod_az, aoa_az, loss_db;
        };

        // Two-state blockage chain with stationary blocked probability p and mean blocked run `mean_len`
        struct BlockageChain
        {
            double enter = 0, leave = 1;

            BlockageChain(double p, double mean_len)
            {
                if (p <= 0.0)
                {
                    enter = 0.0;
                    leave = 1.0;
                    return;
                }
                if (p >= 1.0)
                {
                    enter = 1.0;
                    leave = 0.0;
                    return;
                }
                leave = 1.0 / mean_len;
                enter = p * leave / (1.0 - p);
                if (enter > 1.0)
                {
                    // runs must lengthen to reach the target fraction
                    enter = 1.0;
                    leave = (1.0 - p) / p;
                }
            }
        };
    }

    Dataset synth_generate(const SynthConfig &cfg, const ArrayConfig &tx, const ArrayConfig &rx)
    {
        cfg.validate();
        tx.validate();
        rx.validate();

        Dataset ds;
        ds.n_tx = tx.num_elements;
        ds.n_rx = rx.num_elements;
        ds.scene_interval_ms = cfg.scene_interval_ms;

        const auto ct = dft_codebook<double>(ds.n_tx);
        const auto cr = dft_codebook<double>(ds.n_rx);
        const double wavelength = 299792458.0 / (cfg.carrier_ghz * 1e9);
        const double dt = cfg.scene_interval_ms * 1e-3;
        const BlockageChain chain(cfg.target_nlos_fraction, cfg.mean_blockage_scenes);

        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const auto uniform = [&](double a, double b)
        { return a + (b - a) * unit(rng); };

        for (int e = 0; e < cfg.num_episodes; ++e)
        {
            Episode ep;
            ep.id = e;
            ep.scene_interval_ms = cfg.scene_interval_ms;
            for (int r = 0; r < cfg.receivers_per_episode; ++r)
            {
                ReceiverSeries rs;
                rs.receiver_id = r;

                const double x0 = uniform(0.0, cfg.street_length);
                const double lane = uniform(cfg.lane_min, cfg.lane_max);
                const double dir = unit(rng) < 0.5 ? -1.0 : 1.0;
                const double speed = uniform(cfg.speed_min, cfg.speed_max);

                bool blocked = unit(rng) < cfg.target_nlos_fraction;
                std::vector<Reflector> reflectors;
                const auto draw_reflectors = [&]
                {
                    reflectors.clear();
                    for (int p = 0; p < cfg.nlos_paths; ++p)
                        reflectors.push_back({uniform(15.0, 165.0), uniform(-165.0, -15.0), uniform(3.0, 9.0)});
                };
                if (blocked)
                    draw_reflectors();

                for (int s = 0; s < cfg.scenes_per_episode; ++s)
                {
                    if (s > 0)
                    {
                        const bool was = blocked;
                        blocked = was ? unit(rng) >= chain.leave : unit(rng) < chain.enter;
                        if (blocked && !was)
                            draw_reflectors();
                    }

                    Scene sc;
                    sc.episode_id = e;
                    sc.scene_id = s;
                    sc.receiver_id = r;
                    sc.rx_position = {x0 + dir * speed * dt * s, lane, cfg.ue_height};
                    sc.los = !blocked;
                    sc.timestamp_ms = s * cfg.scene_interval_ms;

                    const double dx = sc.rx_position.x() - cfg.bs_position.x();
                    const double dy = sc.rx_position.y() - cfg.bs_position.y();
                    const double dz = cfg.ue_height - cfg.bs_height;
                    const double dxy = std::hypot(dx, dy);
                    const double d = std::hypot(dxy, dz);
                    const double aod_az = wrap_degrees(std::atan2(dy, dx) * rad2deg);
                    const double aod_el = std::atan2(dz, dxy) * rad2deg;
                    const double amp = 1.0 / d;
                    const double phase = -2.0 * std::numbers::pi * std::fmod(d / wavelength, 1.0);

                    double los_amp = amp;
                    if (blocked)
                        los_amp *= std::pow(10.0, -cfg.nlos_gain_penalty_db / 20.0);
                    sc.mpcs.push_back({std::polar(los_amp, phase), aod_az, aod_el, wrap_degrees(aod_az + 180.0), -aod_el});

                    if (blocked)
                        for (const auto &rf : reflectors)
                        {
                            const double a = amp * std::pow(10.0, -rf.loss_db / 20.0);
                            sc.mpcs.push_back({std::polar(a, uniform(-std::numbers::pi, std::numbers::pi)),
                                               rf.aod_az, aod_el, rf.aoa_az, -aod_el});
                        }

                    sc.gains = beam_gains<double>(channel_matrix<double>(sc.mpcs, tx, rx), ct, cr).magnitudes;
                    rs.scenes.push_back(std::move(sc));
                }
                ep.receivers.push_back(std::move(rs));
            }
            ds.episodes.push_back(std::move(ep));
        }
        return ds;
    }

    // ------------------------------------------------------------------------

    ScenarioStats stats(const Dataset &ds)
    {
        ScenarioStats st;
        std::vector<std::vector<Eigen::Index>> sequences;
        std::vector<double> best_db;
        for (const auto &ep : ds.episodes)
            for (const auto &rs : ep.receivers)
            {
                for (const auto &sc : rs.scenes)
                {
                    if (sc.gains.size() != ds.num_beams())
                        throw ValidationError("stats requires gains on every scene");
                    (sc.los ? st.los_count : st.nlos_count) += 1;
                    best_db.push_back(20.0 * std::log10(sc.gains.maxCoeff()));
                }
                sequences.push_back(rs.best_beams());
            }
        if (!sequences.empty())
            st.mafd = mafd(sequences, ds.num_beams());
        if (!best_db.empty())
        {
            const double mean = std::accumulate(best_db.begin(), best_db.end(), 0.0) / static_cast<double>(best_db.size());
            double var = 0;
            for (double v : best_db)
                var += (v - mean) * (v - mean);
            st.beam_gain_variance_db = var / static_cast<double>(best_db.size());
        }
        return st;
    }

    std::pair<Dataset, Dataset> split(const Dataset &ds, double test_fraction, std::uint64_t seed)
    {
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw InvalidInput("test_fraction must lie in (0, 1)");
        const std::size_t n = ds.episodes.size();
        if (n < 2)
            throw InvalidInput("split needs at least two episodes");

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);

        auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
        n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
        std::vector<bool> is_test(n, false);
        for (std::size_t k = 0; k < n_test; ++k)
            is_test[order[k]] = true;

        Dataset train = ds, test = ds;
        train.episodes.clear();
        test.episodes.clear();
        for (std::size_t k = 0; k < n; ++k)
            (is_test[k] ? test : train).episodes.push_back(ds.episodes[k]);
        return {std::move(train), std::move(test)};
    }

    bool approx_equal(const Dataset &a, const Dataset &b, double tol)
    {
        const auto close = [tol](double x, double y)
        { return std::abs(x - y) <= tol * std::max({1.0, std::abs(x), std::abs(y)}); };

        if (a.n_tx != b.n_tx || a.n_rx != b.n_rx || !close(a.scene_interval_ms, b.scene_interval_ms) ||
            a.episodes.size() != b.episodes.size())
            return false;
        for (std::size_t e = 0; e < a.episodes.size(); ++e)
        {
            const auto &ea = a.episodes[e];
            const auto &eb = b.episodes[e];
            if (ea.id != eb.id || ea.receivers.size() != eb.receivers.size())
                return false;
            for (std::size_t r = 0; r < ea.receivers.size(); ++r)
            {
                const auto &ra = ea.receivers[r];
                const auto &rb = eb.receivers[r];
                if (ra.receiver_id != rb.receiver_id || ra.scenes.size() != rb.scenes.size())
                    return false;
                for (std::size_t s = 0; s < ra.scenes.size(); ++s)
                {
                    const auto &sa = ra.scenes[s];
                    const auto &sb = rb.scenes[s];
                    if (sa.episode_id != sb.episode_id || sa.scene_id != sb.scene_id ||
                        sa.receiver_id != sb.receiver_id || sa.los != sb.los ||
                        !close(sa.timestamp_ms, sb.timestamp_ms) || sa.mpcs.size() != sb.mpcs.size() ||
                        sa.gains.size() != sb.gains.size())
                        return false;
                    for (int k = 0; k < 3; ++k)
                        if (!close(sa.rx_position(k), sb.rx_position(k)))
                            return false;
                    for (Eigen::Index k = 0; k < sa.gains.size(); ++k)
                        if (!close(sa.gains(k), sb.gains(k)))
                            return false;
                    for (std::size_t p = 0; p < sa.mpcs.size(); ++p)
                    {
                        const auto &pa = sa.mpcs[p];
                        const auto &pb = sb.mpcs[p];
                        if (!close(pa.gain.real(), pb.gain.real()) || !close(pa.gain.imag(), pb.gain.imag()) ||
                            !close(pa.aod_az, pb.aod_az) || !close(pa.aod_el, pb.aod_el) ||
                            !close(pa.aoa_az, pb.aoa_az) || !close(pa.aoa_el, pb.aoa_el))
                            return false;
                    }
                }
            }
        }
        return true;
    }
}
