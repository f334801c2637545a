// SPDX-License-Identifier: Apache-2.0
//
// Narrowband geometric MIMO channel, DFT codebooks and per-beam-pair gains.
//
// Conventions used throughout:
// - Arrays are uniform linear arrays. Azimuth is measured in degrees in the global frame and
//   converted to the array frame by subtracting ArrayConfig::orientation_deg (broadside = 0).
// - Element n of a steering vector has phase exp(-j 2 pi d n sin(az)), d in wavelengths. For the
//   default half-wavelength spacing this is exp(-j pi n sin(az)). Elevation is accepted and
//   validated but does not enter the ULA response.
// - Codebooks store one codeword per column.
// - Beam pair (r, t) maps to the flat index i = t * |C_R| + r (zero-based), i.e. the column-major
//   flattening of the |C_R| x |C_T| matrix W^H H F.
// ------------------------------------------------------------------------

#pragma once

#include "beamtrack/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace beamtrack
{
    template <typename Scalar>
    using CVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

    template <typename Scalar>
    using CMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

    template <typename Scalar>
    using RVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    template <typename Scalar>
    using ChannelMatrix = CMatrix<Scalar>; // N_rx x N_tx

    template <typename Scalar>
    using Codebook = CMatrix<Scalar>; // N x N, one codeword per column

    struct ArrayConfig
    {
        Eigen::Index num_elements = 1;
        double element_spacing = 0.5; // wavelengths
        double orientation_deg = 0.0; // global azimuth of broadside

        void validate() const
        {
            if (num_elements < 1)
                throw InvalidInput("array must have at least one element");
            if (!(element_spacing > 0.0) || !std::isfinite(element_spacing))
                throw InvalidInput("element spacing must be positive");
            if (!std::isfinite(orientation_deg))
                throw InvalidInput("array orientation must be finite");
        }
    };

    template <typename Scalar = double>
    struct MultipathComponent
    {
        std::complex<Scalar> gain{};
        Scalar aod_az = 0, aod_el = 0; // degrees
        Scalar aoa_az = 0, aoa_el = 0; // degrees
    };

    using Mpc = MultipathComponent<double>;

    template <typename Scalar = double>
    struct BeamGainVector
    {
        RVector<Scalar> magnitudes; // |y_i|, length M
        CVector<Scalar> values;     // y_i, same length
        Eigen::Index size() const { return magnitudes.size(); }
    };

    inline constexpr double deg2rad = std::numbers::pi / 180.0;
    inline constexpr double rad2deg = 180.0 / std::numbers::pi;

    // Maps any finite angle to [-180, 180)
    inline double wrap_degrees(double deg)
    {
        double w = std::fmod(deg + 180.0, 360.0);
        if (w < 0.0)
            w += 360.0;
        return w - 180.0;
    }

    // Smallest absolute difference between two azimuths, in [0, 180]
    inline double angular_distance(double a_deg, double b_deg)
    {
        return std::abs(wrap_degrees(a_deg - b_deg));
    }

    template <typename Scalar = double>
    CVector<Scalar> steering_vector(const ArrayConfig &array, Scalar azimuth_deg, Scalar elevation_deg)
    {
        array.validate();
        if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg))
            throw InvalidInput("steering angle must be finite");
        if (azimuth_deg < Scalar(-180) || azimuth_deg > Scalar(180))
            throw InvalidInput("azimuth outside [-180, 180] degrees");
        if (elevation_deg < Scalar(-90) || elevation_deg > Scalar(90))
            throw InvalidInput("elevation outside [-90, 90] degrees");

        const Eigen::Index n = array.num_elements;
        const Scalar rel = (azimuth_deg - Scalar(array.orientation_deg)) * Scalar(deg2rad);
        const Scalar step = Scalar(-2) * std::numbers::pi_v<Scalar> * Scalar(array.element_spacing) * std::sin(rel);
        const Scalar norm = Scalar(1) / std::sqrt(Scalar(n));

        CVector<Scalar> a(n);
        for (Eigen::Index m = 0; m < n; ++m)
            a(m) = std::polar(norm, step * Scalar(m));
        return a;
    }

    // H = sqrt(N_tx N_rx) sum_l alpha_l a_r(AoA_l) a_t(AoD_l)^H
    template <typename Scalar = double>
    ChannelMatrix<Scalar> channel_matrix(std::span<const MultipathComponent<Scalar>> mpcs,
                                         const ArrayConfig &tx, const ArrayConfig &rx)
    {
        if (mpcs.empty())
            throw EmptyChannel("channel requires at least one multipath component");
        tx.validate();
        rx.validate();

        ChannelMatrix<Scalar> h = ChannelMatrix<Scalar>::Zero(rx.num_elements, tx.num_elements);
        for (const auto &p : mpcs)
        {
            if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag()))
                throw InvalidInput("path gain must be finite");
            const CVector<Scalar> ar = steering_vector<Scalar>(rx, p.aoa_az, p.aoa_el);
            const CVector<Scalar> at = steering_vector<Scalar>(tx, p.aod_az, p.aod_el);
            h.noalias() += p.gain * ar * at.adjoint();
        }
        h *= std::sqrt(Scalar(tx.num_elements) * Scalar(rx.num_elements));
        return h;
    }

    template <typename Scalar = double>
    ChannelMatrix<Scalar> channel_matrix(const std::vector<MultipathComponent<Scalar>> &mpcs,
                                         const ArrayConfig &tx, const ArrayConfig &rx)
    {
        return channel_matrix<Scalar>(std::span<const MultipathComponent<Scalar>>(mpcs), tx, rx);
    }

    // Column k holds (1/sqrt(n)) exp(-j 2 pi k m / n), m = 0..n-1
    template <typename Scalar = double>
    Codebook<Scalar> dft_codebook(Eigen::Index n)
    {
        if (n < 1)
            throw InvalidInput("codebook size must be positive");
        const Scalar norm = Scalar(1) / std::sqrt(Scalar(n));
        Codebook<Scalar> c(n, n);
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index m = 0; m < n; ++m)
            {
                // reduce k*m mod n first so the phase argument stays small
                const Scalar phase = Scalar(-2) * std::numbers::pi_v<Scalar> * Scalar((k * m) % n) / Scalar(n);
                c(m, k) = std::polar(norm, phase);
            }
        return c;
    }

    // Global azimuth (degrees) at which each DFT codeword of the array has its main lobe.
    // Aliased codewords (spacing > 0.5) are clamped to endfire.
    inline std::vector<double> codebook_boresights(const ArrayConfig &array)
    {
        array.validate();
        const auto n = array.num_elements;
        std::vector<double> out(static_cast<std::size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k)
        {
            double frac = static_cast<double>(k) / static_cast<double>(n);
            if (frac >= 0.5)
                frac -= 1.0;
            const double s = std::clamp(frac / array.element_spacing, -1.0, 1.0);
            out[static_cast<std::size_t>(k)] = wrap_degrees(array.orientation_deg + std::asin(s) * rad2deg);
        }
        return out;
    }

    template <typename Scalar = double>
    BeamGainVector<Scalar> beam_gains(const ChannelMatrix<Scalar> &h, const Codebook<Scalar> &ct, const Codebook<Scalar> &cr)
    {
        if (ct.rows() != h.cols() || cr.rows() != h.rows())
            throw ShapeError("codebook lengths do not match channel dimensions");
        const CMatrix<Scalar> y = cr.adjoint() * h * ct; // |C_R| x |C_T|
        BeamGainVector<Scalar> g;
        g.values = y.reshaped();
        g.magnitudes = g.values.cwiseAbs();
        if (!g.magnitudes.allFinite())
            throw NumericError("non-finite beam gain");
        return g;
    }

    // Index of the largest magnitude; ties resolve to the lowest index
    template <typename Derived>
    Eigen::Index best_beam(const Eigen::DenseBase<Derived> &gains)
    {
        if (gains.size() == 0)
            throw InvalidInput("best_beam of an empty gain vector");
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < gains.size(); ++i)
            if (gains(i) > gains(best))
                best = i;
        return best;
    }

    template <typename Scalar>
    Eigen::Index best_beam(const BeamGainVector<Scalar> &g)
    {
        return best_beam(g.magnitudes);
    }

    // Per-beam RSRP in dB: mean over n_rs reference signals of |y_i + w|^2, w ~ CN(0, noise_power).
    // Transmit power is 1. A zero gain with zero noise yields -inf.
    template <typename Scalar, typename Rng>
    RVector<Scalar> rsrp(const BeamGainVector<Scalar> &g, int n_rs, Scalar noise_power, Rng &rng)
    {
        if (n_rs < 1)
            throw InvalidInput("n_rs must be at least 1");
        if (!(noise_power >= Scalar(0)) || !std::isfinite(noise_power))
            throw InvalidInput("noise power must be non-negative");

        RVector<Scalar> out(g.size());
        if (noise_power == Scalar(0))
        {
            for (Eigen::Index i = 0; i < g.size(); ++i)
                out(i) = Scalar(20) * std::log10(g.magnitudes(i));
            return out;
        }

        const bool have_phase = g.values.size() == g.size();
        std::normal_distribution<Scalar> noise(Scalar(0), std::sqrt(noise_power / Scalar(2)));
        for (Eigen::Index i = 0; i < g.size(); ++i)
        {
            const std::complex<Scalar> y = have_phase ? g.values(i) : std::complex<Scalar>(g.magnitudes(i), 0);
            Scalar acc = 0;
            for (int n = 0; n < n_rs; ++n)
            {
                const Scalar re = noise(rng);
                const Scalar im = noise(rng);
                acc += std::norm(y + std::complex<Scalar>(re, im));
            }
            out(i) = Scalar(10) * std::log10(acc / Scalar(n_rs));
        }
        return out;
    }

    template <typename Scalar>
    RVector<Scalar> rsrp(const BeamGainVector<Scalar> &g)
    {
        std::mt19937_64 unused;
        return rsrp<Scalar>(g, 1, Scalar(0), unused);
    }
}
