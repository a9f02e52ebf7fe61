#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "market_ising/errors.hpp"
#include "market_ising/lattice.hpp"
#include "market_ising/market_dynamics.hpp"

namespace market_ising {

inline constexpr std::size_t kConnectivityBins = kDegree + 1;

// counts[c] = number of `company` shops with exactly c same-company neighbours.
struct ConnectivityHistogram {
    Company company = Company::P;
    std::array<std::size_t, kConnectivityBins> counts{};

    std::size_t total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

    std::array<double, kConnectivityBins> as_values() const noexcept {
        std::array<double, kConnectivityBins> v{};
        for (std::size_t c = 0; c < kConnectivityBins; ++c) v[c] = static_cast<double>(counts[c]);
        return v;
    }
};

struct GaussianFit {
    double amplitude = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
    double residual = 0.0;      // sum of squared errors over the bins
    double sample_sigma = 0.0;  // moment estimate, independent of the fit
    bool converged = false;
    std::size_t iterations = 0;
};

struct WidthComparison {
    double sigma_blue = 0.0;
    double sigma_red = 0.0;
    bool blue_wider = false;
};

inline ConnectivityHistogram connectivity_histogram(const ShopConfiguration& config, const LatticeTopology& topology,
                                                    Company company) {
    check_size(config, topology);
    ConnectivityHistogram h;
    h.company = company;
    for (std::size_t i = 0; i < config.size(); ++i) {
        if (config[i] != company) continue;
        ++h.counts[static_cast<std::size_t>(matching_neighbors(config, topology, i))];
    }
    return h;
}

inline double gaussian_value(double amplitude, double mean, double sigma, double x) noexcept {
    if (sigma == 0.0) return x == mean ? amplitude : 0.0;
    const double z = (x - mean) / sigma;
    return amplitude * std::exp(-0.5 * z * z);
}

namespace detail {

struct Moments {
    double total = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
};

inline Moments histogram_moments(std::span<const double, kConnectivityBins> y) {
    Moments m;
    for (std::size_t c = 0; c < y.size(); ++c) {
        m.total += y[c];
        m.mean += static_cast<double>(c) * y[c];
    }
    if (m.total <= 0.0) return m;
    m.mean /= m.total;
    double var = 0.0;
    for (std::size_t c = 0; c < y.size(); ++c) {
        const double d = static_cast<double>(c) - m.mean;
        var += d * d * y[c];
    }
    m.sigma = std::sqrt(var / m.total);
    return m;
}

inline double sum_squared_error(std::span<const double, kConnectivityBins> y, const std::array<double, 3>& theta) {
    double sse = 0.0;
    for (std::size_t c = 0; c < y.size(); ++c) {
        const double r = gaussian_value(theta[0], theta[1], theta[2], static_cast<double>(c)) - y[c];
        sse += r * r;
    }
    return sse;
}

// Solves the 3x3 system m x = b by Gaussian elimination with partial pivoting.
inline std::optional<std::array<double, 3>> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> b) {
    for (std::size_t col = 0; col < 3; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < 3; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        if (m[pivot][col] == 0.0 || !std::isfinite(m[pivot][col])) return std::nullopt;
        std::swap(m[col], m[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (std::size_t k = col; k < 3; ++k) m[r][k] -= f * m[col][k];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (std::size_t i = 3; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < 3; ++k) s -= m[i][k] * x[k];
        x[i] = s / m[i][i];
    }
    return x;
}

} // namespace detail

inline constexpr double kFitTolerance = 1e-9;
inline constexpr std::size_t kFitMaxIterations = 100;

// Least-squares fit of A exp(-(c - mu)^2 / (2 sigma^2)) to the bins c = 0..6.
// Levenberg-Marquardt started from the histogram's moments; stops when the
// largest relative parameter change drops below 1e-9 or after 100 iterations.
inline GaussianFit fit_gaussian(std::span<const double, kConnectivityBins> y) {
    const auto nonzero = std::count_if(y.begin(), y.end(), [](double v) { return v != 0.0; });
    const detail::Moments moments = detail::histogram_moments(y);
    if (nonzero < 3) {
        throw DegenerateHistogram("histogram has " + std::to_string(nonzero) + " nonzero bins; need at least 3",
                                  moments.sigma);
    }

    std::array<double, 3> theta{*std::max_element(y.begin(), y.end()), moments.mean, moments.sigma};
    double sse = detail::sum_squared_error(y, theta);
    double lambda = 1e-3;

    GaussianFit fit;
    fit.sample_sigma = moments.sigma;
    for (std::size_t iter = 1; iter <= kFitMaxIterations; ++iter) {
        fit.iterations = iter;
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        const double inv_var = 1.0 / (theta[2] * theta[2]);
        for (std::size_t c = 0; c < y.size(); ++c) {
            const double d = static_cast<double>(c) - theta[1];
            const double e = std::exp(-0.5 * d * d * inv_var);
            const double r = theta[0] * e - y[c];
            const std::array<double, 3> grad{e, theta[0] * e * d * inv_var, theta[0] * e * d * d * inv_var / theta[2]};
            for (std::size_t i = 0; i < 3; ++i) {
                jtr[i] += grad[i] * r;
                for (std::size_t k = 0; k < 3; ++k) jtj[i][k] += grad[i] * grad[k];
            }
        }

        auto damped = jtj;
        for (std::size_t i = 0; i < 3; ++i) damped[i][i] += lambda * std::max(jtj[i][i], 1e-300);
        const auto step = detail::solve3(damped, {-jtr[0], -jtr[1], -jtr[2]});
        if (!step) break;

        std::array<double, 3> trial{theta[0] + (*step)[0], theta[1] + (*step)[1], theta[2] + (*step)[2]};
        const double trial_sse = detail::sum_squared_error(y, trial);
        if (!std::isfinite(trial_sse) || trial_sse > sse) {
            lambda *= 10.0;
            if (lambda > 1e16) break;
            continue;
        }

        double change = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            change = std::max(change, std::abs((*step)[i]) / std::max(std::abs(trial[i]), 1e-300));
        }
        theta = trial;
        sse = trial_sse;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (change < kFitTolerance) {
            fit.converged = true;
            break;
        }
    }

    fit.amplitude = theta[0];
    fit.mean = theta[1];
    fit.sigma = std::abs(theta[2]);
    fit.residual = sse;
    return fit;
}

inline GaussianFit fit_gaussian(const ConnectivityHistogram& histogram) {
    const auto values = histogram.as_values();
    return fit_gaussian(std::span<const double, kConnectivityBins>(values));
}

// Fit when possible; otherwise a moment-based stand-in with converged = false
// and sigma equal to the sample standard deviation.
inline GaussianFit fit_or_fallback(const ConnectivityHistogram& histogram) {
    const auto values = histogram.as_values();
    const std::span<const double, kConnectivityBins> y(values);
    try {
        GaussianFit fit = fit_gaussian(y);
        if (fit.converged) return fit;
    } catch (const DegenerateHistogram&) {
    }
    const detail::Moments m = detail::histogram_moments(y);
    GaussianFit fallback;
    fallback.amplitude = *std::max_element(values.begin(), values.end());
    fallback.mean = m.mean;
    fallback.sigma = m.sigma;
    fallback.sample_sigma = m.sigma;
    fallback.residual = detail::sum_squared_error(y, {fallback.amplitude, fallback.mean, fallback.sigma});
    fallback.converged = false;
    return fallback;
}

inline WidthComparison compare_widths(double sigma_blue, double sigma_red) noexcept {
    return {sigma_blue, sigma_red, sigma_blue > sigma_red};
}

inline WidthComparison compare_widths(const GaussianFit& blue_fit, const GaussianFit& red_fit) noexcept {
    return compare_widths(blue_fit.sigma, red_fit.sigma);
}

struct ConnectivityAnalysis {
    ConnectivityHistogram blue;
    ConnectivityHistogram red;
    GaussianFit blue_fit;
    GaussianFit red_fit;
    WidthComparison widths;
};

inline ConnectivityAnalysis analyze_connectivity(const ShopConfiguration& config, const LatticeTopology& topology) {
    ConnectivityAnalysis a;
    a.blue = connectivity_histogram(config, topology, Company::P);
    a.red = connectivity_histogram(config, topology, Company::W);
    a.blue_fit = fit_or_fallback(a.blue);
    a.red_fit = fit_or_fallback(a.red);
    a.widths = compare_widths(a.blue_fit, a.red_fit);
    return a;
}

// company,connectivity,count
inline void write_histogram_csv(std::ostream& os, std::span<const ConnectivityHistogram> histograms) {
    os << "company,connectivity,count\n";
    for (const auto& h : histograms) {
        for (std::size_t c = 0; c < kConnectivityBins; ++c) os << to_string(h.company) << ',' << c << ',' << h.counts[c] << '\n';
    }
}

// company,amplitude,mean,sigma,residual,converged
inline void write_fit_csv(std::ostream& os, std::span<const std::pair<Company, GaussianFit>> fits) {
    os << "company,amplitude,mean,sigma,residual,converged\n";
    char buf[160];
    for (const auto& [company, f] : fits) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%d\n", to_string(company), f.amplitude, f.mean,
                      f.sigma, f.residual, f.converged ? 1 : 0);
        os << buf;
    }
}

} // namespace market_ising
