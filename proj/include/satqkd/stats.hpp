#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace satqkd {

/// Binary entropy h(x) in bits; h(0) = h(1) = 0.
inline double binary_entropy(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// Inverse standard normal CDF. Acklam's rational approximation polished
/// with one Halley step against erfc, accurate to full double precision
/// across the whole open interval (0, 1).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("inverse_normal_cdf: p outside (0, 1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;

    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement: cdf(x) - p via erfc keeps precision in the tails.
    static const double inv_sqrt2 = 0.7071067811865475244;
    static const double sqrt_2pi = 2.5066282746310005024;
    double e = 0.5 * std::erfc(-x * inv_sqrt2) - p;
    double u = e * sqrt_2pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

namespace detail {

inline double log_binom_pmf(double k, double n, double logp, double log1mp) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
           k * logp + (n - k) * log1mp;
}

// log CDF(k) by descending summation from j = k; valid whenever the terms
// decrease toward j = 0, which holds for k at or below the mode.
inline double log_binom_cdf_desc(std::int64_t k, std::int64_t n, double p) {
    if (k < 0) return -std::numeric_limits<double>::infinity();
    if (k >= n) return 0.0;
    const double logp = std::log(p);
    const double log1mp = std::log1p(-p);
    const double lmax = log_binom_pmf(static_cast<double>(k), static_cast<double>(n),
                                      logp, log1mp);
    double sum = 1.0;
    double term = 1.0;
    for (std::int64_t j = k; j > 0; --j) {
        // pmf(j-1)/pmf(j) = j (1-p) / ((n-j+1) p)
        term *= static_cast<double>(j) * (1.0 - p) /
                (static_cast<double>(n - j + 1) * p);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return lmax + std::log(sum);
}

}  // namespace detail

/// F^{-1}(eps; n, p): the smallest k with P[X <= k] >= eps for X ~ Bin(n, p).
/// Exact summation search up to n = 1e5; Cornish-Fisher (normal + skewness,
/// continuity-corrected) for larger n, rounded down so the result never
/// overstates the quantile.
inline double binomial_quantile(double eps, double n, double p) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("binomial_quantile: eps outside (0, 1)");
    if (!(n >= 1.0)) throw std::domain_error("binomial_quantile: n < 1");
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return n;

    const double mean = n * p;
    const double sigma = std::sqrt(n * p * (1.0 - p));
    const double z = inverse_normal_cdf(eps);
    const double skew = (1.0 - 2.0 * p) / sigma;
    const double w = z + skew * (z * z - 1.0) / 6.0;
    double guess = mean + sigma * w - 0.5;

    if (n > 1e5) {
        return std::clamp(std::floor(guess), 0.0, n);
    }

    const auto ni = static_cast<std::int64_t>(std::llround(n));
    auto k = static_cast<std::int64_t>(std::clamp(std::floor(guess), 0.0, n));
    const double log_eps = std::log(eps);
    auto cdf_ge = [&](std::int64_t kk) {
        return detail::log_binom_cdf_desc(kk, ni, p) >= log_eps;
    };
    if (cdf_ge(k)) {
        while (k > 0 && cdf_ge(k - 1)) --k;
    } else {
        while (k < ni && !cdf_ge(k)) ++k;
    }
    return static_cast<double>(k);
}

/// Deterministic low-discrepancy points in [0, 1)^dim (Halton, first primes).
inline std::vector<double> halton_point(std::uint64_t index, std::size_t dim) {
    static constexpr int primes[8] = {2, 3, 5, 7, 11, 13, 17, 19};
    if (dim > 8) throw std::invalid_argument("halton_point: dim > 8");
    std::vector<double> x(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const double base = primes[d];
        double f = 1.0, r = 0.0;
        for (std::uint64_t i = index + 1; i > 0; i /= static_cast<std::uint64_t>(base)) {
            f /= base;
            r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
        }
        x[d] = r;
    }
    return x;
}

}  // namespace satqkd
