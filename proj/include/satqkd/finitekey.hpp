#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "satqkd/counts.hpp"
#include "satqkd/stats.hpp"

namespace satqkd {

/// Composable security and correctness failure probabilities.
struct SecurityParams {
    double epsilon_s = 1.0e-10;
    double epsilon_c = 1.0e-15;

    void validate() const {
        if (!(epsilon_s > 0.0 && epsilon_s < 1.0))
            throw std::invalid_argument("security.epsilon_s must be in (0, 1)");
        if (!(epsilon_c > 0.0 && epsilon_c < 1.0))
            throw std::invalid_argument("security.epsilon_c must be in (0, 1)");
    }

    /// Per-use concentration-bound budget matching the composition constant
    /// 21 in the key-length formula.
    double per_use_epsilon() const { return epsilon_s / 21.0; }
};

/// Decoy-state estimates: lower bounds on vacuum and single-photon counts
/// per basis, the single-photon Z error bound, and the phase-error bound.
struct DecoyEstimates {
    double s_x0 = 0.0;
    double s_x1 = 0.0;
    double s_z0 = 0.0;
    double s_z1 = 0.0;
    double v_z1 = 0.0;
    double phi_x = 0.5;
    bool failed = true;
};

/// Secret key length and the intermediate finite-key quantities.
struct KeyResult {
    std::int64_t skl_bits = 0;
    double skl_real = 0.0;  // pre-floor, pre-clamp value of the key formula
    double s_x0 = 0.0;
    double s_x1 = 0.0;
    double phi_x = 0.5;
    double lambda_ec_bits = 0.0;
    double n_x = 0.0;
    double qber = 0.0;
    double f_ec_estimate = 0.0;
    bool estimation_failed = true;
};

/// Disables the concentration-deviation terms; used by oracle tests that
/// compare the bounds against asymptotic Poisson yields.
enum class DeviationMode { hoeffding, none };

namespace finitekey_detail {

inline double hoeffding_delta(double n, double eps) {
    if (n <= 0.0) return 0.0;
    return std::sqrt(0.5 * n * std::log(1.0 / eps));
}

// Random-sampling correction for the phase-error transfer from the Z to the
// X basis; a = failure budget, b = observed ratio, c/d = sample sizes.
inline double sampling_gamma(double a, double b, double c, double d) {
    if (c <= 0.0 || d <= 0.0) return 0.5;
    b = std::clamp(b, 1e-12, 1.0 - 1e-12);
    const double t1 = (c + d) * (1.0 - b) * b / (c * d * std::numbers::ln2_v<double>);
    const double arg = (c + d) / (c * d * (1.0 - b) * b) * (441.0 / (a * a));
    if (!(arg > 1.0)) return 0.0;
    return std::sqrt(t1 * std::log2(arg));
}

}  // namespace finitekey_detail

/// Decoy-state bounds from the two-decoy (vacuum + weak) analysis with
/// Hoeffding concentration at the per-use budget eps_s / 21:
///   corrected counts  n(B,k)+- = (e^mu_k / p_k) (n(B,k) +- delta(n_B)),
///   s(B,0) >= tau0 (mu2 n(B,3)- - mu3 n(B,2)+) / (mu2 - mu3),
///   s(B,1) >= tau1 mu1 [n(B,2)- - n(B,3)+ - (mu2^2-mu3^2)/mu1^2 (n(B,1)+ - s(B,0)/tau0)]
///             / (mu1 (mu2 - mu3) - mu2^2 + mu3^2),
///   v(Z,1) <= tau1 (m(Z,2)+ - m(Z,3)-) / (mu2 - mu3),
///   phi_X  <= v(Z,1)/s(Z,1) + gamma(...).
inline DecoyEstimates decoy_bounds(const BlockCounts& block, const ProtocolParams& params,
                                   const SecurityParams& security,
                                   DeviationMode mode = DeviationMode::hoeffding) {
    params.validate();
    security.validate();
    const double mu1 = params.mu[0], mu2 = params.mu[1], mu3 = params.mu[2];
    const double eps = security.per_use_epsilon();

    std::array<double, 2> tau{};
    for (std::size_t k = 0; k < 3; ++k) {
        const double e = params.p_mu[k] * std::exp(-params.mu[k]);
        tau[0] += e;
        tau[1] += e * params.mu[k];
    }

    DecoyEstimates est;
    const bool deviations = (mode == DeviationMode::hoeffding);
    auto basis_bounds = [&](Basis basis, double& s0, double& s1, double& v1) {
        const auto b = static_cast<std::size_t>(basis);
        const double n_tot = block.n_total(basis);
        const double m_tot = block.m_total(basis);
        const double dn = deviations ? finitekey_detail::hoeffding_delta(n_tot, eps) : 0.0;
        const double dm = deviations ? finitekey_detail::hoeffding_delta(m_tot, eps) : 0.0;

        std::array<double, 3> n_hi{}, n_lo{}, m_hi{}, m_lo{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double scale = std::exp(params.mu[k]) / params.p_mu[k];
            n_hi[k] = scale * (block.n[b][k] + dn);
            n_lo[k] = std::max(scale * (block.n[b][k] - dn), 0.0);
            m_hi[k] = scale * (block.m[b][k] + dm);
            m_lo[k] = std::max(scale * (block.m[b][k] - dm), 0.0);
        }

        s0 = std::max(tau[0] * (mu2 * n_lo[2] - mu3 * n_hi[1]) / (mu2 - mu3), 0.0);
        const double numerator =
            n_lo[1] - n_hi[2] - (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) * (n_hi[0] - s0 / tau[0]);
        const double denominator = mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3;
        s1 = std::max(tau[1] * mu1 * numerator / denominator, 0.0);
        v1 = std::max(tau[1] * (m_hi[1] - m_lo[2]) / (mu2 - mu3), 0.0);
    };

    double vx1_unused = 0.0;
    basis_bounds(Basis::x, est.s_x0, est.s_x1, vx1_unused);
    basis_bounds(Basis::z, est.s_z0, est.s_z1, est.v_z1);

    if (est.s_x1 <= 0.0 || est.s_z1 <= 0.0) {
        est.failed = true;
        est.phi_x = 0.5;
        return est;
    }
    est.failed = false;
    const double ratio = std::min(est.v_z1 / est.s_z1, 1.0);
    double phi = ratio;
    if (deviations)
        phi += finitekey_detail::sampling_gamma(eps, ratio, est.s_z1, est.s_x1);
    est.phi_x = std::clamp(phi, 0.0, 0.5);
    return est;
}

/// One-way information-reconciliation leakage for block size n_x at QBER q:
///   n h(Q) + n (1-Q) log2((1-Q)/Q) - (F^-1(eps_c; n, 1-Q) - 1) log2((1-Q)/Q)
///   - log2(n)/2 - log2(1/eps_c),  clamped below at zero.
inline double error_correction_bits(double n_x, double q, double epsilon_c) {
    if (!(n_x >= 1.0)) throw std::domain_error("error_correction_bits: n_x < 1");
    if (!(q >= 0.0 && q < 0.5)) throw std::domain_error("error_correction_bits: q outside [0, 0.5)");
    if (n_x < 2.0) return n_x;  // degenerate block: leak everything
    q = std::clamp(q, 1.0 / n_x, 0.5 - 1.0 / n_x);
    const double log_ratio = std::log2((1.0 - q) / q);
    const double quantile = binomial_quantile(epsilon_c, n_x, 1.0 - q);
    const double bits = n_x * binary_entropy(q) + n_x * (1.0 - q) * log_ratio -
                        (quantile - 1.0) * log_ratio - 0.5 * std::log2(n_x) -
                        std::log2(1.0 / epsilon_c);
    return std::max(bits, 0.0);
}

/// Leakage estimate with an achievable-efficiency floor: switches to
/// f_ec_floor * n h(Q) whenever the tight estimate falls below it.
inline double error_correction_bits_switched(double n_x, double q, double epsilon_c,
                                             double f_ec_floor = 1.05) {
    if (!(f_ec_floor >= 1.0))
        throw std::invalid_argument("error_correction_bits_switched: floor < 1");
    const double tight = error_correction_bits(n_x, q, epsilon_c);
    const double q_c = std::clamp(q, 1.0 / n_x, 0.5 - 1.0 / n_x);
    return std::max(tight, f_ec_floor * n_x * binary_entropy(q_c));
}

/// Finite secret key length
///   l = floor(s_X0 + s_X1 (1 - h(phi_X)) - lambda_EC
///             - 6 log2(21/eps_s) - log2(2/eps_c)),
/// clamped to zero on negative values or failed estimation.
inline KeyResult skl(const BlockCounts& block, const ProtocolParams& params,
                     const SecurityParams& security,
                     DeviationMode mode = DeviationMode::hoeffding) {
    KeyResult result;
    result.n_x = block.n_x_total();
    if (!(result.n_x > 0.0) || !(block.n_z_total() > 0.0)) {
        result.skl_real = -std::numeric_limits<double>::infinity();
        return result;
    }
    result.qber = block.m_x_total() / result.n_x;

    const DecoyEstimates est = decoy_bounds(block, params, security, mode);
    result.s_x0 = est.s_x0;
    result.s_x1 = est.s_x1;
    result.phi_x = est.phi_x;
    result.estimation_failed = est.failed;

    result.lambda_ec_bits = error_correction_bits(std::max(result.n_x, 1.0), result.qber,
                                                  security.epsilon_c);
    const double hq = binary_entropy(std::clamp(result.qber, 1.0 / result.n_x, 0.5));
    result.f_ec_estimate = hq > 0.0 ? result.lambda_ec_bits / (result.n_x * hq) : 0.0;

    const double overhead = 6.0 * std::log2(21.0 / security.epsilon_s) +
                            std::log2(2.0 / security.epsilon_c);
    result.skl_real = est.s_x0 + est.s_x1 * (1.0 - binary_entropy(est.phi_x)) -
                      result.lambda_ec_bits - overhead;
    if (est.failed) {
        result.skl_bits = 0;
    } else {
        result.skl_bits = std::max<std::int64_t>(
            static_cast<std::int64_t>(std::floor(result.skl_real)), 0);
    }
    return result;
}

}  // namespace satqkd
