#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "satqkd/link.hpp"

namespace satqkd {

/// Weak-coherent-pulse source and receiver noise description.
struct SourceSpec {
    double rate_hz = 500.0e6;
    double intrinsic_qber = 0.005;
    double extraneous_count_prob = 5.0e-7;
    double afterpulse_prob = 0.001;

    void validate() const {
        if (!(rate_hz > 0.0)) throw std::invalid_argument("source.rate_hz must be > 0");
        if (!(intrinsic_qber >= 0.0 && intrinsic_qber < 0.5))
            throw std::invalid_argument("source.intrinsic_qber must be in [0, 0.5)");
        if (!(extraneous_count_prob >= 0.0 && extraneous_count_prob < 0.5))
            throw std::invalid_argument("source.extraneous_count_prob must be in [0, 0.5)");
        if (!(afterpulse_prob >= 0.0 && afterpulse_prob < 1.0))
            throw std::invalid_argument("source.afterpulse_prob must be in [0, 1)");
    }
};

/// Protocol operating point: basis biases, intensity probabilities, the
/// three intensities (mu3 is vacuum), and the transmission half-window.
struct ProtocolParams {
    double p_x_a = 0.8;
    double p_x_b = 0.8;
    std::array<double, 3> p_mu{0.7, 0.2, 0.1};
    std::array<double, 3> mu{0.71, 0.14, 0.0};
    double delta_t_s = 100.0;

    bool feasible() const {
        if (!(p_x_a > 0.0 && p_x_a < 1.0)) return false;
        if (!(p_x_b > 0.0 && p_x_b < 1.0)) return false;
        double sum = 0.0;
        for (double p : p_mu) {
            if (!(p > 0.0)) return false;
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) return false;
        if (!(mu[2] == 0.0)) return false;
        if (!(mu[1] > mu[2])) return false;
        if (!(mu[0] > mu[1] + mu[2])) return false;
        if (!(delta_t_s >= 0.0)) return false;
        return true;
    }

    void validate() const {
        if (!feasible()) throw std::invalid_argument("protocol parameters violate invariants");
    }
};

enum class Basis : std::size_t { x = 0, z = 1 };

/// Expected sifted detections and errors per basis and intensity over one
/// transmission window. Entries are real-valued expectations.
struct BlockCounts {
    std::array<std::array<double, 3>, 2> n{};  // [basis][intensity]
    std::array<std::array<double, 3>, 2> m{};
    double pulses_sent = 0.0;
    double delta_t_s = 0.0;
    bool window_clipped = false;

    double n_total(Basis b) const {
        const auto& r = n[static_cast<std::size_t>(b)];
        return r[0] + r[1] + r[2];
    }
    double m_total(Basis b) const {
        const auto& r = m[static_cast<std::size_t>(b)];
        return r[0] + r[1] + r[2];
    }
    double n_x_total() const { return n_total(Basis::x); }
    double m_x_total() const { return m_total(Basis::x); }
    double n_z_total() const { return n_total(Basis::z); }
    double m_z_total() const { return m_total(Basis::z); }
};

/// Per-slot detection and error probabilities for one intensity through a
/// channel of transmission eta.
inline std::pair<double, double> slot_statistics(double mu_k, double eta_fraction,
                                                 const SourceSpec& source) {
    if (!(mu_k >= 0.0)) throw std::domain_error("slot_statistics: mu < 0");
    if (!(eta_fraction > 0.0 && eta_fraction <= 1.0))
        throw std::domain_error("slot_statistics: eta outside (0, 1]");
    const double pec = source.extraneous_count_prob;
    const double attn = std::exp(-mu_k * eta_fraction);
    const double ap = 1.0 + source.afterpulse_prob;
    double detect = (1.0 - (1.0 - 2.0 * pec) * attn) * ap;
    double error = (pec + source.intrinsic_qber * (1.0 - attn)) * ap;
    detect = std::clamp(detect, 0.0, 1.0);
    error = std::clamp(error, 0.0, detect);
    return {detect, error};
}

/// Prefix sums of exp(-mu_k eta_t) over a channel trace for one intensity
/// triple, so any window's accumulated counts reduce to O(1) lookups.
class ChannelStatistics {
public:
    ChannelStatistics(const ChannelTrace& trace, const SourceSpec& source,
                      const std::array<double, 3>& mu)
        : trace_(&trace), source_(source), mu_(mu) {
        const std::size_t n = trace.efficiency.size();
        eta_max_ = 0.0;
        for (auto& pre : attn_prefix_) pre.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = trace.efficiency[i];
            eta_max_ = std::max(eta_max_, eta);
            for (std::size_t k = 0; k < 3; ++k)
                attn_prefix_[k][i + 1] = attn_prefix_[k][i] + std::exp(-mu_[k] * eta);
        }
    }

    const ChannelTrace& trace() const { return *trace_; }
    const SourceSpec& source() const { return source_; }
    const std::array<double, 3>& mu() const { return mu_; }
    double eta_max() const { return eta_max_; }

    struct Window {
        std::size_t first = 0;
        std::size_t last = 0;  // inclusive
        double slots = 0.0;
        bool clipped = false;
    };

    /// Samples with |t| <= delta_t; always contains the culmination sample.
    Window window(double delta_t_s) const {
        const double step = trace_->time_step_s();
        const std::size_t centre = trace_->pass.culmination_index();
        auto half = static_cast<std::size_t>(std::floor(delta_t_s / step + 1e-9));
        const std::size_t max_half = centre;
        Window w;
        w.clipped = half > max_half;
        half = std::min(half, max_half);
        w.first = centre - half;
        w.last = centre + half;
        w.slots = static_cast<double>(2 * half + 1);
        return w;
    }

    /// Sum of exp(-mu_k eta_t) over the window.
    double attenuation_sum(std::size_t k, const Window& w) const {
        return attn_prefix_[k][w.last + 1] - attn_prefix_[k][w.first];
    }

private:
    const ChannelTrace* trace_;
    SourceSpec source_;
    std::array<double, 3> mu_;
    std::array<std::vector<double>, 3> attn_prefix_;
    double eta_max_ = 0.0;
};

/// Accumulate expected sifted counts over the window [-delta_t, +delta_t].
/// Deterministic expected-value model; windows wider than the trace are
/// truncated and flagged.
inline BlockCounts accumulate_block(const ChannelStatistics& stats, const ProtocolParams& params) {
    const SourceSpec& src = stats.source();
    const auto& mu = stats.mu();
    const auto w = stats.window(params.delta_t_s);

    BlockCounts block;
    block.delta_t_s = params.delta_t_s;
    block.window_clipped = w.clipped;
    const double slot_pulses = src.rate_hz * stats.trace().time_step_s();
    block.pulses_sent = slot_pulses * w.slots;

    const double ap = 1.0 + src.afterpulse_prob;
    const double pec = src.extraneous_count_prob;
    const double sift_x = params.p_x_a * params.p_x_b;
    const double sift_z = (1.0 - params.p_x_a) * (1.0 - params.p_x_b);

    // Saturated slots need per-sample clamping; the closed form assumes
    // probabilities below 1, which holds throughout the operating regime.
    const bool saturated =
        ap * (1.0 - (1.0 - 2.0 * pec) * std::exp(-mu[0] * stats.eta_max())) > 1.0;

    for (std::size_t k = 0; k < 3; ++k) {
        double det_sum;
        double err_sum;
        if (!saturated) {
            const double s = stats.attenuation_sum(k, w);
            det_sum = ap * (w.slots - (1.0 - 2.0 * pec) * s);
            err_sum = ap * (pec * w.slots + src.intrinsic_qber * (w.slots - s));
        } else {
            det_sum = 0.0;
            err_sum = 0.0;
            for (std::size_t i = w.first; i <= w.last; ++i) {
                const auto [d, e] = slot_statistics(mu[k], stats.trace().efficiency[i], src);
                det_sum += d;
                err_sum += e;
            }
        }
        const double base = slot_pulses * params.p_mu[k];
        block.n[0][k] = base * sift_x * det_sum;
        block.n[1][k] = base * sift_z * det_sum;
        block.m[0][k] = base * sift_x * err_sum;
        block.m[1][k] = base * sift_z * err_sum;
    }
    return block;
}

inline BlockCounts accumulate_block(const ChannelTrace& trace, const ProtocolParams& params,
                                    const SourceSpec& source) {
    if (trace.efficiency.empty()) throw std::invalid_argument("accumulate_block: empty trace");
    return accumulate_block(ChannelStatistics(trace, source, params.mu), params);
}

/// Quantum bit error rate of the key basis.
inline double qber(const BlockCounts& block) {
    const double n = block.n_x_total();
    if (!(n > 0.0)) throw std::domain_error("qber: empty block (n_x_total = 0)");
    return block.m_x_total() / n;
}

}  // namespace satqkd
