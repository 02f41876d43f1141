#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "satqkd/finitekey.hpp"

namespace satqkd {

/// Box bounds for the free protocol parameters.
struct ParameterBounds {
    std::array<double, 2> p_x_a{0.5, 0.99};
    std::array<double, 2> p_x_b{0.01, 0.99};
    std::array<double, 2> p_mu1{0.01, 0.97};
    std::array<double, 2> p_mu2{0.01, 0.97};
    std::array<double, 2> mu1{0.1, 1.0};
    std::array<double, 2> mu2{0.01, 0.5};
};

/// Search space description: which of {P_X^B, mu1, mu2} are fixed, the box
/// bounds for the rest, and the discretised half-window grid.
struct OptimizationSpec {
    std::optional<double> fixed_p_x_b;
    std::optional<double> fixed_mu1;
    std::optional<double> fixed_mu2;
    ParameterBounds bounds;
    std::vector<double> delta_t_grid;  // empty -> log grid 5 s .. half duration
    int delta_t_grid_size = 24;
    int restarts = 8;
    std::uint64_t seed = 42;
    std::optional<double> delta_t_cap_s;
    int max_iterations_per_dim = 200;

    /// Warm-start points evaluated alongside the low-discrepancy restarts.
    std::vector<ProtocolParams> warm_starts;
};

struct OptimizationResult {
    ProtocolParams best_params;
    KeyResult best_key;
    std::int64_t evaluations = 0;
    bool converged = false;
};

inline bool feasible(const ProtocolParams& params) { return params.feasible(); }

namespace optimize_detail {

constexpr double kFailedObjective = -1.0e15;

struct FreeLayout {
    // Order: p_x_a, [p_x_b], p_mu1, p_mu2, [mu1], [mu2]
    bool free_p_x_b = true;
    bool free_mu1 = true;
    bool free_mu2 = true;
    std::size_t dim() const { return 3 + (free_p_x_b ? 1 : 0) + (free_mu1 ? 1 : 0) +
                                     (free_mu2 ? 1 : 0); }
};

inline std::vector<std::array<double, 2>> box_of(const OptimizationSpec& spec,
                                                 const FreeLayout& lay) {
    std::vector<std::array<double, 2>> box;
    box.push_back(spec.bounds.p_x_a);
    if (lay.free_p_x_b) box.push_back(spec.bounds.p_x_b);
    box.push_back(spec.bounds.p_mu1);
    box.push_back(spec.bounds.p_mu2);
    if (lay.free_mu1) box.push_back(spec.bounds.mu1);
    if (lay.free_mu2) box.push_back(spec.bounds.mu2);
    return box;
}

/// Maps a point in the normalized unit box to feasible ProtocolParams:
/// clamps to the box, renormalises the intensity probabilities onto the
/// simplex, and keeps mu2 strictly below mu1.
inline ProtocolParams decode(const std::vector<double>& x, const OptimizationSpec& spec,
                             const FreeLayout& lay,
                             const std::vector<std::array<double, 2>>& box, double delta_t) {
    auto val = [&](std::size_t i) {
        return box[i][0] + std::clamp(x[i], 0.0, 1.0) * (box[i][1] - box[i][0]);
    };
    std::size_t i = 0;
    ProtocolParams p;
    p.p_x_a = val(i++);
    p.p_x_b = lay.free_p_x_b ? val(i++) : *spec.fixed_p_x_b;
    double p1 = val(i++);
    double p2 = val(i++);
    if (p1 + p2 > 0.99) {
        const double s = 0.99 / (p1 + p2);
        p1 = std::max(p1 * s, 0.01);
        p2 = std::max(p2 * s, 0.01);
    }
    p.p_mu = {p1, p2, 1.0 - p1 - p2};
    p.mu[0] = lay.free_mu1 ? val(i++) : *spec.fixed_mu1;
    p.mu[1] = lay.free_mu2 ? val(i++) : *spec.fixed_mu2;
    p.mu[2] = 0.0;
    if (p.mu[1] >= p.mu[0]) p.mu[1] = std::max(p.mu[0] - 1e-4, 1e-4);
    p.delta_t_s = delta_t;
    return p;
}

inline std::vector<double> encode(const ProtocolParams& p, const FreeLayout& lay,
                                  const std::vector<std::array<double, 2>>& box) {
    std::vector<double> x;
    auto push = [&](double v, std::size_t i) {
        const double t = (v - box[i][0]) / (box[i][1] - box[i][0]);
        x.push_back(std::clamp(t, 0.0, 1.0));
    };
    std::size_t i = 0;
    push(p.p_x_a, i++);
    if (lay.free_p_x_b) push(p.p_x_b, i++);
    push(p.p_mu[0], i++);
    push(p.p_mu[1], i++);
    if (lay.free_mu1) push(p.mu[0], i++);
    if (lay.free_mu2) push(p.mu[1], i++);
    return x;
}

/// Downhill simplex on the normalized unit box (maximisation). Returns the
/// best vertex; `converged` reports whether the simplex collapsed below the
/// diameter tolerance before the iteration budget ran out.
template <class F>
std::pair<std::vector<double>, bool> nelder_mead(F&& objective, std::vector<double> start,
                                                 int max_iter, double diameter_tol = 1e-4) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> verts(n + 1, start);
    for (std::size_t j = 0; j < n; ++j)
        verts[j + 1][j] = std::clamp(start[j] + (start[j] < 0.5 ? 0.15 : -0.15), 0.0, 1.0);
    std::vector<double> f(n + 1);
    for (std::size_t j = 0; j <= n; ++j) f[j] = -objective(verts[j]);  // minimise -obj

    auto order = [&] {
        for (std::size_t a = 0; a <= n; ++a)
            for (std::size_t b = a + 1; b <= n; ++b)
                if (f[b] < f[a]) {
                    std::swap(f[a], f[b]);
                    std::swap(verts[a], verts[b]);
                }
    };
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t j = 1; j <= n; ++j)
            for (std::size_t k = 0; k < n; ++k)
                d = std::max(d, std::abs(verts[j][k] - verts[0][k]));
        return d;
    };

    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        order();
        if (diameter() < diameter_tol) {
            converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) centroid[k] += verts[j][k] / static_cast<double>(n);

        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k)
                p[k] = std::clamp(centroid[k] + coef * (centroid[k] - verts[n][k]), 0.0, 1.0);
            return p;
        };
        auto reflected = blend(1.0);
        const double fr = -objective(reflected);
        if (fr < f[0]) {
            auto expanded = blend(2.0);
            const double fe = -objective(expanded);
            if (fe < fr) {
                verts[n] = std::move(expanded);
                f[n] = fe;
            } else {
                verts[n] = std::move(reflected);
                f[n] = fr;
            }
        } else if (fr < f[n - 1]) {
            verts[n] = std::move(reflected);
            f[n] = fr;
        } else {
            const bool outside = fr < f[n];
            auto contracted = blend(outside ? 0.5 : -0.5);
            const double fc = -objective(contracted);
            if (fc < (outside ? fr : f[n])) {
                verts[n] = std::move(contracted);
                f[n] = fc;
            } else {
                for (std::size_t j = 1; j <= n; ++j) {
                    for (std::size_t k = 0; k < n; ++k)
                        verts[j][k] = verts[0][k] + 0.5 * (verts[j][k] - verts[0][k]);
                    f[j] = -objective(verts[j]);
                }
            }
        }
    }
    order();
    return {verts[0], converged};
}

}  // namespace optimize_detail

/// Evaluates the key-length objective for one channel; reuses the
/// attenuation prefix sums whenever the intensities repeat.
class SklEvaluator {
public:
    SklEvaluator(const ChannelTrace& trace, const SourceSpec& source,
                 const SecurityParams& security)
        : trace_(&trace), source_(source), security_(security) {}

    /// Pre-floor key length; failed estimation maps to a large negative
    /// plateau so the search never prefers it over a valid negative value.
    double objective(const ProtocolParams& params) {
        ++evaluations_;
        const KeyResult r = skl(block_for(params), params, security_);
        if (r.estimation_failed || !std::isfinite(r.skl_real))
            return optimize_detail::kFailedObjective;
        return r.skl_real;
    }

    KeyResult evaluate(const ProtocolParams& params) {
        return skl(block_for(params), params, security_);
    }

    BlockCounts block_for(const ProtocolParams& params) {
        if (!stats_ || cached_mu_ != params.mu) {
            stats_.emplace(*trace_, source_, params.mu);
            cached_mu_ = params.mu;
        }
        return accumulate_block(*stats_, params);
    }

    std::int64_t evaluations() const { return evaluations_; }
    const ChannelTrace& trace() const { return *trace_; }

private:
    const ChannelTrace* trace_;
    SourceSpec source_;
    SecurityParams security_;
    std::optional<ChannelStatistics> stats_;
    std::array<double, 3> cached_mu_{-1.0, -1.0, -1.0};
    std::int64_t evaluations_ = 0;
};

/// Log-spaced half-window grid from 5 s up to the pass half-duration,
/// optionally capped by the buffer limit.
inline std::vector<double> default_delta_t_grid(double half_duration_s,
                                                std::optional<double> cap_s,
                                                int size = 24) {
    double hi = half_duration_s;
    if (cap_s) hi = std::min(hi, *cap_s);
    const double lo = 5.0;
    std::vector<double> grid;
    if (!(hi > 0.0)) return {0.0};
    if (hi <= lo) return {hi};
    grid.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(size - 1);
        grid.push_back(lo * std::pow(hi / lo, t));
    }
    grid.back() = hi;
    return grid;
}

/// Maximise the SKL over the free protocol parameters for one pass:
/// multi-start downhill simplex per half-window grid value, deterministic
/// given the spec. Ties break toward smaller delta_t, then lower restart
/// index.
inline OptimizationResult optimize_pass(const ChannelTrace& trace, const OptimizationSpec& spec,
                                        const SourceSpec& source,
                                        const SecurityParams& security) {
    using namespace optimize_detail;
    if (trace.efficiency.empty()) throw std::invalid_argument("optimize_pass: empty trace");
    source.validate();
    security.validate();

    FreeLayout lay{!spec.fixed_p_x_b.has_value(), !spec.fixed_mu1.has_value(),
                   !spec.fixed_mu2.has_value()};
    const auto box = box_of(spec, lay);
    const std::size_t dim = lay.dim();

    std::vector<double> grid = spec.delta_t_grid;
    if (grid.empty())
        grid = default_delta_t_grid(trace.duration_s() / 2.0, spec.delta_t_cap_s,
                                    spec.delta_t_grid_size);
    else if (spec.delta_t_cap_s)
        std::erase_if(grid, [&](double v) { return v > *spec.delta_t_cap_s + 1e-9; });
    if (grid.empty()) grid = {spec.delta_t_cap_s.value_or(0.0)};

    SklEvaluator eval(trace, source, security);

    double best_obj = -std::numeric_limits<double>::infinity();
    ProtocolParams best_params;
    bool best_converged = false;
    bool have_best = false;

    for (double delta_t : grid) {
        // Restart starting points from the seed-offset Halton sequence.
        std::vector<std::vector<double>> starts;
        for (int r = 0; r < std::max(spec.restarts, 1); ++r)
            starts.push_back(halton_point(spec.seed + static_cast<std::uint64_t>(r), dim));
        for (const auto& warm : spec.warm_starts)
            starts.push_back(encode(warm, lay, box));

        for (const auto& start : starts) {
            // Track the incumbent across every evaluation, not just the
            // simplex's final vertex.
            auto objective = [&](const std::vector<double>& x) {
                const ProtocolParams candidate = decode(x, spec, lay, box, delta_t);
                const double value = eval.objective(candidate);
                if (!have_best || value > best_obj) {
                    have_best = true;
                    best_obj = value;
                    best_params = candidate;
                }
                return value;
            };
            auto [vertex, converged] = nelder_mead(
                objective, start, spec.max_iterations_per_dim * static_cast<int>(dim));
            (void)vertex;
            best_converged = best_converged || converged;
        }
    }

    OptimizationResult result;
    result.best_params = best_params;
    result.best_key = eval.evaluate(best_params);
    result.evaluations = eval.evaluations();
    result.converged = best_converged || result.best_key.skl_bits == 0;
    return result;
}

inline OptimizationResult optimize_pass(const OrbitSpec& orbit, const OverpassSpec& overpass,
                                        const OpticalSystem& system,
                                        const AtmosphereModel& atmosphere,
                                        const OptimizationSpec& spec, const SourceSpec& source,
                                        const SecurityParams& security,
                                        DiffractionCache* cache = nullptr) {
    const ChannelTrace trace = make_channel_trace(system, atmosphere, orbit, overpass, cache);
    return optimize_pass(trace, spec, source, security);
}

}  // namespace satqkd
