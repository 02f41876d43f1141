#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "satqkd/optimize.hpp"

namespace satqkd {

/// Everything needed to run one study: geometry, optics, source, security
/// and atmosphere. Mirrors the reference parameter set by default.
struct SystemConfig {
    OrbitSpec orbit;
    OpticalSystem system;
    SourceSpec source;
    SecurityParams security;
    AtmosphereModel atmosphere;
    double theta_min_deg = 10.0;
    double time_step_s = 1.0;

    void validate() const {
        orbit.validate();
        system.validate();
        source.validate();
        security.validate();
        atmosphere.validate();
        if (!(theta_min_deg >= 0.0 && theta_min_deg < 90.0))
            throw std::invalid_argument("theta_min_deg must be in [0, 90)");
        if (!(time_step_s > 0.0)) throw std::invalid_argument("time_step_s must be > 0");
    }

    OverpassSpec overpass_from_theta(double theta_max_deg) const {
        OverpassSpec o = OverpassSpec::from_theta_max(theta_max_deg);
        o.theta_min_deg = theta_min_deg;
        o.time_step_s = time_step_s;
        return o;
    }
    OverpassSpec overpass_from_offset(double d_min_m) const {
        OverpassSpec o = OverpassSpec::from_offset(d_min_m);
        o.theta_min_deg = theta_min_deg;
        o.time_step_s = time_step_s;
        return o;
    }
};

/// On-board random-bit store: bytes available and stored bits per pulse.
struct BufferSpec {
    double buffer_bytes = 0.0;
    double bits_per_pulse_stored = 4.0;

    void validate() const {
        if (!(buffer_bytes >= 0.0)) throw std::invalid_argument("buffer_bytes must be >= 0");
        if (!(bits_per_pulse_stored >= 1.0))
            throw std::invalid_argument("bits_per_pulse_stored must be >= 1");
    }

    /// Longest total transmission time the stored bits can drive.
    double max_transmission_s(double rate_hz) const {
        return buffer_bytes * 8.0 / (bits_per_pulse_stored * rate_hz);
    }
};

/// Constant unknown relative intensity offset, sampled on a small grid.
struct UncertaintySpec {
    double fraction = 0.0;
    int grid_points_per_intensity = 3;

    void validate() const {
        if (!(fraction >= 0.0 && fraction < 1.0))
            throw std::invalid_argument("uncertainty fraction must be in [0, 1)");
        if (fraction > 0.0 && grid_points_per_intensity < 2)
            throw std::invalid_argument("uncertainty grid needs >= 2 points when fraction > 0");
    }

    std::vector<double> offsets() const {
        if (fraction == 0.0) return {0.0};
        std::vector<double> d;
        const int g = grid_points_per_intensity;
        d.reserve(static_cast<std::size_t>(g));
        for (int i = 0; i < g; ++i)
            d.push_back(-fraction + 2.0 * fraction * static_cast<double>(i) /
                                        static_cast<double>(g - 1));
        return d;
    }
};

struct SweepPoint {
    double d_min_m = 0.0;
    double theta_max_deg = 90.0;
    KeyResult key;
    ProtocolParams params;
    std::int64_t evaluations = 0;
};

struct SweepCurve {
    std::vector<SweepPoint> points;

    /// Largest offset with a nonzero key (0 if the whole curve is zero).
    double footprint_d_plus_m() const {
        double d = 0.0;
        for (const auto& p : points)
            if (p.key.skl_bits > 0) d = std::max(d, p.d_min_m);
        return d;
    }
};

namespace campaign_detail {

/// Index-sharded parallel loop with deterministic output placement.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min<int>(threads, static_cast<int>(count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = static_cast<std::size_t>(w); i < count;
                 i += static_cast<std::size_t>(workers))
                fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace campaign_detail

/// Optimise one pass per grid offset. Points beyond the geometric footprint
/// record zero keys. Each point is warm-started with its lower-offset
/// neighbour's optimum to keep the found curve monotone.
inline SweepCurve sweep_dmin(const SystemConfig& config, const std::vector<double>& dmin_grid,
                             OptimizationSpec opt_spec, int threads = 1,
                             DiffractionCache* cache = nullptr) {
    config.validate();
    SweepCurve curve;
    curve.points.resize(dmin_grid.size());

    // Pass 1: independent optimisation per point (parallel).
    campaign_detail::parallel_for(dmin_grid.size(), threads, [&](std::size_t i) {
        SweepPoint& pt = curve.points[i];
        pt.d_min_m = dmin_grid[i];
        try {
            pt.theta_max_deg = theta_max_from_offset(pt.d_min_m, config.orbit, config.theta_min_deg);
        } catch (const OutOfFootprintError&) {
            pt.theta_max_deg = 0.0;
            pt.key = KeyResult{};
            pt.key.skl_bits = 0;
            return;
        }
        const ChannelTrace trace = make_channel_trace(
            config.system, config.atmosphere, config.orbit,
            config.overpass_from_offset(pt.d_min_m), cache);
        const OptimizationResult r = optimize_pass(trace, opt_spec, config.source, config.security);
        pt.key = r.best_key;
        pt.params = r.best_params;
        pt.evaluations = r.evaluations;
    });

    // Pass 2: sequential warm-start sweep outward; keeps SKL(d) monotone by
    // giving each point its neighbour's optimum as an extra start.
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const SweepPoint& prev = curve.points[i - 1];
        SweepPoint& pt = curve.points[i];
        if (prev.key.skl_bits <= pt.key.skl_bits || prev.key.skl_bits == 0) continue;
        if (pt.theta_max_deg <= config.theta_min_deg) continue;
        const ChannelTrace trace = make_channel_trace(
            config.system, config.atmosphere, config.orbit,
            config.overpass_from_offset(pt.d_min_m), cache);
        OptimizationSpec warm = opt_spec;
        warm.restarts = 1;
        warm.warm_starts.push_back(prev.params);
        const double half = trace.duration_s() / 2.0;
        warm.delta_t_grid = {std::min(prev.params.delta_t_s, half)};
        if (opt_spec.delta_t_cap_s)
            warm.delta_t_grid[0] = std::min(warm.delta_t_grid[0], *opt_spec.delta_t_cap_s);
        const OptimizationResult r = optimize_pass(trace, warm, config.source, config.security);
        if (r.best_key.skl_bits > pt.key.skl_bits) {
            pt.key = r.best_key;
            pt.params = r.best_params;
        }
        pt.evaluations += r.evaluations;
    }
    return curve;
}

/// Twice the trapezoidal area under the SKL vs d_min curve (bit metres).
inline double skl_integral(const SweepCurve& curve) {
    if (curve.points.empty()) throw std::invalid_argument("skl_integral: empty curve");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += 0.5 * (static_cast<double>(a.key.skl_bits) + static_cast<double>(b.key.skl_bits)) *
                (b.d_min_m - a.d_min_m);
    }
    return 2.0 * area;
}

/// Expected annual key: N_orbits/year * SKL_int / L_lat.
inline double annual_skl(double skl_int_bit_m, double latitude_deg, const OrbitSpec& orbit) {
    if (!(std::abs(latitude_deg) < 90.0))
        throw std::invalid_argument("annual_skl: |latitude| must be < 90");
    const double l_lat = 2.0 * std::numbers::pi * orbit.earth_radius_m *
                         std::cos(deg2rad(latitude_deg));
    return orbit.orbits_per_year() * skl_int_bit_m / l_lat;
}

/// Grid for sweep studies: evenly spaced offsets covering the key-bearing
/// footprint with a zero-key margin. The footprint edge is estimated from a
/// coarse probe sweep.
inline std::vector<double> default_dmin_grid(const SystemConfig& config,
                                             const OptimizationSpec& opt_spec, int points = 33,
                                             int threads = 1, DiffractionCache* cache = nullptr) {
    const double d_geo =
        offset_from_theta_max(config.theta_min_deg + 0.25, config.orbit);
    OptimizationSpec probe = opt_spec;
    probe.restarts = 2;
    probe.delta_t_grid_size = 8;
    std::vector<double> probe_grid;
    for (int i = 0; i <= 8; ++i)
        probe_grid.push_back(d_geo * static_cast<double>(i) / 8.0);
    const SweepCurve coarse = sweep_dmin(config, probe_grid, probe, threads, cache);
    double d_plus = coarse.footprint_d_plus_m();
    if (d_plus <= 0.0) d_plus = d_geo / 2.0;
    const double hi = std::min(1.1 * d_plus, d_geo);
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid.push_back(hi * static_cast<double>(i) / static_cast<double>(points - 1));
    return grid;
}

struct FixedParameterCandidate {
    std::size_t index = 0;
    double d_min_m = 0.0;
    double p_x_b = 0.0;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double skl_int_bit_m = 0.0;
    double annual_skl_bits = 0.0;
};

struct FixedParameterSelection {
    FixedParameterCandidate selected;
    std::vector<FixedParameterCandidate> candidates;
    SweepCurve optimized_curve;
    SweepCurve selected_curve;
    double optimized_annual_skl_bits = 0.0;
};

/// Fixed-parameter selection: (i) fully optimised curve, (ii) candidate set
/// F_j = {P_X^B, mu1, mu2} at each nonzero point, (iii) re-optimised curve
/// with F_j fixed, (iv) annual SKL per candidate, (v) argmax.
inline FixedParameterSelection select_fixed_params(const SystemConfig& config,
                                                   const std::vector<double>& dmin_grid,
                                                   const OptimizationSpec& opt_spec,
                                                   double latitude_deg, int threads = 1,
                                                   DiffractionCache* cache = nullptr) {
    FixedParameterSelection sel;
    sel.optimized_curve = sweep_dmin(config, dmin_grid, opt_spec, threads, cache);
    sel.optimized_annual_skl_bits =
        annual_skl(skl_integral(sel.optimized_curve), latitude_deg, config.orbit);

    std::vector<std::size_t> candidate_indices;
    for (std::size_t j = 0; j < sel.optimized_curve.points.size(); ++j)
        if (sel.optimized_curve.points[j].key.skl_bits > 0) candidate_indices.push_back(j);
    if (candidate_indices.empty())
        throw std::runtime_error("select_fixed_params: footprint is empty (no nonzero keys)");

    sel.candidates.resize(candidate_indices.size());
    std::vector<SweepCurve> curves(candidate_indices.size());
    campaign_detail::parallel_for(candidate_indices.size(), threads, [&](std::size_t c) {
        const std::size_t j = candidate_indices[c];
        const SweepPoint& pt = sel.optimized_curve.points[j];
        OptimizationSpec fixed_spec = opt_spec;
        fixed_spec.fixed_p_x_b = pt.params.p_x_b;
        fixed_spec.fixed_mu1 = pt.params.mu[0];
        fixed_spec.fixed_mu2 = pt.params.mu[1];
        curves[c] = sweep_dmin(config, dmin_grid, fixed_spec, 1, cache);
        FixedParameterCandidate& cand = sel.candidates[c];
        cand.index = j;
        cand.d_min_m = pt.d_min_m;
        cand.p_x_b = pt.params.p_x_b;
        cand.mu1 = pt.params.mu[0];
        cand.mu2 = pt.params.mu[1];
        cand.skl_int_bit_m = skl_integral(curves[c]);
        cand.annual_skl_bits = annual_skl(cand.skl_int_bit_m, latitude_deg, config.orbit);
    });

    std::size_t best = 0;
    for (std::size_t c = 1; c < sel.candidates.size(); ++c)
        if (sel.candidates[c].annual_skl_bits > sel.candidates[best].annual_skl_bits) best = c;
    sel.selected = sel.candidates[best];
    sel.selected_curve = curves[best];
    return sel;
}

struct SourceRatePoint {
    double f_s_hz = 0.0;
    std::int64_t skl_bits = 0;
    double skl_per_pulse = 0.0;
    double delta_t_s = 0.0;
};

struct SourceRateSweep {
    std::vector<SourceRatePoint> points;
    double f_s_crit_hz = 0.0;
    bool crit_above_grid = false;
};

/// SKL vs source rate at one geometry; the critical rate is bracketed on
/// the grid and refined by bisection to 1% relative width.
inline SourceRateSweep source_rate_sweep(const SystemConfig& config,
                                         const std::vector<double>& fs_grid,
                                         const OverpassSpec& geometry,
                                         const OptimizationSpec& opt_spec, int threads = 1,
                                         DiffractionCache* cache = nullptr) {
    config.validate();
    if (fs_grid.empty()) throw std::invalid_argument("source_rate_sweep: empty grid");
    const ChannelTrace trace =
        make_channel_trace(config.system, config.atmosphere, config.orbit, geometry, cache);

    auto run_at = [&](double fs) {
        SourceSpec src = config.source;
        src.rate_hz = fs;
        return optimize_pass(trace, opt_spec, src, config.security);
    };

    SourceRateSweep sweep;
    sweep.points.resize(fs_grid.size());
    campaign_detail::parallel_for(fs_grid.size(), threads, [&](std::size_t i) {
        const OptimizationResult r = run_at(fs_grid[i]);
        sweep.points[i] = {fs_grid[i], r.best_key.skl_bits,
                           static_cast<double>(r.best_key.skl_bits) /
                               (fs_grid[i] * 2.0 * r.best_params.delta_t_s),
                           r.best_params.delta_t_s};
    });

    std::size_t first_nonzero = sweep.points.size();
    for (std::size_t i = 0; i < sweep.points.size(); ++i)
        if (sweep.points[i].skl_bits > 0) {
            first_nonzero = i;
            break;
        }
    if (first_nonzero == sweep.points.size()) {
        sweep.crit_above_grid = true;
        sweep.f_s_crit_hz = fs_grid.back();
        return sweep;
    }
    if (first_nonzero == 0) {
        sweep.f_s_crit_hz = fs_grid.front();
        return sweep;
    }
    double lo = fs_grid[first_nonzero - 1];
    double hi = fs_grid[first_nonzero];
    while ((hi - lo) / hi > 0.01) {
        const double mid = 0.5 * (lo + hi);
        (run_at(mid).best_key.skl_bits > 0 ? hi : lo) = mid;
    }
    sweep.f_s_crit_hz = hi;
    return sweep;
}

struct BufferResult {
    KeyResult key;
    ProtocolParams params;
    double t_max_s = 0.0;
};

/// Optimise one pass with the half-window capped by the buffer budget.
inline BufferResult buffer_constraints(const SystemConfig& config, const BufferSpec& buffer,
                                       const OverpassSpec& geometry,
                                       OptimizationSpec opt_spec,
                                       DiffractionCache* cache = nullptr) {
    config.validate();
    buffer.validate();
    BufferResult out;
    out.t_max_s = buffer.max_transmission_s(config.source.rate_hz);
    if (out.t_max_s <= 0.0) {
        out.key = KeyResult{};
        out.key.skl_bits = 0;
        return out;
    }
    const ChannelTrace trace =
        make_channel_trace(config.system, config.atmosphere, config.orbit, geometry, cache);
    opt_spec.delta_t_cap_s = std::min(opt_spec.delta_t_cap_s.value_or(1e30), out.t_max_s / 2.0);
    const OptimizationResult r = optimize_pass(trace, opt_spec, config.source, config.security);
    out.key = r.best_key;
    out.params = r.best_params;
    return out;
}

struct MinBufferResult {
    bool feasible = false;
    double t_min_s = 0.0;
    double buffer_bytes = 0.0;
};

/// Smallest total transmission window with a nonzero key, by bisection over
/// the window length at 1 s resolution; the buffer requirement follows as
/// f_s * t_min * bits_per_pulse / 8 bytes.
inline MinBufferResult min_buffer(const SystemConfig& config, const OverpassSpec& geometry,
                                  OptimizationSpec opt_spec,
                                  double bits_per_pulse_stored = 4.0,
                                  DiffractionCache* cache = nullptr) {
    config.validate();
    const ChannelTrace trace =
        make_channel_trace(config.system, config.atmosphere, config.orbit, geometry, cache);
    auto key_at = [&](double window_s) {
        OptimizationSpec spec = opt_spec;
        spec.delta_t_grid = {window_s / 2.0};
        return optimize_pass(trace, spec, config.source, config.security).best_key.skl_bits;
    };
    MinBufferResult out;
    double hi = trace.duration_s();
    if (key_at(hi) <= 0) return out;
    out.feasible = true;
    double lo = 0.0;  // window of ~1 sample
    while (hi - lo > 1.0) {
        const double mid = 0.5 * (lo + hi);
        (key_at(mid) > 0 ? hi : lo) = mid;
    }
    out.t_min_s = hi;
    out.buffer_bytes = config.source.rate_hz * hi * bits_per_pulse_stored / 8.0;
    return out;
}

/// Worst-case key under constant unknown intensity offsets: counts are
/// generated with the true intensities mu_j (1 + delta_j) while the decoy
/// bounds keep using the nominal values. Returns the grid minimum.
inline KeyResult uncertainty_worstcase(const ChannelTrace& trace, const ProtocolParams& params,
                                       const SourceSpec& source, const SecurityParams& security,
                                       const UncertaintySpec& uspec) {
    uspec.validate();
    params.validate();
    const auto offsets = uspec.offsets();
    KeyResult worst;
    bool first = true;
    for (double d1 : offsets) {
        for (double d2 : offsets) {
            ProtocolParams true_params = params;
            true_params.mu[0] = params.mu[0] * (1.0 + d1);
            true_params.mu[1] = params.mu[1] * (1.0 + d2);
            const BlockCounts block = accumulate_block(trace, true_params, source);
            const KeyResult r = skl(block, params, security);
            if (first || r.skl_bits < worst.skl_bits) {
                worst = r;
                first = false;
            }
        }
    }
    return worst;
}

inline KeyResult uncertainty_worstcase(const SystemConfig& config, const OverpassSpec& geometry,
                                       const ProtocolParams& params, const UncertaintySpec& uspec,
                                       DiffractionCache* cache = nullptr) {
    const ChannelTrace trace =
        make_channel_trace(config.system, config.atmosphere, config.orbit, geometry, cache);
    return uncertainty_worstcase(trace, params, config.source, config.security, uspec);
}

struct UncertaintySweepPoint {
    double d_min_m = 0.0;
    double theta_max_deg = 0.0;
    std::int64_t skl_nominal_bits = 0;
    std::int64_t skl_worst_bits = 0;
};

struct UncertaintySweep {
    std::vector<UncertaintySweepPoint> points;
    double annual_nominal_bits = 0.0;
    double annual_worst_bits = 0.0;
};

/// Per-pass nominal optimisation followed by worst-case evaluation of the
/// chosen operating point, plus the annual totals of both curves.
inline UncertaintySweep uncertainty_sweep(const SystemConfig& config,
                                          const std::vector<double>& dmin_grid,
                                          const OptimizationSpec& opt_spec,
                                          const UncertaintySpec& uspec, double latitude_deg,
                                          int threads = 1, DiffractionCache* cache = nullptr) {
    const SweepCurve nominal = sweep_dmin(config, dmin_grid, opt_spec, threads, cache);
    UncertaintySweep out;
    out.points.resize(nominal.points.size());
    campaign_detail::parallel_for(nominal.points.size(), threads, [&](std::size_t i) {
        const SweepPoint& pt = nominal.points[i];
        UncertaintySweepPoint& u = out.points[i];
        u.d_min_m = pt.d_min_m;
        u.theta_max_deg = pt.theta_max_deg;
        u.skl_nominal_bits = pt.key.skl_bits;
        if (pt.key.skl_bits <= 0 || pt.theta_max_deg <= config.theta_min_deg) return;
        const KeyResult worst = uncertainty_worstcase(
            config, config.overpass_from_offset(pt.d_min_m), pt.params, uspec, cache);
        u.skl_worst_bits = worst.skl_bits;
    });

    auto annual_of = [&](auto getter) {
        SweepCurve c;
        c.points.resize(out.points.size());
        for (std::size_t i = 0; i < out.points.size(); ++i) {
            c.points[i].d_min_m = out.points[i].d_min_m;
            c.points[i].key.skl_bits = getter(out.points[i]);
        }
        return annual_skl(skl_integral(c), latitude_deg, config.orbit);
    };
    out.annual_nominal_bits = annual_of([](const auto& p) { return p.skl_nominal_bits; });
    out.annual_worst_bits = annual_of([](const auto& p) { return p.skl_worst_bits; });
    return out;
}

}  // namespace satqkd
