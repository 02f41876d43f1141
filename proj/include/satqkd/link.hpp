#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "satqkd/orbit.hpp"
#include "satqkd/quadrature.hpp"

namespace satqkd {

/// Transmit/receive optics. The Gaussian beam waist sits at the exit
/// aperture; intrinsic losses are elevation-independent.
struct OpticalSystem {
    double tx_diameter_m = 0.08;
    double rx_diameter_m = 0.70;
    double beam_waist_m = 0.04;
    double wavelength_m = 785.0e-9;
    double intrinsic_loss_db = 20.0;

    void validate() const {
        if (!(tx_diameter_m > 0.0)) throw std::invalid_argument("system.tx_diameter_m must be > 0");
        if (!(rx_diameter_m > 0.0)) throw std::invalid_argument("system.rx_diameter_m must be > 0");
        if (!(beam_waist_m > 0.0)) throw std::invalid_argument("system.beam_waist_m must be > 0");
        if (!(beam_waist_m <= tx_diameter_m))
            throw std::invalid_argument("system.beam_waist_m must not exceed tx_diameter_m");
        if (!(wavelength_m > 0.0)) throw std::invalid_argument("system.wavelength_m must be > 0");
        if (!(intrinsic_loss_db >= 0.0))
            throw std::invalid_argument("system.intrinsic_loss_db must be >= 0");
    }

    /// Fraunhofer validity threshold: 10 x T_X^2 / lambda.
    double far_field_min_range_m() const {
        return 10.0 * tx_diameter_m * tx_diameter_m / wavelength_m;
    }
};

/// Elevation-dependent atmospheric transmissivity, either a sampled table
/// (piecewise linear in transmissivity) or the cosecant-airmass law
/// T(theta) = T_zen^(1/sin theta).
struct AtmosphereModel {
    enum class Mode { analytic, table };
    Mode mode = Mode::analytic;
    double zenith_transmissivity = std::pow(10.0, -0.06);
    std::vector<std::pair<double, double>> table;  // (elevation_deg, transmissivity)

    static AtmosphereModel analytic(double t_zen) {
        AtmosphereModel m;
        m.mode = Mode::analytic;
        m.zenith_transmissivity = t_zen;
        m.validate();
        return m;
    }
    static AtmosphereModel from_table(std::vector<std::pair<double, double>> rows) {
        AtmosphereModel m;
        m.mode = Mode::table;
        m.table = std::move(rows);
        m.validate();
        return m;
    }

    void validate() const {
        if (mode == Mode::analytic) {
            if (!(zenith_transmissivity > 0.0 && zenith_transmissivity <= 1.0))
                throw std::invalid_argument("atmosphere.zenith_transmissivity must be in (0, 1]");
            return;
        }
        if (table.size() < 2) throw std::invalid_argument("atmosphere table needs >= 2 rows");
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (!(table[i].second > 0.0 && table[i].second <= 1.0))
                throw std::invalid_argument("atmosphere table transmissivity outside (0, 1] at row " +
                                            std::to_string(i + 1));
            if (i > 0) {
                if (!(table[i].first > table[i - 1].first))
                    throw std::invalid_argument("atmosphere table elevations not strictly increasing at row " +
                                                std::to_string(i + 1));
                if (table[i].second < table[i - 1].second)
                    throw std::invalid_argument("atmosphere table transmissivity decreasing at row " +
                                                std::to_string(i + 1));
            }
        }
    }

    double min_elevation_deg() const {
        return mode == Mode::table ? table.front().first : 5.0;
    }

    double transmissivity(double elevation_rad) const {
        const double deg = rad2deg(elevation_rad);
        if (mode == Mode::analytic) {
            if (deg < 5.0 - 1e-9)
                throw std::domain_error("atmosphere: elevation below analytic domain (5 deg)");
            return std::pow(zenith_transmissivity, 1.0 / std::sin(elevation_rad));
        }
        if (deg < table.front().first - 1e-9)
            throw std::domain_error("atmosphere: elevation below table coverage");
        if (deg >= table.back().first) return table.back().second;
        auto it = std::upper_bound(table.begin(), table.end(), deg,
                                   [](double v, const auto& row) { return v < row.first; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double w = (deg - lo.first) / (hi.first - lo.first);
        return lo.second + w * (hi.second - lo.second);
    }
};

namespace link_detail {

// Zero-order Hankel transform of the truncated Gaussian aperture field,
// G(f) = 2 pi int_0^a exp(-r^2/w0^2) J0(2 pi f r) r dr.
inline double far_field_amplitude(const OpticalSystem& sys, double spatial_freq) {
    const double a = 0.5 * sys.tx_diameter_m;
    const double w0 = sys.beam_waist_m;
    const double f = spatial_freq;
    auto integrand = [&](double r) {
        return std::exp(-r * r / (w0 * w0)) *
               std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * f * r) * r;
    };
    Quadrature::Options opt;
    opt.rel_tol = 1e-9;
    opt.abs_tol = 1e-12 * w0 * w0;
    // Subdivide by Bessel period so the adaptive pass starts resolved.
    const double period = (f > 0.0) ? 1.0 / f : a;
    double total = 0.0;
    double lo = 0.0;
    while (lo < a) {
        const double hi = std::min(lo + period, a);
        total += Quadrature::integrate(integrand, lo, hi, opt);
        lo = hi;
    }
    return 2.0 * std::numbers::pi * total;
}

inline double transmitted_power(const OpticalSystem& sys) {
    const double a = 0.5 * sys.tx_diameter_m;
    const double w0 = sys.beam_waist_m;
    return std::numbers::pi * w0 * w0 / 2.0 * (1.0 - std::exp(-2.0 * a * a / (w0 * w0)));
}

}  // namespace link_detail

/// Far-field power collected within spatial frequency f_max, as a fraction
/// of the transmitted power. f = rho / (lambda R) maps receiver radius rho
/// at range R onto spatial frequency.
inline double collected_power_fraction(const OpticalSystem& sys, double f_max) {
    auto integrand = [&](double f) {
        const double g = link_detail::far_field_amplitude(sys, f);
        return g * g * 2.0 * std::numbers::pi * f;
    };
    const double p_t = link_detail::transmitted_power(sys);
    Quadrature::Options opt;
    opt.rel_tol = 1e-6;
    opt.abs_tol = 1e-10 * p_t;
    // Integrate lobe by lobe; the pattern's angular scale is 1/(2a).
    const double a = 0.5 * sys.tx_diameter_m;
    const double lobe = 0.5 / a;
    double total = 0.0;
    double lo = 0.0;
    while (lo < f_max) {
        const double hi = std::min(lo + lobe, f_max);
        total += Quadrature::integrate(integrand, lo, hi, opt);
        lo = hi;
    }
    return total / p_t;
}

/// Diffraction loss in dB for a truncated-Gaussian beam collected by the
/// receiver disc at the given range (far-field Fraunhofer regime).
inline double diffraction_loss_db(const OpticalSystem& sys, double range_m) {
    sys.validate();
    if (!(range_m >= sys.far_field_min_range_m()))
        throw std::domain_error("diffraction_loss_db: range " + std::to_string(range_m) +
                                " m is inside the near field (need >= " +
                                std::to_string(sys.far_field_min_range_m()) + " m)");
    const double f_max = 0.5 * sys.rx_diameter_m / (sys.wavelength_m * range_m);
    const double frac = collected_power_fraction(sys, f_max);
    if (!(frac > 0.0) || !std::isfinite(frac))
        throw std::runtime_error("diffraction_loss_db: quadrature produced non-positive power");
    return -10.0 * std::log10(std::min(frac, 1.0));
}

inline double atmospheric_loss_db(const AtmosphereModel& atmosphere, double elevation_rad) {
    return -10.0 * std::log10(atmosphere.transmissivity(elevation_rad));
}

/// Memoises diffraction loss by quantised range; safe for concurrent use.
class DiffractionCache {
public:
    explicit DiffractionCache(double range_bucket_m = 1.0) : bucket_(range_bucket_m) {}

    double loss_db(const OpticalSystem& sys, double range_m) {
        const auto key = static_cast<long long>(std::llround(range_m / bucket_));
        {
            std::lock_guard lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        const double v = diffraction_loss_db(sys, static_cast<double>(key) * bucket_);
        std::lock_guard lock(mutex_);
        return cache_.emplace(key, v).first->second;
    }

private:
    double bucket_;
    std::map<long long, double> cache_;
    std::mutex mutex_;
};

/// Total instantaneous link efficiency in dB: diffraction + atmosphere +
/// intrinsic. The value at zenith is the system loss metric.
inline double link_efficiency_db(const OpticalSystem& sys, const AtmosphereModel& atmosphere,
                                 const OrbitSpec& orbit, double elevation_rad,
                                 DiffractionCache* cache = nullptr) {
    const double range = slant_range(elevation_rad, orbit);
    const double diff = cache ? cache->loss_db(sys, range) : diffraction_loss_db(sys, range);
    return diff + atmospheric_loss_db(atmosphere, elevation_rad) + sys.intrinsic_loss_db;
}

/// PassTrace plus the per-sample link efficiency as a transmission fraction.
struct ChannelTrace {
    PassTrace pass;
    std::vector<double> efficiency;

    std::size_t size() const { return efficiency.size(); }
    double time_step_s() const { return pass.time_step_s; }
    double duration_s() const { return pass.duration_s(); }
};

inline ChannelTrace make_channel_trace(const OpticalSystem& sys, const AtmosphereModel& atmosphere,
                                       const OrbitSpec& orbit, const OverpassSpec& overpass,
                                       DiffractionCache* cache = nullptr) {
    ChannelTrace trace;
    trace.pass = pass_trace(orbit, overpass);
    trace.efficiency.reserve(trace.pass.samples.size());
    for (const auto& s : trace.pass.samples) {
        const double db = link_efficiency_db(sys, atmosphere, orbit, s.elevation_rad, cache);
        trace.efficiency.push_back(std::pow(10.0, -db / 10.0));
    }
    return trace;
}

}  // namespace satqkd
