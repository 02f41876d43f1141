#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace satqkd {

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Circular orbit around a spherical Earth.
struct OrbitSpec {
    double altitude_m = 500.0e3;
    double earth_radius_m = 6371.0e3;
    double gravitational_parameter_m3s2 = 3.986004418e14;

    void validate() const {
        if (!(altitude_m > 0.0)) throw std::invalid_argument("orbit.altitude_m must be > 0");
        if (!(earth_radius_m > 0.0)) throw std::invalid_argument("orbit.earth_radius_m must be > 0");
        if (!(gravitational_parameter_m3s2 > 0.0))
            throw std::invalid_argument("orbit.gravitational_parameter_m3s2 must be > 0");
    }

    double orbit_radius_m() const { return earth_radius_m + altitude_m; }
    /// Orbital angular rate sqrt(GM / r^3), rad/s.
    double angular_rate_rad_s() const {
        const double r = orbit_radius_m();
        return std::sqrt(gravitational_parameter_m3s2 / (r * r * r));
    }
    double period_s() const { return 2.0 * std::numbers::pi / angular_rate_rad_s(); }
    double orbits_per_year() const { return 365.25 * 86400.0 / period_s(); }
};

struct OutOfFootprintError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Overpass geometry given either the maximum elevation or the equivalent
/// ground-track offset (exactly one must be set).
struct OverpassSpec {
    std::optional<double> theta_max_deg;
    std::optional<double> d_min_m;
    double theta_min_deg = 10.0;
    double time_step_s = 1.0;

    static OverpassSpec from_theta_max(double deg) {
        OverpassSpec s;
        s.theta_max_deg = deg;
        return s;
    }
    static OverpassSpec from_offset(double metres) {
        OverpassSpec s;
        s.d_min_m = metres;
        return s;
    }
    void validate() const {
        if (theta_max_deg.has_value() == d_min_m.has_value())
            throw std::invalid_argument("overpass: set exactly one of theta_max_deg, d_min_m");
        if (!(time_step_s > 0.0)) throw std::invalid_argument("overpass.time_step_s must be > 0");
        if (!(theta_min_deg >= 0.0 && theta_min_deg < 90.0))
            throw std::invalid_argument("overpass.theta_min_deg must be in [0, 90)");
        if (theta_max_deg && !(*theta_max_deg > theta_min_deg && *theta_max_deg <= 90.0))
            throw std::invalid_argument("overpass.theta_max_deg must be in (theta_min, 90]");
        if (d_min_m && !(*d_min_m >= 0.0))
            throw std::invalid_argument("overpass.d_min_m must be >= 0");
    }
};

namespace orbit_detail {

// Central angle between the sub-satellite point and the OGS at elevation el.
inline double central_angle_from_elevation(double el, const OrbitSpec& orbit) {
    const double rho = orbit.earth_radius_m / orbit.orbit_radius_m();
    return std::acos(rho * std::cos(el)) - el;
}

inline double elevation_from_central_angle(double beta, const OrbitSpec& orbit) {
    if (beta <= 0.0) return std::numbers::pi / 2.0;
    const double rho = orbit.earth_radius_m / orbit.orbit_radius_m();
    return std::atan2(std::cos(beta) - rho, std::sin(beta));
}

}  // namespace orbit_detail

/// Slant range R(theta) = sqrt((R_E+h)^2 - R_E^2 cos^2 theta) - R_E sin theta.
inline double slant_range(double elevation_rad, const OrbitSpec& orbit) {
    if (!(elevation_rad >= 0.0 && elevation_rad <= std::numbers::pi / 2.0 + 1e-12))
        throw std::domain_error("slant_range: elevation outside [0, pi/2]");
    const double re = orbit.earth_radius_m;
    const double r = orbit.orbit_radius_m();
    const double c = re * std::cos(elevation_rad);
    return std::sqrt(r * r - c * c) - re * std::sin(elevation_rad);
}

/// Maximum elevation of the pass with ground-track offset d_min.
inline double theta_max_from_offset(double d_min_m, const OrbitSpec& orbit,
                                    double theta_min_deg = 10.0) {
    if (d_min_m < 0.0) throw std::invalid_argument("theta_max_from_offset: d_min < 0");
    if (d_min_m == 0.0) return 90.0;
    const double beta = d_min_m / orbit.earth_radius_m;
    if (beta >= std::numbers::pi / 2.0)
        throw OutOfFootprintError("ground-track offset beyond the horizon");
    const double deg = rad2deg(orbit_detail::elevation_from_central_angle(beta, orbit));
    if (deg < theta_min_deg)
        throw OutOfFootprintError("ground-track offset too large: theta_max " +
                                  std::to_string(deg) + " deg below theta_min");
    return deg;
}

/// Ground-track offset of the pass whose maximum elevation is theta_max.
inline double offset_from_theta_max(double theta_max_deg, const OrbitSpec& orbit) {
    if (!(theta_max_deg > 0.0 && theta_max_deg <= 90.0))
        throw std::invalid_argument("offset_from_theta_max: theta_max outside (0, 90]");
    return orbit.earth_radius_m *
           orbit_detail::central_angle_from_elevation(deg2rad(theta_max_deg), orbit);
}

/// Elevation/range time series for one overpass, symmetric about culmination.
/// Each sample stands for one `time_step_s` transmission slot.
struct PassTrace {
    struct Sample {
        double t_s;
        double elevation_rad;
        double range_m;
    };
    std::vector<Sample> samples;
    double time_step_s = 1.0;
    double theta_max_deg = 90.0;
    double d_min_m = 0.0;
    double theta_min_deg = 10.0;

    double duration_s() const { return static_cast<double>(samples.size()) * time_step_s; }
    std::size_t culmination_index() const { return samples.size() / 2; }
};

/// Great-circle overpass: the satellite moves at constant angular rate and
/// the central angle to the OGS obeys cos beta(t) = cos beta_min cos(w t).
inline PassTrace pass_trace(const OrbitSpec& orbit, const OverpassSpec& overpass) {
    orbit.validate();
    overpass.validate();

    const double theta_min = deg2rad(overpass.theta_min_deg);
    double theta_max_deg_v;
    double d_min_v;
    if (overpass.theta_max_deg) {
        theta_max_deg_v = *overpass.theta_max_deg;
        d_min_v = offset_from_theta_max(theta_max_deg_v, orbit);
    } else {
        theta_max_deg_v = theta_max_from_offset(*overpass.d_min_m, orbit, overpass.theta_min_deg);
        d_min_v = *overpass.d_min_m;
    }
    const double beta_min = orbit_detail::central_angle_from_elevation(
        deg2rad(theta_max_deg_v), orbit);
    const double beta_limit = orbit_detail::central_angle_from_elevation(theta_min, orbit);
    if (beta_min > beta_limit + 1e-12)
        throw OutOfFootprintError("pass culminates below theta_min");

    const double omega = orbit.angular_rate_rad_s();
    const double cos_ratio = std::min(std::cos(beta_limit) / std::cos(beta_min), 1.0);
    const double t_limit = std::acos(cos_ratio) / omega;
    const auto half_count =
        static_cast<std::ptrdiff_t>(std::floor(t_limit / overpass.time_step_s + 1e-9));

    PassTrace trace;
    trace.time_step_s = overpass.time_step_s;
    trace.theta_max_deg = theta_max_deg_v;
    trace.d_min_m = d_min_v;
    trace.theta_min_deg = overpass.theta_min_deg;
    trace.samples.reserve(static_cast<std::size_t>(2 * half_count + 1));
    const double cos_beta_min = std::cos(beta_min);
    for (std::ptrdiff_t k = -half_count; k <= half_count; ++k) {
        const double t = static_cast<double>(k) * overpass.time_step_s;
        const double cb = cos_beta_min * std::cos(omega * std::abs(t));
        const double beta = std::acos(std::min(cb, 1.0));
        const double el = (beta_min == 0.0 && k == 0)
                              ? std::numbers::pi / 2.0
                              : orbit_detail::elevation_from_central_angle(beta, orbit);
        trace.samples.push_back({t, el, slant_range(el, orbit)});
    }
    return trace;
}

}  // namespace satqkd
