// Acceptance suite: runs every stated criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "satqkd/satqkd.hpp"

using namespace satqkd;

namespace {

struct Harness {
    int criterion = 0;
    int failures = 0;
    std::vector<std::string> notes;
    std::chrono::steady_clock::time_point t0;

    void begin(int n, const char* title) {
        criterion = n;
        notes.clear();
        t0 = std::chrono::steady_clock::now();
        std::printf("criterion %2d: %s ...\n", n, title);
        std::fflush(stdout);
    }
    void check(bool ok, const std::string& what) {
        if (!ok) notes.push_back(what);
    }
    double finish() {
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (notes.empty()) {
            std::printf("[PASS] criterion %2d (%.1f s)\n", criterion, dt);
        } else {
            ++failures;
            std::printf("[FAIL] criterion %2d (%.1f s)\n", criterion, dt);
            for (const auto& n : notes) std::printf("       - %s\n", n.c_str());
        }
        std::fflush(stdout);
        return dt;
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

SystemConfig system_config(double qber_i, double pec) {
    SystemConfig c;
    c.source.intrinsic_qber = qber_i;
    c.source.extraneous_count_prob = pec;
    return c;
}

int hardware_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 4;
}

// Brute-force binomial quantile: forward log-sum-exp scan of the full CDF.
double quantile_scan(double eps, long n, double p) {
    const double logp = std::log(p);
    const double log1mp = std::log1p(-p);
    double lpmf = n * log1mp;
    double lcdf = lpmf;
    const double le = std::log(eps);
    long k = 0;
    while (lcdf < le && k < n) {
        ++k;
        lpmf += std::log(static_cast<double>(n - k + 1) / k) + logp - log1mp;
        const double m = std::max(lcdf, lpmf);
        lcdf = m + std::log(std::exp(lcdf - m) + std::exp(lpmf - m));
    }
    return static_cast<double>(k);
}

double lambda_ec_oracle(double n, double q, double eps_c) {
    q = std::clamp(q, 1.0 / n, 0.5 - 1.0 / n);
    const double L = std::log2((1.0 - q) / q);
    const double F = quantile_scan(eps_c, static_cast<long>(std::llround(n)), 1.0 - q);
    return std::max(n * binary_entropy(q) + n * (1.0 - q) * L - (F - 1.0) * L -
                        0.5 * std::log2(n) - std::log2(1.0 / eps_c),
                    0.0);
}

double annual_from_worst(const SystemConfig& config, const SweepCurve& nominal,
                         const UncertaintySpec& uspec, double latitude, int threads,
                         DiffractionCache* cache, std::vector<std::int64_t>* worst_out) {
    SweepCurve worst_curve;
    worst_curve.points.resize(nominal.points.size());
    std::vector<std::int64_t> worst(nominal.points.size(), 0);
    campaign_detail::parallel_for(nominal.points.size(), threads, [&](std::size_t i) {
        const SweepPoint& pt = nominal.points[i];
        worst_curve.points[i].d_min_m = pt.d_min_m;
        if (pt.key.skl_bits <= 0) return;
        const KeyResult w = uncertainty_worstcase(
            config, config.overpass_from_offset(pt.d_min_m), pt.params, uspec, cache);
        worst[i] = w.skl_bits;
        worst_curve.points[i].key.skl_bits = w.skl_bits;
    });
    if (worst_out) *worst_out = worst;
    return annual_skl(skl_integral(worst_curve), latitude, config.orbit);
}

}  // namespace

int main() {
    Harness h;
    const int threads = hardware_threads();
    DiffractionCache cache;
    const double latitude = 55.9;
    std::printf("satqkd acceptance suite (%d threads)\n", threads);

    // ---------------------------------------------------------------- 1
    h.begin(1, "zenith link budget (19.4 dB diffraction, 0.6 dB atmosphere, 40 dB total)");
    {
        const OpticalSystem sys;
        const AtmosphereModel atmo;
        const OrbitSpec orbit;
        const double diff = diffraction_loss_db(sys, 500.0e3);
        const double atm = atmospheric_loss_db(atmo, deg2rad(90.0));
        const double total = link_efficiency_db(sys, atmo, orbit, deg2rad(90.0));
        h.check(std::abs(diff - 19.4) <= 0.5, fmt("eta_diff = %.3f dB not within 19.4 +- 0.5", diff));
        h.check(std::abs(atm - 0.6) <= 1e-9, fmt("eta_atm = %.9f dB not exactly 0.6", atm));
        h.check(std::abs(total - 40.0) <= 0.5, fmt("total = %.3f dB not within 40 +- 0.5", total));
        const double dt = h.finish();
        if (dt >= 1.0) std::printf("       note: runtime %.2f s exceeded 1 s\n", dt);
    }

    // ---------------------------------------------------------------- 2
    h.begin(2, "zenith pass duration 444 +- 3 s");
    {
        const PassTrace trace = pass_trace(OrbitSpec{}, OverpassSpec::from_theta_max(90.0));
        h.check(std::abs(trace.duration_s() - 444.0) <= 3.0,
                fmt("duration = %.1f s not within 444 +- 3", trace.duration_s()));
        h.finish();
    }

    // ---------------------------------------------------------------- 3
    h.begin(3, "buffer arithmetic: 8 GB <-> 32 s, 444 s <-> 111 GB");
    {
        const BufferSpec buf{8.0e9, 4.0};
        h.check(buf.max_transmission_s(500.0e6) == 32.0, "8 GB at 500 MHz is not exactly 32 s");
        const double bytes = 500.0e6 * 444.0 * 4.0 / 8.0;
        h.check(bytes == 111.0e9, fmt("444 s needs %.3e bytes, expected 1.11e11", bytes));
        h.finish();
    }

    // Shared campaign objects (reference config = system D of the studies).
    const SystemConfig config_d = system_config(0.005, 1.0e-7);
    OptimizationSpec default_spec;  // spec defaults: 8 restarts, 24 half-window values

    // ---------------------------------------------------------------- 4
    h.begin(4, "fixed-parameter selection at 33 grid points");
    FixedParameterSelection selection;
    std::vector<double> grid33;
    {
        grid33 = default_dmin_grid(config_d, default_spec, 33, threads, &cache);
        selection = select_fixed_params(config_d, grid33, default_spec, latitude, threads, &cache);
        const auto& s = selection.selected;
        std::printf("       selected F = {P_X^B = %.3f, mu1 = %.3f, mu2 = %.3f} at d = %.3g m\n",
                    s.p_x_b, s.mu1, s.mu2, s.d_min_m);
        std::printf("       annual: selected %.4g bit vs fully optimized %.4g bit\n",
                    s.annual_skl_bits, selection.optimized_annual_skl_bits);
        h.check(std::abs(s.p_x_b - 0.84) <= 0.05,
                fmt("P_X^B = %.3f not within 0.84 +- 0.05", s.p_x_b));
        h.check(std::abs(s.mu1 - 0.71) <= 0.05, fmt("mu1 = %.3f not within 0.71 +- 0.05", s.mu1));
        h.check(std::abs(s.mu2 - 0.14) <= 0.03, fmt("mu2 = %.3f not within 0.14 +- 0.03", s.mu2));
        h.check(s.annual_skl_bits >= 0.9 * selection.optimized_annual_skl_bits,
                fmt("selected annual %.4g below 90%% of optimized %.4g", s.annual_skl_bits,
                    selection.optimized_annual_skl_bits));
        for (const auto& cand : selection.candidates)
            h.check(cand.annual_skl_bits <= selection.selected.annual_skl_bits,
                    "argmax violated across candidates");
        h.check(selection.selected.annual_skl_bits <=
                    selection.optimized_annual_skl_bits * (1.0 + 1e-9),
                "selected annual exceeds the unconstrained annual");
        const double dt = h.finish();
        if (dt > 1800.0) std::printf("       note: runtime %.0f s exceeded the 30 min budget\n", dt);
    }

    // ---------------------------------------------------------------- 5
    h.begin(5, "annual SKL magnitudes and buffer ordering (system D, 40 dB, 55.9 N)");
    SweepCurve curve8, curve32;
    {
        const double annual_unconstrained = selection.optimized_annual_skl_bits;
        OptimizationSpec spec8 = default_spec;
        spec8.delta_t_cap_s = 16.0;  // 8 GB
        curve8 = sweep_dmin(config_d, grid33, spec8, threads, &cache);
        OptimizationSpec spec32 = default_spec;
        spec32.delta_t_cap_s = 64.0;  // 32 GB
        curve32 = sweep_dmin(config_d, grid33, spec32, threads, &cache);
        const double annual8 = annual_skl(skl_integral(curve8), latitude, config_d.orbit);
        const double annual32 = annual_skl(skl_integral(curve32), latitude, config_d.orbit);
        std::printf("       annual: unconstrained %.4g, 8 GB %.4g, 32 GB %.4g bit\n",
                    annual_unconstrained, annual8, annual32);
        h.check(annual_unconstrained >= 6.44e9 / 2.0 && annual_unconstrained <= 6.44e9 * 2.0,
                fmt("unconstrained annual %.4g outside 6.44 Gb x/2", annual_unconstrained));
        h.check(annual8 >= 0.81e9 / 2.0 && annual8 <= 0.81e9 * 2.0,
                fmt("8 GB annual %.4g outside 0.81 Gb x/2", annual8));
        h.check(annual32 >= 3.94e9 / 2.0 && annual32 <= 3.94e9 * 2.0,
                fmt("32 GB annual %.4g outside 3.94 Gb x/2", annual32));
        h.check(annual8 < annual32 && annual32 < annual_unconstrained,
                "ordering SKL(8GB) < SKL(32GB) < SKL(inf) violated");
        const double ratio = annual32 / annual8;
        h.check(ratio >= 3.0 && ratio <= 7.0,
                fmt("SKL(32GB)/SKL(8GB) = %.2f outside [3, 7]", ratio));
        h.finish();
    }

    // ---------------------------------------------------------------- 6
    h.begin(6, "parameter fixing: receiver bias trade-off with {0.71, 0.14, 0}");
    {
        auto optimize_at = [&](double theta, std::optional<double> pxb) {
            OptimizationSpec spec = default_spec;
            spec.fixed_mu1 = 0.71;
            spec.fixed_mu2 = 0.14;
            spec.fixed_p_x_b = pxb;
            return optimize_pass(config_d.orbit, config_d.overpass_from_theta(theta),
                                 config_d.system, config_d.atmosphere, spec, config_d.source,
                                 config_d.security, &cache);
        };
        bool found_split = false;
        double split_theta = 0.0;
        for (double theta : {26.0, 23.0, 20.0, 17.0, 14.0}) {
            const auto k07 = optimize_at(theta, 0.7);
            const auto k09 = optimize_at(theta, 0.9);
            if (k09.best_key.skl_bits == 0 && k07.best_key.skl_bits > 0) {
                found_split = true;
                split_theta = theta;
                break;
            }
        }
        h.check(found_split, "no low theta_max found with SKL(P_B=0.9) = 0 and SKL(P_B=0.7) > 0");
        if (found_split)
            std::printf("       P_X^B = 0.9 yields zero key at theta_max = %.0f deg; 0.7 does not\n",
                        split_theta);

        const auto popt = optimize_at(90.0, std::nullopt);
        h.check(popt.best_key.skl_bits > 0, "P-optimized zenith key is zero");
        for (double pxb : {0.7, 0.84, 0.9}) {
            const auto fixed = optimize_at(90.0, pxb);
            const double rel = static_cast<double>(fixed.best_key.skl_bits) /
                               static_cast<double>(popt.best_key.skl_bits);
            std::printf("       zenith: P_X^B = %.2f -> %lld bits (%.1f%% of optimized)\n", pxb,
                        static_cast<long long>(fixed.best_key.skl_bits), 100.0 * rel);
            h.check(rel >= 0.85, fmt("fixed P_X^B = %.2f curve is %.1f%% of the optimized zenith "
                                     "value (needs >= 85%%)",
                                     pxb, 100.0 * rel));
        }
        h.finish();
    }

    // ---------------------------------------------------------------- 7
    h.begin(7, "source-rate study: key suppression region and 500 MHz operating point");
    {
        const SystemConfig config_a = system_config(0.001, 1.0e-8);
        std::vector<double> fs_grid;
        for (int i = 0; i < 13; ++i)
            fs_grid.push_back(1.0e6 * std::pow(2.0e9 / 1.0e6, i / 12.0));
        const SourceRateSweep sweep =
            source_rate_sweep(config_a, fs_grid, config_a.overpass_from_theta(90.0),
                              default_spec, threads, &cache);
        h.check(!sweep.crit_above_grid, "no nonzero key on the whole rate grid");
        h.check(sweep.f_s_crit_hz > 0.0, "critical source rate is not positive");
        std::printf("       f_s_crit (system A, zenith) = %.3g Hz\n", sweep.f_s_crit_hz);
        bool zero_below = true, nonzero_above = true, monotone = true;
        double prev_norm = -1.0;
        for (const auto& pt : sweep.points) {
            if (pt.f_s_hz < sweep.f_s_crit_hz && pt.skl_bits != 0) zero_below = false;
            if (pt.f_s_hz >= sweep.f_s_crit_hz) {
                if (pt.skl_bits <= 0) nonzero_above = false;
                if (pt.skl_per_pulse < prev_norm - 1e-12) monotone = false;
                prev_norm = pt.skl_per_pulse;
            }
        }
        h.check(zero_below, "nonzero key below the critical rate");
        h.check(nonzero_above, "zero key above the critical rate");
        h.check(monotone, "normalized SKL not nondecreasing above the critical rate");
        h.check(5.0e8 > sweep.f_s_crit_hz, "500 MHz is not above the critical rate for system A");
        for (auto [qi, pec, name] : {std::tuple{0.005, 1.0e-8, "B"}, {0.005, 1.0e-7, "D"}}) {
            const SystemConfig cfg = system_config(qi, pec);
            const auto r = optimize_pass(cfg.orbit, cfg.overpass_from_theta(90.0), cfg.system,
                                         cfg.atmosphere, default_spec, cfg.source, cfg.security,
                                         &cache);
            h.check(r.best_key.skl_bits > 0,
                    fmt("system %s yields no key at 500 MHz zenith", name));
        }
        h.finish();
    }

    // ---------------------------------------------------------------- 8
    h.begin(8, "intensity uncertainty: worst case below nominal; annual reduction factors");
    std::vector<std::int64_t> worst5, worst10;
    double factor5 = 0.0, factor10 = 0.0;
    {
        const SweepCurve& nominal = selection.optimized_curve;
        const double annual_nominal = selection.optimized_annual_skl_bits;
        UncertaintySpec u5;
        u5.fraction = 0.05;
        UncertaintySpec u10;
        u10.fraction = 0.10;
        const double annual5 =
            annual_from_worst(config_d, nominal, u5, latitude, threads, &cache, &worst5);
        const double annual10 =
            annual_from_worst(config_d, nominal, u10, latitude, threads, &cache, &worst10);
        for (std::size_t i = 0; i < nominal.points.size(); ++i) {
            h.check(worst5[i] <= nominal.points[i].key.skl_bits,
                    "worst-case SKL exceeds nominal at f = 5%");
            h.check(worst10[i] <= nominal.points[i].key.skl_bits,
                    "worst-case SKL exceeds nominal at f = 10%");
        }
        factor5 = annual5 > 0.0 ? annual_nominal / annual5 :
                                  std::numeric_limits<double>::infinity();
        factor10 = annual10 > 0.0 ? annual_nominal / annual10 :
                                    std::numeric_limits<double>::infinity();
        std::printf("       annual reduction factors: f=5%% -> %.2f, f=10%% -> %.2f\n", factor5,
                    factor10);
        h.check(factor5 >= 1.3 && factor5 <= 3.0,
                fmt("f=5%% annual reduction factor %.2f outside [1.3, 3]", factor5));
        h.check(factor10 >= 15.0 && factor10 <= 120.0,
                fmt("f=10%% annual reduction factor %.2f outside [15, 120]", factor10));
        h.finish();
    }

    // ---------------------------------------------------------------- 9
    h.begin(9, "error-correction leakage oracle equivalence");
    {
        for (double n : {300.0, 3163.0, 1.0e4, 1.0e5})
            for (double q : {0.005, 0.01, 0.05, 0.2}) {
                const double impl = error_correction_bits(n, q, 1e-15);
                const double oracle = lambda_ec_oracle(n, q, 1e-15);
                h.check(std::abs(impl - oracle) <= 1e-3 * oracle,
                        fmt("lambda_EC(%g, %g) = %.4f vs oracle %.4f (>0.1%%)", n, q, impl,
                            oracle));
            }
        const double f12 =
            error_correction_bits(1.0e12, 0.01, 1e-15) / (1.0e12 * binary_entropy(0.01));
        h.check(f12 < 1.02, fmt("f_EC(1e12, 1%%) = %.5f not below 1.02", f12));
        double prev = 2.0;
        for (double n = 1.0e6; n <= 1.000001e12; n *= 10.0) {
            const double f = error_correction_bits(n, 0.01, 1e-15) / (n * binary_entropy(0.01));
            h.check(f < prev, fmt("f_EC not decreasing at n = %g", n));
            prev = f;
        }
        h.finish();
    }

    // ---------------------------------------------------------------- 10
    h.begin(10, "decoy bounds vs analytic Poisson yields (deviations disabled)");
    {
        ProtocolParams params;
        params.p_x_a = params.p_x_b = 0.8;
        params.p_mu = {0.6, 0.25, 0.15};
        params.mu = {0.15, 0.05, 0.0};
        params.delta_t_s = 0.0;
        SourceSpec src;
        src.intrinsic_qber = 0.0;
        src.extraneous_count_prob = 0.0;
        src.afterpulse_prob = 0.0;
        ChannelTrace channel;
        channel.pass.time_step_s = 1.0;
        channel.pass.samples = {{0.0, deg2rad(90.0), 500.0e3}};
        channel.efficiency = {1.0e-3};
        const BlockCounts block = accumulate_block(channel, params, src);
        const auto est = decoy_bounds(block, params, SecurityParams{}, DeviationMode::none);
        double tau1 = 0.0, tau0 = 0.0;
        for (int k = 0; k < 3; ++k) {
            tau0 += params.p_mu[k] * std::exp(-params.mu[k]);
            tau1 += params.p_mu[k] * std::exp(-params.mu[k]) * params.mu[k];
        }
        const double n_x_slots = src.rate_hz * params.p_x_a * params.p_x_b;
        const double true_s1 = n_x_slots * tau1 * 1.0e-3;
        h.check(std::abs(est.s_x1 - true_s1) <= 0.01 * true_s1,
                fmt("s_X1 = %.1f vs Poisson %.1f (>1%%)", est.s_x1, true_s1));
        h.check(est.s_x0 == 0.0, "noise-free vacuum bound is not zero");

        src.extraneous_count_prob = 1.0e-6;
        const BlockCounts noisy = accumulate_block(channel, params, src);
        const auto est2 = decoy_bounds(noisy, params, SecurityParams{}, DeviationMode::none);
        const double true_s0 = n_x_slots * tau0 * 2.0 * src.extraneous_count_prob;
        h.check(std::abs(est2.s_x0 - true_s0) <= 0.01 * true_s0,
                fmt("s_X0 = %.3f vs Poisson %.3f (>1%%)", est2.s_x0, true_s0));
        h.finish();
    }

    // ---------------------------------------------------------------- 11
    h.begin(11, "property suite");
    {
        // SKL >= 0 and monotone nonincreasing over the offset sweep.
        std::int64_t prev = std::numeric_limits<std::int64_t>::max();
        for (const auto& pt : selection.optimized_curve.points) {
            h.check(pt.key.skl_bits >= 0, "negative SKL on the optimized curve");
            h.check(pt.key.skl_bits <= prev, fmt("SKL(d_min) not monotone at d = %.3g", pt.d_min_m));
            prev = pt.key.skl_bits;
        }
        // Buffer monotonicity, pointwise.
        for (std::size_t i = 0; i < grid33.size(); ++i) {
            h.check(curve8.points[i].key.skl_bits <= curve32.points[i].key.skl_bits,
                    "SKL not nondecreasing from 8 GB to 32 GB");
            h.check(curve32.points[i].key.skl_bits <=
                        selection.optimized_curve.points[i].key.skl_bits,
                    "SKL not nondecreasing from 32 GB to unconstrained");
        }
        // Uncertainty worst case nonincreasing in f.
        for (std::size_t i = 0; i < worst5.size(); ++i)
            h.check(worst10[i] <= worst5[i], "worst-case SKL not nonincreasing in f");
        // Offset/elevation round trip.
        const OrbitSpec orbit;
        for (double deg = 10.1; deg <= 90.0; deg += 0.437) {
            const double d = offset_from_theta_max(deg, orbit);
            if (d == 0.0) continue;
            const double back = theta_max_from_offset(d, orbit);
            h.check(std::abs(back - deg) / deg < 1e-6,
                    fmt("round trip failed at theta_max = %.3f", deg));
        }
        // Parseval check.
        const OpticalSystem sys;
        const double frac = collected_power_fraction(sys, 50.0 / sys.tx_diameter_m);
        h.check(frac >= 0.99 && frac <= 1.0001, fmt("Parseval fraction %.5f outside [0.99, 1]", frac));
        // Byte-identical reruns under different thread counts.
        OptimizationSpec quick = default_spec;
        quick.restarts = 2;
        quick.delta_t_grid_size = 8;
        const std::vector<double> small_grid{0.0, 0.4e6, 0.8e6, 1.2e6};
        const SweepCurve c1 = sweep_dmin(config_d, small_grid, quick, 1, &cache);
        const SweepCurve c4 = sweep_dmin(config_d, small_grid, quick, 4, &cache);
        for (std::size_t i = 0; i < small_grid.size(); ++i) {
            h.check(c1.points[i].key.skl_bits == c4.points[i].key.skl_bits &&
                        c1.points[i].key.skl_real == c4.points[i].key.skl_real &&
                        c1.points[i].params.p_x_a == c4.points[i].params.p_x_a,
                    "thread count changed sweep results");
        }
        const double dt = h.finish();
        if (dt > 300.0) std::printf("       note: property suite took %.0f s (budget 300 s)\n", dt);
    }

    std::printf("\n%d of 11 criteria passed\n", 11 - h.failures);
    return h.failures == 0 ? 0 : 1;
}
