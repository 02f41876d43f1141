// Command-line front end: one subcommand per study, CSV tables out.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "satqkd/satqkd.hpp"

namespace {

using namespace satqkd;

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 42;
    int threads = 0;
    bool to_stdout = false;
};

struct Runtime {
    LoadedConfig loaded;
    DiffractionCache cache;
    CommonArgs args;

    const SystemConfig& config() const { return loaded.config; }
    std::uint64_t config_hash() const { return fnv1a_hash(loaded.canonical_text); }
    int threads() const {
        if (args.threads > 0) return args.threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    const char* env = std::getenv("SATQKD_CONFIG");
    if (env) args.config_path = env;
    cmd->add_option("--config", args.config_path, "configuration file path");
    cmd->add_option("--out", args.out_path, "output CSV path");
    cmd->add_option("--seed", args.seed, "optimizer seed")->capture_default_str();
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    cmd->add_flag("--stdout", args.to_stdout, "write the CSV to stdout");
}

Runtime make_runtime(const CommonArgs& args) {
    return Runtime{args.config_path.empty() ? config_from_values(ConfigFile::parse_text(""))
                                            : load_config(args.config_path),
                   DiffractionCache{}, args};
}

void emit(const Runtime& rt, const ResultTable& table) {
    if (!rt.args.out_path.empty()) {
        write_results(table, rt.args.out_path);
        std::fprintf(stderr, "[satqkd] wrote %zu rows to %s\n", table.row_count(),
                     rt.args.out_path.c_str());
    }
    if (rt.args.to_stdout) std::fputs(table.to_csv().c_str(), stdout);
    if (rt.args.out_path.empty() && !rt.args.to_stdout)
        std::fputs(table.to_csv().c_str(), stdout);
}

OptimizationSpec base_opt_spec(const Runtime& rt) {
    OptimizationSpec spec;
    spec.seed = rt.args.seed;
    return spec;
}

std::vector<double> parse_grid(const std::string& text, const std::string& what) {
    // "lo:hi:count" (linear), "lo:hi:countlog" (log), or comma list.
    std::vector<double> grid;
    const auto c1 = text.find(':');
    if (c1 != std::string::npos) {
        const auto c2 = text.find(':', c1 + 1);
        if (c2 == std::string::npos)
            throw ConfigError(what + ": expected lo:hi:count, got '" + text + "'");
        const double lo = std::stod(text.substr(0, c1));
        const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
        std::string tail = text.substr(c2 + 1);
        bool log = false;
        if (tail.size() > 3 && tail.substr(tail.size() - 3) == "log") {
            log = true;
            tail = tail.substr(0, tail.size() - 3);
        }
        const int count = std::stoi(tail);
        if (count < 2 || hi <= lo) throw ConfigError(what + ": bad grid '" + text + "'");
        for (int i = 0; i < count; ++i) {
            const double t = static_cast<double>(i) / (count - 1);
            grid.push_back(log ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
        }
        return grid;
    }
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        grid.push_back(std::stod(text.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (grid.empty()) throw ConfigError(what + ": empty grid");
    return grid;
}

std::vector<double> resolve_dmin_grid(Runtime& rt, const std::string& dmin_grid_arg,
                                      const OptimizationSpec& spec, int points) {
    if (!dmin_grid_arg.empty()) return parse_grid(dmin_grid_arg, "--dmin-grid");
    std::fprintf(stderr, "[satqkd] probing footprint for the default offset grid...\n");
    return default_dmin_grid(rt.config(), spec, points, rt.threads(), &rt.cache);
}

int cmd_pass(Runtime& rt, double theta_max, std::optional<double> dmin) {
    const SystemConfig& cfg = rt.config();
    OverpassSpec over = dmin ? cfg.overpass_from_offset(*dmin)
                             : cfg.overpass_from_theta(theta_max);
    const ChannelTrace trace =
        make_channel_trace(cfg.system, cfg.atmosphere, cfg.orbit, over, &rt.cache);
    const OptimizationResult r =
        optimize_pass(trace, base_opt_spec(rt), cfg.source, cfg.security);

    ResultTable table({{"d_min", "m"},
                       {"theta_max", "deg"},
                       {"duration", "s"},
                       {"skl_bits", ""},
                       {"delta_t", "s"},
                       {"qber", ""},
                       {"lambda_ec_bits", ""},
                       {"n_x", ""},
                       {"s_x0", ""},
                       {"s_x1", ""},
                       {"phi_x", ""},
                       {"f_ec_est", ""},
                       {"p_x_a", ""},
                       {"p_x_b", ""},
                       {"p_mu1", ""},
                       {"p_mu2", ""},
                       {"mu1", ""},
                       {"mu2", ""},
                       {"evaluations", ""}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "pass");
    const auto& k = r.best_key;
    const auto& p = r.best_params;
    table.add_row({trace.pass.d_min_m, trace.pass.theta_max_deg, trace.duration_s(),
                   static_cast<double>(k.skl_bits), p.delta_t_s, k.qber, k.lambda_ec_bits, k.n_x,
                   k.s_x0, k.s_x1, k.phi_x, k.f_ec_estimate, p.p_x_a, p.p_x_b, p.p_mu[0],
                   p.p_mu[1], p.mu[0], p.mu[1], static_cast<double>(r.evaluations)});
    emit(rt, table);
    return 0;
}

int cmd_sweep(Runtime& rt, const std::string& dmin_grid_arg, int points) {
    const OptimizationSpec spec = base_opt_spec(rt);
    const auto grid = resolve_dmin_grid(rt, dmin_grid_arg, spec, points);
    const SweepCurve curve = sweep_dmin(rt.config(), grid, spec, rt.threads(), &rt.cache);

    ResultTable table({{"d_min", "m"},
                       {"theta_max", "deg"},
                       {"skl_bits", ""},
                       {"delta_t", "s"},
                       {"qber", ""},
                       {"lambda_ec_bits", ""}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "sweep");
    for (const auto& pt : curve.points)
        table.add_row({pt.d_min_m, pt.theta_max_deg, static_cast<double>(pt.key.skl_bits),
                       pt.params.delta_t_s, pt.key.qber, pt.key.lambda_ec_bits});
    emit(rt, table);
    return 0;
}

int cmd_annual(Runtime& rt, const std::string& dmin_grid_arg, int points, double latitude,
               const std::vector<double>& buffer_gb) {
    OptimizationSpec spec = base_opt_spec(rt);
    const auto grid = resolve_dmin_grid(rt, dmin_grid_arg, spec, points);

    ResultTable table({{"buffer", "GB"},
                       {"t_max", "s"},
                       {"latitude", "deg"},
                       {"skl_int", "bit m"},
                       {"annual_skl", "bit"}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "annual");

    std::vector<double> buffers = buffer_gb;
    if (buffers.empty()) buffers.push_back(0.0);  // 0 = unconstrained
    for (double gb : buffers) {
        OptimizationSpec spec_b = spec;
        double t_max = 0.0;
        if (gb > 0.0) {
            BufferSpec buf{gb * 1e9, 4.0};
            t_max = buf.max_transmission_s(rt.config().source.rate_hz);
            spec_b.delta_t_cap_s = t_max / 2.0;
        }
        const SweepCurve curve = sweep_dmin(rt.config(), grid, spec_b, rt.threads(), &rt.cache);
        const double integral = skl_integral(curve);
        table.add_row({gb, t_max, latitude, integral,
                       annual_skl(integral, latitude, rt.config().orbit)});
    }
    emit(rt, table);
    return 0;
}

int cmd_fixed_select(Runtime& rt, const std::string& dmin_grid_arg, int points, double latitude) {
    const OptimizationSpec spec = base_opt_spec(rt);
    const auto grid = resolve_dmin_grid(rt, dmin_grid_arg, spec, points);
    const FixedParameterSelection sel =
        select_fixed_params(rt.config(), grid, spec, latitude, rt.threads(), &rt.cache);

    ResultTable table({{"candidate_d_min", "m"},
                       {"p_x_b", ""},
                       {"mu1", ""},
                       {"mu2", ""},
                       {"skl_int", "bit m"},
                       {"annual_skl", "bit"},
                       {"selected", ""}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "fixed-select");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", sel.optimized_annual_skl_bits);
    table.add_metadata("fully_optimized_annual_skl_bit", buf);
    for (const auto& cand : sel.candidates)
        table.add_row({cand.d_min_m, cand.p_x_b, cand.mu1, cand.mu2, cand.skl_int_bit_m,
                       cand.annual_skl_bits,
                       cand.index == sel.selected.index ? 1.0 : 0.0});
    emit(rt, table);
    return 0;
}

int cmd_source_rate(Runtime& rt, const std::string& fs_grid_arg, double theta_max) {
    const auto grid = parse_grid(fs_grid_arg, "--fs-grid");
    const SourceRateSweep sweep =
        source_rate_sweep(rt.config(), grid, rt.config().overpass_from_theta(theta_max),
                          base_opt_spec(rt), rt.threads(), &rt.cache);

    ResultTable table({{"f_s", "Hz"}, {"skl_bits", ""}, {"skl_per_pulse", ""}, {"delta_t", "s"}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "source-rate");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", sweep.f_s_crit_hz);
    table.add_metadata(sweep.crit_above_grid ? "f_s_crit_hz_above_grid" : "f_s_crit_hz", buf);
    for (const auto& pt : sweep.points)
        table.add_row({pt.f_s_hz, static_cast<double>(pt.skl_bits), pt.skl_per_pulse,
                       pt.delta_t_s});
    emit(rt, table);
    return 0;
}

int cmd_buffer(Runtime& rt, const std::vector<double>& buffer_gb, double theta_max,
               bool find_min) {
    const SystemConfig& cfg = rt.config();
    const OverpassSpec over = cfg.overpass_from_theta(theta_max);

    ResultTable table({{"buffer", "GB"},
                       {"t_max", "s"},
                       {"theta_max", "deg"},
                       {"skl_bits", ""},
                       {"delta_t", "s"},
                       {"min_window", "s"},
                       {"min_buffer", "GB"}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "buffer");

    MinBufferResult min_result;
    if (find_min) min_result = min_buffer(cfg, over, base_opt_spec(rt), 4.0, &rt.cache);

    for (double gb : buffer_gb) {
        const BufferResult r =
            buffer_constraints(cfg, BufferSpec{gb * 1e9, 4.0}, over, base_opt_spec(rt), &rt.cache);
        table.add_row({gb, r.t_max_s, theta_max, static_cast<double>(r.key.skl_bits),
                       r.params.delta_t_s, find_min ? min_result.t_min_s : 0.0,
                       find_min ? min_result.buffer_bytes / 1e9 : 0.0});
    }
    emit(rt, table);
    return 0;
}

int cmd_uncertainty(Runtime& rt, double fraction, const std::string& dmin_grid_arg, int points,
                    double latitude) {
    const OptimizationSpec spec = base_opt_spec(rt);
    const auto grid = resolve_dmin_grid(rt, dmin_grid_arg, spec, points);
    UncertaintySpec uspec;
    uspec.fraction = fraction;
    const UncertaintySweep sweep =
        uncertainty_sweep(rt.config(), grid, spec, uspec, latitude, rt.threads(), &rt.cache);

    ResultTable table({{"d_min", "m"},
                       {"theta_max", "deg"},
                       {"fraction", ""},
                       {"skl_nominal_bits", ""},
                       {"skl_worst_bits", ""}},
                      rt.config_hash(), rt.args.seed);
    table.add_metadata("subcommand", "uncertainty");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", sweep.annual_nominal_bits);
    table.add_metadata("annual_nominal_bit", buf);
    std::snprintf(buf, sizeof buf, "%.9g", sweep.annual_worst_bits);
    table.add_metadata("annual_worst_bit", buf);
    for (const auto& pt : sweep.points)
        table.add_row({pt.d_min_m, pt.theta_max_deg, fraction,
                       static_cast<double>(pt.skl_nominal_bits),
                       static_cast<double>(pt.skl_worst_bits)});
    emit(rt, table);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Satellite decoy-state BB84 finite-key simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    double theta_max = 90.0;
    std::optional<double> dmin;
    std::string dmin_grid_arg;
    std::string fs_grid_arg = "1e6:2e9:25log";
    int grid_points = 33;
    double latitude = 55.9;
    double fraction = 0.05;
    std::vector<double> buffer_gb;
    bool find_min = false;

    auto* pass = app.add_subcommand("pass", "optimise a single overpass");
    add_common(pass, args);
    pass->add_option("--theta-max", theta_max, "maximum elevation (deg)")
        ->check(CLI::Range(0.0, 90.0))
        ->capture_default_str();
    pass->add_option("--dmin", dmin, "ground-track offset (m), overrides --theta-max");

    auto* sweep = app.add_subcommand("sweep", "SKL vs ground-track offset");
    add_common(sweep, args);
    sweep->add_option("--dmin-grid", dmin_grid_arg, "lo:hi:count, lo:hi:countlog or comma list");
    sweep->add_option("--points", grid_points, "auto-grid size")->capture_default_str();

    auto* annual = app.add_subcommand("annual", "expected annual SKL");
    add_common(annual, args);
    annual->add_option("--dmin-grid", dmin_grid_arg, "offset grid");
    annual->add_option("--points", grid_points, "auto-grid size")->capture_default_str();
    annual->add_option("--latitude", latitude, "OGS latitude (deg)")
        ->check(CLI::Range(-89.9, 89.9))
        ->capture_default_str();
    annual->add_option("--buffer-gb", buffer_gb, "memory buffers to evaluate (GB; 0 = none)");

    auto* fixed = app.add_subcommand("fixed-select", "choose the ideal fixed parameter set");
    add_common(fixed, args);
    fixed->add_option("--dmin-grid", dmin_grid_arg, "offset grid");
    fixed->add_option("--points", grid_points, "auto-grid size")->capture_default_str();
    fixed->add_option("--latitude", latitude, "OGS latitude (deg)")->capture_default_str();

    auto* srate = app.add_subcommand("source-rate", "SKL vs source rate");
    add_common(srate, args);
    srate->add_option("--fs-grid", fs_grid_arg, "rate grid (Hz)")->capture_default_str();
    srate->add_option("--theta-max", theta_max, "maximum elevation (deg)")
        ->check(CLI::Range(0.0, 90.0))
        ->capture_default_str();

    auto* buffer = app.add_subcommand("buffer", "memory-buffer constrained pass");
    add_common(buffer, args);
    buffer->add_option("--buffer-gb", buffer_gb, "buffer sizes (GB)")->required();
    buffer->add_option("--theta-max", theta_max, "maximum elevation (deg)")
        ->check(CLI::Range(0.0, 90.0))
        ->capture_default_str();
    buffer->add_flag("--min-buffer", find_min, "also report the minimum buffer for a key");

    auto* unc = app.add_subcommand("uncertainty", "worst-case intensity uncertainty sweep");
    add_common(unc, args);
    unc->add_option("--fraction", fraction, "relative intensity uncertainty")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();
    unc->add_option("--dmin-grid", dmin_grid_arg, "offset grid");
    unc->add_option("--points", grid_points, "auto-grid size")->capture_default_str();
    unc->add_option("--latitude", latitude, "OGS latitude (deg)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Runtime rt = make_runtime(args);
        std::fprintf(stderr, "[satqkd] zenith system loss: %.3f dB\n", rt.loaded.zenith_loss_db);
        if (pass->parsed()) return cmd_pass(rt, theta_max, dmin);
        if (sweep->parsed()) return cmd_sweep(rt, dmin_grid_arg, grid_points);
        if (annual->parsed()) return cmd_annual(rt, dmin_grid_arg, grid_points, latitude, buffer_gb);
        if (fixed->parsed()) return cmd_fixed_select(rt, dmin_grid_arg, grid_points, latitude);
        if (srate->parsed()) return cmd_source_rate(rt, fs_grid_arg, theta_max);
        if (buffer->parsed()) return cmd_buffer(rt, buffer_gb, theta_max, find_min);
        if (unc->parsed()) return cmd_uncertainty(rt, fraction, dmin_grid_arg, grid_points, latitude);
        std::fprintf(stderr, "error: no subcommand\n");
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
