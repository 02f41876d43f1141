#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "satqkd/counts.hpp"

using namespace satqkd;

namespace {

SourceSpec reference_source() { return SourceSpec{}; }  // Table-style defaults

SourceSpec system_d() {
    SourceSpec s;
    s.extraneous_count_prob = 1.0e-7;
    return s;
}

const ChannelTrace& zenith_trace() {
    static const ChannelTrace trace = make_channel_trace(
        OpticalSystem{}, AtmosphereModel{}, OrbitSpec{}, OverpassSpec::from_theta_max(90.0));
    return trace;
}

ProtocolParams paper_params(double delta_t) {
    ProtocolParams p;
    p.p_x_a = p.p_x_b = 0.84;
    p.p_mu = {0.7, 0.2, 0.1};
    p.mu = {0.71, 0.14, 0.0};
    p.delta_t_s = delta_t;
    return p;
}

// Straight-line re-implementation of the accumulation loop.
BlockCounts accumulate_oracle(const ChannelTrace& trace, const ProtocolParams& params,
                              const SourceSpec& src) {
    BlockCounts block;
    block.delta_t_s = params.delta_t_s;
    const double n_slot = src.rate_hz * trace.time_step_s();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (std::abs(trace.pass.samples[i].t_s) > params.delta_t_s + 1e-9) continue;
        block.pulses_sent += n_slot;
        for (std::size_t k = 0; k < 3; ++k) {
            const auto [d, e] = slot_statistics(params.mu[k], trace.efficiency[i], src);
            const double base = n_slot * params.p_mu[k];
            block.n[0][k] += base * params.p_x_a * params.p_x_b * d;
            block.n[1][k] += base * (1.0 - params.p_x_a) * (1.0 - params.p_x_b) * d;
            block.m[0][k] += base * params.p_x_a * params.p_x_b * e;
            block.m[1][k] += base * (1.0 - params.p_x_a) * (1.0 - params.p_x_b) * e;
        }
    }
    return block;
}

}  // namespace

TEST_CASE("slot statistics closed forms") {
    const auto src = reference_source();

    SECTION("reference operating point") {
        const auto [d, e] = slot_statistics(0.71, 1.0e-4, src);
        CHECK(d == Catch::Approx(7.206940597079e-05).epsilon(1e-10));
        CHECK(e == Catch::Approx(8.558423851960e-07).epsilon(1e-10));
        CHECK(e / d == Catch::Approx(0.005).epsilon(1.5));  // QBER-dominated regime
    }
    SECTION("vacuum limit") {
        SourceSpec s = src;
        s.afterpulse_prob = 0.0;
        const auto [d, e] = slot_statistics(0.0, 0.5, s);
        CHECK(d == Catch::Approx(2.0 * s.extraneous_count_prob).epsilon(1e-12));
        CHECK(e == Catch::Approx(s.extraneous_count_prob).epsilon(1e-12));
    }
    SECTION("saturation limit") {
        const auto [d, e] = slot_statistics(500.0, 1.0, src);
        CHECK(d == 1.0);
        CHECK(e == Catch::Approx((src.extraneous_count_prob + src.intrinsic_qber) *
                                 (1.0 + src.afterpulse_prob)));
    }
    SECTION("error never exceeds detection") {
        for (double mu : {0.0, 0.1, 0.71, 2.0})
            for (double eta : {1e-6, 1e-4, 0.1, 1.0}) {
                const auto [d, e] = slot_statistics(mu, eta, src);
                CHECK(e <= d);
                CHECK(d <= 1.0);
            }
    }
    CHECK_THROWS_AS(slot_statistics(-0.1, 0.5, src), std::domain_error);
    CHECK_THROWS_AS(slot_statistics(0.5, 0.0, src), std::domain_error);
}

TEST_CASE("accumulated block matches the straight-line oracle") {
    const auto& trace = zenith_trace();
    const auto src = system_d();
    for (double dt : {0.0, 30.0, 221.0}) {
        const auto params = paper_params(dt);
        const BlockCounts fast = accumulate_block(trace, params, src);
        const BlockCounts slow = accumulate_oracle(trace, params, src);
        CHECK(fast.pulses_sent == Catch::Approx(slow.pulses_sent));
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(fast.n[b][k] == Catch::Approx(slow.n[b][k]).epsilon(1e-9));
                CHECK(fast.m[b][k] == Catch::Approx(slow.m[b][k]).epsilon(1e-9));
            }
    }
}

TEST_CASE("zero half-window keeps only the culmination slot") {
    const auto& trace = zenith_trace();
    const auto src = system_d();
    const auto params = paper_params(0.0);
    const BlockCounts block = accumulate_block(trace, params, src);
    CHECK(block.pulses_sent == Catch::Approx(src.rate_hz * 1.0));
    const double eta0 = trace.efficiency[trace.pass.culmination_index()];
    const auto [d1, e1] = slot_statistics(params.mu[0], eta0, src);
    CHECK(block.n[0][0] ==
          Catch::Approx(src.rate_hz * 0.7 * 0.84 * 0.84 * d1).epsilon(1e-12));
    CHECK(block.m[0][0] ==
          Catch::Approx(src.rate_hz * 0.7 * 0.84 * 0.84 * e1).epsilon(1e-12));
}

TEST_CASE("symmetric sifting splits bases evenly") {
    const auto& trace = zenith_trace();
    auto params = paper_params(100.0);
    params.p_x_a = params.p_x_b = 0.5;
    const BlockCounts block = accumulate_block(trace, params, system_d());
    CHECK(block.n_x_total() == Catch::Approx(block.n_z_total()).epsilon(1e-12));
    CHECK(block.m_x_total() == Catch::Approx(block.m_z_total()).epsilon(1e-12));
}

TEST_CASE("wider windows never lose counts and signals dominate decoys") {
    const auto& trace = zenith_trace();
    const auto src = system_d();
    double prev = 0.0;
    for (double dt : {0.0, 10.0, 50.0, 150.0, 221.0}) {
        const BlockCounts b = accumulate_block(trace, paper_params(dt), src);
        CHECK(b.n_x_total() >= prev);
        prev = b.n_x_total();
        CHECK(b.n[0][0] / 0.7 >= b.n[0][1] / 0.2);  // per-pulse: D_1 >= D_2
    }
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto [d1, e1] = slot_statistics(0.71, trace.efficiency[i], src);
        const auto [d2, e2] = slot_statistics(0.14, trace.efficiency[i], src);
        CHECK(d1 >= d2);
    }
}

TEST_CASE("accumulation is deterministic bit for bit") {
    const auto& trace = zenith_trace();
    const auto params = paper_params(120.0);
    const BlockCounts a = accumulate_block(trace, params, system_d());
    const BlockCounts b = accumulate_block(trace, params, system_d());
    CHECK(std::memcmp(&a.n, &b.n, sizeof a.n) == 0);
    CHECK(std::memcmp(&a.m, &b.m, sizeof a.m) == 0);
}

TEST_CASE("windows wider than the pass are clipped and flagged") {
    const auto& trace = zenith_trace();
    const BlockCounts b = accumulate_block(trace, paper_params(1.0e4), system_d());
    CHECK(b.window_clipped);
    const BlockCounts full = accumulate_block(trace, paper_params(221.0), system_d());
    CHECK(b.n_x_total() == Catch::Approx(full.n_x_total()));
}

TEST_CASE("qber accounting") {
    BlockCounts block;
    block.n[0] = {100.0, 50.0, 10.0};
    block.m[0] = {0.0, 0.0, 0.0};
    CHECK(qber(block) == 0.0);
    block.m[0] = {50.0, 25.0, 5.0};
    CHECK(qber(block) == Catch::Approx(0.5));
    BlockCounts empty;
    CHECK_THROWS_AS(qber(empty), std::domain_error);

    // widening the window toward low elevations raises the average QBER
    const auto& trace = zenith_trace();
    const auto src = system_d();
    const double q_small = qber(accumulate_block(trace, paper_params(20.0), src));
    const double q_big = qber(accumulate_block(trace, paper_params(221.0), src));
    CHECK(q_big > q_small);
    CHECK(q_small > src.intrinsic_qber * 0.9);
    CHECK(q_big < 0.05);
}

TEST_CASE("protocol parameter feasibility") {
    ProtocolParams p = paper_params(10.0);
    CHECK(p.feasible());
    p.mu[1] = 0.0;
    CHECK_FALSE(p.feasible());
    p = paper_params(10.0);
    p.mu = {0.15, 0.15, 0.0};
    CHECK_FALSE(p.feasible());  // boundary equality rejected
    p = paper_params(10.0);
    p.p_mu = {0.5, 0.5, 0.1};
    CHECK_FALSE(p.feasible());
    p = paper_params(10.0);
    p.mu[2] = 0.01;
    CHECK_FALSE(p.feasible());  // mu3 is pinned to vacuum
}
