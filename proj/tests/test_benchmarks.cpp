#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "razcert/envs.hpp"
#include "razcert/system.hpp"

using namespace razcert;

namespace {

/// Rolls one nominal closed-loop step from the declared equilibrium and
/// returns the worst coordinate drift.
double equilibrium_drift(const BuiltEnv& env) {
    std::vector<Vec> eq;
    for (const auto& a : env.system.agents) eq.push_back(a.equilibrium);
    DelayHistory h0 = pad_history(env.system, eq);
    Trajectory t = rollout(env.system, *env.nominal, h0, {}, 3, env.sample_period);
    double worst = 0.0;
    for (const auto& step : t.states)
        for (std::size_t i = 0; i < step.size(); ++i)
            for (std::size_t q = 0; q < step[i].size(); ++q)
                worst = std::max(worst, std::abs(step[i][q] - eq[i][q]));
    return worst;
}

/// Open-loop secant slopes of one agent's step map over (own, u, nbrs, d)
/// against the declared bound.
double worst_secant(const InterconnectedSystem& system, int agent, const Box& state_box,
                    const Box& control_box, int trials, std::uint64_t seed) {
    Rng rng(seed);
    const AgentSpec& a = system.agents[std::size_t(agent)];
    const auto& nbrs = system.graph.neighbors[std::size_t(agent)];

    auto neighbor_box = [&](int j) {
        Box b(system.agents[std::size_t(j)].equilibrium, system.agents[std::size_t(j)].equilibrium);
        for (std::size_t q = 0; q < b.dim(); ++q) {
            double half = 0.5 * (state_box.hi[q] - state_box.lo[q]);
            b.lo[q] -= half;
            b.hi[q] += half;
        }
        return b;
    };

    struct Point {
        Vec own, u, d;
        std::vector<Vec> nb;
    };
    auto draw = [&]() {
        Point p;
        p.own = rng.uniform_in(state_box);
        p.u = rng.uniform_in(control_box);
        for (int j : nbrs) p.nb.push_back(rng.uniform_in(neighbor_box(j)));
        p.d = rng.uniform_in(a.disturbance_box);
        return p;
    };
    auto sq_dist = [](const Vec& x, const Vec& y) {
        double s = 0.0;
        for (std::size_t q = 0; q < x.size(); ++q) s += (x[q] - y[q]) * (x[q] - y[q]);
        return s;
    };

    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Point p1 = draw(), p2 = draw();
        double dz2 = sq_dist(p1.own, p2.own) + sq_dist(p1.u, p2.u) + sq_dist(p1.d, p2.d);
        for (std::size_t j = 0; j < p1.nb.size(); ++j) dz2 += sq_dist(p1.nb[j], p2.nb[j]);
        if (dz2 < 1e-16) continue;
        Vec f1 = a.dynamics->step(p1.own, p1.u, p1.nb, p1.d);
        Vec f2 = a.dynamics->step(p2.own, p2.u, p2.nb, p2.d);
        worst = std::max(worst, std::sqrt(sq_dist(f1, f2) / dz2));
    }
    return worst;
}

}  // namespace

TEST_CASE("platoon_step: spacing and velocity updates") {
    PlatoonParams p;
    SUBCASE("matched speeds keep the spacing") {
        auto [s, v] = platoon_step(p, 20.0, 10.0, 0.3, 10.0, 0.0, false);
        CHECK(s == 20.0);
        CHECK(v == doctest::Approx(10.03));
    }
    SUBCASE("hand-evaluated CAV update") {
        auto [s, v] = platoon_step(p, 20.0, 10.0, 0.0, 12.0, 0.0, false);
        CHECK(s == doctest::Approx(20.2).epsilon(1e-14));
        CHECK(v == 10.0);
    }
    SUBCASE("OVM holds its numerically solved fixed point") {
        // solve V(s*) = v_target by bisection, then check v' = v at the point
        double v_target = 7.0;
        double lo = 0.0, hi = 100.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (p.ovm_desired_speed(mid) < v_target ? lo : hi) = mid;
        }
        double s_star = 0.5 * (lo + hi);
        REQUIRE(p.ovm_desired_speed(s_star) == doctest::Approx(v_target).epsilon(1e-10));
        auto [s, v] = platoon_step(p, s_star, v_target, 99.0 /*ignored*/, v_target, 0.0, true);
        CHECK(s == doctest::Approx(s_star).epsilon(1e-12));
        CHECK(v == doctest::Approx(v_target).epsilon(1e-10));
    }
}

TEST_CASE("microgrid_power: loads, sign symmetry, two-node line") {
    MicrogridParams p;
    p.inverter_count = 2;
    p.loads = {0.2, 0.2};
    std::vector<double> voltages{1.0, 1.0};
    SUBCASE("equal angles inject exactly the loads") {
        CHECK(microgrid_power(p, {0.3, 0.3}, voltages, 0) == 0.2);
        CHECK(microgrid_power(p, {0.3, 0.3}, voltages, 1) == 0.2);
    }
    SUBCASE("swapping angles flips the edge term") {
        double p01 = microgrid_power(p, {0.1, 0.0}, voltages, 0) - 0.2;
        double p10 = microgrid_power(p, {0.0, 0.1}, voltages, 0) - 0.2;
        CHECK(p01 == doctest::Approx(-p10).epsilon(1e-15));
    }
    SUBCASE("hand-evaluated two-node injection") {
        CHECK(microgrid_power(p, {0.1, 0.0}, voltages, 0) ==
              doctest::Approx(0.2 + std::sin(0.1)).epsilon(1e-15));
    }
    SUBCASE("pairwise cancellation sums injections to the loads") {
        for (double delta : {0.0, 0.13, -0.4}) {
            double total = microgrid_power(p, {delta, delta}, voltages, 0) +
                           microgrid_power(p, {delta, delta}, voltages, 1);
            CHECK(total == doctest::Approx(0.4).epsilon(1e-15));
        }
        double total = microgrid_power(p, {0.3, -0.2}, voltages, 0) +
                       microgrid_power(p, {0.3, -0.2}, voltages, 1);
        CHECK(total == doctest::Approx(0.4).epsilon(1e-12));
    }
}

TEST_CASE("microgrid_step: fixed point, frequency response, integrator") {
    MicrogridParams p;
    p.sample_period = 0.01;
    p.time_constant = 0.1;
    p.droop_gain = 0.5;
    SUBCASE("equilibrium is a fixed point") {
        Vec x{0.0, p.nominal_frequency, 0.0};
        Vec next = microgrid_step(p, x, 0.0, {}, {}, 0.2, 0.2, 0.0);
        CHECK(next[1] == p.nominal_frequency);
        CHECK(next[2] == 0.0);
    }
    SUBCASE("unit power excess pulls the frequency down by eta T / tau") {
        Vec x{0.0, p.nominal_frequency, 0.0};
        // load - setpoint = 1 with no neighbors
        Vec next = microgrid_step(p, x, 0.0, {}, {}, 0.2, 1.2, 0.0);
        CHECK(next[1] == doctest::Approx(p.nominal_frequency - 0.05).epsilon(1e-14));
    }
    SUBCASE("xi integrates the control") {
        Vec x{0.1, 1.3, 0.5};
        Vec next = microgrid_step(p, x, 2.0, {}, {}, 0.2, 0.2, 0.0);
        CHECK(next[2] == doctest::Approx(0.52).epsilon(1e-15));
    }
}

TEST_CASE("drone_step and the circular leader generator") {
    SUBCASE("at rest with no input the position is unchanged") {
        auto [p2, v2] = drone_step(0.1, {1.0, 2.0, 3.0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0});
        CHECK(p2 == Vec{1.0, 2.0, 3.0});
        CHECK(v2 == Vec{0.0, 0.0, 0.0});
    }
    SUBCASE("hand-evaluated position update") {
        auto [p2, v2] = drone_step(0.1, {0, 0, 0}, {1.0, 0, 0}, {0, 0, 0}, {0, 0, 0});
        CHECK(p2[0] == doctest::Approx(0.1).epsilon(1e-15));
        CHECK(p2[1] == 0.0);
    }
    SUBCASE("circle control keeps the speed constant to 1e-9 over 100 steps") {
        DroneParams dp;
        Vec p{0, 0, 0}, v{dp.circle_speed, 0, 0};
        double speed0 = norm2(v);
        for (int k = 0; k < 100; ++k) {
            Vec u = leader_circle_control(dp, v);
            auto [p2, v2] = drone_step(dp.sample_period, p, v, u, {0, 0, 0});
            p = p2;
            v = v2;
            CHECK(std::abs(norm2(v) - speed0) < 1e-9);
        }
    }
}

TEST_CASE("nominal policies: zero error gives zero control, hand cases") {
    SUBCASE("platoon gains (0.1, 0.5, 0.2) on errors (2, -1, 1)") {
        PlatoonParams p;
        p.cav_set = {0, 1};
        BuiltEnv env = build_platoon(p, 2);
        Vec own{p.eq_spacing + 2.0, p.eq_velocity - 1.0};
        // v_pred - v = 1
        Vec pred{p.eq_spacing, own[1] + 1.0};
        Vec u = env.nominal->control(1, own, {pred});
        CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-14));
        Vec zero_u = env.nominal->control(1, Vec{p.eq_spacing, p.eq_velocity},
                                          {Vec{p.eq_spacing, p.eq_velocity}});
        CHECK(zero_u[0] == 0.0);
    }
    SUBCASE("microgrid k_omega = 1 on a 0.5 offset") {
        MicrogridParams p;
        p.k_omega = 1.0;
        p.k_xi = 0.2;
        BuiltEnv env = build_microgrid(p);
        Vec own{0.0, p.nominal_frequency + 0.5, 0.0};
        Vec u = env.nominal->control(0, own, {});
        CHECK(u[0] == doctest::Approx(-0.5).epsilon(1e-14));
    }
    SUBCASE("drone zero formation error") {
        DroneParams p;
        BuiltEnv env = build_drone(p);
        const Vec& eq1 = env.system.agents[1].equilibrium;
        const Vec& eq0 = env.system.agents[0].equilibrium;
        Vec u = env.nominal->control(1, eq1, {eq0});
        CHECK(norm2(u) == 0.0);
    }
}

TEST_CASE("environment invariants: fixed points to 1e-12") {
    PlatoonParams pp;
    pp.cav_set = {0, 2};
    pp.hdv_set = {1};
    // put the HDV equilibrium on the OVM fixed point: V(shalf) = vfree/2
    pp.eq_spacing = pp.ovm_shalf;
    pp.eq_velocity = 0.5 * pp.ovm_vfree;
    CHECK(equilibrium_drift(build_platoon(pp, 3)) < 1e-12);

    DroneParams dp;
    CHECK(equilibrium_drift(build_drone(dp)) < 1e-12);

    MicrogridParams mp;
    CHECK(equilibrium_drift(build_microgrid(mp)) < 1e-12);
}

TEST_CASE("declared Lipschitz bounds dominate random secants") {
    PlatoonParams pp;
    pp.cav_set = {0, 2};
    pp.hdv_set = {1};
    BuiltEnv platoon = build_platoon(pp, 3);
    Box pbox({pp.eq_spacing - 10.0, pp.eq_velocity - 5.0}, {pp.eq_spacing + 10.0, pp.eq_velocity + 5.0});
    for (int agent : {0, 1, 2}) {
        double w = worst_secant(platoon.system, agent, pbox, Box::centered(1, 3.0), 100000, 31 + agent);
        CHECK(w <= platoon.system.agents[std::size_t(agent)].lipschitz_f);
    }

    MicrogridParams mp;
    BuiltEnv grid = build_microgrid(mp);
    Box gbox({-0.5, mp.nominal_frequency - 0.5, -0.5}, {0.5, mp.nominal_frequency + 0.5, 0.5});
    for (int agent = 0; agent < grid.system.agent_count(); ++agent) {
        double w = worst_secant(grid.system, agent, gbox, Box::centered(1, 1.0), 100000, 41 + agent);
        CHECK(w <= grid.system.agents[std::size_t(agent)].lipschitz_f);
    }

    DroneParams dp;
    BuiltEnv drone = build_drone(dp);
    Box dbox(Vec(6, -2.0), Vec(6, 2.0));
    double w = worst_secant(drone.system, 1, dbox, Box::centered(3, 2.0), 100000, 53);
    CHECK(w <= drone.system.agents[1].lipschitz_f);
}

TEST_CASE("environment construction rejects invalid setups") {
    PlatoonParams pp;
    pp.cav_set = {0};
    pp.hdv_set = {0};
    CHECK_THROWS_AS(build_platoon(pp, 1), ConfigError);

    MicrogridParams mp;
    mp.inverter_count = 3;
    mp.lines = {{0, 1}, {1, 2}, {2, 0}};  // cycle, not radial
    CHECK_THROWS_AS(build_microgrid(mp), ConfigError);

    DroneParams dp;
    dp.follower_count = 2;
    dp.offsets = {{-2, 0, 0}, {-2, 0, 0}};  // duplicate offsets
    CHECK_THROWS_AS(build_drone(dp), ConfigError);
}
