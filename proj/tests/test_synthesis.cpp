#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grad_check.hpp"
#include "helpers.hpp"
#include "razcert/synthesis.hpp"

using namespace razcert;
using namespace razcert::testing;

namespace {

TrainingTuple tuple_for(const InterconnectedSystem& system, int agent,
                        const std::vector<std::vector<Vec>>& lag_states, const Vec& d) {
    DelayHistory h;
    h.lags = lag_states;
    LocalLayout lay = LocalLayout::for_agent(system, agent);
    TrainingTuple t;
    t.agent = agent;
    t.z = lay.pack(h, d);
    t.control = Vec(1, 0.0);
    t.next_state = Vec(1, 0.0);
    return t;
}

}  // namespace

TEST_CASE("project_gains: ReLU mask, row rescale, small rows untouched") {
    InterconnectionGraph g = InterconnectionGraph::from_edges(2, {{0, 1, 1}, {1, 0, 1}});
    SUBCASE("nonpositive entries vanish") {
        Matrix pure(2, 2);
        pure.at(0, 0) = -0.3;
        pure.at(0, 1) = 0.0;
        pure.at(1, 0) = -5.0;
        pure.at(1, 1) = -0.1;
        Matrix p = project_gains(pure, g, 0.1);
        for (double v : p.data) CHECK(v == 0.0);
    }
    SUBCASE("row (0.5, 0.6) with eps 0.1 rescales to sum 0.9") {
        Matrix pure(2, 2);
        pure.at(0, 0) = 0.5;
        pure.at(0, 1) = 0.6;
        Matrix p = project_gains(pure, g, 0.1);
        CHECK(p.at(0, 0) == doctest::Approx(0.409091).epsilon(1e-6));
        CHECK(p.at(0, 1) == doctest::Approx(0.490909).epsilon(1e-6));
        CHECK(p.at(0, 0) + p.at(0, 1) == doctest::Approx(0.9).epsilon(1e-12));
    }
    SUBCASE("row sums below 1-eps stay put") {
        Matrix pure(2, 2);
        pure.at(0, 0) = 0.2;
        pure.at(0, 1) = 0.1;
        Matrix p = project_gains(pure, g, 0.1);
        CHECK(p.at(0, 0) == 0.2);
        CHECK(p.at(0, 1) == 0.1);
    }
    SUBCASE("masked entries stay zero no matter the input") {
        InterconnectionGraph chain = InterconnectionGraph::from_edges(3, {{1, 0, 1}, {2, 1, 1}});
        Matrix pure(3, 3, 5.0);
        Matrix p = project_gains(pure, chain, 0.1);
        CHECK(p.at(0, 1) == 0.0);
        CHECK(p.at(0, 2) == 0.0);
        CHECK(p.at(1, 2) == 0.0);
        CHECK(p.at(2, 0) == 0.0);
    }
}

TEST_CASE("project_gains: random rows always satisfy the small-gain bound") {
    Rng rng(101);
    for (int trial = 0; trial < 500; ++trial) {
        int n = 2 + int(rng.next_u64() % 7);
        std::vector<std::array<int, 3>> edges;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && rng.uniform() < 0.4) edges.push_back({i, j, 1});
        InterconnectionGraph g = InterconnectionGraph::from_edges(n, edges);
        double eps = rng.uniform(0.01, 0.9);
        const std::size_t nn = std::size_t(n);
        Matrix pure(nn, nn);
        for (double& v : pure.data) v = rng.uniform(-2.0, 4.0);
        Matrix p = project_gains(pure, g, eps);
        for (int i = 0; i < n; ++i) {
            double row = p.at(std::size_t(i), std::size_t(i));
            for (int j : g.neighbors[std::size_t(i)]) row += p.at(std::size_t(i), std::size_t(j));
            CHECK(row <= 1.0 - eps + 1e-9);
        }
    }
}

TEST_CASE("razumikhin_residuals: algebra cases") {
    ToyParams tp;
    tp.a = 0.5;
    tp.b = 0.0;
    tp.alpha = 1.0;
    tp.gamma_self = 0.6;
    tp.gamma_nbr = 0.0;
    tp.constants.p = 1.2;
    tp.constants.epsilon = 0.3;
    tp.constants.psi = 0.0;
    BuiltEnv env = make_toy_pair(tp);
    Certificate cert = make_analytic_certificate(env.system, tp);

    SUBCASE("hand-evaluated con_B = 0.1") {
        auto t = tuple_for(env.system, 0, {{{1.0}, {0.0}}, {{1.0}, {0.0}}}, {0.0});
        ResidualPair r = razumikhin_residuals(env.system, cert, t);
        CHECK(r.con_b == doctest::Approx(0.1).epsilon(1e-12));
        // lagged values: V(1.0) - 1.2 * V(1.0) = -0.2
        CHECK(r.con_not_a == doctest::Approx(-0.2).epsilon(1e-12));
    }
    SUBCASE("equal V values make con_notA = (1-p)v") {
        auto t = tuple_for(env.system, 0, {{{0.5}, {0.5}}, {{-0.5}, {0.5}}}, {0.0});
        ResidualPair r = razumikhin_residuals(env.system, cert, t);
        CHECK(r.con_not_a == doctest::Approx((1.0 - 1.2) * 0.5).epsilon(1e-12));
        CHECK(r.con_not_a <= 0.0);
    }
    SUBCASE("tau_max = 0 yields the -inf sentinel") {
        CustomParams p;
        p.agent_count = 1;
        p.a = 0.5;
        BuiltEnv single = build_custom(p);
        ToyParams stp = tp;
        Certificate scert = make_analytic_certificate(single.system, stp);
        DelayHistory h;
        h.lags = {{{0.7}}};
        LocalLayout lay = LocalLayout::for_agent(single.system, 0);
        TrainingTuple t;
        t.agent = 0;
        t.z = lay.pack(h, Vec{0.0});
        ResidualPair r = razumikhin_residuals(single.system, scert, t);
        CHECK(r.con_not_a == -std::numeric_limits<double>::infinity());
    }
}

TEST_CASE("total_loss: zero cases and the decrement hinge") {
    ToyParams tp;
    tp.a = 0.5;
    tp.b = 0.0;
    tp.alpha = 1.0;
    tp.gamma_self = 0.6;
    tp.gamma_nbr = 0.0;
    tp.constants.p = 1.2;
    tp.constants.a1 = 0.5;
    tp.constants.a2 = 10.0;
    tp.constants.eps_p = 0.01;
    tp.constants.eps_d = 1e-6;
    tp.constants.psi = 0.0;
    BuiltEnv env = make_toy_pair(tp);
    Certificate cert = make_analytic_certificate(env.system, tp);

    TrainingSet data;
    data.tuples.push_back(tuple_for(env.system, 0, {{{1.0}, {0.0}}, {{1.0}, {0.0}}}, {0.0}));
    std::vector<std::size_t> batch{0};
    LossWeights w;
    w.imi = 1.0;
    w.p = 1.0;
    w.d = 1.0;

    LossBreakdown loss = total_loss(env.system, *env.nominal, cert, data, batch, w, nullptr,
                                    ExecMode::Serial);
    // pi == pi_nom == 0
    CHECK(loss.imi == 0.0);
    // V = |x| sits inside [0.5|x| + eps_p, 10|x| - eps_p] at |x| = 1
    CHECK(loss.p == 0.0);
    // max(con_notA, con_B) = max(-0.2, 0.1) = 0.1 >= eps_d
    CHECK(loss.d == 0.0);
    CHECK(loss.total == 0.0);

    SUBCASE("violated decrement produces a positive hinge") {
        // x = 1 with gamma_self = 0.3: con_B = 0.3 - 0.5 = -0.2; lag states
        // small so con_notA is far negative; hinge = eps_d + 0.2
        ToyParams bad = tp;
        bad.gamma_self = 0.3;
        Certificate weak = make_analytic_certificate(env.system, bad);
        TrainingSet d2;
        d2.tuples.push_back(tuple_for(env.system, 0, {{{1.0}, {0.0}}, {{0.0}, {0.0}}}, {0.0}));
        LossBreakdown l2 = total_loss(env.system, *env.nominal, weak, d2, batch, w, nullptr,
                                      ExecMode::Serial);
        CHECK(l2.d == doctest::Approx(0.2 + 1e-6).epsilon(1e-9));
    }
    SUBCASE("empty batch is rejected") {
        CHECK_THROWS_AS(total_loss(env.system, *env.nominal, cert, data, {}, w, nullptr,
                                   ExecMode::Serial),
                        ConfigError);
    }
}

TEST_CASE("total_loss gradients match central finite differences") {
    ToyParams tp;
    BuiltEnv env = make_toy_pair(tp);
    CertificateConstants constants;
    constants.p = 1.2;
    constants.epsilon = 0.3;
    constants.psi = 0.4;
    constants.a1 = 0.2;
    constants.a2 = 2.0;
    Certificate cert = make_certificate(env.system, constants, {6}, {}, true, 97);
    jitter_biases(cert, 98);  // generic position: no bias on a ReLU kink

    auto boxes = std::vector<Box>(2, Box::centered(1, 0.5));
    TrainingSet data = generate_dataset(env.system, *env.nominal, 4, 3, boxes, 5, ExecMode::Serial);
    LossWeights weights;
    weights.imi = 1.0;
    weights.p = 5.0;
    weights.d = 3.0;

    Rng rng(55);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<std::size_t> batch;
        for (int q = 0; q < 4; ++q) batch.push_back(rng.next_u64() % data.size());
        worst = std::max(worst,
                         gradient_check(env.system, *env.nominal, cert, data, batch, weights));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("generate_dataset: counts, split, determinism, edge cases") {
    ToyParams tp;
    BuiltEnv env = make_toy_pair(tp);
    auto boxes = std::vector<Box>(2, Box::centered(1, 0.5));

    SUBCASE("one trajectory of length one gives one tuple per agent") {
        TrainingSet s = generate_dataset(env.system, *env.nominal, 1, 1, boxes, 1, ExecMode::Serial);
        CHECK(s.size() == 2);
        CHECK(s.train_idx.size() == 2);
    }
    SUBCASE("80/20 split by trajectory") {
        TrainingSet s = generate_dataset(env.system, *env.nominal, 10, 3, boxes, 1, ExecMode::Serial);
        CHECK(s.size() == 60);
        CHECK(s.train_idx.size() == 48);
        CHECK(s.val_idx.size() == 12);
    }
    SUBCASE("same seed reproduces the dataset bit-exactly") {
        TrainingSet a = generate_dataset(env.system, *env.nominal, 5, 4, boxes, 9, ExecMode::Serial);
        TrainingSet b = generate_dataset(env.system, *env.nominal, 5, 4, boxes, 9, ExecMode::Parallel);
        REQUIRE(a.size() == b.size());
        for (std::size_t q = 0; q < a.size(); ++q) {
            CHECK(a.tuples[q].z == b.tuples[q].z);
            CHECK(a.tuples[q].next_state == b.tuples[q].next_state);
        }
    }
    SUBCASE("degenerate box at the equilibrium gives fixed-point tuples") {
        auto point = std::vector<Box>(2, Box::point(Vec{0.0}));
        TrainingSet s = generate_dataset(env.system, *env.nominal, 2, 2, point, 3, ExecMode::Serial);
        for (const auto& t : s.tuples) {
            CHECK(t.next_state == Vec{0.0});
            for (double v : t.z) CHECK(v == 0.0);
        }
    }
    SUBCASE("empty initial box is rejected") {
        auto bad = boxes;
        bad[0].lo[0] = 1.0;
        bad[0].hi[0] = -1.0;
        CHECK_THROWS_AS(generate_dataset(env.system, *env.nominal, 1, 1, bad, 1, ExecMode::Serial),
                        ConfigError);
    }
}

TEST_CASE("train: monotone descent, no-op weights, error paths") {
    SUBCASE("full-batch descent on a single linear V is monotone") {
        CustomParams p;
        p.agent_count = 1;
        p.a = 0.5;
        p.c_u = 0.0;
        BuiltEnv env = build_custom(p);
        CertificateConstants constants;
        constants.p = 1.2;
        constants.a1 = 0.5;
        constants.a2 = 2.0;
        Certificate cert = make_certificate(env.system, constants, {}, {}, true, 3);

        auto boxes = std::vector<Box>{Box({0.5}, {1.0})};  // positive data only
        TrainingSet data =
            generate_dataset(env.system, *env.nominal, 10, 2, boxes, 7, ExecMode::Serial);
        data.val_idx.clear();  // full batch on the training split

        LossWeights w;
        w.imi = 0.0;
        w.p = 1.0;
        w.d = 0.0;
        TrainOptions opts;
        opts.epochs = 10;
        opts.batch_size = int(data.train_idx.size());
        opts.learning_rate = 1e-3;
        opts.freeze_policy = true;
        opts.exec = ExecMode::Serial;
        TrainResult result = train(env.system, *env.nominal, cert, data, w, opts);

        std::vector<double> train_curve;
        for (const auto& row : result.curves)
            if (row.split == "train") train_curve.push_back(row.loss.total);
        REQUIRE(train_curve.size() == 10);
        for (std::size_t e = 1; e < train_curve.size(); ++e)
            CHECK(train_curve[e] <= train_curve[e - 1] + 1e-12);
    }
    SUBCASE("zero weights leave the parameters untouched") {
        ToyParams tp;
        BuiltEnv env = make_toy_pair(tp);
        Certificate cert = make_certificate(env.system, tp.constants, {4}, {}, true, 11);
        Certificate before = cert;
        auto boxes = std::vector<Box>(2, Box::centered(1, 0.5));
        TrainingSet data =
            generate_dataset(env.system, *env.nominal, 2, 2, boxes, 13, ExecMode::Serial);
        LossWeights w;
        w.imi = 0.0;
        w.p = 0.0;
        w.d = 0.0;
        TrainOptions opts;
        opts.epochs = 1;
        opts.exec = ExecMode::Serial;
        TrainResult r = train(env.system, *env.nominal, cert, data, w, opts);
        CHECK(r.best_val == 0.0);
        for (std::size_t c = 0; c < cert.v_nets.size(); ++c)
            for (std::size_t l = 0; l < cert.v_nets[c].net.layers.size(); ++l)
                CHECK(cert.v_nets[c].net.layers[l].w.data ==
                      before.v_nets[c].net.layers[l].w.data);
    }
    SUBCASE("zero epochs violate the precondition") {
        ToyParams tp;
        BuiltEnv env = make_toy_pair(tp);
        Certificate cert = make_certificate(env.system, tp.constants, {4}, {}, true, 11);
        TrainingSet data;
        data.tuples.push_back(tuple_for(env.system, 0, {{{0.1}, {0.1}}, {{0.1}, {0.1}}}, {0.0}));
        data.train_idx = {0};
        TrainOptions opts;
        opts.epochs = 0;
        LossWeights w;
        CHECK_THROWS_AS(train(env.system, *env.nominal, cert, data, w, opts), ConfigError);
    }
    SUBCASE("non-finite loss aborts naming the batch") {
        ToyParams tp;
        BuiltEnv env = make_toy_pair(tp);
        Certificate cert = make_certificate(env.system, tp.constants, {4}, {}, true, 11);
        TrainingSet data;
        TrainingTuple bad = tuple_for(env.system, 0, {{{0.1}, {0.1}}, {{0.1}, {0.1}}}, {0.0});
        bad.z[0] = std::numeric_limits<double>::quiet_NaN();
        data.tuples.push_back(bad);
        data.train_idx = {0};
        TrainOptions opts;
        opts.epochs = 1;
        opts.exec = ExecMode::Serial;
        LossWeights w;
        CHECK_THROWS_WITH_AS(train(env.system, *env.nominal, cert, data, w, opts),
                             doctest::Contains("batch"), TrainingError);
    }
}

TEST_CASE("gamma rows stay tied across shared-class members during training") {
    ToyParams tp;
    BuiltEnv env = make_toy_pair(tp);
    CertificateConstants constants;
    constants.epsilon = 0.3;
    constants.a1 = 0.2;
    constants.a2 = 2.0;
    Certificate cert = make_certificate(env.system, constants, {4}, {}, true, 19);
    REQUIRE(cert.classes.class_count() == 1);

    auto boxes = std::vector<Box>(2, Box::centered(1, 0.4));
    TrainingSet data = generate_dataset(env.system, *env.nominal, 6, 4, boxes, 23, ExecMode::Serial);
    TrainOptions opts;
    opts.epochs = 3;
    opts.exec = ExecMode::Serial;
    LossWeights w;
    train(env.system, *env.nominal, cert, data, w, opts);
    CHECK(cert.gamma.at(0, 0) == cert.gamma.at(1, 1));
    CHECK(cert.gamma.at(0, 1) == cert.gamma.at(1, 0));
    // shared policies remain identical
    CHECK(cert.pi_nets[0].net.layers[0].w.data == cert.pi_nets[1].net.layers[0].w.data);
}
