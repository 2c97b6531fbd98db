#include <doctest.h>

#include <random>

#include "acmloc/core.hpp"

using namespace acmloc;
using doctest::Approx;

TEST_CASE("temporal_iou examples") {
    CHECK(temporal_iou({0, 1}, {0, 1}) == 1.0);
    CHECK(temporal_iou({0, 1}, {2, 3}) == 0.0);
    CHECK(temporal_iou({0, 2}, {1, 3}) == Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(temporal_iou({0, 4}, {1, 2}) == Approx(0.25));
}

TEST_CASE("temporal_iou rejects degenerate segments") {
    CHECK_THROWS_AS(temporal_iou({1, 1}, {0, 2}), ValidationError);
    CHECK_THROWS_AS(temporal_iou({0, 2}, {3, 2}), ValidationError);
}

TEST_CASE("temporal_iou properties on random segments") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 500; ++i) {
        double a0 = u(rng), a1 = u(rng), b0 = u(rng), b1 = u(rng);
        if (a0 > a1) std::swap(a0, a1);
        if (b0 > b1) std::swap(b0, b1);
        if (a1 - a0 < 1e-6 || b1 - b0 < 1e-6) continue;
        const double ab = temporal_iou({a0, a1}, {b0, b1});
        CHECK(ab == temporal_iou({b0, b1}, {a0, a1}));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(temporal_iou({a0, a1}, {a0, a1}) == Approx(1.0));
        // Nested: a sub-interval of a.
        const double m0 = a0 + 0.25 * (a1 - a0), m1 = a0 + 0.5 * (a1 - a0);
        CHECK(temporal_iou({a0, a1}, {m0, m1}) == Approx((m1 - m0) / (a1 - a0)).epsilon(1e-9));
    }
}

TEST_CASE("topk_count examples and monotonicity") {
    CHECK(topk_count(750, 8) == 93);
    CHECK(topk_count(1, 100) == 1);
    CHECK(topk_count(75, 10) == 7);
    for (int T = 1; T < 200; T += 7)
        for (int r = 1; r < 30; ++r) {
            CHECK(topk_count(T, r) >= 1);
            CHECK(topk_count(T, r + 1) <= topk_count(T, r));
            CHECK(topk_count(T + 1, r) >= topk_count(T, r));
        }
}

TEST_CASE("profiles carry the published hyper-parameters") {
    const auto th = HyperParams::thumos();
    CHECK(th.T == 750);
    CHECK(th.C == 20);
    CHECK(th.r_ins == 8);
    CHECK(th.r_con == 3);
    CHECK(th.r_bak == 3);
    CHECK(th.lambda_guide == 2e-3);
    CHECK(th.lambda_feat == 5e-5);
    CHECK(th.lambda_sparse == 2e-4);
    CHECK(th.alpha == 0.0);
    CHECK(th.nms_iou == 0.5);
    CHECK(th.proposal_thresholds == std::vector<double>{0.15, 0.2, 0.25});
    CHECK(th.tiou_grid == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
    CHECK(th.k_ins() == 93);

    const auto an = HyperParams::activitynet();
    CHECK(an.T == 75);
    CHECK(an.C == 200);
    CHECK(an.r_ins == 2);
    CHECK(an.r_con == 10);
    CHECK(an.r_bak == 10);
    CHECK(an.lambda_guide == 5e-3);
    CHECK(an.lambda_feat == 1e-5);
    CHECK(an.lambda_sparse == 0.0);
    CHECK(an.alpha == 0.5);
    CHECK(an.nms_iou == 0.9);
    CHECK(an.proposal_thresholds == std::vector<double>{0.01, 0.015, 0.02});
    CHECK(an.tiou_grid.size() == 10);
    CHECK(an.tiou_grid.front() == 0.5);
    CHECK(an.tiou_grid.back() == 0.95);
    CHECK(an.k_con() == 7);
}

TEST_CASE("HyperParams validation") {
    HyperParams hp = HyperParams::thumos();
    hp.validate();
    auto bad = [](auto mutate) {
        HyperParams h = HyperParams::thumos();
        mutate(h);
        CHECK_THROWS_AS(h.validate(), ValidationError);
    };
    bad([](HyperParams& h) { h.T = 0; });
    bad([](HyperParams& h) { h.r_con = 0; });
    bad([](HyperParams& h) { h.lambda_feat = -1; });
    bad([](HyperParams& h) { h.margin = 0; });
    bad([](HyperParams& h) { h.alpha = 1.5; });
    bad([](HyperParams& h) { h.class_threshold = 1.0; });
    bad([](HyperParams& h) { h.proposal_thresholds.clear(); });
    bad([](HyperParams& h) { h.nms_iou = 1.0; });
}

TEST_CASE("VideoLabel normalizes and validates") {
    const auto l = make_label({3, 1, 3}, 5);
    CHECK(l.class_ids == std::vector<int>{1, 3});
    CHECK(l.contains(3));
    CHECK_FALSE(l.contains(0));
    CHECK_THROWS_AS(make_label({5}, 5), ValidationError);
    CHECK_THROWS_AS(make_label({}, 5).validate(true), ValidationError);
    CHECK_NOTHROW(make_label({}, 5).validate(false));
}

TEST_CASE("arange_inclusive keeps the endpoint") {
    CHECK(arange_inclusive(0.1, 0.7, 0.1).size() == 7);
    CHECK(arange_inclusive(0.5, 0.95, 0.05).back() == 0.95);
    CHECK_THROWS_AS(arange_inclusive(0, 1, 0), ValidationError);
}

TEST_CASE("snippet seconds") {
    CHECK(snippet_seconds(25.0, 16) == Approx(0.64));
    CHECK(snippet_seconds(30.0, 15) == Approx(0.5));
}

TEST_CASE("error kinds") {
    CHECK(std::string(ValidationError("x").kind()) == "validation");
    CHECK(std::string(LoadError("x").kind()) == "load");
    CHECK(std::string(ParseError("x").kind()) == "parse");
    CHECK(std::string(TrainingError("x").kind()) == "training");
}
