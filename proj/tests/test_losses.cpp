#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pothole/losses.hpp"
#include "test_util.hpp"

using namespace pothole;

TEST_CASE("smooth_l1 piecewise values") {
    CHECK(smooth_l1(0.0) == 0.0);
    CHECK(smooth_l1(0.5) == 0.125);
    CHECK(smooth_l1(-0.5) == 0.125);
    CHECK(smooth_l1(2.0) == 1.5);
    CHECK(smooth_l1(-2.0) == 1.5);
}

TEST_CASE("smooth_l1 is C1 at the branch junction") {
    // both branches evaluate to 0.5 at |x| = 1, with derivative 1
    CHECK(std::fabs(0.5 * 1.0 * 1.0 - (1.0 - 0.5)) <= 1e-12);
    CHECK(std::fabs(smooth_l1(1.0) - 0.5) <= 1e-12);
    CHECK(std::fabs(smooth_l1(-1.0) - 0.5) <= 1e-12);
    CHECK(std::fabs(smooth_l1_grad(std::nextafter(1.0, 0.0)) - 1.0) <= 1e-12);
    CHECK(smooth_l1_grad(1.0) == 1.0);
    CHECK(smooth_l1_grad(-1.0) == -1.0);
    CHECK(smooth_l1_grad(0.0) == 0.0);
}

TEST_CASE("encode_box worked cases") {
    const BoundingBox anchor(0, 0, 10, 10);
    const auto identity = encode_box(anchor, anchor);
    CHECK(identity == std::array<double, 4>{0, 0, 0, 0});

    // twice the width, same center and height
    const BoundingBox wide(-5, 0, 15, 10);
    const auto t = encode_box(wide, anchor);
    CHECK(t[0] == 0.0);
    CHECK(t[1] == 0.0);
    CHECK(t[2] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(t[3] == 0.0);
}

TEST_CASE("encode/decode are mutual inverses") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> pos(0.0, 900.0);
    std::uniform_real_distribution<double> len(0.5, 150.0);
    for (int i = 0; i < 300; ++i) {
        const BoundingBox box(pos(rng), pos(rng), 901 + len(rng), 901 + len(rng));
        const BoundingBox anchor(pos(rng), pos(rng), 901 + len(rng), 901 + len(rng));
        const BoundingBox back = decode_box(encode_box(box, anchor), anchor);
        CHECK(back.x_min() == doctest::Approx(box.x_min()).epsilon(1e-12));
        CHECK(back.y_min() == doctest::Approx(box.y_min()).epsilon(1e-12));
        CHECK(back.x_max() == doctest::Approx(box.x_max()).epsilon(1e-12));
        CHECK(back.y_max() == doctest::Approx(box.y_max()).epsilon(1e-12));
    }
}

TEST_CASE("rpn_loss on a perfect batch is zero up to the clamp") {
    std::vector<AnchorPrediction> batch;
    batch.push_back({1.0, true, {0.3, -0.2, 0.1, 0.0}, {0.3, -0.2, 0.1, 0.0}});
    batch.push_back({0.0, false, {0, 0, 0, 0}, {0, 0, 0, 0}});
    CHECK(rpn_loss(batch, 1.0, 2, 2) <= 1e-6);
}

TEST_CASE("rpn_loss hand-evaluated single anchor") {
    // p* = 1, p = 0.5, every coordinate off by 0.5, lambda = 1, n = 1:
    // loss = -ln 0.5 + 4 * 0.125 = 1.1931471805599453
    const AnchorPrediction a{0.5, true, {0.5, 0.5, 0.5, 0.5}, {0, 0, 0, 0}};
    const double loss = rpn_loss({&a, 1}, 1.0, 1, 1);
    CHECK(std::fabs(loss - 1.19315) <= 1e-5);
    CHECK(std::fabs(loss - (-std::log(0.5) + 0.5)) <= 1e-12);
}

TEST_CASE("negative anchors contribute no regression loss") {
    const AnchorPrediction a{0.3, false, {5, 5, 5, 5}, {0, 0, 0, 0}};
    const RpnLossTerms terms = rpn_loss_terms({&a, 1}, 1, 1);
    CHECK(terms.regression == 0.0);
    CHECK(rpn_loss({&a, 1}, 1.0, 1, 1) == rpn_loss({&a, 1}, 50.0, 1, 1));
}

TEST_CASE("rpn_loss is linear in lambda") {
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> res(-0.8, 0.8);
    std::vector<AnchorPrediction> batch;
    for (int i = 0; i < 6; ++i) {
        AnchorPrediction a;
        a.objectness = prob(rng);
        a.is_positive = i % 2 == 0;
        for (int k = 0; k < 4; ++k) a.loc[k] = res(rng);
        batch.push_back(a);
    }
    const RpnLossTerms terms = rpn_loss_terms(batch, 3, 4);
    for (double lambda : {0.5, 1.0, 2.0, 10.0}) {
        CHECK(rpn_loss(batch, lambda, 3, 4) ==
              doctest::Approx(terms.classification + lambda * terms.regression).epsilon(1e-14));
    }
    CHECK(std::fabs((rpn_loss(batch, 2.0, 3, 4) - rpn_loss(batch, 1.0, 3, 4)) -
                    terms.regression) <= 1e-12);
}

TEST_CASE("rpn_loss validates input") {
    CHECK_THROWS_AS(rpn_loss({}, 1.0, 1, 1), std::invalid_argument);
    const AnchorPrediction a{0.5, true, {0, 0, 0, 0}, {0, 0, 0, 0}};
    CHECK_THROWS_AS(rpn_loss({&a, 1}, 1.0, 0, 1), std::invalid_argument);
    const AnchorPrediction bad{1.5, true, {0, 0, 0, 0}, {0, 0, 0, 0}};
    CHECK_THROWS_AS(rpn_loss({&bad, 1}, 1.0, 1, 1), std::invalid_argument);
}

TEST_CASE("rpn_loss is non-negative") {
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    std::uniform_real_distribution<double> res(-3.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<AnchorPrediction> batch(3);
        for (AnchorPrediction& a : batch) {
            a.objectness = prob(rng);
            a.is_positive = rng() % 2 == 0;
            for (int k = 0; k < 4; ++k) {
                a.loc[k] = res(rng);
                a.target[k] = res(rng);
            }
        }
        CHECK(rpn_loss(batch, 1.0, 3, 3) >= 0.0);
    }
}

TEST_CASE("ssd_loss worked cases") {
    // equal logits, exact location: softmax cross-entropy of a uniform
    // 2-way distribution
    DefaultBoxPrediction even{{0.4, 0.4}, {1, 2, 3, 4}, {{1, 2, 3, 4}}};
    CHECK(std::fabs(ssd_loss({&even, 1}) - std::log(2.0)) <= 1e-9);

    // strongly correct logits drive the loss to zero
    DefaultBoxPrediction strong{{0.0, 20.0}, {1, 2, 3, 4}, {{1, 2, 3, 4}}};
    CHECK(ssd_loss({&strong, 1}) < 1e-6);

    // four location coordinates off by 2: 4 * (2 - 0.5) = 6
    DefaultBoxPrediction off{{0.0, 20.0}, {2, 2, 2, 2}, {{0, 0, 0, 0}}};
    CHECK(std::fabs(ssd_loss({&off, 1}) - 6.0) <= 1e-6);
}

TEST_CASE("unmatched boxes contribute only background confidence") {
    // one matched box plus one unmatched with wild location error: the
    // unmatched location must not change the loss
    DefaultBoxPrediction matched{{0.0, 20.0}, {1, 1, 1, 1}, {{1, 1, 1, 1}}};
    DefaultBoxPrediction unmatched_a{{3.0, -3.0}, {0, 0, 0, 0}, std::nullopt};
    DefaultBoxPrediction unmatched_b{{3.0, -3.0}, {99, 99, 99, 99}, std::nullopt};
    const std::vector<DefaultBoxPrediction> batch_a = {matched, unmatched_a};
    const std::vector<DefaultBoxPrediction> batch_b = {matched, unmatched_b};
    CHECK(ssd_loss(batch_a) == ssd_loss(batch_b));
}

TEST_CASE("ssd_loss divides by the matched count") {
    DefaultBoxPrediction a{{0.0, 20.0}, {2, 2, 2, 2}, {{0, 0, 0, 0}}};
    DefaultBoxPrediction b{{0.0, 20.0}, {2, 2, 2, 2}, {{0, 0, 0, 0}}};
    const std::vector<DefaultBoxPrediction> one = {a};
    const std::vector<DefaultBoxPrediction> two = {a, b};
    CHECK(ssd_loss(two) == doctest::Approx(ssd_loss(one)).epsilon(1e-12));

    const std::vector<DefaultBoxPrediction> none = {
        DefaultBoxPrediction{{1.0, -1.0}, {0, 0, 0, 0}, std::nullopt}};
    CHECK_THROWS_AS(ssd_loss(none), std::invalid_argument);
}

TEST_CASE("gradient checks pass away from kinks") {
    std::mt19937_64 rng(109);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> logit(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto safe_residual = [&]() {
        const double mag = rng() % 2 == 0 ? unit(rng) * 0.9 : 1.1 + unit(rng) * 1.5;
        return (rng() % 2 == 0 ? 1.0 : -1.0) * mag;
    };

    SUBCASE("smooth_l1 pointwise") {
        CHECK(check_smooth_l1_gradient(0.5, 1e-5).max_rel_error <= 1e-6);
        CHECK(check_smooth_l1_gradient(3.0, 1e-5).max_rel_error <= 1e-6);
        CHECK(check_smooth_l1_gradient(0.0, 1e-5).max_rel_error <= 1e-6);
        for (int i = 0; i < 100; ++i) {
            CHECK(check_smooth_l1_gradient(safe_residual(), 1e-5).max_rel_error <= 1e-4);
        }
    }

    SUBCASE("rpn batch") {
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<AnchorPrediction> batch(3);
            for (AnchorPrediction& a : batch) {
                a.objectness = prob(rng);
                a.is_positive = rng() % 2 == 0;
                for (int k = 0; k < 4; ++k) a.loc[k] = safe_residual();
            }
            CHECK(check_rpn_gradients(batch, 1.5, 2, 3, 1e-5).max_rel_error <= 1e-4);
        }
    }

    SUBCASE("ssd batch") {
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<DefaultBoxPrediction> batch(3);
            for (std::size_t j = 0; j < batch.size(); ++j) {
                batch[j].class_logits = {logit(rng), logit(rng)};
                if (j == 0 || rng() % 2 == 0) {
                    for (int k = 0; k < 4; ++k) batch[j].loc[k] = safe_residual();
                    batch[j].target_loc = std::array<double, 4>{};
                }
            }
            CHECK(check_ssd_gradients(batch, 1e-5).max_rel_error <= 1e-4);
        }
    }
}

TEST_CASE("gradient checks report kinks instead of silently passing") {
    CHECK_THROWS_AS(check_smooth_l1_gradient(1.0, 1e-5), std::domain_error);
    CHECK_THROWS_AS(check_smooth_l1_gradient(-1.0 + 1e-6, 1e-5), std::domain_error);

    std::vector<AnchorPrediction> batch(1);
    batch[0] = {0.5, true, {1.0, 0, 0, 0}, {0, 0, 0, 0}};  // residual exactly at the kink
    CHECK_THROWS_AS(check_rpn_gradients(batch, 1.0, 1, 1, 1e-5), std::domain_error);

    std::vector<AnchorPrediction> clamped(1);
    clamped[0] = {1.0, true, {0, 0, 0, 0}, {0, 0, 0, 0}};  // saturated probability
    CHECK_THROWS_AS(check_rpn_gradients(clamped, 1.0, 1, 1, 1e-5), std::domain_error);

    std::vector<DefaultBoxPrediction> ssd_batch(1);
    ssd_batch[0] = {{0.0, 1.0}, {1.0, 0, 0, 0}, std::array<double, 4>{}};
    CHECK_THROWS_AS(check_ssd_gradients(ssd_batch, 1e-5), std::domain_error);
}
