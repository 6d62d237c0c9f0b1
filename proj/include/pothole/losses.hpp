#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pothole/box.hpp"

namespace pothole {

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before any
// logarithm so saturated predictions keep the log loss finite.
inline constexpr double kProbEpsilon = 1e-7;

// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise. Continuous with continuous first
// derivative at the junction.
double smooth_l1(double x) noexcept;
double smooth_l1_grad(double x) noexcept;

// Anchor-relative box parameterization: t = ((cx - cxa) / wa, (cy - cya) / ha,
// ln(w / wa), ln(h / ha)) where (cx, cy, w, h) describe the box and the `a`
// subscript the anchor. decode_box inverts it.
std::array<double, 4> encode_box(const BoundingBox& box, const BoundingBox& anchor);
BoundingBox decode_box(const std::array<double, 4>& t, const BoundingBox& anchor);

// One region-proposal candidate: predicted objectness, the ground-truth
// indicator, and the predicted/target box parameters.
struct AnchorPrediction {
    double objectness = 0;                // p, in [0, 1]
    bool is_positive = false;             // p*
    std::array<double, 4> loc{};          // t
    std::array<double, 4> target{};       // t*
};

struct RpnLossTerms {
    double classification = 0;  // (1 / n_cls) * sum of two-class log losses
    double regression = 0;      // (1 / n_reg) * sum of positive-anchor smooth-L1
};

RpnLossTerms rpn_loss_terms(std::span<const AnchorPrediction> batch, int n_cls, int n_reg);

// classification + lambda * regression. Throws on an empty batch or
// non-positive normalizers.
double rpn_loss(std::span<const AnchorPrediction> batch, double lambda, int n_cls, int n_reg);

struct RpnGradients {
    std::vector<double> d_objectness;             // dL/dp per anchor
    std::vector<std::array<double, 4>> d_loc;     // dL/dt per anchor
};

RpnGradients rpn_loss_gradients(std::span<const AnchorPrediction> batch, double lambda,
                                int n_cls, int n_reg);

// One default box of a single-shot detector batch. Class 0 is background,
// class 1 the (single) object class. target_loc is engaged iff the box was
// matched to a ground truth; unmatched boxes contribute only background
// confidence loss.
struct DefaultBoxPrediction {
    std::array<double, 2> class_logits{};
    std::array<double, 4> loc{};
    std::optional<std::array<double, 4>> target_loc;
};

// (softmax cross-entropy + smooth-L1 location loss) / N where N counts the
// matched boxes. Throws when N == 0.
double ssd_loss(std::span<const DefaultBoxPrediction> batch);

struct SsdGradients {
    std::vector<std::array<double, 2>> d_logits;
    std::vector<std::array<double, 4>> d_loc;  // zero rows for unmatched boxes
};

SsdGradients ssd_loss_gradients(std::span<const DefaultBoxPrediction> batch);

struct GradientCheckResult {
    double max_rel_error = 0;
    std::size_t worst_coordinate = 0;
    std::size_t coordinates = 0;
};

// Central finite difference (f(x+h) - f(x-h)) / 2h.
double central_difference(const std::function<double(double)>& f, double x, double step);

// Compare analytic gradients against central differences, coordinate by
// coordinate. Relative error uses max(|analytic|, |numeric|, 1e-2) as the
// denominator. Each check throws std::domain_error when the evaluation point
// sits within 2 * step of a smooth-L1 kink (|residual| = 1) or of the
// probability clamp boundary, where the comparison is meaningless.
GradientCheckResult check_smooth_l1_gradient(double x, double step);
GradientCheckResult check_rpn_gradients(std::span<const AnchorPrediction> batch,
                                        double lambda, int n_cls, int n_reg, double step);
GradientCheckResult check_ssd_gradients(std::span<const DefaultBoxPrediction> batch,
                                        double step);

}  // namespace pothole
