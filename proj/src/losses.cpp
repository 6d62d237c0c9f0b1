#include "pothole/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pothole/kernels.hpp"

namespace pothole {

namespace {

double clamp_prob(double p) {
    return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

// -ln softmax(logits)[target] via the log-sum-exp trick
double softmax_cross_entropy(const std::array<double, 2>& logits, int target) {
    const double m = std::max(logits[0], logits[1]);
    const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    return lse - logits[target];
}

void throw_if_near_kink(double residual, double step) {
    if (std::fabs(std::fabs(residual) - 1.0) < 2.0 * step) {
        throw std::domain_error("gradient check at a smooth-L1 kink (|residual| near 1)");
    }
}

struct RelErrorTracker {
    GradientCheckResult result;

    void record(double analytic, double numeric) {
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-2});
        const double rel = std::fabs(analytic - numeric) / denom;
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_coordinate = result.coordinates;
        }
        ++result.coordinates;
    }
};

}  // namespace

double smooth_l1(double x) noexcept {
    const double a = std::fabs(x);
    return a < 1.0 ? 0.5 * (x * x) : a - 0.5;
}

double smooth_l1_grad(double x) noexcept {
    if (std::fabs(x) < 1.0) return x;
    return x > 0.0 ? 1.0 : -1.0;
}

std::array<double, 4> encode_box(const BoundingBox& box, const BoundingBox& anchor) {
    return {(box.center_x() - anchor.center_x()) / anchor.width(),
            (box.center_y() - anchor.center_y()) / anchor.height(),
            std::log(box.width() / anchor.width()),
            std::log(box.height() / anchor.height())};
}

BoundingBox decode_box(const std::array<double, 4>& t, const BoundingBox& anchor) {
    const double cx = t[0] * anchor.width() + anchor.center_x();
    const double cy = t[1] * anchor.height() + anchor.center_y();
    const double w = anchor.width() * std::exp(t[2]);
    const double h = anchor.height() * std::exp(t[3]);
    return BoundingBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
}

RpnLossTerms rpn_loss_terms(std::span<const AnchorPrediction> batch, int n_cls, int n_reg) {
    if (batch.empty()) throw std::invalid_argument("rpn_loss: empty batch");
    if (n_cls < 1 || n_reg < 1) throw std::invalid_argument("rpn_loss: normalizers must be >= 1");

    double cls_sum = 0.0;
    std::vector<double> residuals;
    for (const AnchorPrediction& a : batch) {
        if (!(a.objectness >= 0.0 && a.objectness <= 1.0)) {
            throw std::invalid_argument("rpn_loss: objectness outside [0, 1]");
        }
        const double p = clamp_prob(a.objectness);
        cls_sum += a.is_positive ? -std::log(p) : -std::log(1.0 - p);
        if (a.is_positive) {
            for (int k = 0; k < 4; ++k) residuals.push_back(a.loc[k] - a.target[k]);
        }
    }
    return {cls_sum / static_cast<double>(n_cls),
            kernels::smooth_l1_sum(residuals) / static_cast<double>(n_reg)};
}

double rpn_loss(std::span<const AnchorPrediction> batch, double lambda, int n_cls, int n_reg) {
    const RpnLossTerms t = rpn_loss_terms(batch, n_cls, n_reg);
    return t.classification + lambda * t.regression;
}

RpnGradients rpn_loss_gradients(std::span<const AnchorPrediction> batch, double lambda,
                                int n_cls, int n_reg) {
    if (batch.empty()) throw std::invalid_argument("rpn_loss_gradients: empty batch");
    RpnGradients g;
    g.d_objectness.resize(batch.size(), 0.0);
    g.d_loc.resize(batch.size());
    const double cls_scale = 1.0 / static_cast<double>(n_cls);
    const double reg_scale = lambda / static_cast<double>(n_reg);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const AnchorPrediction& a = batch[i];
        const double p = clamp_prob(a.objectness);
        // zero gradient where the clamp saturates
        if (a.objectness > kProbEpsilon && a.objectness < 1.0 - kProbEpsilon) {
            g.d_objectness[i] = cls_scale * (a.is_positive ? -1.0 / p : 1.0 / (1.0 - p));
        }
        g.d_loc[i] = {0.0, 0.0, 0.0, 0.0};
        if (a.is_positive) {
            for (int k = 0; k < 4; ++k) {
                g.d_loc[i][k] = reg_scale * smooth_l1_grad(a.loc[k] - a.target[k]);
            }
        }
    }
    return g;
}

double ssd_loss(std::span<const DefaultBoxPrediction> batch) {
    std::size_t matched = 0;
    double conf_sum = 0.0;
    std::vector<double> residuals;
    for (const DefaultBoxPrediction& b : batch) {
        conf_sum += softmax_cross_entropy(b.class_logits, b.target_loc ? 1 : 0);
        if (b.target_loc) {
            ++matched;
            for (int k = 0; k < 4; ++k) residuals.push_back(b.loc[k] - (*b.target_loc)[k]);
        }
    }
    if (matched == 0) {
        throw std::invalid_argument("ssd_loss: no matched default boxes (N = 0)");
    }
    return (conf_sum + kernels::smooth_l1_sum(residuals)) / static_cast<double>(matched);
}

SsdGradients ssd_loss_gradients(std::span<const DefaultBoxPrediction> batch) {
    std::size_t matched = 0;
    for (const DefaultBoxPrediction& b : batch) {
        if (b.target_loc) ++matched;
    }
    if (matched == 0) {
        throw std::invalid_argument("ssd_loss_gradients: no matched default boxes (N = 0)");
    }
    const double scale = 1.0 / static_cast<double>(matched);

    SsdGradients g;
    g.d_logits.resize(batch.size());
    g.d_loc.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const DefaultBoxPrediction& b = batch[i];
        const int target = b.target_loc ? 1 : 0;
        const double m = std::max(b.class_logits[0], b.class_logits[1]);
        const double e0 = std::exp(b.class_logits[0] - m);
        const double e1 = std::exp(b.class_logits[1] - m);
        const double z = e0 + e1;
        g.d_logits[i] = {scale * (e0 / z - (target == 0 ? 1.0 : 0.0)),
                         scale * (e1 / z - (target == 1 ? 1.0 : 0.0))};
        g.d_loc[i] = {0.0, 0.0, 0.0, 0.0};
        if (b.target_loc) {
            for (int k = 0; k < 4; ++k) {
                g.d_loc[i][k] = scale * smooth_l1_grad(b.loc[k] - (*b.target_loc)[k]);
            }
        }
    }
    return g;
}

double central_difference(const std::function<double(double)>& f, double x, double step) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

GradientCheckResult check_smooth_l1_gradient(double x, double step) {
    throw_if_near_kink(x, step);
    RelErrorTracker tracker;
    tracker.record(smooth_l1_grad(x),
                   central_difference([](double v) { return smooth_l1(v); }, x, step));
    return tracker.result;
}

GradientCheckResult check_rpn_gradients(std::span<const AnchorPrediction> batch,
                                        double lambda, int n_cls, int n_reg, double step) {
    for (const AnchorPrediction& a : batch) {
        if (a.objectness < kProbEpsilon + 2.0 * step || a.objectness > 1.0 - kProbEpsilon - 2.0 * step) {
            throw std::domain_error("gradient check at the probability clamp boundary");
        }
        if (a.is_positive) {
            for (int k = 0; k < 4; ++k) throw_if_near_kink(a.loc[k] - a.target[k], step);
        }
    }

    const RpnGradients analytic = rpn_loss_gradients(batch, lambda, n_cls, n_reg);
    std::vector<AnchorPrediction> work(batch.begin(), batch.end());
    RelErrorTracker tracker;
    for (std::size_t i = 0; i < work.size(); ++i) {
        tracker.record(analytic.d_objectness[i],
                       central_difference(
                           [&](double v) {
                               AnchorPrediction saved = work[i];
                               work[i].objectness = v;
                               const double loss = rpn_loss(work, lambda, n_cls, n_reg);
                               work[i] = saved;
                               return loss;
                           },
                           work[i].objectness, step));
        for (int k = 0; k < 4; ++k) {
            tracker.record(analytic.d_loc[i][k],
                           central_difference(
                               [&](double v) {
                                   AnchorPrediction saved = work[i];
                                   work[i].loc[k] = v;
                                   const double loss = rpn_loss(work, lambda, n_cls, n_reg);
                                   work[i] = saved;
                                   return loss;
                               },
                               work[i].loc[k], step));
        }
    }
    return tracker.result;
}

GradientCheckResult check_ssd_gradients(std::span<const DefaultBoxPrediction> batch,
                                        double step) {
    for (const DefaultBoxPrediction& b : batch) {
        if (b.target_loc) {
            for (int k = 0; k < 4; ++k) throw_if_near_kink(b.loc[k] - (*b.target_loc)[k], step);
        }
    }

    const SsdGradients analytic = ssd_loss_gradients(batch);
    std::vector<DefaultBoxPrediction> work(batch.begin(), batch.end());
    RelErrorTracker tracker;
    for (std::size_t i = 0; i < work.size(); ++i) {
        for (int c = 0; c < 2; ++c) {
            tracker.record(analytic.d_logits[i][c],
                           central_difference(
                               [&](double v) {
                                   DefaultBoxPrediction saved = work[i];
                                   work[i].class_logits[c] = v;
                                   const double loss = ssd_loss(work);
                                   work[i] = saved;
                                   return loss;
                               },
                               work[i].class_logits[c], step));
        }
        for (int k = 0; k < 4; ++k) {
            tracker.record(analytic.d_loc[i][k],
                           central_difference(
                               [&](double v) {
                                   DefaultBoxPrediction saved = work[i];
                                   work[i].loc[k] = v;
                                   const double loss = ssd_loss(work);
                                   work[i] = saved;
                                   return loss;
                               },
                               work[i].loc[k], step));
        }
    }
    return tracker.result;
}

}  // namespace pothole
