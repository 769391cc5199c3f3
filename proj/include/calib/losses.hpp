#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calib/numkit.hpp"

namespace calib {

enum class LossKind { CE, BrierLoss, Focal, FocalFLSD53, DualFocal, BSCE, BSCE_GRA };

std::string loss_kind_name(LossKind kind);

/// Which training loss to use plus its hyperparameters.
///
/// `gra` turns any weight-bearing loss into its gradient-weighted variant:
/// the loss's uncertainty weight is detached and multiplies the plain CE
/// gradient instead of being differentiated through. BSCE_GRA is shorthand
/// for BSCE with gra set; canonical() normalizes that spelling.
struct LossSpec {
    LossKind kind = LossKind::CE;
    double gamma = 4.0;  // exponent; FocalFLSD53 ignores it (schedule-driven)
    double beta = 2.0;   // norm order, gBS losses only
    bool gra = false;

    LossSpec canonical() const;
};

/// Scalar loss, exact gradient w.r.t. the logits, and the uncertainty weight
/// that was applied (1.0 for CE and Brier loss).
struct LossEval {
    double value = 0.0;
    std::vector<double> grad_logits;
    double weight = 1.0;
};

/// Count of log-probability clamps (p_t < 1e-12) since the last reset.
std::uint64_t clamp_count();
void reset_clamp_count();

LossEval cross_entropy(const ProbVector& probs, const LabelVector& label);
LossEval brier_training_loss(const ProbVector& probs, const LabelVector& label);
LossEval focal_loss(const ProbVector& probs, const LabelVector& label, double gamma);
LossEval dual_focal_loss(const ProbVector& probs, const LabelVector& label, double gamma);
LossEval bsce(const ProbVector& probs, const LabelVector& label, double gamma, double beta);
LossEval bsce_gra(const ProbVector& probs, const LabelVector& label, double gamma, double beta);

/// FLSD-53 schedule: 5 for p_true in [0, 0.2), otherwise 3.
double flsd_gamma(double p_true);

/// ||p - y||_beta^gamma, the generalized Brier score of a prediction against
/// a one-hot label. Equals the Brier score at gamma = beta = 2.
double gbs_weight(const ProbVector& probs, const LabelVector& label, double gamma, double beta);

/// g(p, gamma) = (1-p)^gamma - gamma p (1-p)^(gamma-1) log(p); the factor by
/// which the focal-loss logit gradient scales the CE logit gradient.
double focal_grad_factor(double p, double gamma);

/// The detached uncertainty weight a loss applies: (1-p_t)^gamma for focal,
/// (1-p_t+p_j)^gamma for dual focal, ||p-y||_beta^gamma for the gBS losses,
/// 1 for CE and Brier loss.
double uncertainty_weight(const LossSpec& spec, std::span<const double> probs, int label);

/// Dispatch on LossSpec.
LossEval evaluate(const LossSpec& spec, const ProbVector& probs, const LabelVector& label);

/// Allocation-free core used by the trainer; probs is a softmax output and
/// label a class index. grad_out must have probs.size() entries.
/// Returns {value, weight}.
struct LossValueWeight {
    double value;
    double weight;
};
LossValueWeight evaluate_into(const LossSpec& spec, std::span<const double> probs, int label,
                              std::span<double> grad_out);

}  // namespace calib
