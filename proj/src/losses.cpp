#include "calib/losses.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace calib {

namespace {

constexpr double kLogClamp = 1e-12;

std::atomic<std::uint64_t> g_clamp_count{0};

double clamped_log_prob(double p) {
    if (p < kLogClamp) {
        g_clamp_count.fetch_add(1, std::memory_order_relaxed);
        p = kLogClamp;
    }
    return std::log(p);
}

double is_label(std::size_t i, int t) { return i == static_cast<std::size_t>(t) ? 1.0 : 0.0; }

void check_inputs(std::span<const double> probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
        throw std::invalid_argument("loss: label index out of range");
}

// Largest non-true probability strictly below p_t; falls back to the largest
// non-true probability when nothing lies strictly below (exact ties, uniform).
std::size_t runner_up_index(std::span<const double> p, int t) {
    double pt = p[static_cast<std::size_t>(t)];
    std::size_t best = p.size();
    std::size_t best_any = p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i == static_cast<std::size_t>(t)) continue;
        if (best_any == p.size() || p[i] > p[best_any]) best_any = i;
        if (p[i] < pt && (best == p.size() || p[i] > p[best])) best = i;
    }
    return best != p.size() ? best : best_any;
}

double sum_abs_pow(std::span<const double> p, int t, double beta) {
    double s = 0.0;
    if (beta == 2.0) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            double d = p[i] - is_label(i, t);
            s += d * d;
        }
    } else if (beta == 1.0) {
        for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - is_label(i, t));
    } else {
        for (std::size_t i = 0; i < p.size(); ++i)
            s += std::pow(std::abs(p[i] - is_label(i, t)), beta);
    }
    return s;
}

double gbs_weight_core(std::span<const double> p, int t, double gamma, double beta) {
    if (gamma < 0.0) throw std::invalid_argument("gbs_weight: gamma must be >= 0");
    if (beta < 1.0) throw std::invalid_argument("gbs_weight: beta must be >= 1");
    if (gamma == 0.0) return 1.0;
    double s = sum_abs_pow(p, t, beta);
    double e = gamma / beta;
    if (e == 1.0) return s;
    if (e == 2.0) return s * s;
    return std::pow(s, e);
}

LossValueWeight ce_core(std::span<const double> p, int t, std::span<double> grad) {
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = p[i] - is_label(i, t);
    return {-clamped_log_prob(p[static_cast<std::size_t>(t)]), 1.0};
}

LossValueWeight brier_core(std::span<const double> p, int t, std::span<double> grad) {
    double value = 0.0;
    double dot = 0.0;  // sum_i p_i (p_i - y_i)
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - is_label(i, t);
        value += d * d;
        dot += p[i] * d;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - is_label(i, t);
        grad[i] = 2.0 * p[i] * (d - dot);
    }
    return {value, 1.0};
}

double focal_grad_factor_core(double p, double gamma) {
    if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("focal_grad_factor: p must be in (0, 1]");
    if (gamma < 0.0) throw std::invalid_argument("focal_grad_factor: gamma must be >= 0");
    double term1 = std::pow(1.0 - p, gamma);
    if (gamma == 0.0 || p == 1.0) return gamma == 0.0 ? 1.0 : term1;
    double term2 = gamma * p * std::pow(1.0 - p, gamma - 1.0) * std::log(p);
    return term1 - term2;
}

LossValueWeight focal_core(std::span<const double> p, int t, double gamma, std::span<double> grad) {
    if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
    double pt = p[static_cast<std::size_t>(t)];
    double w = std::pow(1.0 - pt, gamma);
    double logpt = clamped_log_prob(pt);
    // The weight depends only on p_t, so the full gradient of
    // -(1-p_t)^g log p_t through the softmax factors as g(p_t) * (p - y).
    double g = focal_grad_factor_core(pt > 0.0 ? pt : kLogClamp, gamma);
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = g * (p[i] - is_label(i, t));
    return {w * -logpt, w};
}

LossValueWeight dual_focal_core(std::span<const double> p, int t, double gamma,
                                std::span<double> grad) {
    if (p.size() < 2) throw std::invalid_argument("dual_focal_loss: need K >= 2");
    std::size_t j = runner_up_index(p, t);
    double pt = p[static_cast<std::size_t>(t)];
    double pj = p[j];
    double s = 1.0 - pt + pj;
    double ptc = pt > kLogClamp ? pt : kLogClamp;
    double logpt = clamped_log_prob(pt);
    double w = std::pow(s, gamma);
    if (s <= 0.0) {  // p_t = 1, p_j = 0: loss and gradient vanish
        for (auto& gv : grad) gv = 0.0;
        return {0.0, gamma == 0.0 ? 1.0 : 0.0};
    }
    // L = -s^g log p_t with s = 1 - p_t + p_j, j held fixed.
    double dL_dpt = gamma * std::pow(s, gamma - 1.0) * logpt - w / ptc;
    double dL_dpj = -gamma * std::pow(s, gamma - 1.0) * logpt;
    double ft = dL_dpt * pt;
    double fj = dL_dpj * pj;
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = -p[i] * (ft + fj);
    grad[static_cast<std::size_t>(t)] += ft;
    grad[j] += fj;
    return {w * -logpt, w};
}

LossValueWeight bsce_core(std::span<const double> p, int t, double gamma, double beta,
                          std::span<double> grad) {
    double u = gbs_weight_core(p, t, gamma, beta);
    double ce_value = -clamped_log_prob(p[static_cast<std::size_t>(t)]);
    // Product rule: grad = u * (p - y) + CE * du/dz.
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = u * (p[i] - is_label(i, t));
    if (gamma > 0.0) {
        double s = sum_abs_pow(p, t, beta);
        if (s > 0.0) {
            double spow = std::pow(s, gamma / beta - 1.0);
            double dot = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - is_label(i, t);
                double du_dpi =
                    gamma * spow *
                    (beta == 2.0 ? d : std::copysign(std::pow(std::abs(d), beta - 1.0), d));
                dot += du_dpi * p[i];
                grad[i] += ce_value * du_dpi * p[i];  // temporary: p_i * du/dp_i term
            }
            for (std::size_t i = 0; i < p.size(); ++i) grad[i] -= ce_value * p[i] * dot;
        }
    }
    return {u * ce_value, u};
}

LossValueWeight gra_core(std::span<const double> p, int t, double u, std::span<double> grad) {
    double ce_value = -clamped_log_prob(p[static_cast<std::size_t>(t)]);
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = u * (p[i] - is_label(i, t));
    return {u * ce_value, u};
}

// Detached uncertainty weight of the base loss, for the -GRA variants.
double base_weight(const LossSpec& spec, std::span<const double> p, int t) {
    double pt = p[static_cast<std::size_t>(t)];
    switch (spec.kind) {
        case LossKind::CE:
        case LossKind::BrierLoss:
            return 1.0;
        case LossKind::Focal:
            return std::pow(1.0 - pt, spec.gamma);
        case LossKind::FocalFLSD53:
            return std::pow(1.0 - pt, flsd_gamma(pt));
        case LossKind::DualFocal: {
            std::size_t j = runner_up_index(p, t);
            return std::pow(1.0 - pt + p[j], spec.gamma);
        }
        case LossKind::BSCE:
        case LossKind::BSCE_GRA:
            return gbs_weight_core(p, t, spec.gamma, spec.beta);
    }
    throw std::logic_error("base_weight: unhandled loss kind");
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::CE: return "ce";
        case LossKind::BrierLoss: return "brier";
        case LossKind::Focal: return "focal";
        case LossKind::FocalFLSD53: return "flsd53";
        case LossKind::DualFocal: return "dual_focal";
        case LossKind::BSCE: return "bsce";
        case LossKind::BSCE_GRA: return "bsce_gra";
    }
    return "unknown";
}

LossSpec LossSpec::canonical() const {
    LossSpec out = *this;
    if (out.kind == LossKind::BSCE_GRA) {
        out.kind = LossKind::BSCE;
        out.gra = true;
    }
    return out;
}

std::uint64_t clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }
void reset_clamp_count() { g_clamp_count.store(0, std::memory_order_relaxed); }

double flsd_gamma(double p_true) {
    if (p_true < 0.0 || p_true > 1.0)
        throw std::invalid_argument("flsd_gamma: p_true must be in [0, 1]");
    return p_true < 0.2 ? 5.0 : 3.0;
}

double focal_grad_factor(double p, double gamma) { return focal_grad_factor_core(p, gamma); }

double gbs_weight(const ProbVector& probs, const LabelVector& label, double gamma, double beta) {
    check_inputs(probs.probs, label.class_index);
    return gbs_weight_core(probs.probs, label.class_index, gamma, beta);
}

double uncertainty_weight(const LossSpec& spec, std::span<const double> probs, int label) {
    check_inputs(probs, label);
    return base_weight(spec.canonical(), probs, label);
}

LossValueWeight evaluate_into(const LossSpec& raw_spec, std::span<const double> probs, int label,
                              std::span<double> grad_out) {
    check_inputs(probs, label);
    if (grad_out.size() != probs.size())
        throw std::invalid_argument("evaluate_into: gradient size mismatch");
    LossSpec spec = raw_spec.canonical();
    if (spec.gamma < 0.0) throw std::invalid_argument("loss: gamma must be >= 0");
    if (spec.beta < 1.0) throw std::invalid_argument("loss: beta must be >= 1");
    if (spec.gra) return gra_core(probs, label, base_weight(spec, probs, label), grad_out);
    switch (spec.kind) {
        case LossKind::CE: return ce_core(probs, label, grad_out);
        case LossKind::BrierLoss: return brier_core(probs, label, grad_out);
        case LossKind::Focal: return focal_core(probs, label, spec.gamma, grad_out);
        case LossKind::FocalFLSD53:
            return focal_core(probs, label, flsd_gamma(probs[static_cast<std::size_t>(label)]),
                              grad_out);
        case LossKind::DualFocal: return dual_focal_core(probs, label, spec.gamma, grad_out);
        case LossKind::BSCE: return bsce_core(probs, label, spec.gamma, spec.beta, grad_out);
        case LossKind::BSCE_GRA: break;  // canonicalized away
    }
    throw std::logic_error("evaluate_into: unhandled loss kind");
}

LossEval evaluate(const LossSpec& spec, const ProbVector& probs, const LabelVector& label) {
    LossEval out;
    out.grad_logits.resize(probs.size());
    auto vw = evaluate_into(spec, probs.probs, label.class_index, out.grad_logits);
    out.value = vw.value;
    out.weight = vw.weight;
    return out;
}

LossEval cross_entropy(const ProbVector& probs, const LabelVector& label) {
    return evaluate({LossKind::CE}, probs, label);
}

LossEval brier_training_loss(const ProbVector& probs, const LabelVector& label) {
    return evaluate({LossKind::BrierLoss}, probs, label);
}

LossEval focal_loss(const ProbVector& probs, const LabelVector& label, double gamma) {
    return evaluate({LossKind::Focal, gamma}, probs, label);
}

LossEval dual_focal_loss(const ProbVector& probs, const LabelVector& label, double gamma) {
    return evaluate({LossKind::DualFocal, gamma}, probs, label);
}

LossEval bsce(const ProbVector& probs, const LabelVector& label, double gamma, double beta) {
    return evaluate({LossKind::BSCE, gamma, beta}, probs, label);
}

LossEval bsce_gra(const ProbVector& probs, const LabelVector& label, double gamma, double beta) {
    return evaluate({LossKind::BSCE_GRA, gamma, beta}, probs, label);
}

}  // namespace calib
