#include "calib/calibrate.hpp"

#include <cmath>
#include <stdexcept>

namespace calib {

ProbVector apply_temperature(std::span<const double> logits, double t) {
    return softmax(logits, t);
}

PredictionSet scale_predictions(const Matrix& logits, std::span<const int> labels, double t) {
    if (logits.rows != labels.size())
        throw std::invalid_argument("scale_predictions: logits/labels size mismatch");
    PredictionSet set;
    set.probs.reserve(logits.rows);
    set.labels.assign(labels.begin(), labels.end());
    for (std::size_t i = 0; i < logits.rows; ++i) set.probs.push_back(softmax(logits.row(i), t));
    return set;
}

TemperatureFit fit_temperature(const Matrix& val_logits, std::span<const int> val_labels,
                               int num_bins) {
    if (val_logits.rows == 0) throw std::invalid_argument("fit_temperature: empty validation set");
    if (val_logits.rows != val_labels.size())
        throw std::invalid_argument("fit_temperature: logits/labels size mismatch");
    if (num_bins < 1) throw std::invalid_argument("fit_temperature: num_bins must be >= 1");

    TemperatureFit fit;
    double best_ece = 0.0;
    double best_t = 1.0;
    bool first = true;
    for (int i = 1; i <= 100; ++i) {
        double t = static_cast<double>(i) / 10.0;
        double e = ece(scale_predictions(val_logits, val_labels, t), num_bins).first;
        if (t == 1.0) fit.val_ece_pre = e;
        bool better = first || e < best_ece;
        if (!better && e == best_ece) {
            // Tie: prefer T nearest 1, then the smaller T.
            double d_new = std::abs(t - 1.0), d_best = std::abs(best_t - 1.0);
            better = d_new < d_best || (d_new == d_best && t < best_t);
        }
        if (better) {
            best_ece = e;
            best_t = t;
            first = false;
        }
    }
    fit.temperature = best_t;
    fit.val_ece_post = best_ece;
    return fit;
}

}  // namespace calib
