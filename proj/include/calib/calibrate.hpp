#pragma once

#include <span>

#include "calib/metrics.hpp"
#include "calib/numkit.hpp"

namespace calib {

struct TemperatureGrid {
    double lo = 0.1;
    double hi = 10.0;
    double step = 0.1;
};

struct TemperatureFit {
    double temperature = 1.0;
    double val_ece_pre = 0.0;   // ECE at T = 1
    double val_ece_post = 0.0;  // ECE at the fitted T (grid minimum)
    TemperatureGrid grid;
};

/// Softmax at temperature t; t must be positive. Argmax is preserved.
ProbVector apply_temperature(std::span<const double> logits, double t);

/// Grid search T in {0.1, 0.2, ..., 10.0} minimizing validation ECE.
/// Ties break toward the T closest to 1, then toward the smaller T.
TemperatureFit fit_temperature(const Matrix& val_logits, std::span<const int> val_labels,
                               int num_bins);

/// The prediction set obtained by applying temperature t to each logit row.
PredictionSet scale_predictions(const Matrix& logits, std::span<const int> labels, double t);

}  // namespace calib
