#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "calib/numkit.hpp"

namespace calib {

/// Evaluation population: N predictions with matching labels, shared K.
struct PredictionSet {
    std::vector<ProbVector> probs;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    int num_classes() const { return probs.empty() ? 0 : static_cast<int>(probs[0].size()); }
};

struct Bin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double avg_confidence = 0.0;  // C_m
    double accuracy = 0.0;        // A_m
};

struct BinReport {
    std::vector<Bin> bins;
};

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    std::size_t correct = 0;
    std::size_t incorrect = 0;
};

struct CalibrationReport {
    double ece = 0.0;
    double ada_ece = 0.0;
    double classwise_ece = 0.0;
    double mean_brier = 0.0;
    double accuracy = 0.0;
    double nll = 0.0;
    BinReport bin_data;
};

/// Sum of squared errors between prediction and one-hot label; identical
/// arithmetic to gbs_weight(probs, label, 2, 2).
double brier_score(const ProbVector& probs, const LabelVector& label);

/// Index of the largest entry (first on ties).
std::size_t argmax(std::span<const double> v);

/// Equal-width-bin expected calibration error over confidence max_i p_i.
/// Bin m covers [m/M, (m+1)/M), with the final bin closed at 1.
std::pair<double, BinReport> ece(const PredictionSet& preds, int num_bins);

/// Equal-mass (adaptive) binning: samples sorted by confidence, stable on
/// ties, split into num_bins contiguous groups; the first N mod M groups take
/// one extra sample. Requires N >= num_bins.
std::pair<double, BinReport> ada_ece(const PredictionSet& preds, int num_bins);

/// Mean over classes of the per-class ECE computed on each class's predicted
/// probability, with in-bin accuracy the fraction actually labelled as that
/// class.
double classwise_ece(const PredictionSet& preds, int num_bins);

/// Sample Pearson correlation; throws on zero variance or length mismatch.
double pearson(std::span<const double> xs, std::span<const double> ys);

std::vector<HistogramBin> confidence_histogram(const PredictionSet& preds, int num_bins,
                                               bool split_by_correctness);

/// All scalar metrics plus the equal-width bin data in one pass.
CalibrationReport evaluate_predictions(const PredictionSet& preds, int num_bins);

}  // namespace calib
