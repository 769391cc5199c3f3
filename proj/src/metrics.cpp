#include "calib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace calib {

namespace {

void check_set(const PredictionSet& preds) {
    if (preds.size() == 0) throw std::invalid_argument("metrics: empty prediction set");
    if (preds.probs.size() != preds.labels.size())
        throw std::invalid_argument("metrics: probs/labels length mismatch");
    std::size_t k = preds.probs[0].size();
    for (const auto& p : preds.probs)
        if (p.size() != k) throw std::invalid_argument("metrics: inconsistent class count");
}

std::size_t bin_index(double confidence, int num_bins) {
    auto idx = static_cast<long>(std::floor(confidence * num_bins));
    if (idx < 0) idx = 0;
    if (idx >= num_bins) idx = num_bins - 1;  // confidence 1.0 lands in the last bin
    return static_cast<std::size_t>(idx);
}

}  // namespace

double brier_score(const ProbVector& probs, const LabelVector& label) {
    if (probs.size() != label.onehot.size())
        throw std::invalid_argument("brier_score: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double d = probs[i] - (i == static_cast<std::size_t>(label.class_index) ? 1.0 : 0.0);
        s += d * d;
    }
    return s;
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(
        std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

std::pair<double, BinReport> ece(const PredictionSet& preds, int num_bins) {
    check_set(preds);
    if (num_bins < 1) throw std::invalid_argument("ece: num_bins must be >= 1");
    BinReport report;
    report.bins.resize(static_cast<std::size_t>(num_bins));
    std::vector<double> conf_sum(static_cast<std::size_t>(num_bins), 0.0);
    std::vector<double> correct_sum(static_cast<std::size_t>(num_bins), 0.0);
    for (int m = 0; m < num_bins; ++m) {
        report.bins[static_cast<std::size_t>(m)].lower = static_cast<double>(m) / num_bins;
        report.bins[static_cast<std::size_t>(m)].upper = static_cast<double>(m + 1) / num_bins;
    }
    std::size_t n = preds.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pred = argmax(preds.probs[i].probs);
        double conf = preds.probs[i][pred];
        std::size_t m = bin_index(conf, num_bins);
        report.bins[m].count += 1;
        conf_sum[m] += conf;
        correct_sum[m] += pred == static_cast<std::size_t>(preds.labels[i]) ? 1.0 : 0.0;
    }
    double total = 0.0;
    for (std::size_t m = 0; m < report.bins.size(); ++m) {
        auto& b = report.bins[m];
        if (b.count == 0) continue;
        b.avg_confidence = conf_sum[m] / static_cast<double>(b.count);
        b.accuracy = correct_sum[m] / static_cast<double>(b.count);
        total += static_cast<double>(b.count) / static_cast<double>(n) *
                 std::abs(b.accuracy - b.avg_confidence);
    }
    return {total, report};
}

std::pair<double, BinReport> ada_ece(const PredictionSet& preds, int num_bins) {
    check_set(preds);
    if (num_bins < 1) throw std::invalid_argument("ada_ece: num_bins must be >= 1");
    std::size_t n = preds.size();
    if (n < static_cast<std::size_t>(num_bins))
        throw std::invalid_argument("ada_ece: need at least num_bins samples");

    std::vector<double> conf(n);
    std::vector<char> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pred = argmax(preds.probs[i].probs);
        conf[i] = preds.probs[i][pred];
        correct[i] = pred == static_cast<std::size_t>(preds.labels[i]) ? 1 : 0;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return conf[a] < conf[b]; });

    std::size_t base = n / static_cast<std::size_t>(num_bins);
    std::size_t extra = n % static_cast<std::size_t>(num_bins);
    BinReport report;
    report.bins.resize(static_cast<std::size_t>(num_bins));
    double total = 0.0;
    std::size_t pos = 0;
    for (std::size_t m = 0; m < static_cast<std::size_t>(num_bins); ++m) {
        std::size_t sz = base + (m < extra ? 1 : 0);
        auto& b = report.bins[m];
        b.count = sz;
        double csum = 0.0, asum = 0.0;
        b.lower = conf[order[pos]];
        b.upper = conf[order[pos + sz - 1]];
        for (std::size_t k = 0; k < sz; ++k) {
            std::size_t i = order[pos + k];
            csum += conf[i];
            asum += correct[i];
        }
        pos += sz;
        b.avg_confidence = csum / static_cast<double>(sz);
        b.accuracy = asum / static_cast<double>(sz);
        total += static_cast<double>(sz) / static_cast<double>(n) *
                 std::abs(b.accuracy - b.avg_confidence);
    }
    return {total, report};
}

double classwise_ece(const PredictionSet& preds, int num_bins) {
    check_set(preds);
    if (num_bins < 1) throw std::invalid_argument("classwise_ece: num_bins must be >= 1");
    std::size_t n = preds.size();
    int num_classes = preds.num_classes();
    double total = 0.0;
    std::vector<double> conf_sum, hit_sum;
    std::vector<std::size_t> count;
    for (int j = 0; j < num_classes; ++j) {
        conf_sum.assign(static_cast<std::size_t>(num_bins), 0.0);
        hit_sum.assign(static_cast<std::size_t>(num_bins), 0.0);
        count.assign(static_cast<std::size_t>(num_bins), 0);
        for (std::size_t i = 0; i < n; ++i) {
            double pj = preds.probs[i][static_cast<std::size_t>(j)];
            std::size_t m = bin_index(pj, num_bins);
            conf_sum[m] += pj;
            hit_sum[m] += preds.labels[i] == j ? 1.0 : 0.0;
            count[m] += 1;
        }
        for (std::size_t m = 0; m < count.size(); ++m) {
            if (count[m] == 0) continue;
            double cm = conf_sum[m] / static_cast<double>(count[m]);
            double am = hit_sum[m] / static_cast<double>(count[m]);
            total += static_cast<double>(count[m]) / static_cast<double>(n) * std::abs(am - cm);
        }
    }
    return total / static_cast<double>(num_classes);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two points");
    double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx;
        double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<HistogramBin> confidence_histogram(const PredictionSet& preds, int num_bins,
                                               bool split_by_correctness) {
    check_set(preds);
    if (num_bins < 1) throw std::invalid_argument("confidence_histogram: num_bins must be >= 1");
    std::vector<HistogramBin> bins(static_cast<std::size_t>(num_bins));
    for (int m = 0; m < num_bins; ++m) {
        bins[static_cast<std::size_t>(m)].lower = static_cast<double>(m) / num_bins;
        bins[static_cast<std::size_t>(m)].upper = static_cast<double>(m + 1) / num_bins;
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::size_t pred = argmax(preds.probs[i].probs);
        std::size_t m = bin_index(preds.probs[i][pred], num_bins);
        bins[m].count += 1;
        if (split_by_correctness) {
            if (pred == static_cast<std::size_t>(preds.labels[i]))
                bins[m].correct += 1;
            else
                bins[m].incorrect += 1;
        }
    }
    return bins;
}

CalibrationReport evaluate_predictions(const PredictionSet& preds, int num_bins) {
    check_set(preds);
    CalibrationReport rep;
    auto [e, bins] = ece(preds, num_bins);
    rep.ece = e;
    rep.bin_data = std::move(bins);
    rep.ada_ece = preds.size() >= static_cast<std::size_t>(num_bins)
                      ? ada_ece(preds, num_bins).first
                      : ada_ece(preds, static_cast<int>(preds.size())).first;
    rep.classwise_ece = classwise_ece(preds, num_bins);
    double brier_sum = 0.0, nll_sum = 0.0, correct = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds.probs[i];
        int label = preds.labels[i];
        double pt = p[static_cast<std::size_t>(label)];
        nll_sum += -std::log(pt > 1e-12 ? pt : 1e-12);
        for (std::size_t k = 0; k < p.size(); ++k) {
            double d = p[k] - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0);
            brier_sum += d * d;
        }
        correct += argmax(p.probs) == static_cast<std::size_t>(label) ? 1.0 : 0.0;
    }
    auto n = static_cast<double>(preds.size());
    rep.mean_brier = brier_sum / n;
    rep.nll = nll_sum / n;
    rep.accuracy = correct / n;
    return rep;
}

}  // namespace calib
