#include "calib/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace calib {

bool Matrix::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

bool is_valid_prob_vector(std::span<const double> probs, double tol) {
    if (probs.empty()) return false;
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

ProbVector make_prob_vector(std::vector<double> probs) {
    if (!is_valid_prob_vector(probs))
        throw std::invalid_argument("make_prob_vector: entries must lie in [0,1] and sum to 1");
    return ProbVector{std::move(probs)};
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), gen_(seed) {}

std::uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; 1 - uniform() keeps the log argument in (0, 1].
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t RngStream::below(std::size_t bound) {
    if (bound == 0) throw std::invalid_argument("RngStream::below: bound must be positive");
    return static_cast<std::size_t>(next_u64() % bound);
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
}  // namespace

RngStream RngStream::split(std::uint64_t tag) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(tag + 1)));
}

std::string RngStream::state_string() const {
    std::ostringstream os;
    os << gen_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << spare_ << ' ' << seed_;
    return os.str();
}

void RngStream::restore_state(const std::string& state) {
    std::istringstream is(state);
    int spare_flag = 0;
    is >> gen_ >> spare_flag >> spare_ >> seed_;
    if (!is) throw std::invalid_argument("RngStream::restore_state: malformed state string");
    has_spare_ = spare_flag != 0;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) throw std::invalid_argument("log_sum_exp: non-finite input");
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return m + std::log(sum);
}

void softmax_into(std::span<const double> logits, double temperature, std::span<double> out) {
    if (temperature <= 0.0) throw std::invalid_argument("softmax: temperature must be positive");
    if (logits.size() < 2) throw std::invalid_argument("softmax: need at least two logits");
    if (out.size() != logits.size()) throw std::invalid_argument("softmax: output size mismatch");
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - m) / temperature);
        sum += out[i];
    }
    for (auto& p : out) p /= sum;
}

ProbVector softmax(std::span<const double> logits, double temperature) {
    ProbVector pv;
    pv.probs.resize(logits.size());
    softmax_into(logits, temperature, pv.probs);
    return pv;
}

LabelVector one_hot(int class_index, int num_classes) {
    if (class_index < 0 || class_index >= num_classes)
        throw std::invalid_argument("one_hot: class index out of range");
    LabelVector lv;
    lv.onehot.assign(static_cast<std::size_t>(num_classes), 0.0);
    lv.onehot[static_cast<std::size_t>(class_index)] = 1.0;
    lv.class_index = class_index;
    return lv;
}

std::vector<double> rng_standard_normal(RngStream& rng, std::size_t n) {
    if (n == 0) throw std::invalid_argument("rng_standard_normal: n must be >= 1");
    std::vector<double> out(n);
    for (auto& x : out) x = rng.normal();
    return out;
}

}  // namespace calib
