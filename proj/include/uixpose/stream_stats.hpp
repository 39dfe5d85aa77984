#pragma once

/**
 * @file stream_stats.hpp
 * @brief Session-local streaming statistics shared by the channel extractors.
 */

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>

#include "uixpose/core.hpp"

namespace uixpose {

struct StreamConfig {
    double ewma_alpha = 0.3;  // (0,1]
    std::size_t window = 12;  // W >= 1
    double eps = 1e-9;
};

/// y_0 = x_0; y_t = alpha * x_t + (1 - alpha) * y_{t-1}.
class Ewma {
public:
    explicit Ewma(double alpha = 0.3) : alpha_(alpha) {}

    double update(double x) {
        y_ = y_ ? alpha_ * x + (1.0 - alpha_) * *y_ : x;
        return *y_;
    }
    std::optional<double> value() const noexcept { return y_; }

private:
    double alpha_;
    std::optional<double> y_;
};

/// Divides by the maximum of the last W values (including the current one). Negative inputs floor at 0.
class RollingMaxNorm {
public:
    explicit RollingMaxNorm(std::size_t window = 12, double eps = 1e-9)
        : window_(std::max<std::size_t>(window, 1)), eps_(eps) {}

    double update(double x) {
        const double v = std::max(x, 0.0);
        win_.push_back(v);
        while (win_.size() > window_) win_.pop_front();
        const double m = *std::max_element(win_.begin(), win_.end());
        return clip01(v / std::max(m, eps_));
    }

private:
    std::size_t window_;
    double eps_;
    std::deque<double> win_;
};

/// |x - mean| / (std + eps) over the last W raw values, population variance.
class RollingZScore {
public:
    explicit RollingZScore(std::size_t window = 12, double eps = 1e-9)
        : window_(std::max<std::size_t>(window, 1)), eps_(eps) {}

    double update(double x) {
        win_.push_back(x);
        while (win_.size() > window_) win_.pop_front();
        const double n = static_cast<double>(win_.size());
        double mean = 0.0;
        for (double v : win_) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : win_) var += (v - mean) * (v - mean);
        var /= n;
        const double sd = std::sqrt(var);
        if (sd == 0.0) return 0.0;
        return std::abs(x - mean) / (sd + eps_);
    }

private:
    std::size_t window_;
    double eps_;
    std::deque<double> win_;
};

/// Mean of the last K values.
class RollingMean {
public:
    explicit RollingMean(std::size_t window = 3) : window_(std::max<std::size_t>(window, 1)) {}

    double update(double x) {
        win_.push_back(x);
        while (win_.size() > window_) win_.pop_front();
        double s = 0.0;
        for (double v : win_) s += v;
        return s / static_cast<double>(win_.size());
    }

private:
    std::size_t window_;
    std::deque<double> win_;
};

/// Named per-series state for one session. Series are created on first use.
class StreamStats {
public:
    explicit StreamStats(StreamConfig cfg = {}) : cfg_(cfg) {}

    double ewma(const std::string& series, double x) {
        return ewma_.try_emplace(series, cfg_.ewma_alpha).first->second.update(x);
    }

    double norm(const std::string& series, double x) {
        return norm_.try_emplace(series, cfg_.window, cfg_.eps).first->second.update(x);
    }

    /// norm(ewma(x)), the tilde series.
    double smooth_norm(const std::string& series, double x) { return norm(series, ewma(series, x)); }

    double zabs(const std::string& series, double x) {
        return z_.try_emplace(series, cfg_.window, cfg_.eps).first->second.update(x);
    }

    double mean(const std::string& series, double x, std::size_t k) {
        return mean_.try_emplace(series, k).first->second.update(x);
    }

    const StreamConfig& config() const noexcept { return cfg_; }

private:
    StreamConfig cfg_;
    std::map<std::string, Ewma> ewma_;
    std::map<std::string, RollingMaxNorm> norm_;
    std::map<std::string, RollingZScore> z_;
    std::map<std::string, RollingMean> mean_;
};

}  // namespace uixpose
