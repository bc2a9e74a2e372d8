#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "atomsense/analysis.hpp"

namespace atomsense {

struct HybridState {
  double bias_estimate = 0.0;
  double gain = 1.0;
  double last_update = 0.0;

  void validate() const {
    if (!(gain > 0.0 && gain <= 1.0)) throw std::invalid_argument("HybridState: gain must be in (0,1]");
  }
};

/// b_n = b_{n-1} + G [(atomic - classical) - b_{n-1}]
inline HybridState hybrid_update(const HybridState& state, double atomic, double classical_avg,
                                 double t = 0.0) {
  state.validate();
  HybridState next = state;
  next.bias_estimate = state.bias_estimate +
                       state.gain * ((atomic - classical_avg) - state.bias_estimate);
  next.last_update = t;
  return next;
}

inline double hybrid_output(const HybridState& state, double classical_sample) {
  return classical_sample + state.bias_estimate;
}

struct GainChoice {
  double gain = 1.0;
  double tau_cross = 0.0;
  bool fallback = false;  // no crossing found
};

namespace detail {

inline double loglog_interp(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = std::log(x / xs[lo]) / std::log(xs[hi] / xs[lo]);
  return std::exp(std::log(ys[lo]) + w * std::log(ys[hi] / ys[lo]));
}

}  // namespace detail

/// Loop gain from the first tau where the atomic Allan deviation drops to
/// or below the classical one: G = update_period / tau_cross, clamped to
/// (0, 1]. The crossing is located by log-log interpolation on the atomic
/// taus; ties resolve to the earliest tau.
inline GainChoice pick_gain(const AdevCurve& atomic, const AdevCurve& classical,
                            double update_period, double fallback_gain) {
  if (atomic.size() == 0 || classical.size() == 0) {
    return {fallback_gain, 0.0, true};
  }
  const double lo = std::max(atomic.taus.front(), classical.taus.front());
  const double hi = std::min(atomic.taus.back(), classical.taus.back());
  std::vector<double> taus, diff;
  for (std::size_t i = 0; i < atomic.size(); ++i) {
    const double t = atomic.taus[i];
    if (t < lo || t > hi) continue;
    const double c = detail::loglog_interp(classical.taus, classical.sigmas, t);
    taus.push_back(t);
    diff.push_back(std::log(atomic.sigmas[i]) - std::log(c));
  }
  if (taus.empty()) return {fallback_gain, 0.0, true};
  double tau_cross = -1.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (diff[i] <= 0.0) {
      if (i == 0) {
        tau_cross = taus[0];
      } else {
        const double w = diff[i - 1] / (diff[i - 1] - diff[i]);
        tau_cross = std::exp(std::log(taus[i - 1]) + w * std::log(taus[i] / taus[i - 1]));
      }
      break;
    }
  }
  if (tau_cross < 0.0) return {fallback_gain, 0.0, true};
  return {std::clamp(update_period / tau_cross, 1e-12, 1.0), tau_cross, false};
}

struct TimedValue {
  double t = 0.0;
  double value = 0.0;
};

struct HybridRow {
  double t = 0.0;
  double hybrid = 0.0;
  double classical = 0.0;
  double bias = 0.0;
  std::optional<double> atomic;
};

/// Streaming hybridizer. Classical samples arrive at full rate; each atomic
/// measurement covers [t, t + window) and is compared with the classical
/// mean over the same window once that window has been fully observed.
class Hybridizer {
 public:
  Hybridizer(double gain, double window, double initial_bias = 0.0)
      : state_{initial_bias, gain, 0.0}, window_(window) {
    state_.validate();
  }

  void push_atomic(double t, double value) { pending_.push_back({t, value}); }

  HybridRow push_classical(double t, double value) {
    HybridRow row{t, 0.0, value, 0.0, std::nullopt};
    history_.push_back({t, value});
    // Apply every atomic measurement whose window ended at or before t.
    while (!pending_.empty() && pending_.front().t + window_ <= t + 1e-12) {
      const TimedValue at = pending_.front();
      pending_.erase(pending_.begin());
      double sum = 0.0;
      int n = 0;
      for (const auto& h : history_) {
        if (h.t >= at.t - 1e-12 && h.t < at.t + window_ - 1e-12) {
          sum += h.value;
          ++n;
        }
      }
      if (n > 0) {
        state_ = hybrid_update(state_, at.value, sum / n, t);
        row.atomic = at.value;
      }
      std::erase_if(history_, [&](const TimedValue& h) { return h.t < at.t + window_ - 1e-12; });
    }
    row.bias = state_.bias_estimate;
    row.hybrid = hybrid_output(state_, value);
    return row;
  }

  const HybridState& state() const { return state_; }

 private:
  HybridState state_;
  double window_;
  std::vector<TimedValue> pending_;
  std::vector<TimedValue> history_;
};

/// Offline hybridization; identical arithmetic to feeding a Hybridizer in
/// time order.
inline std::vector<HybridRow> hybridize(std::span<const TimedValue> classical,
                                        std::span<const TimedValue> atomic, double gain,
                                        double window, double initial_bias = 0.0) {
  Hybridizer h(gain, window, initial_bias);
  std::vector<HybridRow> rows;
  rows.reserve(classical.size());
  std::size_t next_atomic = 0;
  for (const auto& c : classical) {
    while (next_atomic < atomic.size() && atomic[next_atomic].t <= c.t) {
      h.push_atomic(atomic[next_atomic].t, atomic[next_atomic].value);
      ++next_atomic;
    }
    rows.push_back(h.push_classical(c.t, c.value));
  }
  return rows;
}

}  // namespace atomsense
