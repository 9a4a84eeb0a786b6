#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include "ug/predictor.hpp"
#include "ug/resample.hpp"

namespace ug {

/*
 * Exact posterior-mean noise predictor for a finite dataset under the forward
 * process x_t = sqrt(a) x0 + sqrt(1 - a) eps. It is the minimizer of the
 * denoising objective on its own data.
 *
 * Besides the native item shape it accepts shapes related to it by an integer
 * factor per axis: coarser queries use the block-averaged items, finer queries
 * use nearest-upsampled items.
 */
class DatasetDenoiser final : public Predictor {
 public:
  DatasetDenoiser(std::vector<Field> items, NoiseSchedule schedule, std::vector<int> labels = {}, int num_classes = 0)
      : items_(std::move(items)), labels_(std::move(labels)), classes_(num_classes), schedule_(std::move(schedule)) {
    if (items_.empty()) throw ConfigError("dataset denoiser needs at least one item");
    for (const auto& it : items_)
      if (it.shape() != items_.front().shape())
        throw ShapeError("dataset items must share one shape: " + items_.front().shape().str() + " vs " + it.shape().str());
    if (!labels_.empty()) {
      if (labels_.size() != items_.size()) throw ConfigError("label count does not match item count");
      if (classes_ <= 0) classes_ = *std::max_element(labels_.begin(), labels_.end()) + 1;
      for (int l : labels_)
        if (l < 0 || l >= classes_) throw ConfigError("label " + std::to_string(l) + " outside class vocabulary");
    } else if (classes_ != 0) {
      throw ConfigError("class vocabulary given without labels");
    }
  }

  const NoiseSchedule& schedule() const override { return schedule_; }
  int num_classes() const override { return classes_; }
  const std::vector<Field>& items() const { return items_; }
  const Shape& native_shape() const { return items_.front().shape(); }

  std::string shape_family() const override {
    return "native " + native_shape().str() + " or any shape differing from it by an integer factor per axis";
  }

  // Posterior mean of x0 given x at step t.
  Field posterior_mean(const Field& x, int t, Condition c) const {
    check_condition(c);
    const auto& data = items_at(x);
    const double alpha = schedule_.alpha(t);
    const double sa = std::sqrt(alpha);
    const double denom = 2.0 * (1.0 - alpha);

    std::vector<double> logits;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (c && labels_[i] != *c) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = x[k] - sa * data[i][k];
        d2 += r * r;
      }
      logits.push_back(-d2 / denom);
      members.push_back(i);
    }
    if (members.empty()) throw ConfigError("condition " + std::to_string(*c) + " selects no dataset items");

    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) {
      l = std::exp(l - top);
      z += l;
    }
    Field mean(x.shape());
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double w = logits[j] / z;
      const Field& item = data[members[j]];
      for (std::size_t k = 0; k < x.size(); ++k) mean[k] += w * item[k];
    }
    return mean;
  }

  Field predict(const Field& x, int t, Condition c) const override {
    const Field x0 = posterior_mean(x, t, c);
    const double alpha = schedule_.alpha(t);
    return linear_comb(1.0 / std::sqrt(1.0 - alpha), x, -std::sqrt(alpha) / std::sqrt(1.0 - alpha), x0);
  }

 private:
  const std::vector<Field>& items_at(const Field& x) const {
    const Shape& native = native_shape();
    if (x.shape() == native) return items_;
    if (x.channels() != native.channels || x.dims().size() != native.dims.size()) reject_shape(x);

    std::vector<std::size_t> down(native.dims.size(), 1), up(native.dims.size(), 1);
    bool coarser = true, finer = true;
    for (std::size_t a = 0; a < native.dims.size(); ++a) {
      const auto q = x.dims()[a], n = native.dims[a];
      if (n % q == 0) down[a] = n / q; else coarser = false;
      if (q % n == 0) up[a] = q / n; else finer = false;
    }
    if (!coarser && !finer) reject_shape(x);

    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(x.dims());
    if (it != cache_.end()) return it->second;
    std::vector<Field> resized;
    resized.reserve(items_.size());
    for (const auto& item : items_)
      resized.push_back(coarser ? downsample_box(item, ScalePlan(down)) : upsample_nearest(item, ScalePlan(up)));
    return cache_.emplace(x.dims(), std::move(resized)).first->second;
  }

  std::vector<Field> items_;
  std::vector<int> labels_;
  int classes_;
  NoiseSchedule schedule_;
  mutable std::mutex cache_mutex_;
  mutable std::map<Dims, std::vector<Field>> cache_;
};

}  // namespace ug
