#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "inhand/error.hpp"
#include "inhand/geom.hpp"
#include "inhand/rng.hpp"
#include "inhand/scene.hpp"

namespace inhand {

// Camera-frame points, one per hit pixel, in row-major pixel order.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::array<int, 2>> source_pixel;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Probabilities aligned with the row-major hit-pixel order of build_cloud.
struct SamplingWeights {
  std::vector<double> p;
};

inline PointCloud build_cloud(const DepthMap& d, const CameraIntrinsics& k) {
  PointCloud cloud;
  cloud.points.reserve(d.hit_count());
  cloud.source_pixel.reserve(d.hit_count());
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      if (!d.hit(u, v)) continue;
      cloud.points.push_back(unproject(u, v, d.at(u, v), k));
      cloud.source_pixel.push_back({u, v});
    }
  }
  return cloud;
}

// weight ∝ exp(1/d) over hit pixels, stabilized by the max logit.
inline SamplingWeights depth_weights(const DepthMap& d) {
  std::vector<double> logits;
  logits.reserve(d.hit_count());
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u)
      if (d.hit(u, v)) logits.push_back(1.0 / d.at(u, v));
  if (logits.empty()) throw Error(ErrorCode::empty_cloud, "no hit pixels to weight");

  double max_logit = logits.front();
  for (double l : logits) max_logit = std::max(max_logit, l);

  SamplingWeights w;
  w.p.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w.p[i] = std::exp(logits[i] - max_logit);
    sum += w.p[i];
  }
  for (double& x : w.p) x /= sum;
  return w;
}

namespace detail {

// Fenwick tree over non-negative weights; supports prefix-sum search so a
// sequential without-replacement draw costs O(log n).
class WeightTree {
 public:
  explicit WeightTree(const std::vector<double>& weights)
      : n_(weights.size()), tree_(weights.size() + 1, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) add(i, weights[i]);
  }

  double total() const {
    double sum = 0.0;
    for (std::size_t i = n_; i > 0; i -= i & (~i + 1)) sum += tree_[i];
    return sum;
  }

  void add(std::size_t i, double delta) {
    for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += delta;
  }

  // Smallest index whose inclusive prefix sum exceeds target.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      const std::size_t next = pos + mask;
      if (next <= n_ && tree_[next] < target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return pos;  // 0-based index
  }

 private:
  std::size_t n_;
  std::vector<double> tree_;
};

}  // namespace detail

// Sequential weighted draws without replacement, renormalizing after each
// draw (removal from the tree renormalizes implicitly).
inline PointCloud downsample(const PointCloud& cloud, const SamplingWeights& weights,
                             std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "downsample count must be at least 1");
  if (weights.p.size() != cloud.size())
    throw Error(ErrorCode::invalid_argument, "weights do not match cloud");
  if (cloud.size() <= n) return cloud;

  std::vector<double> w = weights.p;
  detail::WeightTree tree(w);
  Rng rng(seed);

  PointCloud out;
  out.points.reserve(n);
  out.source_pixel.reserve(n);
  for (std::size_t draw = 0; draw < n; ++draw) {
    const double total = tree.total();
    if (!(total > 0.0)) throw Error(ErrorCode::numerical_failure, "sampling weights exhausted");
    const double target = rng.uniform() * total;
    std::size_t idx = tree.find(target);
    // Float dust from removals can land on an already-drawn entry; step to
    // the nearest live one.
    while (idx < w.size() && w[idx] == 0.0) ++idx;
    if (idx >= w.size()) {
      idx = w.size();
      while (idx > 0 && w[idx - 1] == 0.0) --idx;
      if (idx == 0) throw Error(ErrorCode::numerical_failure, "sampling weights exhausted");
      --idx;
    }
    out.points.push_back(cloud.points[idx]);
    out.source_pixel.push_back(cloud.source_pixel[idx]);
    tree.add(idx, -w[idx]);
    w[idx] = 0.0;
  }
  return out;
}

}  // namespace inhand
