// Copyright 2026 The DP-Fusion Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPFUSION_DIST_H_
#define DPFUSION_DIST_H_

#include <cstddef>
#include <span>
#include <vector>

namespace dpfusion {

// Tolerance on |sum - 1| accepted for a normalized distribution.
inline constexpr double kNormalizationTolerance = 1e-9;
// Entries below this are raised to it before any divergence is taken.
inline constexpr double kProbabilityFloor = 1e-12;

// Rényi order alpha > 1. The mechanism runs at alpha = 2.
class RenyiOrder {
 public:
  RenyiOrder() = default;
  explicit RenyiOrder(double alpha);

  double value() const { return alpha_; }
  bool is_two() const { return alpha_ == 2.0; }

 private:
  double alpha_ = 2.0;
};

// Raw next-token scores z, one per vocabulary entry. All entries finite.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> logits);

  std::span<const double> values() const { return logits_; }
  std::size_t size() const { return logits_.size(); }
  double operator[](std::size_t i) const { return logits_[i]; }

 private:
  std::vector<double> logits_;
};

// A probability vector over a finite vocabulary: entries >= 0, summing to 1
// within kNormalizationTolerance.
class Dist {
 public:
  Dist() = default;

  // Validates and takes ownership. Throws kInvalidInput on negative or
  // non-finite entries, an empty vector, or a sum off by more than the
  // tolerance.
  static Dist FromProbabilities(std::vector<double> probs);
  // Divides by the sum first; the input only needs to be non-negative with a
  // positive finite sum.
  static Dist Normalized(std::vector<double> weights);
  static Dist Uniform(std::size_t vocab_size);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  friend bool operator==(const Dist&, const Dist&) = default;

 private:
  explicit Dist(std::vector<double> probs) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

// exp(z_y / T) / sum_v exp(z_v / T), max-shifted before exponentiation.
Dist SoftmaxWithTemperature(const LogitVector& logits, double temperature);

// Raises every entry to at least `floor` and renormalizes.
Dist ApplyProbabilityFloor(const Dist& dist, double floor = kProbabilityFloor);

// D_alpha(p || q) = 1/(alpha-1) log sum_i p_i^alpha q_i^(1-alpha).
// Dispatches to the alpha = 2 closed form when possible. Coordinates with
// p_i = 0 contribute nothing; p_i > 0 with q_i = 0 throws
// kDivergenceUndefined.
double RenyiDivergence(const Dist& p, const Dist& q, RenyiOrder order = {});

// The general-order path, never taking the alpha = 2 shortcut.
double RenyiDivergenceGeneralOrder(const Dist& p, const Dist& q,
                                   RenyiOrder order);

// max(D_alpha(p || q), D_alpha(q || p)).
double SymmetricRenyi(const Dist& p, const Dist& q, RenyiOrder order = {});

// lambda * p_priv + (1 - lambda) * p_pub, lambda in [0, 1].
Dist Mix(double lambda, const Dist& p_priv, const Dist& p_pub);

}  // namespace dpfusion

#endif  // DPFUSION_DIST_H_
