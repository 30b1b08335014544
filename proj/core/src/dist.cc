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

#include "dpfusion/dist.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

void CheckSameSize(const Dist& p, const Dist& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "dimension mismatch: " + std::to_string(p.size()) + " vs " +
                    std::to_string(q.size()));
  }
}

[[noreturn]] void ThrowSupport(std::size_t i) {
  throw Error(ErrorCode::kDivergenceUndefined,
              "p has mass where q is zero at index " + std::to_string(i));
}

}  // namespace

RenyiOrder::RenyiOrder(double alpha) : alpha_(alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidInput,
                "Renyi order must be finite and > 1, got " +
                    std::to_string(alpha));
  }
}

LogitVector::LogitVector(std::vector<double> logits)
    : logits_(std::move(logits)) {
  if (logits_.empty()) {
    throw Error(ErrorCode::kInvalidInput, "empty logit vector");
  }
  for (double z : logits_) {
    if (!std::isfinite(z)) {
      throw Error(ErrorCode::kInvalidInput, "non-finite logit");
    }
  }
}

Dist Dist::FromProbabilities(std::vector<double> probs) {
  if (probs.empty()) {
    throw Error(ErrorCode::kInvalidInput, "empty distribution");
  }
  CompensatedSum total;
  for (double v : probs) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidInput,
                  "distribution entries must be finite and non-negative");
    }
    total.Add(v);
  }
  if (std::abs(total.value() - 1.0) > kNormalizationTolerance) {
    throw Error(ErrorCode::kInvalidInput,
                "distribution sums to " + std::to_string(total.value()));
  }
  return Dist(std::move(probs));
}

Dist Dist::Normalized(std::vector<double> weights) {
  CompensatedSum total;
  for (double v : weights) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidInput,
                  "weights must be finite and non-negative");
    }
    total.Add(v);
  }
  const double z = total.value();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw Error(ErrorCode::kInvalidInput, "weights have no mass");
  }
  for (double& v : weights) v /= z;
  return FromProbabilities(std::move(weights));
}

Dist Dist::Uniform(std::size_t vocab_size) {
  if (vocab_size == 0) {
    throw Error(ErrorCode::kInvalidInput, "vocabulary size must be positive");
  }
  return Dist(std::vector<double>(vocab_size, 1.0 / vocab_size));
}

Dist SoftmaxWithTemperature(const LogitVector& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidInput, "temperature must be > 0");
  }
  const auto z = logits.values();
  if (z.empty()) throw Error(ErrorCode::kInvalidInput, "empty logit vector");
  const double max_logit = *std::max_element(z.begin(), z.end());
  std::vector<double> weights(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    weights[i] = std::exp((z[i] - max_logit) / temperature);
  }
  return Dist::Normalized(std::move(weights));
}

Dist ApplyProbabilityFloor(const Dist& dist, double floor) {
  std::vector<double> out(dist.probs().begin(), dist.probs().end());
  bool changed = false;
  for (double& v : out) {
    if (v < floor) {
      v = floor;
      changed = true;
    }
  }
  if (!changed) return dist;
  return Dist::Normalized(std::move(out));
}

double RenyiDivergenceGeneralOrder(const Dist& p, const Dist& q,
                                   RenyiOrder order) {
  CheckSameSize(p, q);
  if (p == q) return 0.0;
  const double alpha = order.value();
  CompensatedSum sum;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) ThrowSupport(i);
    sum.Add(std::pow(p[i], alpha) * std::pow(q[i], 1.0 - alpha));
  }
  return std::max(0.0, std::log(sum.value()) / (alpha - 1.0));
}

double RenyiDivergence(const Dist& p, const Dist& q, RenyiOrder order) {
  if (!order.is_two()) return RenyiDivergenceGeneralOrder(p, q, order);
  CheckSameSize(p, q);
  if (p == q) return 0.0;
  CompensatedSum sum;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) ThrowSupport(i);
    sum.Add(p[i] * p[i] / q[i]);
  }
  return std::max(0.0, std::log(sum.value()));
}

double SymmetricRenyi(const Dist& p, const Dist& q, RenyiOrder order) {
  return std::max(RenyiDivergence(p, q, order), RenyiDivergence(q, p, order));
}

Dist Mix(double lambda, const Dist& p_priv, const Dist& p_pub) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "mixing coefficient outside [0, 1]: " + std::to_string(lambda));
  }
  CheckSameSize(p_priv, p_pub);
  if (lambda == 0.0) return p_pub;
  if (lambda == 1.0) return p_priv;
  std::vector<double> out(p_pub.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lambda * p_priv[i] + (1.0 - lambda) * p_pub[i];
  }
  return Dist::FromProbabilities(std::move(out));
}

}  // namespace dpfusion
