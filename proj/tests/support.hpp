// Copyright 2026 The GRU-Net Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grunet/autograd.hpp"
#include "grunet/tensor.hpp"

namespace grunet::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor random_mask(Shape shape, std::uint64_t seed, double p = 0.5) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = b(rng) ? 1.0 : 0.0;
  return t;
}

/// sum(w * y) as a differentiable scalar.
inline Var weighted_sum(const Var& y, const Tensor& w) {
  double s = 0.0;
  for (Index i = 0; i < w.size(); ++i) s += w[i] * y.value()[i];
  return make_result(Tensor::scalar(s), {y}, [w](Node& self) {
    double* dy = self.inputs[0]->grad_buffer().data();
    for (Index i = 0; i < w.size(); ++i) dy[i] += w[i] * self.grad[0];
  });
}

struct GradCheckResult {
  Index checked = 0;
  Index failures = 0;
  double worst_rel = 0.0;
  std::string worst;
};

/// Central differences of `loss` with respect to every element of `param`, compared against
/// the analytic gradient already accumulated in `param`. Passes when the relative error is
/// below `rel_tol`, or the absolute error below `abs_tol` where |grad| < `tiny`.
inline void check_gradient(Var param, const std::function<double()>& loss, const std::string& name,
                           GradCheckResult& result, double h = 1e-5, double rel_tol = 1e-4, double abs_tol = 1e-3,
                           double tiny = 1e-6) {
  const Tensor analytic = param.grad().empty() ? Tensor(param.shape(), 0.0) : param.grad();
  Tensor& w = param.mutable_value();
  for (Index i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + h;
    const double up = loss();
    w[i] = keep - h;
    const double down = loss();
    w[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const bool small = scale < tiny;
    const bool ok = small ? err < abs_tol : err / scale < rel_tol;
    const double rel = scale > 0.0 ? err / scale : 0.0;
    ++result.checked;
    if (!ok) ++result.failures;
    if (!small && rel > result.worst_rel) {
      result.worst_rel = rel;
      std::ostringstream os;
      os << name << "[" << i << "] analytic " << a << " numeric " << numeric;
      result.worst = os.str();
    }
  }
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("grunet_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

}  // namespace grunet::testing
