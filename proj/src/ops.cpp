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

#include "grunet/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "grunet/error.hpp"

namespace grunet::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using CMapVec = Eigen::Map<const Eigen::RowVectorXd>;
using MapVec = Eigen::Map<Eigen::RowVectorXd>;

// Upper bound on the number of doubles in one im2col chunk.
constexpr Index kIm2colBudget = Index{1} << 22;

void require_rank(const Var& v, std::size_t rank, const char* what) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) + " tensor, got " +
                     to_string(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

struct ConvGeometry {
  Index batch, height, width, in_ch;
  Index kh, kw;
  int stride, pad;
  Index out_h, out_w, out_ch;
  Index patch() const { return kh * kw * in_ch; }
  Index rows() const { return batch * out_h * out_w; }
};

void im2col(const double* x, const ConvGeometry& g, Index row0, Index nrows, double* cols) {
  const Index k = g.patch();
  const Index plane = g.out_h * g.out_w;
  for (Index r = 0; r < nrows; ++r) {
    const Index idx = row0 + r;
    const Index b = idx / plane;
    const Index oh = (idx % plane) / g.out_w;
    const Index ow = idx % g.out_w;
    double* dst = cols + r * k;
    for (Index i = 0; i < g.kh; ++i) {
      const Index ih = oh * g.stride - g.pad + i;
      for (Index j = 0; j < g.kw; ++j, dst += g.in_ch) {
        const Index iw = ow * g.stride - g.pad + j;
        if (ih < 0 || ih >= g.height || iw < 0 || iw >= g.width) {
          std::fill(dst, dst + g.in_ch, 0.0);
        } else {
          std::memcpy(dst, x + ((b * g.height + ih) * g.width + iw) * g.in_ch,
                      static_cast<std::size_t>(g.in_ch) * sizeof(double));
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, Index row0, Index nrows, double* dx) {
  const Index k = g.patch();
  const Index plane = g.out_h * g.out_w;
  for (Index r = 0; r < nrows; ++r) {
    const Index idx = row0 + r;
    const Index b = idx / plane;
    const Index oh = (idx % plane) / g.out_w;
    const Index ow = idx % g.out_w;
    const double* src = cols + r * k;
    for (Index i = 0; i < g.kh; ++i) {
      const Index ih = oh * g.stride - g.pad + i;
      for (Index j = 0; j < g.kw; ++j, src += g.in_ch) {
        const Index iw = ow * g.stride - g.pad + j;
        if (ih < 0 || ih >= g.height || iw < 0 || iw >= g.width) continue;
        double* dst = dx + ((b * g.height + ih) * g.width + iw) * g.in_ch;
        for (Index c = 0; c < g.in_ch; ++c) dst[c] += src[c];
      }
    }
  }
}

Index chunk_rows(const ConvGeometry& g) { return std::max<Index>(64, kIm2colBudget / std::max<Index>(1, g.patch())); }

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  ConvGeometry g{x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3], weight.shape()[0], weight.shape()[1],
                 stride,       padding,      0,            0,            weight.shape()[3]};
  if (weight.shape()[2] != g.in_ch) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  if (bias.value().size() != g.out_ch) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  if (stride < 1 || padding < 0) throw ConfigError("conv2d: invalid stride/padding");
  g.out_h = (g.height + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kw) / stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) {
    throw ShapeError("conv2d: kernel " + to_string(weight.shape()) + " larger than padded input " +
                     to_string(x.shape()));
  }

  Tensor out({g.batch, g.out_h, g.out_w, g.out_ch});
  CMapMat wm(weight.value().data(), g.patch(), g.out_ch);
  CMapVec bv(bias.value().data(), g.out_ch);
  const bool pointwise = g.kh == 1 && g.kw == 1 && stride == 1 && padding == 0;
  if (pointwise) {
    CMapMat xm(x.value().data(), g.rows(), g.in_ch);
    MapMat ym(out.data(), g.rows(), g.out_ch);
    ym.noalias() = xm * wm;
    ym.rowwise() += bv;
  } else {
    const Index chunk = chunk_rows(g);
    RowMat cols;
    for (Index r0 = 0; r0 < g.rows(); r0 += chunk) {
      const Index n = std::min(chunk, g.rows() - r0);
      cols.resize(n, g.patch());
      im2col(x.value().data(), g, r0, n, cols.data());
      MapMat ym(out.data() + r0 * g.out_ch, n, g.out_ch);
      ym.noalias() = cols * wm;
      ym.rowwise() += bv;
    }
  }

  return make_result(std::move(out), {x, weight, bias}, [g, pointwise](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    CMapMat gy(self.grad.data(), g.rows(), g.out_ch);
    CMapMat wm(wn.value.data(), g.patch(), g.out_ch);
    if (bn.requires_grad) {
      MapVec db(bn.grad_buffer().data(), g.out_ch);
      db += gy.colwise().sum();
    }
    if (pointwise) {
      CMapMat xm(xn.value.data(), g.rows(), g.in_ch);
      if (wn.requires_grad) {
        MapMat dw(wn.grad_buffer().data(), g.patch(), g.out_ch);
        dw.noalias() += xm.transpose() * gy;
      }
      if (xn.requires_grad) {
        MapMat dx(xn.grad_buffer().data(), g.rows(), g.in_ch);
        dx.noalias() += gy * wm.transpose();
      }
      return;
    }
    const Index chunk = chunk_rows(g);
    RowMat cols;
    RowMat dcols;
    for (Index r0 = 0; r0 < g.rows(); r0 += chunk) {
      const Index n = std::min(chunk, g.rows() - r0);
      auto gyc = gy.middleRows(r0, n);
      if (wn.requires_grad) {
        cols.resize(n, g.patch());
        im2col(xn.value.data(), g, r0, n, cols.data());
        MapMat dw(wn.grad_buffer().data(), g.patch(), g.out_ch);
        dw.noalias() += cols.transpose() * gyc;
      }
      if (xn.requires_grad) {
        dcols.noalias() = gyc * wm.transpose();
        col2im_add(dcols.data(), g, r0, n, xn.grad_buffer().data());
      }
    }
  });
}

Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 4, "conv_transpose2x2 input");
  require_rank(weight, 4, "conv_transpose2x2 weight");
  const Index b = x.shape()[0], h = x.shape()[1], w = x.shape()[2], cin = x.shape()[3];
  const Index cout = weight.shape()[3];
  if (weight.shape()[0] != cin || weight.shape()[1] != 2 || weight.shape()[2] != 2) {
    throw ShapeError("conv_transpose2x2: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  if (bias.value().size() != cout) throw ShapeError("conv_transpose2x2: bias size mismatch");
  const Index rows = b * h * w;
  CMapMat xm(x.value().data(), rows, cin);
  CMapMat wm(weight.value().data(), cin, 4 * cout);
  RowMat p = xm * wm;
  Tensor out({b, 2 * h, 2 * w, cout});
  const double* bp = bias.value().data();
  for (Index r = 0; r < rows; ++r) {
    const Index bi = r / (h * w), hi = (r % (h * w)) / w, wi = r % w;
    for (Index di = 0; di < 2; ++di) {
      for (Index dj = 0; dj < 2; ++dj) {
        double* dst = out.data() + ((bi * 2 * h + 2 * hi + di) * 2 * w + 2 * wi + dj) * cout;
        const double* src = p.data() + r * 4 * cout + (di * 2 + dj) * cout;
        for (Index c = 0; c < cout; ++c) dst[c] = src[c] + bp[c];
      }
    }
  }
  return make_result(std::move(out), {x, weight, bias}, [=](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    RowMat gp(rows, 4 * cout);
    for (Index r = 0; r < rows; ++r) {
      const Index bi = r / (h * w), hi = (r % (h * w)) / w, wi = r % w;
      for (Index di = 0; di < 2; ++di) {
        for (Index dj = 0; dj < 2; ++dj) {
          const double* src = self.grad.data() + ((bi * 2 * h + 2 * hi + di) * 2 * w + 2 * wi + dj) * cout;
          std::memcpy(gp.data() + r * 4 * cout + (di * 2 + dj) * cout, src,
                      static_cast<std::size_t>(cout) * sizeof(double));
        }
      }
    }
    if (bn.requires_grad) {
      MapVec db(bn.grad_buffer().data(), cout);
      CMapMat gy(self.grad.data(), rows * 4, cout);
      db += gy.colwise().sum();
    }
    if (wn.requires_grad) {
      CMapMat xv(xn.value.data(), rows, cin);
      MapMat dw(wn.grad_buffer().data(), cin, 4 * cout);
      dw.noalias() += xv.transpose() * gp;
    }
    if (xn.requires_grad) {
      CMapMat wv(wn.value.data(), cin, 4 * cout);
      MapMat dx(xn.grad_buffer().data(), rows, cin);
      dx.noalias() += gp * wv.transpose();
    }
  });
}

Var max_pool2x2(const Var& x) {
  require_rank(x, 4, "max_pool2x2");
  const Index b = x.shape()[0], h = x.shape()[1], w = x.shape()[2], c = x.shape()[3];
  if (h % 2 || w % 2) throw ShapeError("max_pool2x2 needs even spatial dims, got " + to_string(x.shape()));
  const Index oh = h / 2, ow = w / 2;
  Tensor out({b, oh, ow, c});
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
  const double* xp = x.value().data();
  Index o = 0;
  for (Index bi = 0; bi < b; ++bi) {
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        for (Index ci = 0; ci < c; ++ci, ++o) {
          Index best = ((bi * h + 2 * i) * w + 2 * j) * c + ci;
          for (Index di = 0; di < 2; ++di) {
            for (Index dj = 0; dj < 2; ++dj) {
              const Index idx = ((bi * h + 2 * i + di) * w + 2 * j + dj) * c + ci;
              if (xp[idx] > xp[best]) best = idx;
            }
          }
          out[o] = xp[best];
          argmax[static_cast<std::size_t>(o)] = best;
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    double* dx = self.inputs[0]->grad_buffer().data();
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += self.grad[static_cast<Index>(i)];
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& options) {
  const Index c = x.shape().back();
  if (gamma.value().size() != c || beta.value().size() != c || running_mean.size() != c ||
      running_var.size() != c) {
    throw ShapeError("batch_norm: parameters do not match channel count of " + to_string(x.shape()));
  }
  const Index n = x.value().size() / c;
  CMapMat xm(x.value().data(), n, c);
  Eigen::RowVectorXd mean(c), var(c);
  if (options.training) {
    mean = xm.colwise().mean();
    var = (xm.rowwise() - mean).array().square().colwise().sum().matrix() / static_cast<double>(n);
    if (options.update_running_stats) {
      const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
      for (Index i = 0; i < c; ++i) {
        running_mean[i] = (1.0 - options.momentum) * running_mean[i] + options.momentum * mean[i];
        running_var[i] = (1.0 - options.momentum) * running_var[i] + options.momentum * var[i] * unbias;
      }
    }
  } else {
    mean = CMapVec(running_mean.data(), c);
    var = CMapVec(running_var.data(), c);
  }
  Eigen::RowVectorXd inv_std = (var.array() + options.eps).rsqrt().matrix();

  Tensor xhat(x.shape());
  MapMat xh(xhat.data(), n, c);
  xh = (xm.rowwise() - mean).array().rowwise() * inv_std.array();
  Tensor out(x.shape());
  MapMat ym(out.data(), n, c);
  ym = (xh.array().rowwise() * CMapVec(gamma.value().data(), c).array()).rowwise() +
       CMapVec(beta.value().data(), c).array();

  const bool training = options.training;
  return make_result(std::move(out), {x, gamma, beta},
                     [n, c, training, inv_std, xhat = std::move(xhat)](Node& self) {
                       Node& xn = *self.inputs[0];
                       Node& gn = *self.inputs[1];
                       Node& bn = *self.inputs[2];
                       CMapMat gy(self.grad.data(), n, c);
                       CMapMat xh(xhat.data(), n, c);
                       Eigen::RowVectorXd sum_gy = gy.colwise().sum();
                       Eigen::RowVectorXd sum_gy_xh = gy.cwiseProduct(xh).colwise().sum();
                       if (gn.requires_grad) MapVec(gn.grad_buffer().data(), c) += sum_gy_xh;
                       if (bn.requires_grad) MapVec(bn.grad_buffer().data(), c) += sum_gy;
                       if (!xn.requires_grad) return;
                       Eigen::RowVectorXd scale = CMapVec(gn.value.data(), c).cwiseProduct(inv_std);
                       MapMat dx(xn.grad_buffer().data(), n, c);
                       if (training) {
                         const double inv_n = 1.0 / static_cast<double>(n);
                         Eigen::RowVectorXd mean_gy = sum_gy * inv_n;
                         Eigen::RowVectorXd mean_gy_xh = sum_gy_xh * inv_n;
                         dx.array() += ((gy.rowwise() - mean_gy).array() -
                                        xh.array().rowwise() * mean_gy_xh.array())
                                           .rowwise() *
                                       scale.array();
                       } else {
                         dx.array() += gy.array().rowwise() * scale.array();
                       }
                     });
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  for (Index i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.value()[i]);
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    for (Index i = 0; i < self.grad.size(); ++i) {
      if (xn.value[i] > 0.0) dx[i] += self.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  // Clamped so the result stays strictly inside (0, 1) once 1 / (1 + e^-x) rounds to 0 or 1.
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  for (Index i = 0; i < out.size(); ++i) out[i] = std::clamp(1.0 / (1.0 + std::exp(-x.value()[i])), lo, hi);
  return make_result(std::move(out), {x}, [](Node& self) {
    double* dx = self.inputs[0]->grad_buffer().data();
    for (Index i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      dx[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (Index i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      double* d = in->grad_buffer().data();
      for (Index i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Var multiply(const Var& gate, const Var& x) {
  const bool broadcast = gate.shape() != x.shape();
  if (broadcast) {
    require_rank(x, 4, "multiply");
    const Shape expected{x.shape()[0], x.shape()[1], x.shape()[2], 1};
    if (gate.shape() != expected) {
      throw ShapeError("multiply: gate " + to_string(gate.shape()) + " cannot broadcast to " +
                       to_string(x.shape()));
    }
  }
  const Index c = broadcast ? x.shape()[3] : 1;
  Tensor out(x.shape());
  for (Index i = 0; i < out.size(); ++i) out[i] = gate.value()[i / c] * x.value()[i];
  return make_result(std::move(out), {gate, x}, [c](Node& self) {
    Node& gn = *self.inputs[0];
    Node& xn = *self.inputs[1];
    if (gn.requires_grad) {
      double* dg = gn.grad_buffer().data();
      for (Index i = 0; i < self.grad.size(); ++i) dg[i / c] += self.grad[i] * xn.value[i];
    }
    if (xn.requires_grad) {
      double* dx = xn.grad_buffer().data();
      for (Index i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i] * gn.value[i / c];
    }
  });
}

Var scale_per_sample(const Var& x, const Var& scale) {
  const Index b = x.shape().at(0);
  if (scale.value().size() != b) {
    throw ShapeError("scale_per_sample: scale " + to_string(scale.shape()) + " does not match batch of " +
                     to_string(x.shape()));
  }
  const Index per = x.value().size() / std::max<Index>(1, b);
  Tensor out(x.shape());
  for (Index i = 0; i < out.size(); ++i) out[i] = scale.value()[i / per] * x.value()[i];
  return make_result(std::move(out), {x, scale}, [per](Node& self) {
    Node& xn = *self.inputs[0];
    Node& sn = *self.inputs[1];
    if (sn.requires_grad) {
      double* ds = sn.grad_buffer().data();
      for (Index i = 0; i < self.grad.size(); ++i) ds[i / per] += self.grad[i] * xn.value[i];
    }
    if (xn.requires_grad) {
      double* dx = xn.grad_buffer().data();
      for (Index i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i] * sn.value[i / per];
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  for (const Var& v : xs) require_rank(v, 4, "concat_channels");
  const Shape& s0 = xs.front().shape();
  std::vector<Index> widths;
  Index total = 0;
  for (const Var& v : xs) {
    const Shape& s = v.shape();
    if (s[0] != s0[0] || s[1] != s0[1] || s[2] != s0[2]) {
      throw ShapeError("concat_channels: " + to_string(s0) + " vs " + to_string(s));
    }
    widths.push_back(s[3]);
    total += s[3];
  }
  const Index pixels = s0[0] * s0[1] * s0[2];
  Tensor out({s0[0], s0[1], s0[2], total});
  Index offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double* src = xs[k].value().data();
    for (Index p = 0; p < pixels; ++p) {
      std::memcpy(out.data() + p * total + offset, src + p * widths[k],
                  static_cast<std::size_t>(widths[k]) * sizeof(double));
    }
    offset += widths[k];
  }
  return make_result(std::move(out), xs, [widths, total, pixels](Node& self) {
    Index offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& in = *self.inputs[k];
      if (in.requires_grad) {
        double* d = in.grad_buffer().data();
        for (Index p = 0; p < pixels; ++p) {
          const double* g = self.grad.data() + p * total + offset;
          for (Index c = 0; c < widths[k]; ++c) d[p * widths[k] + c] += g[c];
        }
      }
      offset += widths[k];
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const Index b = x.shape()[0], c = x.shape()[3];
  const Index hw = x.shape()[1] * x.shape()[2];
  if (hw == 0) throw ShapeError("global_avg_pool: empty spatial extent " + to_string(x.shape()));
  Tensor out({b, c});
  for (Index bi = 0; bi < b; ++bi) {
    for (Index p = 0; p < hw; ++p) {
      const double* src = x.value().data() + (bi * hw + p) * c;
      for (Index ci = 0; ci < c; ++ci) out[bi * c + ci] += src[ci];
    }
  }
  for (Index i = 0; i < out.size(); ++i) out[i] /= static_cast<double>(hw);
  return make_result(std::move(out), {x}, [b, c, hw](Node& self) {
    double* dx = self.inputs[0]->grad_buffer().data();
    const double inv = 1.0 / static_cast<double>(hw);
    for (Index bi = 0; bi < b; ++bi) {
      for (Index p = 0; p < hw; ++p) {
        for (Index ci = 0; ci < c; ++ci) dx[(bi * hw + p) * c + ci] += self.grad[bi * c + ci] * inv;
      }
    }
  });
}

Var dense(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  const Index b = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[1];
  if (weight.shape()[0] != in || bias.value().size() != out_dim) {
    throw ShapeError("dense: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()) + " / bias " + to_string(bias.shape()));
  }
  Tensor out({b, out_dim});
  MapMat ym(out.data(), b, out_dim);
  ym.noalias() = CMapMat(x.value().data(), b, in) * CMapMat(weight.value().data(), in, out_dim);
  ym.rowwise() += CMapVec(bias.value().data(), out_dim);
  return make_result(std::move(out), {x, weight, bias}, [b, in, out_dim](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    CMapMat gy(self.grad.data(), b, out_dim);
    if (bn.requires_grad) MapVec(bn.grad_buffer().data(), out_dim) += gy.colwise().sum();
    if (wn.requires_grad) {
      MapMat(wn.grad_buffer().data(), in, out_dim).noalias() += CMapMat(xn.value.data(), b, in).transpose() * gy;
    }
    if (xn.requires_grad) {
      MapMat(xn.grad_buffer().data(), b, in).noalias() += gy * CMapMat(wn.value.data(), in, out_dim).transpose();
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    double* dx = self.inputs[0]->grad_buffer().data();
    for (Index i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

std::pair<Var, Var> per_sample_mean_std(const Var& x) {
  if (x.value().rank() < 2) throw ShapeError("per_sample_mean_std needs a leading batch axis");
  const Index b = x.shape()[0];
  const Index per = b ? x.value().size() / b : 0;
  if (per == 0) throw ShapeError("per_sample_mean_std: empty non-batch extent in " + to_string(x.shape()));
  Tensor mean({b}), stdev({b});
  const double* xp = x.value().data();
  for (Index bi = 0; bi < b; ++bi) {
    double s = 0.0;
    for (Index i = 0; i < per; ++i) s += xp[bi * per + i];
    const double m = s / static_cast<double>(per);
    double ss = 0.0;
    for (Index i = 0; i < per; ++i) {
      const double d = xp[bi * per + i] - m;
      ss += d * d;
    }
    mean[bi] = m;
    stdev[bi] = std::sqrt(ss / static_cast<double>(per));
  }
  Var mean_var = make_result(mean, {x}, [per](Node& self) {
    double* dx = self.inputs[0]->grad_buffer().data();
    const double inv = 1.0 / static_cast<double>(per);
    for (Index i = 0; i < self.inputs[0]->value.size(); ++i) dx[i] += self.grad[i / per] * inv;
  });
  Var std_var = make_result(stdev, {x}, [per, mean](Node& self) {
    Node& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    const double inv = 1.0 / static_cast<double>(per);
    for (Index i = 0; i < xn.value.size(); ++i) {
      const Index bi = i / per;
      // d(std)/dx is undefined at zero spread; treat it as zero.
      if (self.value[bi] > 0.0) dx[i] += self.grad[bi] * (xn.value[i] - mean[bi]) * inv / self.value[bi];
    }
  });
  return {mean_var, std_var};
}

}  // namespace grunet::ops
