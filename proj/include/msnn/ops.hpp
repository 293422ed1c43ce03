#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "msnn/blas.hpp"
#include "msnn/common.hpp"
#include "msnn/tensor.hpp"

// Pointwise, reduction and dense-linear operations of the tensor engine.
// Shape rules are strict: no implicit broadcasting anywhere except the bias
// add inside conv3d / linear.

namespace msnn {

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.size());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  detail::record(out, {a, b}, [](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      if (detail::wants_grad(pa)) pa.grad[i] += self.grad[i];
      if (detail::wants_grad(pb)) pb.grad[i] += self.grad[i];
    }
  });
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.size());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  detail::record(out, {a, b}, [](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      if (detail::wants_grad(pa)) pa.grad[i] += self.grad[i];
      if (detail::wants_grad(pb)) pb.grad[i] -= self.grad[i];
    }
  });
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.size());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  detail::record(out, {a, b}, [](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      if (detail::wants_grad(pa)) pa.grad[i] += self.grad[i] * pb.data[i];
      if (detail::wants_grad(pb)) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
  return out;
}

inline Tensor scale(const Tensor& a, double factor) {
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.size());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * factor;
  detail::record(out, {a}, [factor](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.data.size(); ++i) pa.grad[i] += self.grad[i] * factor;
  });
  return out;
}

inline Tensor relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const auto n = static_cast<std::size_t>(a.size());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  detail::record(out, {a}, [](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.data.size(); ++i)
      if (pa.data[i] > 0.0) pa.grad[i] += self.grad[i];
  });
  return out;
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += a.data()[i];
  Tensor out = Tensor::scalar(s);
  detail::record(out, {a}, [](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < pa.data.size(); ++i) pa.grad[i] += self.grad[0];
  });
  return out;
}

inline Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

/// Data-preserving shape change (row-major order kept).
inline Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw InvalidArgument("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  Tensor out = Tensor::from_data(std::move(shape), a.values());
  detail::record(out, {a}, [](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.data.size(); ++i) pa.grad[i] += self.grad[i];
  });
  return out;
}

/// Numerically stabilized softmax over the last axis.
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() < 1) throw InvalidArgument("softmax: rank must be >= 1");
  const std::int64_t c = logits.shape().back();
  const std::int64_t rows = logits.size() / c;
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits.data()[i]))
      throw NonFiniteError("softmax: non-finite logit at flat index " + std::to_string(i));
  }
  Tensor out = Tensor::zeros(logits.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = logits.data() + r * c;
    double* o = out.data() + r * c;
    double mx = in[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      denom += o[j];
    }
    // Keep probabilities strictly positive even when exp underflows.
    for (std::int64_t j = 0; j < c; ++j) o[j] = std::max(o[j] / denom, std::numeric_limits<double>::min());
  }
  detail::record(out, {logits}, [c, rows](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* s = self.data.data() + r * c;
      const double* g = self.grad.data() + r * c;
      double dot = 0.0;
      for (std::int64_t j = 0; j < c; ++j) dot += g[j] * s[j];
      for (std::int64_t j = 0; j < c; ++j) pa.grad[r * c + j] += s[j] * (g[j] - dot);
    }
  });
  return out;
}

/// Mean over the batch of -log softmax(logits)[label].
inline Tensor cross_entropy(const Tensor& logits, const std::vector<std::int64_t>& labels) {
  if (logits.rank() != 2) throw InvalidArgument("cross_entropy: logits must be [N,C], got " + shape_string(logits.shape()));
  const std::int64_t n = logits.dim(0);
  const std::int64_t c = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw InvalidArgument("cross_entropy: got " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(n));
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0," +
                            std::to_string(c) + ") at sample " + std::to_string(i));
    }
  }
  std::vector<double> probs(static_cast<std::size_t>(n * c));
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * c;
    double mx = row[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    const double lse = mx + std::log(denom);
    loss += lse - row[labels[i]];
    for (std::int64_t j = 0; j < c; ++j) probs[static_cast<std::size_t>(i * c + j)] = std::exp(row[j] - lse);
  }
  Tensor out = Tensor::scalar(loss / static_cast<double>(n));
  detail::record(out, {logits}, [n, c, labels, probs = std::move(probs)](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    const double g = self.grad[0] / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < c; ++j) {
        double p = probs[static_cast<std::size_t>(i * c + j)];
        pa.grad[i * c + j] += g * (p - (labels[i] == j ? 1.0 : 0.0));
      }
    }
  });
  return out;
}

/// Contract the last axis with a matrix: [..., V] x [V, W] -> [..., W].
inline Tensor matmul_last(const Tensor& a, const Tensor& m) {
  if (m.rank() != 2) throw InvalidArgument("matmul_last: matrix must be rank 2");
  const std::int64_t v = a.shape().back();
  if (m.dim(0) != v) {
    throw InvalidArgument("matmul_last: inner extents differ, " + std::to_string(v) + " vs " +
                          std::to_string(m.dim(0)));
  }
  const std::int64_t w = m.dim(1);
  const std::int64_t rows = a.size() / v;
  Shape out_shape = a.shape();
  out_shape.back() = w;
  Tensor out = Tensor::zeros(std::move(out_shape));
  blas::dgemm(false, false, rows, w, v, 1.0, a.data(), v, m.data(), w, 0.0, out.data(), w);
  detail::record(out, {a, m}, [rows, v, w](detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pm = *self.parents[1];
    if (detail::wants_grad(pa)) {
      blas::dgemm(false, true, rows, v, w, 1.0, self.grad.data(), w, pm.data.data(), w, 1.0, pa.grad.data(), v);
    }
    if (detail::wants_grad(pm)) {
      blas::dgemm(true, false, v, w, rows, 1.0, pa.data.data(), v, self.grad.data(), w, 1.0, pm.grad.data(), w);
    }
  });
  return out;
}

/// Fully connected layer: x [N,F], weight [K,F], bias [K] -> [N,K].
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2) throw InvalidArgument("linear: x and weight must be rank 2");
  const std::int64_t n = x.dim(0), f = x.dim(1), k = weight.dim(0);
  if (weight.dim(1) != f) {
    throw InvalidArgument("linear: weight inner extent " + std::to_string(weight.dim(1)) +
                          " does not match feature extent " + std::to_string(f));
  }
  if (bias.rank() != 1 || bias.dim(0) != k) throw InvalidArgument("linear: bias must be [K]");
  Tensor out = Tensor::zeros({n, k});
  blas::dgemm(false, true, n, k, f, 1.0, x.data(), f, weight.data(), f, 0.0, out.data(), k);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < k; ++j) out.data()[i * k + j] += bias.data()[j];
  detail::record(out, {x, weight, bias}, [n, f, k](detail::TensorNode& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (detail::wants_grad(px)) {
      blas::dgemm(false, false, n, f, k, 1.0, self.grad.data(), k, pw.data.data(), f, 1.0, px.grad.data(), f);
    }
    if (detail::wants_grad(pw)) {
      blas::dgemm(true, false, k, f, n, 1.0, self.grad.data(), k, px.data.data(), f, 1.0, pw.grad.data(), f);
    }
    if (detail::wants_grad(pb)) {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < k; ++j) pb.grad[j] += self.grad[i * k + j];
    }
  });
  return out;
}

/// Mean over every axis after the channel axis: [N,C,...] -> [N,C].
inline Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() < 3) throw InvalidArgument("global_avg_pool: rank must be >= 3, got " + shape_string(x.shape()));
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.size() / (n * c);
  Tensor out = Tensor::zeros({n, c});
  for (std::int64_t i = 0; i < n * c; ++i) {
    const double* p = x.data() + i * inner;
    double s = 0.0;
    for (std::int64_t j = 0; j < inner; ++j) s += p[j];
    out.data()[i] = s / static_cast<double>(inner);
  }
  detail::record(out, {x}, [inner](detail::TensorNode& self) {
    auto& px = *self.parents[0];
    const double inv = 1.0 / static_cast<double>(inner);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const double g = self.grad[i] * inv;
      double* dst = px.grad.data() + static_cast<std::int64_t>(i) * inner;
      for (std::int64_t j = 0; j < inner; ++j) dst[j] += g;
    }
  });
  return out;
}

/// Per-channel affine normalization with externally supplied statistics:
/// y = gamma_c * (x - mean_c) / sqrt(var_c + eps) + beta_c. The statistics
/// are constants of the op (running values owned by the caller), so the
/// gradient flows only through x, gamma and beta.
inline Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           const std::vector<double>& mean, const std::vector<double>& var, double eps) {
  if (x.rank() < 2) throw InvalidArgument("channel_norm: rank must be >= 2");
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.size() / (n * c);
  if (gamma.size() != c || beta.size() != c || static_cast<std::int64_t>(mean.size()) != c ||
      static_cast<std::int64_t>(var.size()) != c) {
    throw InvalidArgument("channel_norm: parameter extents must equal channel extent " + std::to_string(c));
  }
  std::vector<double> inv(static_cast<std::size_t>(c));
  for (std::int64_t j = 0; j < c; ++j) inv[static_cast<std::size_t>(j)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(j)] + eps);
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < c; ++j) {
      const double g = gamma.data()[j], b = beta.data()[j], mu = mean[static_cast<std::size_t>(j)];
      const double iv = inv[static_cast<std::size_t>(j)];
      const double* src = x.data() + (i * c + j) * inner;
      double* dst = out.data() + (i * c + j) * inner;
      for (std::int64_t t = 0; t < inner; ++t) dst[t] = g * (src[t] - mu) * iv + b;
    }
  }
  detail::record(out, {x, gamma, beta}, [n, c, inner, mean, inv](detail::TensorNode& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pb = *self.parents[2];
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < c; ++j) {
        const double iv = inv[static_cast<std::size_t>(j)];
        const double mu = mean[static_cast<std::size_t>(j)];
        const double g = pg.data[static_cast<std::size_t>(j)];
        const std::int64_t base = (i * c + j) * inner;
        for (std::int64_t t = 0; t < inner; ++t) {
          const double go = self.grad[base + t];
          if (detail::wants_grad(px)) px.grad[base + t] += go * g * iv;
          if (detail::wants_grad(pg)) pg.grad[j] += go * (px.data[base + t] - mu) * iv;
          if (detail::wants_grad(pb)) pb.grad[j] += go;
        }
      }
    }
  });
  return out;
}

/// Concatenate along the channel axis (axis 1); all other extents must match.
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_channels: empty input list");
  const Shape& ref = parts[0].shape();
  if (ref.size() < 2) throw InvalidArgument("concat_channels: rank must be >= 2");
  std::int64_t total_c = 0;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) throw InvalidArgument("concat_channels: rank mismatch");
    for (std::size_t d = 0; d < ref.size(); ++d) {
      if (d != 1 && p.shape()[d] != ref[d]) {
        throw InvalidArgument("concat_channels: extent mismatch at axis " + std::to_string(d) + ": " +
                              shape_string(p.shape()) + " vs " + shape_string(ref));
      }
    }
    total_c += p.dim(1);
  }
  const std::int64_t n = ref[0];
  std::int64_t inner = 1;
  for (std::size_t d = 2; d < ref.size(); ++d) inner *= ref[d];
  Shape out_shape = ref;
  out_shape[1] = total_c;
  Tensor out = Tensor::zeros(out_shape);
  std::vector<std::int64_t> channels;
  channels.reserve(parts.size());
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t pc = p.dim(1);
    channels.push_back(pc);
    for (std::int64_t i = 0; i < n; ++i) {
      std::copy_n(p.data() + i * pc * inner, pc * inner, out.data() + (i * total_c + offset) * inner);
    }
    offset += pc;
  }
  detail::record(out, parts, [n, inner, total_c, channels](detail::TensorNode& self) {
    std::int64_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      const std::int64_t pc = channels[k];
      if (detail::wants_grad(p)) {
        for (std::int64_t i = 0; i < n; ++i) {
          const double* src = self.grad.data() + (i * total_c + off) * inner;
          double* dst = p.grad.data() + i * pc * inner;
          for (std::int64_t j = 0; j < pc * inner; ++j) dst[j] += src[j];
        }
      }
      off += pc;
    }
  });
  return out;
}

}  // namespace msnn
