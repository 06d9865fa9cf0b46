// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flower::ad {

namespace {

using detail::Node;

// Flat index into `in` for every flat index of `out`, with broadcast dims
// pinned to zero.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    in_stride[i + offset] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t pos = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = pos;
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < out[d]) {
        pos += in_stride[d];
        break;
      }
      pos -= in_stride[d] * (out[d] - 1);
      counter[d] = 0;
    }
  }
  return map;
}

// How one operand of a broadcasting op is addressed from output positions.
struct Broadcast {
  enum class Kind { kSame, kSuffix, kGeneral } kind = Kind::kSame;
  std::size_t period = 1;          // kSuffix: operand repeats every `period` outputs
  std::vector<std::size_t> index;  // kGeneral: explicit map

  Broadcast(const Shape& in, const Shape& out) {
    if (in == out) return;
    const std::size_t offset = out.size() - in.size();
    bool suffix = true;
    for (std::size_t i = 0; i < in.size() && suffix; ++i) suffix = in[i] == out[i + offset];
    if (suffix) {
      kind = Kind::kSuffix;
      period = shape_numel(in);
      return;
    }
    kind = Kind::kGeneral;
    index = broadcast_index(in, out);
  }

  std::size_t operator()(std::size_t i) const {
    switch (kind) {
      case Kind::kSame:
        return i;
      case Kind::kSuffix:
        return i % period;
      case Kind::kGeneral:
        break;
    }
    return index[i];
  }
};

template <class Fwd, class GradA, class GradB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, GradA grad_a, GradB grad_b) {
  Shape out = broadcast_shapes(a.shape(), b.shape(), op);
  const std::size_t n = shape_numel(out);
  Broadcast ia(a.shape(), out);
  Broadcast ib(b.shape(), out);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = fwd(av[ia(i)], bv[ib(i)]);
  return Tensor::make_result(
      std::move(out), std::move(values), op, {a, b},
      [ia = std::move(ia), ib = std::move(ib), grad_a, grad_b](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t n = self.value.size();
        if (pa.requires_grad) {
          auto& ga = pa.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ja = ia(i), jb = ib(i);
            ga[ja] += self.grad[i] * grad_a(pa.value[ja], pb.value[jb], self.value[i]);
          }
        }
        if (pb.requires_grad) {
          auto& gb = pb.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ja = ia(i), jb = ib(i);
            gb[jb] += self.grad[i] * grad_b(pa.value[ja], pb.value[jb], self.value[i]);
          }
        }
      });
}

// y = f(x) with dy/dx expressed through (x, y).
template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  auto av = a.data();
  std::vector<double> values(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) values[i] = fwd(av[i]);
  return Tensor::make_result(a.shape(), std::move(values), op, {a}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument(std::string("shape mismatch in ") + op + ": " + shape_str(a) + " vs " +
                                  shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, "add_scalar", [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus", stable_softplus, [](double x, double) { return sigmoid(x); });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softmax(const Tensor& a) {
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  auto av = a.data();
  std::vector<double> values(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = av.data() + r * cols;
    double* out = values.data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (out[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  return Tensor::make_result(a.shape(), std::move(values), "softmax", {a}, [rows, cols](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* gy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * gy[c];
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += y[c] * (gy[c] - dot);
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.size(1) != b.size(0)) {
    throw std::invalid_argument("shape mismatch in matmul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> values(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * n;
      double* out = values.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += aip * brow[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(values), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* g = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = pb.value.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.value[i * k + p];
          double* out = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) out[j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_result({1}, {total}, "sum", {a}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum(const Tensor& a, std::size_t axis) {
  const Shape& in = a.shape();
  if (axis >= in.size()) throw std::out_of_range("sum axis out of range for " + shape_str(in));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t len = in[axis];
  Shape out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (i != axis) out.push_back(in[i]);
  }
  if (out.empty()) out.push_back(1);
  auto av = a.data();
  std::vector<double> values(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t i = 0; i < inner; ++i) values[o * inner + i] += av[(o * len + l) * inner + i];
    }
  }
  return Tensor::make_result(std::move(out), std::move(values), "sum_axis", {a}, [outer, inner, len](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t i = 0; i < inner; ++i) g[(o * len + l) * inner + i] += self.grad[o * inner + i];
      }
    }
  });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  return scale(sum(a, axis), 1.0 / static_cast<double>(a.size(axis)));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw std::out_of_range("concat axis out of range for " + shape_str(first));
  Shape out = first;
  out[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw std::invalid_argument("shape mismatch in concat: " + shape_str(first) + " vs " + shape_str(s));
    out[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t out_len = out[axis];
  std::vector<double> values(shape_numel(out));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.shape()[axis];
    auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * len * inner, len * inner, values.data() + (o * out_len + offset) * inner);
    }
    offsets.push_back(offset);
    offset += len;
  }
  std::vector<std::size_t> lens;
  for (const auto& p : parts) lens.push_back(p.shape()[axis]);
  return Tensor::make_result(std::move(out), std::move(values), "concat", parts,
                             [outer, inner, out_len, offsets, lens](Node& self) {
                               for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                 Node& p = *self.parents[k];
                                 if (!p.requires_grad) continue;
                                 auto& g = p.grad_buffer();
                                 const std::size_t len = lens[k];
                                 for (std::size_t o = 0; o < outer; ++o) {
                                   const double* src = self.grad.data() + (o * out_len + offsets[k]) * inner;
                                   double* dst = g.data() + o * len * inner;
                                   for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                                 }
                               }
                             });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& in = a.shape();
  if (axis >= in.size() || begin >= end || end > in[axis]) {
    throw std::out_of_range("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                            std::to_string(axis) + " of " + shape_str(in));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t in_len = in[axis];
  const std::size_t len = end - begin;
  Shape out = in;
  out[axis] = len;
  auto av = a.data();
  std::vector<double> values(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.data() + (o * in_len + begin) * inner, len * inner, values.data() + o * len * inner);
  }
  return Tensor::make_result(std::move(out), std::move(values), "slice", {a},
                             [outer, inner, in_len, len, begin](Node& self) {
                               auto& g = self.parents[0]->grad_buffer();
                               for (std::size_t o = 0; o < outer; ++o) {
                                 const double* src = self.grad.data() + o * len * inner;
                                 double* dst = g.data() + (o * in_len + begin) * inner;
                                 for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("shape mismatch in reshape: " + shape_str(a.shape()) + " vs " + shape_str(shape));
  }
  std::vector<double> values(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(values), "reshape", {a}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  if (broadcast_shapes(a.shape(), shape, "broadcast_to") != shape) {
    throw std::invalid_argument("shape mismatch in broadcast_to: " + shape_str(a.shape()) + " vs " + shape_str(shape));
  }
  auto map = broadcast_index(a.shape(), shape);
  auto av = a.data();
  std::vector<double> values(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) values[i] = av[map[i]];
  return Tensor::make_result(shape, std::move(values), "broadcast_to", {a}, [map = std::move(map)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < map.size(); ++i) g[map[i]] += self.grad[i];
  });
}

}  // namespace flower::ad
