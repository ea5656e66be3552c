// Copyright 2026 The sase Authors.
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

#include "sase/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sase::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Tape& common_tape(std::initializer_list<Var> vars, const char* op) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw std::invalid_argument(std::string(op) + ": detached input");
    if (tape == nullptr) tape = v.tape();
    if (v.tape() != tape) throw std::invalid_argument(std::string(op) + ": inputs live on different tapes");
  }
  return *tape;
}

[[noreturn]] void shape_fail(const char* op, std::initializer_list<Shape> shapes,
                             const std::string& detail = {}) {
  std::string msg = std::string(op) + ": incompatible shapes";
  for (const auto& s : shapes) msg += " " + shape_str(s);
  if (!detail.empty()) msg += " (" + detail + ")";
  throw ShapeError(msg);
}

void require_same(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) shape_fail(op, {a.shape(), b.shape()});
}

void require_rank(const char* op, Var a, std::size_t rank) {
  if (a.value().rank() != rank)
    shape_fail(op, {a.shape()}, "expected rank " + std::to_string(rank));
}

// Splits a shape around `axis` into (outer, extent, inner) for row-major loops.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.raw();
  const double* s = src.raw();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// Unary element-wise op with derivative expressed through (x, y).
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = common_tape({a}, "unary");
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, deriv](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  Tape& tape = common_tape({a, b}, "add");
  require_same("add", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const int ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad_buffer(ib), g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = common_tape({a, b}, "sub");
  require_same("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const int ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape({a, b}, "mul");
  require_same("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a, double floor) {
  return unary(
      a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x >= 0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0 ? 1.0 : slope; });
}

Var matmul(Var a, Var b) {
  Tape& tape = common_tape({a, b}, "matmul");
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.dim(1) != b.dim(0))
    shape_fail("matmul", {a.shape(), b.shape()});
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor y({m, n});
  MapMat(y.raw(), m, n).noalias() =
      ConstMapMat(a.value().raw(), m, k) * ConstMapMat(b.value().raw(), k, n);
  const int ia = a.id(), ib = b.id();
  return tape.record(std::move(y), {ia, ib}, [ia, ib, m, k, n](Tape& t, int self) {
    ConstMapMat g(t.grad_buffer(self).raw(), m, n);
    if (t.requires_grad(ia)) {
      MapMat(t.grad_buffer(ia).raw(), m, k).noalias() +=
          g * ConstMapMat(t.value(ib).raw(), k, n).transpose();
    }
    if (t.requires_grad(ib)) {
      MapMat(t.grad_buffer(ib).raw(), k, n).noalias() +=
          ConstMapMat(t.value(ia).raw(), m, k).transpose() * g;
    }
  });
}

Var transpose(Var a) {
  Tape& tape = common_tape({a}, "transpose");
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor y({c, r});
  MapMat(y.raw(), c, r) = ConstMapMat(a.value().raw(), r, c).transpose();
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, r, c](Tape& t, int self) {
    MapMat(t.grad_buffer(ia).raw(), r, c) += ConstMapMat(t.grad_buffer(self).raw(), c, r).transpose();
  });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = common_tape({a}, "reshape");
  if (shape_numel(shape) != a.value().size()) shape_fail("reshape", {a.shape(), shape});
  Tensor y = a.value().reshaped(std::move(shape));
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia](Tape& t, int self) {
    accumulate(t.grad_buffer(ia), t.grad_buffer(self));
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape* tape = parts.front().tape();
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_fail("concat", {first}, "axis out of range");
  Shape out = first;
  out[axis] = 0;
  std::vector<int> ids;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    if (!p.valid() || p.tape() != tape) throw std::invalid_argument("concat: inputs live on different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) ok = false;
    if (!ok) shape_fail("concat", {first, s}, "axis " + std::to_string(axis));
    out[axis] += s[axis];
    ids.push_back(p.id());
    extents.push_back(s[axis]);
  }
  Tensor y(out);
  const AxisView v = axis_view(out, axis);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& src = parts[p].value();
    const std::size_t block = extents[p] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(src.raw() + o * block, block, y.raw() + (o * v.extent + offset) * v.inner);
    offset += extents[p];
  }
  auto parent_ids = ids;
  return tape->record(std::move(y), std::move(parent_ids), [ids, extents, v](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (t.requires_grad(ids[p])) {
        Tensor& gp = t.grad_buffer(ids[p]);
        const std::size_t block = extents[p] * v.inner;
        for (std::size_t o = 0; o < v.outer; ++o) {
          const double* src = g.raw() + (o * v.extent + offset) * v.inner;
          double* dst = gp.raw() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += extents[p];
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& tape = common_tape({a}, "slice");
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis])
    shape_fail("slice", {s},
               "axis " + std::to_string(axis) + " range [" + std::to_string(begin) + "," +
                   std::to_string(end) + ")");
  Shape out = s;
  out[axis] = end - begin;
  const AxisView v = axis_view(s, axis);
  const std::size_t block = (end - begin) * v.inner;
  Tensor y(out);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(x.raw() + (o * v.extent + begin) * v.inner, block, y.raw() + o * block);
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, v, begin, block](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < v.outer; ++o) {
      double* dst = ga.raw() + (o * v.extent + begin) * v.inner;
      const double* src = g.raw() + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

Var reverse(Var a, std::size_t axis) {
  Tape& tape = common_tape({a}, "reverse");
  const Shape& s = a.shape();
  if (axis >= s.size()) shape_fail("reverse", {s}, "axis out of range");
  const AxisView v = axis_view(s, axis);
  Tensor y(s);
  const Tensor& x = a.value();
  auto index = [v](std::size_t o, std::size_t e, std::size_t i) {
    return (o * v.extent + e) * v.inner + i;
  };
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i)
        y[index(o, v.extent - 1 - e, i)] = x[index(o, e, i)];
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, v, index](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t e = 0; e < v.extent; ++e)
        for (std::size_t i = 0; i < v.inner; ++i)
          ga[index(o, e, i)] += g[index(o, v.extent - 1 - e, i)];
  });
}

Var broadcast(Var a, const Shape& shape) {
  Tape& tape = common_tape({a}, "broadcast");
  const Shape& s = a.shape();
  if (s.size() != shape.size()) shape_fail("broadcast", {s, shape}, "ranks differ");
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] != shape[i] && s[i] != 1) shape_fail("broadcast", {s, shape});
  // Source offset for every destination element.
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> src_index(n);
  std::vector<std::size_t> src_stride(s.size());
  std::size_t stride = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    src_stride[i] = s[i] == 1 ? 0 : stride;
    stride *= s[i];
  }
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) off += idx[d] * src_stride[d];
    src_index[flat] = off;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  Tensor y(shape);
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < n; ++i) y[i] = x[src_index[i]];
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, src_index = std::move(src_index)](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[src_index[i]] += g[i];
  });
}

Var sum(Var a) {
  Tape& tape = common_tape({a}, "sum");
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const int ia = a.id();
  return tape.record(Tensor::scalar(acc), {ia}, [ia](Tape& t, int self) {
    const double g = t.grad_buffer(self)[0];
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_axis(Var a, std::size_t axis) {
  Tape& tape = common_tape({a}, "sum_axis");
  const Shape& s = a.shape();
  if (axis >= s.size()) shape_fail("sum_axis", {s}, "axis out of range");
  const AxisView v = axis_view(s, axis);
  Shape out = s;
  out[axis] = 1;
  Tensor y(out);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i)
        y[o * v.inner + i] += x[(o * v.extent + e) * v.inner + i];
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, v](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t e = 0; e < v.extent; ++e)
        for (std::size_t i = 0; i < v.inner; ++i)
          ga[(o * v.extent + e) * v.inner + i] += g[o * v.inner + i];
  });
}

Var mean_axis(Var a, std::size_t axis) {
  if (axis >= a.value().rank()) shape_fail("mean_axis", {a.shape()}, "axis out of range");
  return scale(sum_axis(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

Var softmax(Var a) {
  Tape& tape = common_tape({a}, "softmax");
  const Shape& s = a.shape();
  if (s.size() > 2) shape_fail("softmax", {s}, "rank 1 or 2 expected");
  const std::size_t cols = s.back();
  const std::size_t rows = a.value().size() / cols;
  Tensor y(s);
  const Tensor& x = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    double* yr = y.raw() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  const int ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& yv = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[base + c] * yv[base + c];
      for (std::size_t c = 0; c < cols; ++c) ga[base + c] += yv[base + c] * (g[base + c] - dot);
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, ph, pw, sh, sw, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
};

// Column block [col0, col0 + ncols) of the im2col matrix (patch x ho*wo).
void im2col(const ConvGeometry& g, const double* x, std::size_t col0, std::size_t ncols, double* cols) {
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * ncols;
        for (std::size_t n = 0; n < ncols; ++n) {
          const std::size_t col = col0 + n;
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>((col / g.wo) * g.sh + i) -
                                    static_cast<std::ptrdiff_t>(g.ph);
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>((col % g.wo) * g.sw + j) -
                                    static_cast<std::ptrdiff_t>(g.pw);
          row[n] = (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(g.h) ||
                    xx >= static_cast<std::ptrdiff_t>(g.w))
                       ? 0.0
                       : x[(c * g.h + yy) * g.w + xx];
        }
      }
}

void col2im(const ConvGeometry& g, const double* cols, std::size_t col0, std::size_t ncols, double* dx) {
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * ncols;
        for (std::size_t n = 0; n < ncols; ++n) {
          const std::size_t col = col0 + n;
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>((col / g.wo) * g.sh + i) -
                                    static_cast<std::ptrdiff_t>(g.ph);
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>((col % g.wo) * g.sw + j) -
                                    static_cast<std::ptrdiff_t>(g.pw);
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(g.h) ||
              xx >= static_cast<std::ptrdiff_t>(g.w))
            continue;
          dx[(c * g.h + yy) * g.w + xx] += row[n];
        }
      }
}

constexpr std::size_t kConvColumnBlock = 2048;

}  // namespace

Var conv2d(Var x, Var w, Var b, std::pair<std::size_t, std::size_t> padding,
           std::pair<std::size_t, std::size_t> stride) {
  Tape& tape = common_tape({x, w, b}, "conv2d");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || b.shape() != Shape{ws[0]})
    shape_fail("conv2d", {xs, ws, b.shape()}, "channel mismatch");
  if (stride.first == 0 || stride.second == 0) shape_fail("conv2d", {xs, ws}, "zero stride");
  ConvGeometry g{xs[0], xs[1], xs[2], ws[0], ws[2], ws[3], padding.first, padding.second,
                 stride.first, stride.second, 0, 0};
  if (g.h + 2 * g.ph < g.kh || g.w + 2 * g.pw < g.kw)
    shape_fail("conv2d", {xs, ws}, "kernel larger than padded input");
  g.ho = (g.h + 2 * g.ph - g.kh) / g.sh + 1;
  g.wo = (g.w + 2 * g.pw - g.kw) / g.sw + 1;

  const std::size_t spatial = g.ho * g.wo;
  Tensor y({g.cout, g.ho, g.wo});
  ConstMapMat wm(w.value().raw(), g.cout, g.patch());
  std::vector<double> cols;
  for (std::size_t col0 = 0; col0 < spatial; col0 += kConvColumnBlock) {
    const std::size_t n = std::min(kConvColumnBlock, spatial - col0);
    cols.resize(g.patch() * n);
    im2col(g, x.value().raw(), col0, n, cols.data());
    Eigen::Map<RowMat, 0, Eigen::OuterStride<>> out(y.raw() + col0, g.cout, n,
                                                    Eigen::OuterStride<>(spatial));
    out.noalias() = wm * ConstMapMat(cols.data(), g.patch(), n);
  }
  const Tensor& bv = b.value();
  for (std::size_t c = 0; c < g.cout; ++c)
    for (std::size_t i = 0; i < spatial; ++i) y[c * spatial + i] += bv[c];

  const int ix = x.id(), iw = w.id(), ib = b.id();
  return tape.record(std::move(y), {ix, iw, ib}, [ix, iw, ib, g](Tape& t, int self) {
    const std::size_t spatial = g.ho * g.wo;
    const Tensor& gy = t.grad_buffer(self);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t c = 0; c < g.cout; ++c)
        for (std::size_t i = 0; i < spatial; ++i) gb[c] += gy[c * spatial + i];
    }
    const bool need_w = t.requires_grad(iw), need_x = t.requires_grad(ix);
    if (!need_w && !need_x) return;
    ConstMapMat wm(t.value(iw).raw(), g.cout, g.patch());
    std::vector<double> cols, dcols;
    for (std::size_t col0 = 0; col0 < spatial; col0 += kConvColumnBlock) {
      const std::size_t n = std::min(kConvColumnBlock, spatial - col0);
      Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> gblk(gy.raw() + col0, g.cout, n,
                                                             Eigen::OuterStride<>(spatial));
      if (need_w) {
        cols.resize(g.patch() * n);
        im2col(g, t.value(ix).raw(), col0, n, cols.data());
        MapMat(t.grad_buffer(iw).raw(), g.cout, g.patch()).noalias() +=
            gblk * ConstMapMat(cols.data(), g.patch(), n).transpose();
      }
      if (need_x) {
        dcols.resize(g.patch() * n);
        MapMat(dcols.data(), g.patch(), n).noalias() = wm.transpose() * gblk;
        col2im(g, dcols.data(), col0, n, t.grad_buffer(ix).raw());
      }
    }
  });
}

namespace {

// Normalisation over `groups` groups of `count` elements; element e of group
// q lives at q * group_stride + e * elem_stride. The affine parameters are
// indexed by `affine_of(q, e)`.
struct NormLayout {
  std::size_t groups, count, group_stride, elem_stride;
  bool per_group_affine;  // true: affine index = q, false: affine index = e
  std::size_t index(std::size_t q, std::size_t e) const { return q * group_stride + e * elem_stride; }
  std::size_t affine(std::size_t q, std::size_t e) const { return per_group_affine ? q : e; }
};

Var normalize(Tape& tape, Var x, Var gain, Var bias, double eps, NormLayout lay) {
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(lay.groups);
  for (std::size_t q = 0; q < lay.groups; ++q) {
    double mu = 0.0;
    for (std::size_t e = 0; e < lay.count; ++e) mu += xv[lay.index(q, e)];
    mu /= static_cast<double>(lay.count);
    double var = 0.0;
    for (std::size_t e = 0; e < lay.count; ++e) {
      const double d = xv[lay.index(q, e)] - mu;
      var += d * d;
    }
    var /= static_cast<double>(lay.count);
    inv_std[q] = 1.0 / std::sqrt(var + eps);
    for (std::size_t e = 0; e < lay.count; ++e)
      xhat[lay.index(q, e)] = (xv[lay.index(q, e)] - mu) * inv_std[q];
  }
  Tensor y(xv.shape());
  for (std::size_t q = 0; q < lay.groups; ++q)
    for (std::size_t e = 0; e < lay.count; ++e) {
      const std::size_t i = lay.index(q, e), a = lay.affine(q, e);
      y[i] = gv[a] * xhat[i] + bv[a];
    }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return tape.record(
      std::move(y), {ix, ig, ib},
      [ix, ig, ib, lay, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Tensor& gy = t.grad_buffer(self);
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad_buffer(ig);
          for (std::size_t q = 0; q < lay.groups; ++q)
            for (std::size_t e = 0; e < lay.count; ++e)
              gg[lay.affine(q, e)] += gy[lay.index(q, e)] * xhat[lay.index(q, e)];
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t q = 0; q < lay.groups; ++q)
            for (std::size_t e = 0; e < lay.count; ++e) gb[lay.affine(q, e)] += gy[lay.index(q, e)];
        }
        if (!t.requires_grad(ix)) return;
        const Tensor& gv = t.value(ig);
        Tensor& gx = t.grad_buffer(ix);
        const double n = static_cast<double>(lay.count);
        for (std::size_t q = 0; q < lay.groups; ++q) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t e = 0; e < lay.count; ++e) {
            const std::size_t i = lay.index(q, e);
            const double d = gy[i] * gv[lay.affine(q, e)];
            sum_d += d;
            sum_dx += d * xhat[i];
          }
          for (std::size_t e = 0; e < lay.count; ++e) {
            const std::size_t i = lay.index(q, e);
            const double d = gy[i] * gv[lay.affine(q, e)];
            gx[i] += inv_std[q] * (d - sum_d / n - xhat[i] * sum_dx / n);
          }
        }
      });
}

}  // namespace

Var instance_norm(Var x, Var scale_v, Var shift_v, double eps) {
  Tape& tape = common_tape({x, scale_v, shift_v}, "instance_norm");
  const Shape& s = x.shape();
  if (s.size() != 3 || scale_v.shape() != Shape{s[0]} || shift_v.shape() != Shape{s[0]})
    shape_fail("instance_norm", {s, scale_v.shape(), shift_v.shape()});
  const std::size_t plane = s[1] * s[2];
  return normalize(tape, x, scale_v, shift_v, eps, {s[0], plane, plane, 1, true});
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& tape = common_tape({x, gain, bias}, "layer_norm");
  const Shape& s = x.shape();
  if (s.size() != 2 || gain.shape() != Shape{s[0]} || bias.shape() != Shape{s[0]})
    shape_fail("layer_norm", {s, gain.shape(), bias.shape()});
  return normalize(tape, x, gain, bias, eps, {s[1], s[0], 1, s[1], false});
}

}  // namespace sase::ops
