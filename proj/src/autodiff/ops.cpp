// Copyright 2026 The coop_predict Authors
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

#include "coop/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace coop::ad
{
namespace
{
std::string shape_str(Index r, Index c)
{
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

template <typename T>
void same_tape(const Var<T> & a, const Var<T> & b, const char * op)
{
  if (a.tape() != b.tape() || !a.valid() || !b.valid()) {
    throw ShapeMismatch(std::string(op) + ": operands on different tapes");
  }
}

enum class Broadcast { Full, Row, Col, Scalar };

template <typename T>
Broadcast classify(const Matrix<T> & a, const Matrix<T> & b, const char * op)
{
  if (b.rows() == a.rows() && b.cols() == a.cols()) {
    return Broadcast::Full;
  }
  if (b.rows() == 1 && b.cols() == 1) {
    return Broadcast::Scalar;
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    return Broadcast::Row;
  }
  if (b.cols() == 1 && b.rows() == a.rows()) {
    return Broadcast::Col;
  }
  throw ShapeMismatch(
    std::string(op) + ": cannot broadcast " + shape_str(b.rows(), b.cols()) + " onto " +
    shape_str(a.rows(), a.cols()));
}

template <typename T>
Matrix<T> expand(const Matrix<T> & b, Index rows, Index cols, Broadcast kind)
{
  switch (kind) {
    case Broadcast::Full:
      return b;
    case Broadcast::Row:
      return b.replicate(rows, 1);
    case Broadcast::Col:
      return b.replicate(1, cols);
    case Broadcast::Scalar:
      return Matrix<T>::Constant(rows, cols, b(0, 0));
  }
  return b;
}

template <typename T>
Matrix<T> reduce(const Matrix<T> & g, Broadcast kind)
{
  switch (kind) {
    case Broadcast::Full:
      return g;
    case Broadcast::Row:
      return g.colwise().sum();
    case Broadcast::Col:
      return g.rowwise().sum();
    case Broadcast::Scalar:
      return Matrix<T>::Constant(1, 1, g.sum());
  }
  return g;
}

bool any_grad(std::initializer_list<bool> flags)
{
  return std::any_of(flags.begin(), flags.end(), [](bool f) { return f; });
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T> & a, const Var<T> & b)
{
  same_tape(a, b, "matmul");
  const Matrix<T> & av = a.value();
  const Matrix<T> & bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeMismatch(
      "matmul: " + shape_str(av.rows(), av.cols()) + " x " + shape_str(bv.rows(), bv.cols()));
  }
  Tape<T> & tape = *a.tape();
  Matrix<T> out = av * bv;
  const int ia = a.id();
  const int ib = b.id();
  const bool rg = any_grad({tape.requires_grad(ia), tape.requires_grad(ib)});
  return tape.record(std::move(out), rg, [ia, ib](Tape<T> & t, const Matrix<T> & g) {
    if (t.requires_grad(ia)) {
      t.grad(ia).noalias() += g * t.value(ib).transpose();
    }
    if (t.requires_grad(ib)) {
      t.grad(ib).noalias() += t.value(ia).transpose() * g;
    }
  });
}

template <typename T>
Var<T> add(const Var<T> & a, const Var<T> & b)
{
  same_tape(a, b, "add");
  const Matrix<T> & av = a.value();
  const Matrix<T> & bv = b.value();
  const Broadcast kind = classify(av, bv, "add");
  Tape<T> & tape = *a.tape();
  Matrix<T> out = av;
  switch (kind) {
    case Broadcast::Full:
      out += bv;
      break;
    case Broadcast::Row:
      out.rowwise() += bv.row(0);
      break;
    case Broadcast::Col:
      out.colwise() += bv.col(0);
      break;
    case Broadcast::Scalar:
      out.array() += bv(0, 0);
      break;
  }
  const int ia = a.id();
  const int ib = b.id();
  const bool rg = any_grad({tape.requires_grad(ia), tape.requires_grad(ib)});
  return tape.record(std::move(out), rg, [ia, ib, kind](Tape<T> & t, const Matrix<T> & g) {
    if (t.requires_grad(ia)) {
      t.grad(ia) += g;
    }
    if (t.requires_grad(ib)) {
      t.grad(ib) += reduce(g, kind);
    }
  });
}

template <typename T>
Var<T> sub(const Var<T> & a, const Var<T> & b)
{
  same_tape(a, b, "sub");
  const Matrix<T> & av = a.value();
  const Matrix<T> & bv = b.value();
  const Broadcast kind = classify(av, bv, "sub");
  Tape<T> & tape = *a.tape();
  Matrix<T> out = av - expand(bv, av.rows(), av.cols(), kind);
  const int ia = a.id();
  const int ib = b.id();
  const bool rg = any_grad({tape.requires_grad(ia), tape.requires_grad(ib)});
  return tape.record(std::move(out), rg, [ia, ib, kind](Tape<T> & t, const Matrix<T> & g) {
    if (t.requires_grad(ia)) {
      t.grad(ia) += g;
    }
    if (t.requires_grad(ib)) {
      t.grad(ib) -= reduce(g, kind);
    }
  });
}

template <typename T>
Var<T> mul(const Var<T> & a, const Var<T> & b)
{
  same_tape(a, b, "mul");
  const Matrix<T> & av = a.value();
  const Matrix<T> & bv = b.value();
  const Broadcast kind = classify(av, bv, "mul");
  Tape<T> & tape = *a.tape();
  Matrix<T> out(av.rows(), av.cols());
  switch (kind) {
    case Broadcast::Full:
      out = av.cwiseProduct(bv);
      break;
    case Broadcast::Row:
      out = (av.array().rowwise() * bv.row(0).array()).matrix();
      break;
    case Broadcast::Col:
      out = (av.array().colwise() * bv.col(0).array()).matrix();
      break;
    case Broadcast::Scalar:
      out = av * bv(0, 0);
      break;
  }
  const int ia = a.id();
  const int ib = b.id();
  const bool rg = any_grad({tape.requires_grad(ia), tape.requires_grad(ib)});
  return tape.record(std::move(out), rg, [ia, ib, kind](Tape<T> & t, const Matrix<T> & g) {
    const Matrix<T> & A = t.value(ia);
    const Matrix<T> & B = t.value(ib);
    if (t.requires_grad(ia)) {
      t.grad(ia) += g.cwiseProduct(expand(B, A.rows(), A.cols(), kind));
    }
    if (t.requires_grad(ib)) {
      t.grad(ib) += reduce(Matrix<T>(g.cwiseProduct(A)), kind);
    }
  });
}

template <typename T>
Var<T> scale(const Var<T> & a, T factor)
{
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  return tape.record(a.value() * factor, tape.requires_grad(ia), [ia, factor](Tape<T> & t, const Matrix<T> & g) {
    t.grad(ia) += g * factor;
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts, int axis)
{
  if (parts.empty()) {
    throw ShapeMismatch("concat: no inputs");
  }
  if (axis != 0 && axis != 1) {
    throw ShapeMismatch("concat: axis must be 0 or 1");
  }
  Tape<T> & tape = *parts.front().tape();
  Index rows = 0;
  Index cols = 0;
  std::vector<int> ids;
  std::vector<Index> sizes;
  bool rg = false;
  for (const auto & p : parts) {
    same_tape(parts.front(), p, "concat");
    const Matrix<T> & v = p.value();
    if (axis == 0) {
      if (!ids.empty() && v.cols() != cols) {
        throw ShapeMismatch("concat rows: column counts differ");
      }
      cols = v.cols();
      rows += v.rows();
      sizes.push_back(v.rows());
    } else {
      if (!ids.empty() && v.rows() != rows) {
        throw ShapeMismatch("concat cols: row counts differ");
      }
      rows = v.rows();
      cols += v.cols();
      sizes.push_back(v.cols());
    }
    ids.push_back(p.id());
    rg = rg || tape.requires_grad(p.id());
  }
  Matrix<T> out(rows, cols);
  Index offset = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Matrix<T> & v = tape.value(ids[i]);
    if (axis == 0) {
      out.middleRows(offset, sizes[i]) = v;
    } else {
      out.middleCols(offset, sizes[i]) = v;
    }
    offset += sizes[i];
  }
  return tape.record(std::move(out), rg, [ids, sizes, axis](Tape<T> & t, const Matrix<T> & g) {
    Index off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.requires_grad(ids[i])) {
        if (axis == 0) {
          t.grad(ids[i]) += g.middleRows(off, sizes[i]);
        } else {
          t.grad(ids[i]) += g.middleCols(off, sizes[i]);
        }
      }
      off += sizes[i];
    }
  });
}

template <typename T>
Var<T> slice(const Var<T> & a, int axis, Index start, Index length)
{
  const Matrix<T> & av = a.value();
  const Index extent = axis == 0 ? av.rows() : av.cols();
  if ((axis != 0 && axis != 1) || start < 0 || length < 0 || start + length > extent) {
    throw ShapeMismatch("slice: range out of bounds for " + shape_str(av.rows(), av.cols()));
  }
  Tape<T> & tape = *a.tape();
  Matrix<T> out = axis == 0 ? Matrix<T>(av.middleRows(start, length)) : Matrix<T>(av.middleCols(start, length));
  const int ia = a.id();
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, axis, start, length](Tape<T> & t, const Matrix<T> & g) {
    if (axis == 0) {
      t.grad(ia).middleRows(start, length) += g;
    } else {
      t.grad(ia).middleCols(start, length) += g;
    }
  });
}

template <typename T>
Var<T> index_select(const Var<T> & a, const IndexList & index)
{
  const Matrix<T> & av = a.value();
  Matrix<T> out(static_cast<Index>(index.size()), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= av.rows()) {
      throw ShapeMismatch("index_select: row " + std::to_string(index[i]) + " out of range");
    }
    out.row(static_cast<Index>(i)) = av.row(index[i]);
  }
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, index](Tape<T> & t, const Matrix<T> & g) {
    Matrix<T> & ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) {
      ga.row(index[i]) += g.row(static_cast<Index>(i));
    }
  });
}

template <typename T>
Var<T> scatter_sum(const Var<T> & a, const IndexList & index, Index segments)
{
  const Matrix<T> & av = a.value();
  if (static_cast<Index>(index.size()) != av.rows()) {
    throw ShapeMismatch("scatter_sum: index length differs from row count");
  }
  Matrix<T> out = Matrix<T>::Zero(segments, av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= segments) {
      throw ShapeMismatch("scatter_sum: segment " + std::to_string(index[i]) + " out of range");
    }
    out.row(index[i]) += av.row(static_cast<Index>(i));
  }
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, index](Tape<T> & t, const Matrix<T> & g) {
    Matrix<T> & ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) {
      ga.row(static_cast<Index>(i)) += g.row(index[i]);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T> & a)
{
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  Matrix<T> out = a.value().cwiseMax(T(0));
  return tape.record(std::move(out), tape.requires_grad(ia), [ia](Tape<T> & t, const Matrix<T> & g) {
    t.grad(ia).array() += (t.value(ia).array() > T(0)).select(g.array(), T(0));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T> & a, T slope)
{
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  const Matrix<T> & av = a.value();
  Matrix<T> out = (av.array() > T(0)).select(av.array(), av.array() * slope).matrix();
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, slope](Tape<T> & t, const Matrix<T> & g) {
    t.grad(ia).array() += (t.value(ia).array() > T(0)).select(g.array(), g.array() * slope);
  });
}

template <typename T>
Var<T> softmax(const Var<T> & a, int axis)
{
  if (axis != 0 && axis != 1) {
    throw ShapeMismatch("softmax: axis must be 0 or 1");
  }
  const Matrix<T> & av = a.value();
  Matrix<T> out(av.rows(), av.cols());
  if (axis == 1) {
    for (Index r = 0; r < av.rows(); ++r) {
      const T m = av.row(r).maxCoeff();
      out.row(r) = (av.row(r).array() - m).exp().matrix();
      out.row(r) /= out.row(r).sum();
    }
  } else {
    for (Index c = 0; c < av.cols(); ++c) {
      const T m = av.col(c).maxCoeff();
      out.col(c) = (av.col(c).array() - m).exp().matrix();
      out.col(c) /= out.col(c).sum();
    }
  }
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  Matrix<T> y = out;
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, axis, y](Tape<T> & t, const Matrix<T> & g) {
    Matrix<T> gy = g.cwiseProduct(y);
    if (axis == 1) {
      const Matrix<T> s = gy.rowwise().sum();
      t.grad(ia) += gy - (y.array().colwise() * s.col(0).array()).matrix();
    } else {
      const Matrix<T> s = gy.colwise().sum();
      t.grad(ia) += gy - (y.array().rowwise() * s.row(0).array()).matrix();
    }
  });
}

template <typename T>
Var<T> segment_softmax(const Var<T> & scores, const IndexList & segment, Index segments)
{
  const Matrix<T> & sv = scores.value();
  if (static_cast<Index>(segment.size()) != sv.rows()) {
    throw ShapeMismatch("segment_softmax: segment length differs from row count");
  }
  const Index cols = sv.cols();
  Matrix<T> seg_max = Matrix<T>::Constant(segments, cols, -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= segments) {
      throw ShapeMismatch("segment_softmax: segment id out of range");
    }
    seg_max.row(segment[i]) = seg_max.row(segment[i]).cwiseMax(sv.row(static_cast<Index>(i)));
  }
  Matrix<T> out(sv.rows(), cols);
  Matrix<T> seg_sum = Matrix<T>::Zero(segments, cols);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const Index r = static_cast<Index>(i);
    out.row(r) = (sv.row(r) - seg_max.row(segment[i])).array().exp().matrix();
    seg_sum.row(segment[i]) += out.row(r);
  }
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out.row(static_cast<Index>(i)).array() /= seg_sum.row(segment[i]).array();
  }
  Tape<T> & tape = *scores.tape();
  const int ia = scores.id();
  Matrix<T> y = out;
  return tape.record(
    std::move(out), tape.requires_grad(ia), [ia, y, segment, segments](Tape<T> & t, const Matrix<T> & g) {
      Matrix<T> gy = g.cwiseProduct(y);
      Matrix<T> dot = Matrix<T>::Zero(segments, y.cols());
      for (std::size_t i = 0; i < segment.size(); ++i) {
        dot.row(segment[i]) += gy.row(static_cast<Index>(i));
      }
      Matrix<T> & ga = t.grad(ia);
      for (std::size_t i = 0; i < segment.size(); ++i) {
        const Index r = static_cast<Index>(i);
        ga.row(r) += gy.row(r) - y.row(r).cwiseProduct(dot.row(segment[i]));
      }
    });
}

template <typename T>
Var<T> layer_norm(const Var<T> & a, const Var<T> & gain, const Var<T> & bias, T eps)
{
  same_tape(a, gain, "layer_norm");
  same_tape(a, bias, "layer_norm");
  const Matrix<T> & x = a.value();
  const Index n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw ShapeMismatch("layer_norm: gain/bias must be 1x" + std::to_string(n));
  }
  Matrix<T> xhat(x.rows(), n);
  Matrix<T> inv_std(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    const T mu = x.row(r).mean();
    const auto centered = (x.row(r).array() - mu).matrix();
    const T var = centered.squaredNorm() / static_cast<T>(n);
    inv_std(r, 0) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r, 0);
  }
  Matrix<T> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  Tape<T> & tape = *a.tape();
  const int ix = a.id();
  const int ig = gain.id();
  const int ib = bias.id();
  const bool rg = any_grad({tape.requires_grad(ix), tape.requires_grad(ig), tape.requires_grad(ib)});
  return tape.record(
    std::move(out), rg, [ix, ig, ib, xhat, inv_std, n](Tape<T> & t, const Matrix<T> & g) {
      if (t.requires_grad(ig)) {
        t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
      }
      if (t.requires_grad(ib)) {
        t.grad(ib) += g.colwise().sum();
      }
      if (t.requires_grad(ix)) {
        const Matrix<T> gh = (g.array().rowwise() * t.value(ig).row(0).array()).matrix();
        Matrix<T> & gx = t.grad(ix);
        const T inv_n = T(1) / static_cast<T>(n);
        for (Index r = 0; r < gh.rows(); ++r) {
          const T mean_g = gh.row(r).sum() * inv_n;
          const T mean_gx = gh.row(r).dot(xhat.row(r)) * inv_n;
          gx.row(r) +=
            ((gh.row(r).array() - mean_g - xhat.row(r).array() * mean_gx) * inv_std(r, 0)).matrix();
        }
      }
    });
}

template <typename T>
Var<T> conv1d(const Var<T> & x, const Var<T> & weight, const Var<T> & bias, Index sequence_length,
              Index kernel)
{
  same_tape(x, weight, "conv1d");
  same_tape(x, bias, "conv1d");
  const Matrix<T> & xv = x.value();
  const Index cin = xv.cols();
  const Index cout = weight.cols();
  if (kernel < 1 || kernel % 2 == 0) {
    throw ShapeMismatch("conv1d: kernel must be odd and positive");
  }
  if (sequence_length < 1 || xv.rows() % sequence_length != 0) {
    throw ShapeMismatch("conv1d: rows not a multiple of the sequence length");
  }
  if (weight.rows() != kernel * cin || bias.rows() != 1 || bias.cols() != cout) {
    throw ShapeMismatch(
      "conv1d: weight must be " + shape_str(kernel * cin, cout) + " and bias 1x" + std::to_string(cout));
  }
  const Index pad = kernel / 2;
  const Index rows = xv.rows();
  // im2col: column block k holds the input shifted by (k - pad) within each sequence.
  Matrix<T> col = Matrix<T>::Zero(rows, kernel * cin);
  for (Index r = 0; r < rows; ++r) {
    const Index pos = r % sequence_length;
    for (Index k = 0; k < kernel; ++k) {
      const Index src = pos + k - pad;
      if (src >= 0 && src < sequence_length) {
        col.block(r, k * cin, 1, cin) = xv.row(r + k - pad);
      }
    }
  }
  Matrix<T> out = col * weight.value();
  out.rowwise() += bias.value().row(0);
  Tape<T> & tape = *x.tape();
  const int ix = x.id();
  const int iw = weight.id();
  const int ib = bias.id();
  const bool rg = any_grad({tape.requires_grad(ix), tape.requires_grad(iw), tape.requires_grad(ib)});
  return tape.record(
    std::move(out), rg,
    [ix, iw, ib, col = std::move(col), sequence_length, kernel, cin, pad](Tape<T> & t, const Matrix<T> & g) {
      if (t.requires_grad(iw)) {
        t.grad(iw).noalias() += col.transpose() * g;
      }
      if (t.requires_grad(ib)) {
        t.grad(ib) += g.colwise().sum();
      }
      if (t.requires_grad(ix)) {
        const Matrix<T> gcol = g * t.value(iw).transpose();
        Matrix<T> & gx = t.grad(ix);
        for (Index r = 0; r < gcol.rows(); ++r) {
          const Index pos = r % sequence_length;
          for (Index k = 0; k < kernel; ++k) {
            const Index src = pos + k - pad;
            if (src >= 0 && src < sequence_length) {
              gx.row(r + k - pad) += gcol.block(r, k * cin, 1, cin);
            }
          }
        }
      }
    });
}

namespace
{
template <typename T>
T smooth_l1_value(T d)
{
  const T a = std::abs(d);
  return a < T(1) ? T(0.5) * d * d : a - T(0.5);
}

template <typename T>
T smooth_l1_slope(T d)
{
  return std::abs(d) < T(1) ? d : (d > T(0) ? T(1) : T(-1));
}

template <typename T>
Var<T> weighted_smooth_l1(const Var<T> & diff, Matrix<T> weights)
{
  const Matrix<T> & d = diff.value();
  if (weights.rows() != d.rows() || weights.cols() != d.cols()) {
    throw ShapeMismatch("smooth_l1: weights must match the input shape");
  }
  T total = T(0);
  for (Index r = 0; r < d.rows(); ++r) {
    for (Index c = 0; c < d.cols(); ++c) {
      if (weights(r, c) != T(0)) {
        total += weights(r, c) * smooth_l1_value(d(r, c));
      }
    }
  }
  Tape<T> & tape = *diff.tape();
  const int id = diff.id();
  return tape.record(
    Matrix<T>::Constant(1, 1, total), tape.requires_grad(id),
    [id, w = std::move(weights)](Tape<T> & t, const Matrix<T> & g) {
      const Matrix<T> & dv = t.value(id);
      Matrix<T> & gd = t.grad(id);
      const T g0 = g(0, 0);
      for (Index r = 0; r < dv.rows(); ++r) {
        for (Index c = 0; c < dv.cols(); ++c) {
          gd(r, c) += g0 * w(r, c) * smooth_l1_slope(dv(r, c));
        }
      }
    });
}
}  // namespace

template <typename T>
Var<T> smooth_l1(const Var<T> & diff)
{
  const Index n = diff.value().size();
  if (n == 0) {
    throw ShapeMismatch("smooth_l1: empty input");
  }
  return weighted_smooth_l1<T>(
    diff, Matrix<T>::Constant(diff.rows(), diff.cols(), T(1) / static_cast<T>(n)));
}

template <typename T>
Var<T> smooth_l1(const Var<T> & diff, const Matrix<T> & weights)
{
  return weighted_smooth_l1<T>(diff, weights);
}

template <typename T>
Var<T> cross_entropy_with_logits(const Var<T> & logits, const IndexList & targets)
{
  const Matrix<T> & z = logits.value();
  if (static_cast<Index>(targets.size()) != z.rows() || z.rows() == 0) {
    throw ShapeMismatch("cross_entropy_with_logits: need one target per row");
  }
  Matrix<T> prob(z.rows(), z.cols());
  T total = T(0);
  for (Index r = 0; r < z.rows(); ++r) {
    const int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0 || tgt >= z.cols()) {
      throw ShapeMismatch("cross_entropy_with_logits: target out of range");
    }
    const T m = z.row(r).maxCoeff();
    prob.row(r) = (z.row(r).array() - m).exp().matrix();
    const T s = prob.row(r).sum();
    prob.row(r) /= s;
    total += (std::log(s) + m) - z(r, tgt);
  }
  const T inv_rows = T(1) / static_cast<T>(z.rows());
  Tape<T> & tape = *logits.tape();
  const int id = logits.id();
  return tape.record(
    Matrix<T>::Constant(1, 1, total * inv_rows), tape.requires_grad(id),
    [id, prob = std::move(prob), targets, inv_rows](Tape<T> & t, const Matrix<T> & g) {
      Matrix<T> d = prob;
      for (std::size_t r = 0; r < targets.size(); ++r) {
        d(static_cast<Index>(r), targets[r]) -= T(1);
      }
      t.grad(id) += d * (g(0, 0) * inv_rows);
    });
}

template <typename T>
Var<T> sum(const Var<T> & a)
{
  Tape<T> & tape = *a.tape();
  const int ia = a.id();
  return tape.record(
    Matrix<T>::Constant(1, 1, a.value().sum()), tape.requires_grad(ia),
    [ia](Tape<T> & t, const Matrix<T> & g) { t.grad(ia).array() += g(0, 0); });
}

template <typename T>
Var<T> mean(const Var<T> & a)
{
  const Index n = a.value().size();
  if (n == 0) {
    throw ShapeMismatch("mean: empty input");
  }
  return scale(sum(a), T(1) / static_cast<T>(n));
}

#define COOP_INSTANTIATE_OPS(T)                                                                   \
  template Var<T> matmul(const Var<T> &, const Var<T> &);                                         \
  template Var<T> add(const Var<T> &, const Var<T> &);                                            \
  template Var<T> sub(const Var<T> &, const Var<T> &);                                            \
  template Var<T> mul(const Var<T> &, const Var<T> &);                                            \
  template Var<T> scale(const Var<T> &, T);                                                       \
  template Var<T> concat(std::span<const Var<T>>, int);                                           \
  template Var<T> slice(const Var<T> &, int, Index, Index);                                       \
  template Var<T> index_select(const Var<T> &, const IndexList &);                                \
  template Var<T> scatter_sum(const Var<T> &, const IndexList &, Index);                          \
  template Var<T> relu(const Var<T> &);                                                           \
  template Var<T> leaky_relu(const Var<T> &, T);                                                  \
  template Var<T> softmax(const Var<T> &, int);                                                   \
  template Var<T> segment_softmax(const Var<T> &, const IndexList &, Index);                      \
  template Var<T> layer_norm(const Var<T> &, const Var<T> &, const Var<T> &, T);                  \
  template Var<T> conv1d(const Var<T> &, const Var<T> &, const Var<T> &, Index, Index);           \
  template Var<T> smooth_l1(const Var<T> &);                                                      \
  template Var<T> smooth_l1(const Var<T> &, const Matrix<T> &);                                   \
  template Var<T> cross_entropy_with_logits(const Var<T> &, const IndexList &);                   \
  template Var<T> sum(const Var<T> &);                                                            \
  template Var<T> mean(const Var<T> &);

COOP_INSTANTIATE_OPS(float)
COOP_INSTANTIATE_OPS(double)

#undef COOP_INSTANTIATE_OPS

}  // namespace coop::ad
