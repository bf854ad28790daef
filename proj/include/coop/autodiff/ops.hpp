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

#ifndef COOP__AUTODIFF__OPS_HPP_
#define COOP__AUTODIFF__OPS_HPP_

#include "coop/autodiff/tensor.hpp"

#include <span>
#include <vector>

namespace coop::ad
{
/// Row-index array used by gather/scatter/segment operations.
using IndexList = std::vector<int>;

template <typename T>
Var<T> matmul(const Var<T> & a, const Var<T> & b);

// Elementwise ops. `b` may match `a` or broadcast as a row (1xC), column (Rx1) or scalar (1x1).
template <typename T>
Var<T> add(const Var<T> & a, const Var<T> & b);
template <typename T>
Var<T> sub(const Var<T> & a, const Var<T> & b);
template <typename T>
Var<T> mul(const Var<T> & a, const Var<T> & b);

template <typename T>
Var<T> scale(const Var<T> & a, T factor);

/// axis 0 stacks rows, axis 1 stacks columns.
template <typename T>
Var<T> concat(std::span<const Var<T>> parts, int axis);

template <typename T>
Var<T> slice(const Var<T> & a, int axis, Index start, Index length);

/// out[i] = a[index[i]]
template <typename T>
Var<T> index_select(const Var<T> & a, const IndexList & index);

/// out[index[i]] += a[i], out has `segments` rows. Sequential in i.
template <typename T>
Var<T> scatter_sum(const Var<T> & a, const IndexList & index, Index segments);

template <typename T>
Var<T> relu(const Var<T> & a);

template <typename T>
Var<T> leaky_relu(const Var<T> & a, T slope = T(0.2));

template <typename T>
Var<T> softmax(const Var<T> & a, int axis);

/// Column-wise softmax over the rows sharing a segment id.
template <typename T>
Var<T> segment_softmax(const Var<T> & scores, const IndexList & segment, Index segments);

/// Per-row normalisation with learned gain and bias (both 1xC).
template <typename T>
Var<T> layer_norm(const Var<T> & a, const Var<T> & gain, const Var<T> & bias, T eps = T(1e-5));

/// Same-padded stride-1 convolution over `sequence_length`-row blocks.
/// x: (B*L) x Cin, weight: (k*Cin) x Cout with tap-major rows, bias: 1 x Cout.
template <typename T>
Var<T> conv1d(const Var<T> & x, const Var<T> & weight, const Var<T> & bias, Index sequence_length,
              Index kernel);

/// Mean of the piecewise loss 0.5 d^2 (|d| < 1), |d| - 0.5 otherwise.
template <typename T>
Var<T> smooth_l1(const Var<T> & diff);

/// Weighted sum of the same piecewise loss; `weights` is a constant with the shape of `diff`.
template <typename T>
Var<T> smooth_l1(const Var<T> & diff, const Matrix<T> & weights);

/// Mean over rows of logsumexp(logits) - logits[target].
template <typename T>
Var<T> cross_entropy_with_logits(const Var<T> & logits, const IndexList & targets);

template <typename T>
Var<T> sum(const Var<T> & a);

template <typename T>
Var<T> mean(const Var<T> & a);

}  // namespace coop::ad

#endif  // COOP__AUTODIFF__OPS_HPP_
