// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense data-parallel kernels. Each kernel has an OpenMP implementation used
// by the library and a plain serial version under `reference` that the tests
// and the benchmark compare against.
//
// The parallel kernels split work over independent output rows and keep the
// per-element accumulation order of the serial loop, so results do not depend
// on the number of threads.

#include <cstddef>
#include <functional>
#include <span>

namespace flowsteer::kernels {

enum class Trans { No, Yes };

/// Worker count honoring FLOWSTEER_THREADS (unset or <= 0 means all cores).
int worker_count();

/// C[m x n] = alpha * op(A) * op(B) + beta * C, all row-major and densely packed.
/// op(A) is m x k, op(B) is k x n.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          std::span<const double> a, std::span<const double> b, double beta, std::span<double> c);

/// out[i] = tanh(in[i])
void tanh_forward(std::span<const double> in, std::span<double> out);

/// grad[i] *= 1 - act[i]^2, where act holds tanh outputs.
void tanh_backward(std::span<const double> act, std::span<double> grad);

/// Adds bias[j] to every row of a rows x bias.size() matrix.
void add_row_bias(std::span<double> mat, std::span<const double> bias);

/// out[j] += sum over rows of mat[row, j].
void accumulate_column_sums(std::span<const double> mat, std::span<double> out);

/// Runs body(i) for i in [0, count) across worker_count() threads.
/// Iterations must be independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

namespace reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          std::span<const double> a, std::span<const double> b, double beta, std::span<double> c);
void tanh_forward(std::span<const double> in, std::span<double> out);
void tanh_backward(std::span<const double> act, std::span<double> grad);
void add_row_bias(std::span<double> mat, std::span<const double> bias);
void accumulate_column_sums(std::span<const double> mat, std::span<double> out);
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace reference

}  // namespace flowsteer::kernels
