// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flowsteer/errors.hpp"

namespace flowsteer::kernels {

namespace {

void check_gemm_sizes(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
                      std::span<const double> b, std::span<double> c) {
    if (a.size() != m * k || b.size() != k * n || c.size() != m * n) {
        throw ShapeError("gemm: buffer sizes do not match m=" + std::to_string(m) + " n=" + std::to_string(n) +
                         " k=" + std::to_string(k));
    }
}

// rows x cols row-major -> cols x rows row-major.
void transpose_into(std::span<const double> src, std::size_t rows, std::size_t cols, std::vector<double>& dst) {
    dst.resize(rows * cols);
    constexpr std::size_t kBlock = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
        for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
            const std::size_t r1 = std::min(rows, r0 + kBlock);
            const std::size_t c1 = std::min(cols, c0 + kBlock);
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
        }
    }
}

constexpr std::size_t kPanel = 16;
constexpr std::size_t kRows = 4;

// Copies op(B) (k x n) into column panels of width kPanel, each stored as
// k contiguous rows of kPanel values, zero-padded on the right.
void pack_panels(const double* b, std::size_t k, std::size_t n, std::vector<double>& out) {
    const std::size_t panels = (n + kPanel - 1) / kPanel;
    out.assign(panels * k * kPanel, 0.0);
    for (std::size_t pnl = 0; pnl < panels; ++pnl) {
        const std::size_t j0 = pnl * kPanel;
        const std::size_t width = std::min(kPanel, n - j0);
        double* dst = out.data() + pnl * k * kPanel;
        for (std::size_t p = 0; p < k; ++p) std::copy_n(b + p * n + j0, width, dst + p * kPanel);
    }
}

// acc[r][j] = sum_p a[r, p] * panel[p, j] for R rows, then
// c = alpha * acc + beta * c on the valid columns.
template <std::size_t R>
void micro_kernel(const double* a, std::size_t lda, const double* panel, std::size_t k, double alpha, double beta,
                  double* c, std::size_t ldc, std::size_t width) {
    double acc[R][kPanel] = {};
    for (std::size_t p = 0; p < k; ++p) {
        const double* bp = panel + p * kPanel;
        for (std::size_t r = 0; r < R; ++r) {
            const double av = a[r * lda + p];
#pragma omp simd
            for (std::size_t j = 0; j < kPanel; ++j) acc[r][j] += av * bp[j];
        }
    }
    for (std::size_t r = 0; r < R; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t j = 0; j < width; ++j)
            crow[j] = beta == 0.0 ? alpha * acc[r][j] : alpha * acc[r][j] + beta * crow[j];
    }
}

void small_m_gemm_bt(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a, const double* b,
                     double beta, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            double& out = c[i * n + j];
            out = beta == 0.0 ? alpha * acc : alpha * acc + beta * out;
        }
    }
}

int parse_thread_cap() {
    const char* env = std::getenv("FLOWSTEER_THREADS");
    if (!env) return 0;
    try {
        return std::stoi(env);
    } catch (...) {
        return 0;
    }
}

}  // namespace

int worker_count() {
#ifdef _OPENMP
    const int available = omp_get_max_threads();
#else
    const int available = 1;
#endif
    const int cap = parse_thread_cap();
    return cap > 0 ? std::min(cap, available) : available;
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          std::span<const double> a, std::span<const double> b, double beta, std::span<double> c) {
    check_gemm_sizes(m, n, k, a, b, c);
    if (m <= kRows && ta == Trans::No && tb == Trans::Yes) {
        // Few rows against a transposed B: rows of B are already contiguous,
        // so plain dot products beat transposing and packing B.
        small_m_gemm_bt(m, n, k, alpha, a.data(), b.data(), beta, c.data());
        return;
    }
    std::vector<double> a_packed;
    std::vector<double> b_rows;
    std::vector<double> panels;
    const double* ap = a.data();
    const double* bp = b.data();
    if (ta == Trans::Yes) {
        transpose_into(a, k, m, a_packed);
        ap = a_packed.data();
    }
    if (tb == Trans::Yes) {
        transpose_into(b, n, k, b_rows);
        bp = b_rows.data();
    }
    pack_panels(bp, k, n, panels);
    const std::size_t n_panels = (n + kPanel - 1) / kPanel;
    const std::size_t row_blocks = (m + kRows - 1) / kRows;
    const auto tiles = static_cast<std::ptrdiff_t>(row_blocks * n_panels);
    double* cp = c.data();
    const int threads = worker_count();
#pragma omp parallel for schedule(static) num_threads(threads) if (m * n * k > 32768)
    for (std::ptrdiff_t tile = 0; tile < tiles; ++tile) {
        const std::size_t rb = static_cast<std::size_t>(tile) / n_panels;
        const std::size_t pnl = static_cast<std::size_t>(tile) % n_panels;
        const std::size_t i0 = rb * kRows;
        const std::size_t j0 = pnl * kPanel;
        const std::size_t width = std::min(kPanel, n - j0);
        const double* panel = panels.data() + pnl * k * kPanel;
        double* ctile = cp + i0 * n + j0;
        const double* atile = ap + i0 * k;
        switch (std::min<std::size_t>(kRows, m - i0)) {
            case 4: micro_kernel<4>(atile, k, panel, k, alpha, beta, ctile, n, width); break;
            case 3: micro_kernel<3>(atile, k, panel, k, alpha, beta, ctile, n, width); break;
            case 2: micro_kernel<2>(atile, k, panel, k, alpha, beta, ctile, n, width); break;
            default: micro_kernel<1>(atile, k, panel, k, alpha, beta, ctile, n, width); break;
        }
    }
}

void tanh_forward(std::span<const double> in, std::span<double> out) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.size());
    const int threads = worker_count();
#pragma omp parallel for schedule(static) num_threads(threads) if (n > 65536)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void tanh_backward(std::span<const double> act, std::span<double> grad) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(act.size());
    const int threads = worker_count();
#pragma omp parallel for simd schedule(static) num_threads(threads) if (n > 65536)
    for (std::ptrdiff_t i = 0; i < n; ++i) grad[i] *= 1.0 - act[i] * act[i];
}

void add_row_bias(std::span<double> mat, std::span<const double> bias) {
    const std::size_t cols = bias.size();
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(mat.size() / cols);
    const int threads = worker_count();
#pragma omp parallel for schedule(static) num_threads(threads) if (mat.size() > 65536)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        double* row = mat.data() + r * cols;
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
    }
}

void accumulate_column_sums(std::span<const double> mat, std::span<double> out) {
    const std::size_t cols = out.size();
    const std::size_t rows = mat.size() / cols;
    // Row-major traversal; each column still sums rows in ascending order.
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = mat.data() + r * cols;
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j];
    }
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(count);
    const int threads = worker_count();
    // Exceptions must not escape an OpenMP region; capture the first one.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(flowsteer_parallel_for_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

namespace reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          std::span<const double> a, std::span<const double> b, double beta, std::span<double> c) {
    check_gemm_sizes(m, n, k, a, b, c);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ta == Trans::No ? a[i * k + p] : a[p * m + i];
                const double bv = tb == Trans::No ? b[p * n + j] : b[j * k + p];
                acc += av * bv;
            }
            c[i * n + j] = (beta == 0.0 ? 0.0 : beta * c[i * n + j]) + alpha * acc;
        }
    }
}

void tanh_forward(std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
}

void tanh_backward(std::span<const double> act, std::span<double> grad) {
    for (std::size_t i = 0; i < act.size(); ++i) grad[i] *= 1.0 - act[i] * act[i];
}

void add_row_bias(std::span<double> mat, std::span<const double> bias) {
    for (std::size_t i = 0; i < mat.size(); ++i) mat[i] += bias[i % bias.size()];
}

void accumulate_column_sums(std::span<const double> mat, std::span<double> out) {
    for (std::size_t i = 0; i < mat.size(); ++i) out[i % out.size()] += mat[i];
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace reference

}  // namespace flowsteer::kernels
