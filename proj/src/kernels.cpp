#include "jitcast/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace jitcast::kernels {

namespace {

inline void matmul_row(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double av = a[p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
}

inline void matmul_bt_row(const double* a, const double* b, double* c, std::size_t k,
                          std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p] * brow[p];
        c[j] += acc;
    }
}

// Row i of C = sum over r of A[r, i] * B[r, :]
inline void matmul_at_row(const double* a, const double* b, double* c, std::size_t i,
                          std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double av = a[r * k + i];
        if (av == 0.0) continue;
        const double* brow = b + r * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
}

}  // namespace

void matmul_acc_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul_acc_parallel(const double* a, const double* b, double* c, std::size_t m,
                         std::size_t k, std::size_t n) {
    const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        matmul_row(a + r * k, b, c + r * n, k, n);
    }
}

void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
    if (m > 1 && m * k * n >= kParallelThreshold && max_threads() > 1) {
        matmul_acc_parallel(a, b, c, m, k, n);
    } else {
        matmul_acc_serial(a, b, c, m, k, n);
    }
}

void matmul_bt_acc_serial(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) matmul_bt_row(a + i * k, b, c + i * n, k, n);
}

void matmul_bt_acc_parallel(const double* a, const double* b, double* c, std::size_t m,
                            std::size_t k, std::size_t n) {
    const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        matmul_bt_row(a + r * k, b, c + r * n, k, n);
    }
}

void matmul_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    if (m > 1 && m * k * n >= kParallelThreshold && max_threads() > 1) {
        matmul_bt_acc_parallel(a, b, c, m, k, n);
    } else {
        matmul_bt_acc_serial(a, b, c, m, k, n);
    }
}

void matmul_at_acc_serial(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < k; ++i) matmul_at_row(a, b, c + i * n, i, m, k, n);
}

void matmul_at_acc_parallel(const double* a, const double* b, double* c, std::size_t m,
                            std::size_t k, std::size_t n) {
    const auto rows = static_cast<long long>(k);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        matmul_at_row(a, b, c + r * n, r, m, k, n);
    }
}

void matmul_at_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    if (k > 1 && m * k * n >= kParallelThreshold && max_threads() > 1) {
        matmul_at_acc_parallel(a, b, c, m, k, n);
    } else {
        matmul_at_acc_serial(a, b, c, m, k, n);
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace jitcast::kernels
