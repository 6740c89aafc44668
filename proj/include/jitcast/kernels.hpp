#pragma once

#include <cstddef>

// Dense kernels used by the autodiff engine. Each parallel kernel has a serial
// reference with the same per-element summation order, so both produce
// bit-identical results regardless of thread count.
namespace jitcast::kernels {

/// Work (m*k*n multiply-adds) below which the dispatching kernels stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

// C[m x n] += A[m x k] * B[k x n]
void matmul_acc_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n);
void matmul_acc_parallel(const double* a, const double* b, double* c, std::size_t m,
                         std::size_t k, std::size_t n);
void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n);

// C[m x n] += A[m x k] * B[n x k]^T
void matmul_bt_acc_serial(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n);
void matmul_bt_acc_parallel(const double* a, const double* b, double* c, std::size_t m,
                            std::size_t k, std::size_t n);
void matmul_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);

// C[k x n] += A[m x k]^T * B[m x n]
void matmul_at_acc_serial(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n);
void matmul_at_acc_parallel(const double* a, const double* b, double* c, std::size_t m,
                            std::size_t k, std::size_t n);
void matmul_at_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace jitcast::kernels
