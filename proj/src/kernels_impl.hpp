#pragma once

#include <cstddef>

namespace tipping::kernels {

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
} // namespace scalar

#if defined(TIPPING_HAVE_AVX2)
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
} // namespace avx2
#endif

#if defined(TIPPING_HAVE_NEON)
namespace neon {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
} // namespace neon
#endif

} // namespace tipping::kernels
