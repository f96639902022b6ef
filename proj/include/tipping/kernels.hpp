#pragma once

// Inner-loop kernels. Every kernel has a scalar reference implementation;
// AVX2+FMA (x86-64) and NEON (AArch64) variants are selected at runtime.
//
// The scalar dot product sums left to right in double precision. SIMD
// variants reassociate the sum and agree with the reference to within
// 2(n+1) eps sum(|x_i * y_i|); tests/kernels_test.cpp pins that bound.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace tipping::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

struct KernelTable {
    Isa isa;
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
};

// Compiled in and supported by the running CPU.
bool available(Isa isa);

// Table for a specific ISA; throws InvalidArgument when unavailable.
const KernelTable& table(Isa isa);

// Currently selected table. Initial choice: TIPPING_KERNEL environment
// variable (scalar|avx2|neon|auto), else the best available ISA.
const KernelTable& active();

// Process-wide override. Throws InvalidArgument when unavailable.
void select(Isa isa);
void select_best();

// RAII override for tests.
class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa);
    ~ScopedIsa();
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa previous_;
};

} // namespace tipping::kernels
