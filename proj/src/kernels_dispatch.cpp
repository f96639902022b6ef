#include "tipping/kernels.hpp"

#include "kernels_impl.hpp"
#include "tipping/errors.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace tipping::kernels {
namespace {

constexpr KernelTable kScalarTable{Isa::kScalar, &scalar::dot, &scalar::axpy};
#if defined(TIPPING_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Isa::kAvx2, &avx2::dot, &avx2::axpy};
#endif
#if defined(TIPPING_HAVE_NEON)
constexpr KernelTable kNeonTable{Isa::kNeon, &neon::dot, &neon::axpy};
#endif

Isa best_isa() {
    if (available(Isa::kAvx2)) {
        return Isa::kAvx2;
    }
    if (available(Isa::kNeon)) {
        return Isa::kNeon;
    }
    return Isa::kScalar;
}

Isa initial_isa() {
    if (const char* env = std::getenv("TIPPING_KERNEL")) {
        const std::string_view name(env);
        if (name != "auto") {
            if (auto isa = parse_isa(name); isa && available(*isa)) {
                return *isa;
            }
        }
    }
    return best_isa();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> ptr{&table(initial_isa())};
    return ptr;
}

} // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::kScalar;
    if (name == "avx2") return Isa::kAvx2;
    if (name == "neon") return Isa::kNeon;
    return std::nullopt;
}

bool available(Isa isa) {
    switch (isa) {
    case Isa::kScalar:
        return true;
    case Isa::kAvx2:
#if defined(TIPPING_HAVE_AVX2)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Isa::kNeon:
#if defined(TIPPING_HAVE_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!available(isa)) {
        throw InvalidArgument("kernel ISA not available on this build/CPU: " + std::string(to_string(isa)));
    }
    switch (isa) {
#if defined(TIPPING_HAVE_AVX2)
    case Isa::kAvx2: return kAvx2Table;
#endif
#if defined(TIPPING_HAVE_NEON)
    case Isa::kNeon: return kNeonTable;
#endif
    default: return kScalarTable;
    }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

void select_best() { select(best_isa()); }

ScopedIsa::ScopedIsa(Isa isa) : previous_(active().isa) { select(isa); }

ScopedIsa::~ScopedIsa() { select(previous_); }

} // namespace tipping::kernels
