#include "hyptext/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace hyptext::kernels {

#if defined(HYPTEXT_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

const KernelTable* avx2_table() noexcept {
#if defined(HYPTEXT_HAVE_AVX2)
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    return supported ? &kAvx2Table : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* pick_default() noexcept {
    if (const char* env = std::getenv("HYPTEXT_KERNELS"); env != nullptr && std::string_view(env) == "scalar") {
        return &scalar_table();
    }
    if (const KernelTable* simd = avx2_table()) return simd;
    return &scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
    static std::atomic<const KernelTable*> current{pick_default()};
    return current;
}

} // namespace

const KernelTable& active() noexcept { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) noexcept { slot().store(&table, std::memory_order_relaxed); }

} // namespace hyptext::kernels
