#include "oranmec/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace oranmec::simd {

namespace detail {
#if defined(ORANMEC_HAVE_AVX2)
double dot_avx2(const double*, const double*, std::size_t);
void axpy_avx2(double, const double*, double*, std::size_t);
void gemm_abt_avx2(std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                   const double*, std::size_t, double*, std::size_t, double);
#endif
#if defined(__aarch64__) && defined(__ARM_NEON)
double dot_neon(const double*, const double*, std::size_t);
void axpy_neon(double, const double*, double*, std::size_t);
void gemm_abt_neon(std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                   const double*, std::size_t, double*, std::size_t, double);
#endif
} // namespace detail

const KernelTable* avx2_kernels()
{
#if defined(ORANMEC_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    static const KernelTable table{"avx2", detail::dot_avx2, detail::axpy_avx2, detail::gemm_abt_avx2};
    return supported ? &table : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* neon_kernels()
{
#if defined(__aarch64__) && defined(__ARM_NEON)
    static const KernelTable table{"neon", detail::dot_neon, detail::axpy_neon, detail::gemm_abt_neon};
    return &table;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* detect()
{
    const char* env = std::getenv("ORANMEC_SIMD");
    if (env && std::string(env) == "scalar")
        return &scalar_kernels();
    if (const KernelTable* t = avx2_kernels())
        return t;
    if (const KernelTable* t = neon_kernels())
        return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& current()
{
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

} // namespace

const KernelTable& active()
{
    return *current().load(std::memory_order_relaxed);
}

bool select(std::string_view name)
{
    const KernelTable* t = nullptr;
    if (name == "scalar")
        t = &scalar_kernels();
    else if (name == "avx2")
        t = avx2_kernels();
    else if (name == "neon")
        t = neon_kernels();
    if (!t)
        return false;
    current().store(t, std::memory_order_relaxed);
    return true;
}

} // namespace oranmec::simd
