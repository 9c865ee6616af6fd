#include "rafsnn/runtime.hpp"

#include <cblas.h>
#include <unistd.h>

#include <cstdlib>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <spdlog/spdlog.h>

namespace rafsnn {

void tune_allocator() {
    static std::once_flag once;
    std::call_once(once, [] {
#if defined(__GLIBC__)
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    });
}

std::string blas_core_name() {
    const char* name = openblas_get_corename();
    return name ? name : "unknown";
}

namespace {

const char* preferred_core() {
#if defined(__x86_64__)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx512f")) return "SkylakeX";
    if (__builtin_cpu_supports("avx2")) return "Haswell";
#endif
    return nullptr;
}

bool is_baseline_core(const std::string& name) {
    for (const char* base : {"Prescott", "Core2", "Penryn", "Dunnington", "Nehalem", "Atom", "Unknown", "generic"})
        if (name == base) return true;
    return false;
}

}  // namespace

void configure_runtime(int /*argc*/, char** argv) {
    tune_allocator();
    if (std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
    const char* want = preferred_core();
    if (want == nullptr || !is_baseline_core(blas_core_name())) return;
    setenv("OPENBLAS_CORETYPE", want, 1);
    execv("/proc/self/exe", argv);
    // exec failed: carry on with the detected kernels.
    spdlog::debug("could not re-exec with OPENBLAS_CORETYPE={}", want);
}

}  // namespace rafsnn
