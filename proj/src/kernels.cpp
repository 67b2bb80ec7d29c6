// SPDX-License-Identifier: Apache-2.0

#include "dmlink/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace dmlink::kernels {
namespace {

const KernelTable& fallback_with_warning(const char* requested) {
  std::fprintf(stderr,
               "dmlink: DMLINK_KERNELS=%s not supported on this machine, "
               "using scalar kernels\n",
               requested);
  return scalar_table();
}

const KernelTable& best_supported() {
  if (avx2_supported()) return avx2_table();
#if defined(__aarch64__)
  return neon_table();
#else
  return scalar_table();
#endif
}

const KernelTable& choose() {
  const char* env = std::getenv("DMLINK_KERNELS");
  if (env == nullptr || std::strcmp(env, "auto") == 0) {
    return best_supported();
  }
  if (std::strcmp(env, "scalar") == 0) return scalar_table();
  if (std::strcmp(env, "avx2") == 0) {
    return avx2_supported() ? avx2_table() : fallback_with_warning(env);
  }
  if (std::strcmp(env, "neon") == 0) {
#if defined(__aarch64__)
    return neon_table();
#else
    return fallback_with_warning(env);
#endif
  }
  return fallback_with_warning(env);
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = choose();
  return table;
}

}  // namespace dmlink::kernels
