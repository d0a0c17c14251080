#include "dismax/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace dismax::kernels {

bool avx2_supported() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

namespace {

const Table* pick_active() {
  const char* req = std::getenv("DISMAX_KERNEL");
  if (req != nullptr) {
    if (std::strcmp(req, "scalar") == 0) return &scalar_table();
    if (std::strcmp(req, "avx2") == 0 && avx2_supported() && avx2_table())
      return avx2_table();
    if (std::strcmp(req, "neon") == 0 && neon_table()) return neon_table();
    return &scalar_table();  // unknown or unavailable request
  }
  if (avx2_supported() && avx2_table() != nullptr) return avx2_table();
  if (neon_table() != nullptr) return neon_table();
  return &scalar_table();
}

}  // namespace

const Table& active() {
  static const Table* chosen = pick_active();
  return *chosen;
}

std::vector<const Table*> available_tables() {
  std::vector<const Table*> out;
  out.push_back(&scalar_table());
  if (avx2_supported() && avx2_table() != nullptr) out.push_back(avx2_table());
  if (neon_table() != nullptr) out.push_back(neon_table());
  return out;
}

}  // namespace dismax::kernels
