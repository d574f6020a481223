#include "mixcam/kernels.hpp"

#include <cstdlib>
#include <string>

#include "mixcam/error.hpp"

namespace mixcam::kernels {
namespace {

const Table* lookup(std::string_view name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") {
    const Table* t = avx2_table();
    if (!t) fail(ErrorCategory::config, "kernels: avx2 lane unavailable on this build/CPU");
    return t;
  }
  fail(ErrorCategory::config, "kernels: unknown lane '" + std::string(name) + "' (scalar|avx2)");
}

const Table* resolve() {
  if (const char* env = std::getenv("MIXCAM_KERNELS")) return lookup(env);
  if (const Table* t = avx2_table()) return t;
  return &scalar_table();
}

const Table* g_active = nullptr;

}  // namespace

const Table& active() {
  if (!g_active) g_active = resolve();
  return *g_active;
}

void force(std::string_view name) { g_active = lookup(name); }

}  // namespace mixcam::kernels
