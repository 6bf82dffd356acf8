#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace wise {

// Error taxonomy. The CLI maps each class to a distinct exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Seeds and counter-based randomness

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a list of
/// stream coordinates (round index, feature index, ...).
template <typename... Ts>
constexpr std::uint64_t derive_seed(std::uint64_t master, Ts... coords) {
  std::uint64_t h = splitmix64(master);
  ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(coords) + 0x632be59bd9b4e019ULL))), ...);
  return h;
}

/// Uniform double in the open interval (0, 1) from a 64-bit key.
constexpr double key_to_unit(std::uint64_t key) {
  // 53 random mantissa bits, shifted by half an ulp so 0 is never produced.
  return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

/// FNV-1a over bytes. Stable across platforms and runs.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

inline std::atomic<int>& log_level_storage() {
  static std::atomic<int> level{static_cast<int>(LogLevel::kInfo)};
  return level;
}

inline void set_log_level(LogLevel level) { log_level_storage() = static_cast<int>(level); }

inline void log(LogLevel level, const std::string& message) {
  static std::mutex mu;
  if (static_cast<int>(level) > log_level_storage().load()) return;
  std::lock_guard lock(mu);
  std::clog << "[wise] " << message << '\n';
}

// ---------------------------------------------------------------------------
// Worker pool

inline std::atomic<int>& worker_count_storage() {
  static std::atomic<int> workers{0};
  return workers;
}

/// Number of worker threads used by parallel_for. Zero means "unset", which
/// resolves to WISE_WORKERS from the environment or the hardware concurrency.
inline int worker_count() {
  int w = worker_count_storage().load();
  if (w > 0) return w;
  if (const char* env = std::getenv("WISE_WORKERS")) {
    int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_worker_count(int workers) { worker_count_storage() = std::max(0, workers); }

inline bool& inside_parallel_region() {
  static thread_local bool inside = false;
  return inside;
}

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// writes only its own output slot, so results do not depend on the number
/// of workers. The first exception thrown by any body is rethrown.
/// Nested calls run inline on the calling worker.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1 || inside_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    inside_parallel_region() = true;
    struct Reset {
      ~Reset() { inside_parallel_region() = false; }
    } reset;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace wise
