#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace scatterlm {

nlohmann::json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::uint64_t fnv1a(std::string_view data);
std::string fnv1a_hex(std::string_view data);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Deterministic seed for sub-stream `a`, `b` of a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Worker count: SCATTERLM_WORKERS if set, otherwise hardware concurrency.
int default_workers();

/// Runs fn(i) for i in [0, n) on `workers` threads. Each index is processed
/// exactly once; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace scatterlm
