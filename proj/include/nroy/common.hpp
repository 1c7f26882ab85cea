#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nroy {

// Error taxonomy. The CLI maps kinds to exit codes: bad input or config -> 2,
// numerical/computation failures -> 3.
enum class ErrorKind {
  schema,        // malformed config, unknown column, bad file contents
  argument,      // out-of-contract argument (k > n, empty table, ...)
  domain,        // point outside the parameter ranges
  degenerate,    // zero-spread column, constant data where spread required
  conditioning,  // factorization failure
  numeric,       // other numerical degeneracy
  insufficient_data
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::schema:
      case ErrorKind::argument:
      case ErrorKind::domain:
      case ErrorKind::degenerate:
        return 2;
      default:
        return 3;
    }
  }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// Runs fn(i) for i in [0, n). Results must be written by index; chunks are
// contiguous so output is identical for any worker count.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(w);
  std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace nroy
