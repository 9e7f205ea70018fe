#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"

namespace pottslab {

inline int default_threads() {
  unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1 : static_cast<int>(h);
}

template <class Row>
struct SweepResult {
  std::vector<Row> rows;              // grid order
  std::vector<std::string> errors;    // empty string when the row succeeded
  bool failed() const {
    return std::any_of(errors.begin(), errors.end(), [](const std::string& e) { return !e.empty(); });
  }
};

// Evaluate job(i) for i in [0, count) on up to `threads` workers. Rows come back in
// index order whatever the scheduling. A row whose job throws keeps a default value
// and records the message.
template <class Row>
SweepResult<Row> sweep(std::size_t count, int threads, const std::function<Row(std::size_t)>& job) {
  SweepResult<Row> out;
  out.rows.resize(count);
  out.errors.resize(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out.rows[i] = job(i);
      } catch (const std::exception& e) {
        out.errors[i] = e.what();
      }
    }
  };
  int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (n <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace pottslab
