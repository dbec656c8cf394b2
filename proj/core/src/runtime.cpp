#include "berknash/runtime.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace berknash {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t index) {
  uint64_t s = base ^ (0x2545f4914f6cdd1dULL * (index + 1));
  splitmix64(s);
  return splitmix64(s);
}

namespace {

struct Fnv {
  uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  void f64(double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    bytes(&bits, sizeof bits);
  }
  void i32(int x) { bytes(&x, sizeof x); }
  void str(const std::string& s) {
    i32(static_cast<int>(s.size()));
    bytes(s.data(), s.size());
  }
  void mat(const Matrix& m) {
    i32(static_cast<int>(m.rows()));
    i32(static_cast<int>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
};

}  // namespace

uint64_t instance_hash(const FiniteMdp& mdp) {
  Fnv fnv;
  for (const auto& s : mdp.state_names()) fnv.str(s);
  for (const auto& a : mdp.action_names()) fnv.str(a);
  for (const auto& fs : mdp.feasible())
    for (int a : fs) fnv.i32(a);
  for (Eigen::Index i = 0; i < mdp.initial().size(); ++i)
    fnv.f64(mdp.initial()[i]);
  fnv.mat(mdp.kernel());
  fnv.mat(mdp.payoff());
  fnv.f64(mdp.discount());
  return fnv.h;
}

uint64_t instance_hash(const FiniteSmdp& smdp) {
  Fnv fnv;
  fnv.h = instance_hash(smdp.base);
  if (smdp.family) {
    fnv.mat(smdp.family->parameter_matrix());
    // Hash a bounded sample of family rows so structurally different
    // families with equal grids do not collide.
    const int nk = smdp.family->size();
    const int np = smdp.base.n_pairs();
    Vector buf(smdp.base.n_states());
    const long total = static_cast<long>(nk) * np;
    const long stride = total <= 4096 ? 1 : total / 4096;
    for (long flat = 0; flat < total; flat += stride) {
      smdp.family->row(static_cast<int>(flat / np),
                       static_cast<int>(flat % np), buf);
      for (Eigen::Index i = 0; i < buf.size(); ++i) fnv.f64(buf[i]);
    }
  }
  return fnv.h;
}

int default_thread_count() {
  if (const char* env = std::getenv("BERKNASH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void run_indexed_jobs(int n, const std::function<void(int)>& fn, int threads) {
  if (n <= 0) return;
  int workers = threads > 0 ? threads : default_thread_count();
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace berknash
