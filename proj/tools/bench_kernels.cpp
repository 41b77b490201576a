#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "maint/kernels.hpp"

using namespace maint;

namespace {

using clock_type = std::chrono::steady_clock;

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto start = clock_type::now();
    fn();
    best = std::min(best,
                    std::chrono::duration<double>(clock_type::now() - start).count());
  }
  return best;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

int main() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::printf("%-16s %8s %12s %12s %9s %6s\n", "kernel", "size", "serial_s",
              "parallel_s", "speedup", "match");

  for (std::size_t n : {64ul, 256ul, 1024ul, 2048ul}) {
    const std::size_t m = n;
    std::vector<double> W(m * n), x(n), dy(m);
    for (auto& v : W) v = u(rng);
    for (auto& v : x) v = u(rng);
    for (auto& v : dy) v = u(rng);

    const int reps = n <= 256 ? 200 : 20;

    {
      std::vector<double> ys(m), yp(m);
      const double ts = time_best_of(
          reps, [&] { kernels::serial::matvec(W.data(), x.data(), ys.data(), m, n); });
      const double tp = time_best_of(
          reps, [&] { kernels::parallel::matvec(W.data(), x.data(), yp.data(), m, n); });
      std::printf("%-16s %5zux%-4zu %12.3e %12.3e %8.2fx %6s\n", "matvec", m, n, ts, tp,
                  ts / tp, bits_equal(ys, yp) ? "yes" : "NO");
    }
    {
      std::vector<double> dxs(n, 0.0), dxp(n, 0.0);
      const double ts = time_best_of(reps, [&] {
        kernels::serial::matvec_t_accum(W.data(), dy.data(), dxs.data(), m, n);
      });
      const double tp = time_best_of(reps, [&] {
        kernels::parallel::matvec_t_accum(W.data(), dy.data(), dxp.data(), m, n);
      });
      std::printf("%-16s %5zux%-4zu %12.3e %12.3e %8.2fx %6s\n", "matvec_t_accum", m, n,
                  ts, tp, ts / tp, bits_equal(dxs, dxp) ? "yes" : "NO");
    }
    {
      std::vector<double> dWs(m * n, 0.0), dWp(m * n, 0.0);
      const double ts = time_best_of(reps, [&] {
        kernels::serial::outer_accum(dy.data(), x.data(), dWs.data(), m, n);
      });
      const double tp = time_best_of(reps, [&] {
        kernels::parallel::outer_accum(dy.data(), x.data(), dWp.data(), m, n);
      });
      std::printf("%-16s %5zux%-4zu %12.3e %12.3e %8.2fx %6s\n", "outer_accum", m, n, ts,
                  tp, ts / tp, bits_equal(dWs, dWp) ? "yes" : "NO");
    }
  }
  return 0;
}
