#include "imelab/nelder_mead.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace imelab {

namespace {

struct Simplex {
  std::vector<std::vector<double>> x;
  std::vector<double> f;
};

NelderMeadResult simplex_run(const Objective& objective, const std::vector<double>& x0,
                             const std::vector<double>& step, int max_iterations,
                             double f_tolerance) {
  const int n = static_cast<int>(x0.size());
  Simplex s;
  s.x.assign(static_cast<std::size_t>(n) + 1, x0);
  for (int i = 0; i < n; ++i)
    s.x[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(i)] +=
        step[static_cast<std::size_t>(i)];
  s.f.resize(static_cast<std::size_t>(n) + 1);
  int evals = 0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    s.f[i] = objective(s.x[i]);
    ++evals;
  }

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  bool converged = false;
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Order so f[0] best, f[n] worst.
    std::vector<int> idx(static_cast<std::size_t>(n) + 1);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return s.f[static_cast<std::size_t>(a)] <
                                                s.f[static_cast<std::size_t>(b)]; });
    Simplex ordered;
    for (int i : idx) {
      ordered.x.push_back(std::move(s.x[static_cast<std::size_t>(i)]));
      ordered.f.push_back(s.f[static_cast<std::size_t>(i)]);
    }
    s = std::move(ordered);

    if (std::abs(s.f.back() - s.f.front()) <= f_tolerance) {
      converged = true;
      break;
    }

    std::vector<double> centroid(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        centroid[static_cast<std::size_t>(j)] +=
            s.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / n;

    auto blend = [&](const std::vector<double>& from, double t) {
      std::vector<double> p(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j)
        p[static_cast<std::size_t>(j)] = centroid[static_cast<std::size_t>(j)] +
                                         t * (from[static_cast<std::size_t>(j)] -
                                              centroid[static_cast<std::size_t>(j)]);
      return p;
    };

    const std::vector<double> reflected = blend(s.x.back(), -alpha);
    const double f_reflected = objective(reflected);
    ++evals;
    if (f_reflected < s.f.front()) {
      const std::vector<double> expanded = blend(s.x.back(), -alpha * gamma);
      const double f_expanded = objective(expanded);
      ++evals;
      if (f_expanded < f_reflected) {
        s.x.back() = expanded;
        s.f.back() = f_expanded;
      } else {
        s.x.back() = reflected;
        s.f.back() = f_reflected;
      }
    } else if (f_reflected < s.f[static_cast<std::size_t>(n) - 1]) {
      s.x.back() = reflected;
      s.f.back() = f_reflected;
    } else {
      const bool outside = f_reflected < s.f.back();
      const std::vector<double> contracted =
          outside ? blend(reflected, rho) : blend(s.x.back(), rho);
      const double f_contracted = objective(contracted);
      ++evals;
      if (f_contracted < std::min(f_reflected, s.f.back())) {
        s.x.back() = contracted;
        s.f.back() = f_contracted;
      } else {
        for (std::size_t i = 1; i < s.x.size(); ++i) {
          for (int j = 0; j < n; ++j)
            s.x[i][static_cast<std::size_t>(j)] =
                s.x[0][static_cast<std::size_t>(j)] +
                shrink * (s.x[i][static_cast<std::size_t>(j)] -
                          s.x[0][static_cast<std::size_t>(j)]);
          s.f[i] = objective(s.x[i]);
          ++evals;
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < s.f.size(); ++i)
    if (s.f[i] < s.f[best]) best = i;
  return NelderMeadResult{s.x[best], s.f[best], evals, converged};
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& objective, std::vector<double> x0,
                             std::vector<double> step0, const NelderMeadOptions& options) {
  if (x0.empty() || x0.size() != step0.size())
    throw std::invalid_argument("nelder_mead: x0/step0 size mismatch");
  NelderMeadResult best = simplex_run(objective, x0, step0, options.max_iterations,
                                      options.f_tolerance);
  std::vector<double> step = step0;
  for (int r = 1; r < options.restarts; ++r) {
    for (double& v : step) v *= 0.25;
    NelderMeadResult next = simplex_run(objective, best.x, step, options.max_iterations,
                                        options.f_tolerance);
    next.evaluations += best.evaluations;
    const double gain = best.f - next.f;
    if (next.f <= best.f) best = next;
    if (gain < options.restart_improvement) {
      best.converged = true;
      break;
    }
  }
  return best;
}

NelderMeadResult multi_start_minimize(
    const Objective& objective, const std::function<std::vector<double>(Rng&)>& sample,
    const std::function<std::vector<double>(const std::vector<double>&)>& step_for,
    const std::vector<std::vector<double>>& warm_starts, const MultiStartOptions& options) {
  std::vector<std::vector<double>> starts = warm_starts;
  Rng rng(options.seed);
  for (int i = 0; i < options.starts; ++i) {
    Rng stream = rng.fork(static_cast<std::uint64_t>(i));
    starts.push_back(sample(stream));
  }

  std::vector<NelderMeadResult> results(starts.size());
  int threads = options.threads > 0
                    ? options.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(starts.size())));

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= starts.size()) break;
      results[i] = nelder_mead(objective, starts[i], step_for(starts[i]), options.local);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Deterministic reduction: value first, then start index.
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].f < results[best].f) best = i;
  return results[best];
}

}  // namespace imelab
