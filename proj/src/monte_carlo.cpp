#include "mveq/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "mveq/numerics.hpp"

namespace mveq {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double sample_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

SimulationSummary simulate_monte_carlo(const MarketSpec& spec,
                                       const ExcessMoments& moments,
                                       const AffinePolicy& policy, double x,
                                       std::uint64_t n_paths, std::uint64_t seed,
                                       const MonteCarloOptions& options) {
  if (n_paths < 2) throw std::invalid_argument("n_paths must be >= 2");
  const int t = policy.start_stage();
  const int n = spec.horizon;
  const bool tree_mode = options.distribution == ReturnDistribution::TreeSampling;
  if (tree_mode) {
    if (options.tree == nullptr) {
      throw std::invalid_argument("tree sampling needs a scenario tree");
    }
    if (options.tree->horizon() != n || options.tree->num_assets() != spec.num_assets) {
      throw std::invalid_argument("scenario tree does not match the market");
    }
  }

  std::vector<Eigen::MatrixXd> factors;
  std::vector<std::vector<double>> cumulative;
  for (int k = 0; k < n; ++k) {
    if (tree_mode) {
      std::vector<double> c;
      double acc = 0.0;
      for (const auto& a : options.tree->atoms(k)) c.push_back(acc += a.probability);
      c.back() = 1.0;
      cumulative.push_back(std::move(c));
    } else {
      factors.push_back(numerics::psd_factor(moments.cov_excess[static_cast<std::size_t>(k)]));
    }
  }

  std::vector<double> terminal(n_paths);
  const auto simulate = [&](std::uint64_t path) {
    std::mt19937_64 engine(splitmix64(seed + path));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double wealth = x;
    for (int k = t; k < n; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const Eigen::VectorXd u = policy.action(k, wealth);
      double gain = 0.0;
      if (tree_mode) {
        const auto& c = cumulative[uk];
        const double draw = uniform(engine);
        const auto idx = static_cast<std::size_t>(
            std::upper_bound(c.begin(), c.end() - 1, draw) - c.begin());
        gain = options.tree->atoms(k)[idx].excess.dot(u);
      } else {
        const auto& f = factors[uk];
        Eigen::VectorXd z(f.cols());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(engine);
        gain = (moments.mean_excess[uk] + f * z).dot(u);
      }
      wealth = spec.riskless[uk] * wealth + gain;
    }
    terminal[path] = wealth;
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    for (std::uint64_t i = 0; i < n_paths; ++i) simulate(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t i = w; i < n_paths; i += threads) simulate(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  const double count = static_cast<double>(n_paths);
  const double lambda = spec.mu1 * x + spec.mu2;
  SimulationSummary out;
  out.paths = n_paths;
  for (const double v : terminal) out.mean += v;
  out.mean /= count;
  double ss = 0.0;
  for (const double v : terminal) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / (count - 1.0);
  out.cost = out.variance - lambda * out.mean;

  std::vector<double> sq(n_paths), psi(n_paths);
  for (std::uint64_t i = 0; i < n_paths; ++i) {
    const double d = terminal[i] - out.mean;
    sq[i] = d * d;
    psi[i] = d * d - lambda * terminal[i];
  }
  const double root_n = std::sqrt(count);
  out.mean_se = sample_sd(terminal) / root_n;
  out.variance_se = sample_sd(sq) / root_n;
  out.cost_se = sample_sd(psi) / root_n;
  return out;
}

}  // namespace mveq
