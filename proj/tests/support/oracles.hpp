#pragma once

// Independent oracles used to cross-check production code paths. These
// deliberately use different algorithms than the implementations they verify.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace testsupport {

// Michelot's iterative algorithm for projecting onto the probability simplex
// (production sparsemax uses sort-and-threshold instead).
inline std::vector<double> simplex_projection_oracle(
    const std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> x = z;
  std::vector<bool> active(n, true);
  std::size_t n_active = n;
  double active_sum = 0.0;
  for (double v : z) active_sum += v;

  bool changed = true;
  double tau = (active_sum - 1.0) / static_cast<double>(n_active);
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && x[i] <= tau) {
        active[i] = false;
        --n_active;
        active_sum -= x[i];
        changed = true;
      }
    }
    if (n_active == 0) break;
    tau = (active_sum - 1.0) / static_cast<double>(n_active);
  }
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) p[i] = x[i] - tau;
  }
  return p;
}

// Plain-double NT-Xent: -log(exp(s_pos/tau) / (sum_neg exp(s_neg/tau) +
// exp(s_pos/tau))), computed naively.
inline double nt_xent_oracle(double s_pos, const std::vector<double>& s_negs,
                             double tau) {
  double denom = std::exp(s_pos / tau);
  for (double s : s_negs) denom += std::exp(s / tau);
  return -std::log(std::exp(s_pos / tau) / denom);
}

// Brute-force relative contrastive loss: enumerate every candidate as the
// positive with negatives = all strictly farther candidates.
inline double relcon_loss_oracle(const std::vector<double>& sims,
                                 const std::vector<double>& dists,
                                 double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    std::vector<double> negs;
    for (std::size_t j = 0; j < sims.size(); ++j) {
      if (dists[j] > dists[i]) negs.push_back(sims[j]);
    }
    if (negs.empty()) continue;  // single-term ratio is exactly 0
    total += nt_xent_oracle(sims[i], negs, tau);
  }
  return total;
}

}  // namespace testsupport
