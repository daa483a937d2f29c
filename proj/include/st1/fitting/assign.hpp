#pragma once

// Assigns fitted time constants to triplet sublevels from how a pi-pulse
// exchanges recovery amplitudes between two sublevels.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "st1/fitting/multiexp.hpp"
#include "st1/ratemodel.hpp"

namespace st1::fit {

struct LifetimeReport {
  rate::PiPulse pulse = rate::PiPulse::none;
  std::vector<double> tau;
  std::vector<double> amplitude;

  static LifetimeReport from_fit(rate::PiPulse p, const MultiExpResult& r) { return {p, r.tau, r.amplitude}; }
};

struct LevelAssignment {
  rate::Triplet level = rate::Triplet::plus;
  double tau = 0.0;     // mean over reports
  double tau_sd = 0.0;  // spread over reports, zero for a single member
  std::vector<double> members;
};

struct AssignmentResult {
  std::vector<LevelAssignment> levels;  // one per time-constant cluster, ordered by tau
  bool ambiguous = false;
  double best_score = 0.0;
  double runner_up_score = 0.0;
  std::vector<std::string> warnings;

  const LevelAssignment* find(rate::Triplet t) const {
    for (const auto& l : levels)
      if (l.level == t) return &l;
    return nullptr;
  }
};

struct AssignOptions {
  double cluster_tolerance = 0.3;  // relative distance to the running cluster mean
  double score_tolerance = 1e-3;   // runner-up closer than this is ambiguous
};

namespace detail {

struct Cluster {
  std::vector<double> taus;
  std::vector<std::size_t> owners;
  double mean() const { return std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size()); }
};

inline std::vector<Cluster> cluster_taus(const std::vector<LifetimeReport>& reports, double tol) {
  struct Item {
    double tau;
    std::size_t report;
  };
  std::vector<Item> items;
  for (std::size_t r = 0; r < reports.size(); ++r)
    for (double t : reports[r].tau) items.push_back({t, r});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.tau < b.tau; });
  std::vector<Cluster> out;
  for (const auto& it : items) {
    if (out.empty() || std::abs(it.tau - out.back().mean()) > tol * out.back().mean()) out.emplace_back();
    out.back().taus.push_back(it.tau);
    out.back().owners.push_back(it.report);
  }
  return out;
}

// Keeps the `keep` clusters with the largest summed normalized |amplitude|, in tau order.
inline std::vector<Cluster> dominant_clusters(std::vector<Cluster> clusters, const std::vector<LifetimeReport>& reports,
                                              std::size_t keep) {
  std::vector<double> total(reports.size(), 0.0);
  for (std::size_t r = 0; r < reports.size(); ++r)
    for (double a : reports[r].amplitude) total[r] += std::abs(a);
  std::vector<std::pair<double, std::size_t>> weight;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    double w = 0.0;
    for (std::size_t m = 0; m < clusters[c].taus.size(); ++m) {
      const auto& rep = reports[clusters[c].owners[m]];
      for (std::size_t i = 0; i < rep.tau.size(); ++i)
        if (rep.tau[i] == clusters[c].taus[m] && total[clusters[c].owners[m]] > 0.0)
          w += std::abs(rep.amplitude[i]) / total[clusters[c].owners[m]];
    }
    weight.push_back({w, c});
  }
  std::sort(weight.begin(), weight.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < std::min(keep, weight.size()); ++i) kept.push_back(weight[i].second);
  std::sort(kept.begin(), kept.end());
  std::vector<Cluster> out;
  for (std::size_t c : kept) out.push_back(std::move(clusters[c]));
  return out;
}

}  // namespace detail

inline AssignmentResult assign_lifetimes(const std::vector<LifetimeReport>& reports, const AssignOptions& opt = {}) {
  using rate::Triplet;
  if (reports.size() < 2) throw std::invalid_argument("lifetime assignment needs at least two fit reports");
  for (const auto& r : reports) {
    if (r.tau.size() != r.amplitude.size() || r.tau.empty())
      throw std::invalid_argument("each report needs matching, non-empty tau and amplitude lists");
    for (double t : r.tau)
      if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("time constants must be finite and > 0");
  }

  AssignmentResult res;
  auto clusters = detail::cluster_taus(reports, opt.cluster_tolerance);
  if (clusters.size() > 3) {
    clusters = detail::dominant_clusters(std::move(clusters), reports, 3);
    res.warnings.push_back("more than three time-constant clusters; kept the three with the largest amplitudes");
  }
  const std::size_t k = clusters.size();
  if (k < 3) res.warnings.push_back("fewer than three time-constant clusters; some sublevels are unassigned");

  // Per-report amplitude on each cluster, normalized to the report's total |amplitude|.
  std::vector<std::array<double, 3>> amp(reports.size(), {0.0, 0.0, 0.0});
  for (std::size_t c = 0; c < k; ++c) {
    std::set<std::size_t> seen;
    for (std::size_t m = 0; m < clusters[c].taus.size(); ++m) {
      const std::size_t r = clusters[c].owners[m];
      if (!seen.insert(r).second) res.warnings.push_back("a report contributes two time constants to one cluster");
      const auto& rep = reports[r];
      for (std::size_t i = 0; i < rep.tau.size(); ++i)
        if (rep.tau[i] == clusters[c].taus[m]) amp[r][c] += rep.amplitude[i];
    }
  }
  for (auto& a : amp) {
    const double s = std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]);
    if (s > 0.0)
      for (double& v : a) v /= s;
  }

  // A candidate maps cluster c to level perm[c]. Undoing each report's swap must
  // give the same sublevel amplitudes for every report.
  std::array<int, 3> perm{0, 1, 2};
  std::set<std::array<int, 3>> tried;
  double best = std::numeric_limits<double>::infinity(), second = best;
  std::array<int, 3> best_perm = perm;
  do {
    std::array<int, 3> key{-1, -1, -1};
    for (std::size_t c = 0; c < k; ++c) key[c] = perm[c];
    if (!tried.insert(key).second) continue;
    std::vector<std::array<double, 3>> undone(reports.size(), {0.0, 0.0, 0.0});
    for (std::size_t r = 0; r < reports.size(); ++r)
      for (std::size_t c = 0; c < k; ++c) {
        const auto level = static_cast<Triplet>(perm[c]);
        undone[r][static_cast<int>(rate::swap_image(reports[r].pulse, level))] = amp[r][c];
      }
    double score = 0.0;
    for (std::size_t a = 0; a < reports.size(); ++a)
      for (std::size_t b = a + 1; b < reports.size(); ++b)
        for (int l = 0; l < 3; ++l) score += (undone[a][l] - undone[b][l]) * (undone[a][l] - undone[b][l]);
    if (score < best) {
      second = best;
      best = score;
      best_perm = perm;
    } else if (score < second) {
      second = score;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  res.best_score = best;
  res.runner_up_score = second;
  res.ambiguous = !(second - best > opt.score_tolerance);
  for (std::size_t c = 0; c < k; ++c) {
    LevelAssignment la;
    la.level = static_cast<Triplet>(best_perm[c]);
    la.members = clusters[c].taus;
    la.tau = clusters[c].mean();
    if (la.members.size() > 1) {
      double ss = 0.0;
      for (double t : la.members) ss += (t - la.tau) * (t - la.tau);
      la.tau_sd = std::sqrt(ss / static_cast<double>(la.members.size() - 1));
    }
    res.levels.push_back(la);
  }
  if (res.ambiguous) res.warnings.push_back("assignment is ambiguous: another permutation scores within tolerance");
  return res;
}

}  // namespace st1::fit
