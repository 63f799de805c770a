#include "laggre/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laggre/binary_io.hpp"
#include "laggre/error.hpp"
#include "laggre/parallel.hpp"
#include "laggre/rng.hpp"

namespace laggre {

namespace {

constexpr std::uint32_t kEnsembleVersion = 1;

double squared_distance(std::span<const float> x, std::span<const double> c) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = static_cast<double>(x[k]) - c[k];
    acc += diff * diff;
  }
  return acc;
}

void copy_point(std::span<const float> x, std::span<double> c) {
  for (std::size_t k = 0; k < x.size(); ++k) c[k] = x[k];
}

// Greedy k-means++: each new centre is the best (lowest potential) of
// 2 + floor(ln m) D^2-weighted candidates.
std::vector<double> seed_centroids(const MemoryBank& pts, std::size_t m, Rng& rng, unsigned workers) {
  const std::size_t n = pts.size();
  const std::size_t d = pts.dim();
  std::vector<double> centroids(m * d);
  std::vector<char> chosen(n, 0);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  chosen[first] = 1;
  copy_point(pts.row(first), {centroids.data(), d});

  std::vector<double> closest(n);
  parallel_for(n, workers, [&](std::size_t i) {
    closest[i] = squared_distance(pts.row(i), {centroids.data(), d});
  });

  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(m)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> candidate_dist(n);
  std::vector<double> best_dist(n);
  std::vector<double> cand_centre(d);

  for (std::size_t c = 1; c < m; ++c) {
    double potential = 0.0;
    for (double x : closest) potential += x;

    std::size_t best = n;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t cand = n;
      if (potential > 0.0) {
        const double target = unit(rng) * potential;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += closest[i];
          if (acc > target && closest[i] > 0.0) {
            cand = i;
            break;
          }
        }
        if (cand == n) {
          for (std::size_t i = n; i-- > 0;)
            if (closest[i] > 0.0) {
              cand = i;
              break;
            }
        }
      } else {
        // Every point coincides with a centre: take the first unused index.
        for (std::size_t i = 0; i < n; ++i)
          if (!chosen[i]) {
            cand = i;
            break;
          }
      }
      if (cand == n) cand = pick(rng);

      copy_point(pts.row(cand), cand_centre);
      parallel_for(n, workers, [&](std::size_t i) {
        candidate_dist[i] = std::min(closest[i], squared_distance(pts.row(i), cand_centre));
      });
      double cand_potential = 0.0;
      for (double x : candidate_dist) cand_potential += x;
      if (cand_potential < best_potential) {
        best_potential = cand_potential;
        best = cand;
        best_dist.swap(candidate_dist);
      }
      if (potential <= 0.0) break;
    }
    chosen[best] = 1;
    copy_point(pts.row(best), {centroids.data() + c * d, d});
    closest.swap(best_dist);
    best_dist.resize(n);
    candidate_dist.resize(n);
  }
  return centroids;
}

struct AssignPass {
  double inertia = 0.0;
  bool changed = false;
};

AssignPass assign(const MemoryBank& pts, const std::vector<double>& centroids, std::size_t m,
                  std::vector<std::uint32_t>& assignment, std::vector<double>& distance, unsigned workers) {
  const std::size_t n = pts.size();
  const std::size_t d = pts.dim();
  std::vector<char> changed(n, 0);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto x = pts.row(i);
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      const double dist = squared_distance(x, {centroids.data() + c * d, d});
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<std::uint32_t>(c);
      }
    }
    changed[i] = assignment[i] != best;
    assignment[i] = best;
    distance[i] = best_d;
  });
  AssignPass pass;
  for (std::size_t i = 0; i < n; ++i) {
    pass.inertia += distance[i];
    pass.changed = pass.changed || changed[i];
  }
  return pass;
}

std::vector<std::vector<std::uint32_t>> group_members(const std::vector<std::uint32_t>& assignment,
                                                      std::size_t m) {
  std::vector<std::vector<std::uint32_t>> members(m);
  for (std::size_t i = 0; i < assignment.size(); ++i)
    members[assignment[i]].push_back(static_cast<std::uint32_t>(i));
  return members;
}

// Means of non-empty clusters; returns the indices of empty ones.
std::vector<std::size_t> update_means(const MemoryBank& pts, const std::vector<std::uint32_t>& assignment,
                                      std::size_t m, std::vector<double>& centroids, unsigned workers) {
  const std::size_t d = pts.dim();
  const auto members = group_members(assignment, m);
  parallel_for(m, workers, [&](std::size_t c) {
    if (members[c].empty()) return;
    std::span<double> centre{centroids.data() + c * d, d};
    std::fill(centre.begin(), centre.end(), 0.0);
    for (auto i : members[c]) {
      const auto x = pts.row(i);
      for (std::size_t k = 0; k < d; ++k) centre[k] += x[k];
    }
    const double inv = 1.0 / static_cast<double>(members[c].size());
    for (double& v : centre) v *= inv;
  });
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < m; ++c)
    if (members[c].empty()) empty.push_back(c);
  return empty;
}

}  // namespace

Clustering Clustering::from_assignment(std::vector<std::uint32_t> assignment, std::size_t clusters) {
  if (clusters < 1) throw ConfigError("clustering needs at least one cluster");
  for (auto a : assignment)
    if (a >= clusters) throw IndexOutOfRange("cluster label exceeds cluster count");
  Clustering c;
  c.clusters = clusters;
  c.assignment = std::move(assignment);
  return c;
}

Clustering kmeans_fit(const MemoryBank& pts, const KMeansOptions& options) {
  const std::size_t n = pts.size();
  const std::size_t d = pts.dim();
  const std::size_t m = options.clusters;
  if (m < 1 || m > n) throw ConfigError("k-means needs 1 <= m <= N");
  if (options.max_iters < 1) throw ConfigError("k-means needs max_iters >= 1");
  const unsigned workers = resolve_workers(options.workers);

  Rng rng(options.seed);
  Clustering out;
  out.clusters = m;
  out.dim = d;
  out.centroids = seed_centroids(pts, m, rng, workers);
  out.assignment.assign(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<double> distance(n);

  auto pass = assign(pts, out.centroids, m, out.assignment, distance, workers);
  out.inertia_history.push_back(pass.inertia);

  for (std::size_t it = 0; it < options.max_iters; ++it) {
    auto empty = update_means(pts, out.assignment, m, out.centroids, workers);
    for (std::size_t c : empty) {
      const auto far = static_cast<std::size_t>(
          std::max_element(distance.begin(), distance.end()) - distance.begin());
      copy_point(pts.row(far), {out.centroids.data() + c * d, d});
      distance[far] = 0.0;
    }
    pass = assign(pts, out.centroids, m, out.assignment, distance, workers);
    out.inertia_history.push_back(pass.inertia);
    out.iterations = it + 1;
    if (!pass.changed) {
      out.converged = true;
      break;
    }
  }

  // Leave every non-empty centroid at the mean of its final members.
  update_means(pts, out.assignment, m, out.centroids, workers);
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    inertia += squared_distance(pts.row(i), out.centroid(out.assignment[i]));
  if (!out.converged) out.inertia_history.push_back(inertia);
  out.inertia = inertia;
  return out;
}

ClusteringEnsemble::ClusteringEnsemble(std::vector<Clustering> clusterings, std::vector<std::uint64_t> seeds)
    : clusterings_(std::move(clusterings)), seeds_(std::move(seeds)) {
  if (clusterings_.empty()) throw ConfigError("clustering ensemble needs at least one member");
  points_ = clusterings_.front().size();
  members_.reserve(clusterings_.size());
  for (const auto& c : clusterings_) {
    if (c.size() != points_) throw ShapeMismatch("ensemble members cover different point counts");
    auto grouped = group_members(c.assignment, c.clusters);
    std::vector<IndexSet> sets;
    sets.reserve(grouped.size());
    for (auto& g : grouped) sets.push_back(IndexSet::from_sorted(std::move(g)));
    members_.push_back(std::move(sets));
  }
  seeds_.resize(clusterings_.size(), 0);
}

const IndexSet& ClusteringEnsemble::cluster_of(std::size_t j, std::size_t i) const {
  if (i >= points_) throw IndexOutOfRange("point index outside the clustered set");
  return members_[j][clusterings_[j].assignment[i]];
}

bool ClusteringEnsemble::same_partitions(const ClusteringEnsemble& other) const {
  if (size() != other.size() || points_ != other.points_) return false;
  for (std::size_t j = 0; j < size(); ++j) {
    if (clusterings_[j].clusters != other.clusterings_[j].clusters) return false;
    if (clusterings_[j].assignment != other.clusterings_[j].assignment) return false;
  }
  return true;
}

void save_ensemble(const ClusteringEnsemble& ensemble, const std::filesystem::path& path) {
  io::BinaryWriter w(path);
  w.magic("LACL");
  w.scalar<std::uint32_t>(kEnsembleVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ensemble.points()));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ensemble.size()));
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ensemble[j].clusters));
    w.array(std::span<const std::uint32_t>(ensemble[j].assignment));
  }
  w.finish();
}

ClusteringEnsemble load_ensemble(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("LACL");
  r.require(12, "header");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kEnsembleVersion)
    throw FormatError("clustering file version " + std::to_string(version) + " is not supported");
  const auto n = r.scalar<std::uint32_t>();
  const auto h = r.scalar<std::uint32_t>();
  if (h < 1) throw FormatError("clustering file holds no clusterings");
  std::vector<Clustering> members;
  for (std::uint32_t j = 0; j < h; ++j) {
    r.require(4 + std::uint64_t{n} * 4, "clustering labels");
    const auto m = r.scalar<std::uint32_t>();
    std::vector<std::uint32_t> labels(n);
    r.array(std::span<std::uint32_t>(labels));
    try {
      members.push_back(Clustering::from_assignment(std::move(labels), m));
    } catch (const Error& e) {
      throw FormatError(std::string("invalid clustering payload: ") + e.what());
    }
  }
  r.expect_end();
  return ClusteringEnsemble(std::move(members), {});
}

}  // namespace laggre
