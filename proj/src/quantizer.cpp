#include "pgmsc/quantizer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "pgmsc/error.hpp"
#include "pgmsc/random.hpp"

namespace pgmsc {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

bool has_duplicate_centers(const Codebook::Feature& feat) {
  const int k = feat.size();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if (std::ranges::equal(feat.center(a), feat.center(b))) return true;
  return false;
}

int nearest(std::span<const double> point, const std::vector<double>& centers, int dim,
            double* dist_out = nullptr) {
  const int k = static_cast<int>(centers.size()) / dim;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    const double d = squared_distance(
        point, std::span<const double>(centers).subspan(static_cast<std::size_t>(c) * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

// Block f of every row, row-major N x dim.
std::vector<double> gather_block(const Dataset& ds, int f) {
  const auto& schema = ds.schema();
  const int dim = schema.block_dim(f);
  std::vector<double> pts;
  pts.reserve(ds.size() * dim);
  for (const auto& row : ds.rows()) {
    auto b = row.block(schema, f);
    pts.insert(pts.end(), b.begin(), b.end());
  }
  return pts;
}

std::size_t count_distinct(const std::vector<double>& pts, int dim) {
  const std::size_t n = pts.size() / dim;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto row = [&](std::size_t i) {
    return std::span<const double>(pts).subspan(i * dim, dim);
  };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::ranges::lexicographical_compare(row(a), row(b));
  });
  std::size_t distinct = n == 0 ? 0 : 1;
  for (std::size_t i = 1; i < n; ++i)
    if (!std::ranges::equal(row(idx[i - 1]), row(idx[i]))) ++distinct;
  return distinct;
}

double full_inertia(const std::vector<double>& pts, int dim, const std::vector<double>& centers) {
  const std::size_t n = pts.size() / dim;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    nearest(std::span<const double>(pts).subspan(i * dim, dim), centers, dim, &d);
    total += d;
  }
  return total;
}

std::vector<double> kmeanspp_init(const std::vector<double>& pts, int dim, int k, Rng& rng) {
  const std::size_t n = pts.size() / dim;
  auto point = [&](std::size_t i) { return std::span<const double>(pts).subspan(i * dim, dim); };
  std::vector<double> centers;
  centers.reserve(static_cast<std::size_t>(k) * dim);
  const std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  centers.insert(centers.end(), point(first).begin(), point(first).end());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(point(i), point(first));
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    // pick == n only if every point coincides with a chosen center, which the
    // distinct-value precondition rules out.
    const auto chosen = point(pick);
    centers.insert(centers.end(), chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(point(i), chosen));
  }
  return centers;
}

}  // namespace

Codebook::Codebook(FeatureSchema schema, std::vector<Feature> features)
    : schema_(std::move(schema)), features_(std::move(features)) {
  if (static_cast<int>(features_.size()) != schema_.num_features()) {
    throw Error(Errc::schema_mismatch, "codebook feature count does not match schema");
  }
  for (int f = 0; f < num_features(); ++f) {
    const auto& feat = features_[f];
    if (feat.dim != schema_.block_dim(f) || feat.dim < 1 ||
        feat.centers.size() % static_cast<std::size_t>(feat.dim) != 0) {
      throw Error(Errc::schema_mismatch, "codebook feature " + std::to_string(f) +
                                             " has wrong center width");
    }
    if (feat.size() < 2) {
      throw Error(Errc::invalid_argument,
                  "codebook feature " + std::to_string(f) + " needs at least 2 centers");
    }
    if (has_duplicate_centers(feat)) {
      throw Error(Errc::invalid_argument,
                  "codebook feature " + std::to_string(f) + " has coincident centers");
    }
  }
}

std::vector<int> Codebook::cardinalities() const {
  std::vector<int> k(features_.size());
  for (std::size_t f = 0; f < features_.size(); ++f) k[f] = features_[f].size();
  return k;
}

bool Codebook::operator==(const Codebook& other) const {
  if (!(schema_ == other.schema_) || features_.size() != other.features_.size()) return false;
  for (std::size_t f = 0; f < features_.size(); ++f) {
    if (features_[f].centers != other.features_[f].centers ||
        features_[f].inertia != other.features_[f].inertia)
      return false;
  }
  return true;
}

Codebook fit_minibatch_kmeans(const Dataset& ds, std::span<const int> k_per_feature,
                              int batch_size, int epochs, std::uint64_t seed,
                              InertiaHistory* history) {
  const auto& schema = ds.schema();
  const int num_f = schema.num_features();
  if (static_cast<int>(k_per_feature.size()) != num_f) {
    throw Error(Errc::invalid_argument, "need one cluster count per feature");
  }
  if (batch_size < 1) throw Error(Errc::invalid_argument, "batch_size must be >= 1");
  if (epochs < 1) throw Error(Errc::invalid_argument, "epochs must be >= 1");
  if (history) history->assign(num_f, {});

  std::vector<Codebook::Feature> features(num_f);
  for (int f = 0; f < num_f; ++f) {
    const int dim = schema.block_dim(f);
    const int k = k_per_feature[f];
    const auto pts = gather_block(ds, f);
    const std::size_t n = ds.size();
    if (k < 2) throw Error(Errc::invalid_argument, "K must be >= 2 for every feature");
    if (count_distinct(pts, dim) < static_cast<std::size_t>(k)) {
      throw Error(Errc::infeasible_k, "feature " + std::to_string(f) + ": K=" +
                                          std::to_string(k) +
                                          " exceeds the number of distinct block values");
    }

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(f)));
    std::vector<double> centers = kmeanspp_init(pts, dim, k, rng);
    std::vector<std::uint64_t> counts(k, 0);
    double best = full_inertia(pts, dim, centers);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> assign(static_cast<std::size_t>(batch_size));

    for (int epoch = 0; epoch < epochs; ++epoch) {
      const auto saved_centers = centers;
      const auto saved_counts = counts;
      for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
        std::swap(order[i], order[j]);
      }
      for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        // Assign the whole batch against the pre-batch centers, then apply the
        // per-center 1/count updates in batch order.
        for (std::size_t b = start; b < end; ++b) {
          assign[b - start] = nearest(
              std::span<const double>(pts).subspan(order[b] * dim, dim), centers, dim);
        }
        for (std::size_t b = start; b < end; ++b) {
          const int c = assign[b - start];
          const double eta = 1.0 / static_cast<double>(++counts[c]);
          for (int j = 0; j < dim; ++j) {
            double& ctr = centers[static_cast<std::size_t>(c) * dim + j];
            ctr += eta * (pts[order[b] * dim + j] - ctr);
          }
        }
      }
      const double inertia = full_inertia(pts, dim, centers);
      Codebook::Feature trial{dim, centers, inertia};
      if (inertia <= best && !has_duplicate_centers(trial)) {
        best = inertia;
      } else {
        centers = saved_centers;
        counts = saved_counts;
      }
      if (history) (*history)[f].push_back(best);
    }
    features[f] = Codebook::Feature{dim, std::move(centers), best};
  }
  return Codebook(schema, std::move(features));
}

QuantizedLatent quantize(const LatentVector& v, const Codebook& cb) {
  const auto& schema = cb.schema();
  if (static_cast<int>(v.size()) != schema.total_dim()) {
    throw Error(Errc::schema_mismatch, "latent vector does not match codebook schema");
  }
  QuantizedLatent q;
  q.states.resize(schema.num_features());
  for (int f = 0; f < schema.num_features(); ++f) {
    q.states[f] = nearest(v.block(schema, f), cb.feature(f).centers, schema.block_dim(f));
  }
  return q;
}

std::vector<QuantizedLatent> quantize_all(const Dataset& ds, const Codebook& cb) {
  std::vector<QuantizedLatent> out;
  out.reserve(ds.size());
  for (const auto& row : ds.rows()) out.push_back(quantize(row, cb));
  return out;
}

LatentVector dequantize(const QuantizedLatent& q, const Codebook& cb) {
  validate_states(q, cb.cardinalities());
  const auto& schema = cb.schema();
  std::vector<double> flat;
  flat.reserve(schema.total_dim());
  for (int f = 0; f < schema.num_features(); ++f) {
    auto c = cb.center(f, q.states[f]);
    flat.insert(flat.end(), c.begin(), c.end());
  }
  return LatentVector(schema, std::move(flat));
}

}  // namespace pgmsc
