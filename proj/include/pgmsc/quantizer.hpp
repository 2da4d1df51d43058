#ifndef PGMSC_QUANTIZER_HPP_
#define PGMSC_QUANTIZER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "pgmsc/latent.hpp"

namespace pgmsc {

// Per-feature cluster centers. Feature f owns K_f centers of width d_f,
// stored row-major.
class Codebook {
 public:
  struct Feature {
    int dim = 0;
    std::vector<double> centers;  // K * dim
    double inertia = 0.0;

    int size() const { return dim == 0 ? 0 : static_cast<int>(centers.size()) / dim; }
    std::span<const double> center(int k) const {
      return std::span<const double>(centers).subspan(static_cast<std::size_t>(k) * dim, dim);
    }
  };

  Codebook() = default;
  // Checks K_f >= 2, widths against the schema and pairwise-distinct centers.
  Codebook(FeatureSchema schema, std::vector<Feature> features);

  const FeatureSchema& schema() const { return schema_; }
  int num_features() const { return static_cast<int>(features_.size()); }
  const Feature& feature(int f) const { return features_.at(f); }
  int cardinality(int f) const { return features_.at(f).size(); }
  std::vector<int> cardinalities() const;
  std::span<const double> center(int f, int k) const { return features_.at(f).center(k); }

  bool operator==(const Codebook& other) const;

 private:
  FeatureSchema schema_;
  std::vector<Feature> features_;
};

// Optional per-feature, per-epoch record of full-data inertia.
using InertiaHistory = std::vector<std::vector<double>>;

// Mini-batch k-means per feature block with k-means++ seeding. Each feature
// uses its own RNG stream derived from `seed`. An epoch whose result raises
// full-data inertia is rolled back, so the recorded inertia never increases.
Codebook fit_minibatch_kmeans(const Dataset& ds, std::span<const int> k_per_feature,
                              int batch_size, int epochs, std::uint64_t seed,
                              InertiaHistory* history = nullptr);

// Nearest center per block; ties go to the lowest center index.
QuantizedLatent quantize(const LatentVector& v, const Codebook& cb);
std::vector<QuantizedLatent> quantize_all(const Dataset& ds, const Codebook& cb);

LatentVector dequantize(const QuantizedLatent& q, const Codebook& cb);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace pgmsc

#endif  // PGMSC_QUANTIZER_HPP_
