#ifndef PGMSC_LATENT_HPP_
#define PGMSC_LATENT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace pgmsc {

// Layout of a latent code: F feature blocks, block f has block_dims[f] reals.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<int> block_dims);

  // F copies of the same block width.
  static FeatureSchema uniform(int num_features, int block_dim);

  int num_features() const { return static_cast<int>(dims_.size()); }
  int block_dim(int f) const { return dims_.at(f); }
  int offset(int f) const { return offsets_.at(f); }
  int total_dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  const std::vector<int>& block_dims() const { return dims_; }

  // Sum of block widths over a subset of features.
  int dims_of(std::span<const int> features) const;

  // FNV-1a over (F, d_0 .. d_{F-1}) as little-endian u32.
  std::uint64_t hash() const;

  bool operator==(const FeatureSchema& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;  // F + 1 prefix sums
};

// One latent code stored as a flat row-major concatenation of its blocks.
class LatentVector {
 public:
  LatentVector() = default;
  // Throws schema_mismatch on length mismatch and parse on non-finite entries.
  LatentVector(const FeatureSchema& schema, std::vector<double> values);

  static LatentVector from_blocks(const FeatureSchema& schema,
                                  const std::vector<std::vector<double>>& blocks);

  std::span<const double> values() const { return values_; }
  std::span<const double> block(const FeatureSchema& schema, int f) const;
  std::size_t size() const { return values_.size(); }

  bool operator==(const LatentVector& other) const = default;

 private:
  std::vector<double> values_;
};

// Discrete state per feature, state f in [0, K_f).
struct QuantizedLatent {
  std::vector<int> states;

  int size() const { return static_cast<int>(states.size()); }
  int operator[](int f) const { return states[f]; }
  bool operator==(const QuantizedLatent& other) const = default;
};

// Throws out_of_range-style invalid_argument if any state is outside its
// cardinality or the length differs.
void validate_states(const QuantizedLatent& q, std::span<const int> cardinalities);

class Dataset {
 public:
  Dataset(FeatureSchema schema, std::vector<LatentVector> rows);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<LatentVector>& rows() const { return rows_; }
  const LatentVector& row(std::size_t i) const { return rows_.at(i); }
  std::size_t size() const { return rows_.size(); }

 private:
  FeatureSchema schema_;
  std::vector<LatentVector> rows_;
};

// CSV with header f{i}_{j}; one latent vector per line.
Dataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Reads the header alone and infers block widths from the f{i}_{j} names.
FeatureSchema infer_schema(const std::filesystem::path& path);

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed);

}  // namespace pgmsc

#endif  // PGMSC_LATENT_HPP_
