#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "htde/tensor.hpp"

namespace htde {

/// N configurations over d sites with values in [0, alphabet), plus
/// provenance. The on-disk CSV uses spin values -1/+1 when alphabet == 2 and
/// 1..n otherwise; see the README for the exact layout.
class SampleSet {
 public:
  SampleSet(Index d, Index alphabet, std::string model = "", double beta = 0.0,
            std::uint64_t seed = 0);

  Index dimension() const { return d_; }
  Index alphabet() const { return n_; }
  Index size() const { return count_; }
  const std::string& model() const { return model_; }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const std::uint8_t> config(Index i) const {
    return {data_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(d_),
            static_cast<std::size_t>(d_)};
  }

  void reserve(Index count);
  void append(std::span<const std::uint8_t> config);

  void write_csv(const std::filesystem::path& path) const;
  static SampleSet read_csv(const std::filesystem::path& path);

  friend SampleSet concat(const SampleSet& a, const SampleSet& b);

 private:
  Index d_;
  Index n_;
  Index count_ = 0;
  std::string model_;
  double beta_;
  std::uint64_t seed_;
  std::vector<std::uint8_t> data_;
};

SampleSet concat(const SampleSet& a, const SampleSet& b);

/// Histogram of a sample set as a dense tensor over the n^d configurations
/// (first site slowest), normalized to total mass 1.
Vector empirical_density(const SampleSet& samples, Index entry_cap = Index(1) << 26);

}  // namespace htde
