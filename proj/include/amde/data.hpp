#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amde/rng.hpp"
#include "amde/tensor.hpp"

namespace amde {

enum class Split { Train, Query, Gallery };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct DatasetSample {
  Tensor image;
  int label = 0;
  int index = 0;  // running index within the identity
  Split split = Split::Train;
};

// Labeled synthetic images. Identity is encoded in horizontal band structure
// (plus a per-identity stripe texture), so row-wise local features carry the
// signal; samples differ by pixel noise and a global brightness shift.
struct IdentityDataset {
  int num_ids = 0;
  int imgs_per_id = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  Shape image_shape;
  std::vector<DatasetSample> samples;

  std::vector<int> indices_of(Split s) const;
  std::vector<int> train_ids() const;
  void validate() const;
};

// Deterministic generation: same arguments produce a bit-identical dataset.
// Per identity the images split roughly 1/2 train, 1/4 query, 1/4 gallery.
IdentityDataset generate_synthetic(int num_ids, int imgs_per_id, double noise_sigma,
                                   std::uint64_t seed, Shape image_shape = {1, 64, 32});

struct PKSpec {
  int p = 8;  // identities per batch
  int k = 4;  // images per identity

  int batch_size() const { return p * k; }
  void validate() const;
};

// Draws P distinct train identities and K train images each (with replacement
// only when an identity has fewer than K train images), then shuffles the
// batch order. Returns indices into dataset.samples.
std::vector<int> pk_sample(const IdentityDataset& dataset, const PKSpec& spec, Rng& rng);

enum class FillMode { UniformRandom, Constant };

struct OcclusionSpec {
  double s = 0.0;  // fraction of image area to occlude
  FillMode fill = FillMode::UniformRandom;
  double fill_value = 1.0;  // used by FillMode::Constant
  std::uint64_t seed = 0;   // callers derive per-image streams from this

  void validate() const;
};

// Overwrites one rectangle of area round(s * H * W) (sides drawn uniformly
// among heights that fit, width = ceil(area / height)) with fill values.
// The input is untouched; the returned image differs only inside the
// rectangle. s = 0 is the identity transform.
Tensor random_erase(const Tensor& image, const OcclusionSpec& spec, Rng& rng);

// Directory layout: meta.json plus one raw little-endian f64 file per sample
// named <id>_<index>.bin.
void export_dataset(const IdentityDataset& dataset, const std::string& dir);
IdentityDataset import_dataset(const std::string& dir);

}  // namespace amde
