#include "amde/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "amde/error.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace amde {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Query: return "query";
    case Split::Gallery: return "gallery";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "query") return Split::Query;
  if (name == "gallery") return Split::Gallery;
  throw Error(ErrorKind::Format, "unknown split '" + name + "'");
}

std::vector<int> IdentityDataset::indices_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == s) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> IdentityDataset::train_ids() const {
  std::vector<bool> seen(static_cast<std::size_t>(num_ids), false);
  for (const auto& s : samples) {
    if (s.split == Split::Train) seen[static_cast<std::size_t>(s.label)] = true;
  }
  std::vector<int> ids;
  for (int i = 0; i < num_ids; ++i) {
    if (seen[static_cast<std::size_t>(i)]) ids.push_back(i);
  }
  return ids;
}

void IdentityDataset::validate() const {
  // Every id that appears in the query split must be retrievable.
  std::vector<bool> in_gallery(static_cast<std::size_t>(num_ids), false);
  for (const auto& s : samples) {
    if (s.split == Split::Gallery) in_gallery[static_cast<std::size_t>(s.label)] = true;
  }
  for (const auto& s : samples) {
    if (s.split == Split::Query && !in_gallery[static_cast<std::size_t>(s.label)])
      throw Error(ErrorKind::Protocol,
                  "dataset: id " + std::to_string(s.label) + " has queries but no gallery images");
  }
}

namespace {

// The brightness spread scales with the pixel noise so that zero noise means
// every image of an identity equals its prototype exactly.
constexpr double kBrightnessPerSigma = 3.0;
constexpr double kStripeAmplitude = 0.12;
constexpr int kBandRows = 8;

// Identity prototype: per-band base intensities plus a vertical stripe
// pattern, both drawn from the identity's own stream.
std::vector<double> make_prototype(int id, std::uint64_t seed, const Shape& shape) {
  const int ch = shape[0], h = shape[1], w = shape[2];
  Rng rng(derive_seed(seed, 0x70726f746fULL, static_cast<std::uint64_t>(id)));
  const int bands = std::max(1, h / kBandRows);
  std::vector<double> band_value(static_cast<std::size_t>(bands));
  for (double& v : band_value) v = rng.uniform(0.05, 0.95);
  const double freq = 1.0 + static_cast<double>(rng.below(4));
  const double phase = rng.uniform(0.0, 6.283185307179586);

  std::vector<double> proto(static_cast<std::size_t>(ch) * h * w);
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < h; ++y) {
      const int band = std::min(bands - 1, y / kBandRows);
      for (int x = 0; x < w; ++x) {
        const double stripe =
            kStripeAmplitude * std::sin(6.283185307179586 * freq * (x + 0.5) / w + phase);
        proto[(static_cast<std::size_t>(c) * h + y) * w + x] = band_value[static_cast<std::size_t>(band)] + stripe;
      }
    }
  }
  return proto;
}

}  // namespace

IdentityDataset generate_synthetic(int num_ids, int imgs_per_id, double noise_sigma,
                                   std::uint64_t seed, Shape image_shape) {
  if (num_ids < 2 || imgs_per_id < 2)
    throw Error(ErrorKind::Contract, "generate_synthetic: need at least 2 ids and 2 images per id");
  if (noise_sigma < 0.0) throw Error(ErrorKind::Contract, "generate_synthetic: negative noise");
  if (image_shape.size() != 3)
    throw Error(ErrorKind::Contract, "generate_synthetic: image shape must be [ch x h x w]");

  IdentityDataset ds;
  ds.num_ids = num_ids;
  ds.imgs_per_id = imgs_per_id;
  ds.noise_sigma = noise_sigma;
  ds.seed = seed;
  ds.image_shape = image_shape;
  ds.samples.reserve(static_cast<std::size_t>(num_ids) * imgs_per_id);

  const int n_train = imgs_per_id / 2;
  const int rest = imgs_per_id - n_train;
  const int n_query = rest / 2;

  for (int id = 0; id < num_ids; ++id) {
    const auto proto = make_prototype(id, seed, image_shape);
    for (int i = 0; i < imgs_per_id; ++i) {
      Rng rng(derive_seed(seed, 0x73616d706cULL, static_cast<std::uint64_t>(id),
                          static_cast<std::uint64_t>(i)));
      const double amp = kBrightnessPerSigma * noise_sigma;
      const double brightness = rng.uniform(-amp, amp);
      std::vector<double> img(proto.size());
      for (std::size_t p = 0; p < img.size(); ++p)
        img[p] = proto[p] + brightness + (noise_sigma > 0.0 ? rng.normal(0.0, noise_sigma) : 0.0);

      DatasetSample sample;
      sample.image = Tensor::from_data(image_shape, std::move(img));
      sample.label = id;
      sample.index = i;
      sample.split = i < n_train ? Split::Train : (i < n_train + n_query ? Split::Query : Split::Gallery);
      ds.samples.push_back(std::move(sample));
    }
  }
  ds.validate();
  return ds;
}

void PKSpec::validate() const {
  if (p < 2 || k < 2)
    throw Error(ErrorKind::Config, "pk sampling: need P >= 2 and K >= 2 so every anchor has a positive and a negative");
}

std::vector<int> pk_sample(const IdentityDataset& dataset, const PKSpec& spec, Rng& rng) {
  spec.validate();
  const auto ids = dataset.train_ids();
  if (static_cast<int>(ids.size()) < spec.p)
    throw Error(ErrorKind::Sampling, "pk_sample: dataset has " + std::to_string(ids.size()) +
                                         " train ids, batch needs " + std::to_string(spec.p));

  // Partial Fisher-Yates for P distinct ids.
  std::vector<int> pool = ids;
  std::vector<int> chosen;
  for (int i = 0; i < spec.p; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    chosen.push_back(pool[static_cast<std::size_t>(i)]);
  }

  // Per-id train image indices.
  std::vector<std::vector<int>> per_id(static_cast<std::size_t>(dataset.num_ids));
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    if (s.split == Split::Train) per_id[static_cast<std::size_t>(s.label)].push_back(static_cast<int>(i));
  }

  std::vector<int> batch;
  batch.reserve(static_cast<std::size_t>(spec.batch_size()));
  for (int id : chosen) {
    auto& avail = per_id[static_cast<std::size_t>(id)];
    if (static_cast<int>(avail.size()) >= spec.k) {
      for (int i = 0; i < spec.k; ++i) {
        const std::size_t j = static_cast<std::size_t>(i) + rng.below(avail.size() - static_cast<std::size_t>(i));
        std::swap(avail[static_cast<std::size_t>(i)], avail[j]);
        batch.push_back(avail[static_cast<std::size_t>(i)]);
      }
    } else {
      for (int i = 0; i < spec.k; ++i) batch.push_back(avail[rng.below(avail.size())]);
    }
  }

  // Shuffle the batch order.
  for (std::size_t i = batch.size(); i > 1; --i)
    std::swap(batch[i - 1], batch[rng.below(i)]);
  return batch;
}

void OcclusionSpec::validate() const {
  if (!(s >= 0.0 && s <= 1.0))
    throw Error(ErrorKind::Contract, "occlusion: s must lie in [0, 1], got " + std::to_string(s));
}

Tensor random_erase(const Tensor& image, const OcclusionSpec& spec, Rng& rng) {
  spec.validate();
  if (image.rank() != 3) throw Error(ErrorKind::Dimension, "random_erase: expected [ch x h x w]");
  Tensor out = image.clone();
  const int ch = image.dim(0), h = image.dim(1), w = image.dim(2);
  const long area = std::lround(spec.s * static_cast<double>(h) * static_cast<double>(w));
  if (area <= 0) return out;

  int rect_h, rect_w;
  if (area >= static_cast<long>(h) * w) {
    rect_h = h;
    rect_w = w;
  } else {
    // Heights that admit width = ceil(area / height) within the image.
    const int h_lo = static_cast<int>((area + w - 1) / w);
    const int h_hi = static_cast<int>(std::min<long>(h, area));
    rect_h = h_lo + rng.below_int(h_hi - h_lo + 1);
    rect_w = static_cast<int>((area + rect_h - 1) / rect_h);
  }
  const int y0 = rng.below_int(h - rect_h + 1);
  const int x0 = rng.below_int(w - rect_w + 1);

  double lo = image.at(0), hi = image.at(0);
  if (spec.fill == FillMode::UniformRandom) {
    for (double v : image.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  auto data = out.mutable_data();
  for (int c = 0; c < ch; ++c) {
    for (int y = y0; y < y0 + rect_h; ++y) {
      double* rowp = data.data() + (static_cast<std::size_t>(c) * h + y) * w;
      for (int x = x0; x < x0 + rect_w; ++x) {
        rowp[x] = spec.fill == FillMode::UniformRandom ? rng.uniform(lo, hi) : spec.fill_value;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Directory import/export

void export_dataset(const IdentityDataset& dataset, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "export_dataset: cannot create '" + dir + "': " + ec.message());

  ordered_json meta;
  meta["format"] = "amde-dataset-v1";
  meta["num_ids"] = dataset.num_ids;
  meta["imgs_per_id"] = dataset.imgs_per_id;
  meta["noise_sigma"] = dataset.noise_sigma;
  meta["seed"] = dataset.seed;
  meta["image_shape"] = dataset.image_shape;
  ordered_json samples = ordered_json::array();
  for (const auto& s : dataset.samples) {
    const std::string file = std::to_string(s.label) + "_" + std::to_string(s.index) + ".bin";
    ordered_json row;
    row["id"] = s.label;
    row["index"] = s.index;
    row["split"] = split_name(s.split);
    row["file"] = file;
    samples.push_back(row);

    std::ofstream bin(fs::path(dir) / file, std::ios::binary | std::ios::trunc);
    if (!bin) throw Error(ErrorKind::Io, "export_dataset: cannot write " + file);
    static_assert(std::endian::native == std::endian::little, "little-endian layout assumed");
    bin.write(reinterpret_cast<const char*>(s.image.data().data()),
              static_cast<std::streamsize>(s.image.size() * sizeof(double)));
  }
  meta["samples"] = std::move(samples);

  std::ofstream mf(fs::path(dir) / "meta.json", std::ios::trunc);
  if (!mf) throw Error(ErrorKind::Io, "export_dataset: cannot write meta.json");
  mf << meta.dump(2) << "\n";
}

IdentityDataset import_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw Error(ErrorKind::Io, "import_dataset: missing meta.json in '" + dir + "'");
  ordered_json meta;
  try {
    mf >> meta;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, std::string("import_dataset: malformed meta.json: ") + e.what());
  }
  if (meta.value("format", "") != "amde-dataset-v1")
    throw Error(ErrorKind::Format, "import_dataset: unrecognized dataset format");

  IdentityDataset ds;
  ds.num_ids = meta.at("num_ids").get<int>();
  ds.imgs_per_id = meta.at("imgs_per_id").get<int>();
  ds.noise_sigma = meta.at("noise_sigma").get<double>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.image_shape = meta.at("image_shape").get<Shape>();
  const std::size_t numel = shape_numel(ds.image_shape);

  for (const auto& row : meta.at("samples")) {
    DatasetSample s;
    s.label = row.at("id").get<int>();
    s.index = row.at("index").get<int>();
    s.split = split_from_name(row.at("split").get<std::string>());
    const std::string file = row.at("file").get<std::string>();

    std::ifstream bin(fs::path(dir) / file, std::ios::binary);
    if (!bin) throw Error(ErrorKind::Io, "import_dataset: missing sample file " + file);
    std::vector<double> img(numel);
    bin.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(numel * sizeof(double)));
    if (static_cast<std::size_t>(bin.gcount()) != numel * sizeof(double))
      throw Error(ErrorKind::Truncated, "import_dataset: short read on " + file);
    s.image = Tensor::from_data(ds.image_shape, std::move(img));
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace amde
