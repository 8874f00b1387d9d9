#include "amde/checkpoint.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "amde/error.hpp"

using ordered_json = nlohmann::ordered_json;

namespace amde {

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len, std::uint32_t seed) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int bit = 0; bit < 8; ++bit) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = ~seed;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return ~crc;
}

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes little-endian host");

void put_u16(std::string& out, std::uint16_t v) { out.append(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

struct Reader {
  const unsigned char* p;
  std::size_t remaining;

  void take(void* dst, std::size_t n) {
    if (n > remaining) throw Error(ErrorKind::Truncated, "checkpoint: file ends inside a field");
    std::memcpy(dst, p, n);
    p += n;
    remaining -= n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    take(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    std::uint16_t v;
    take(&v, 2);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, 4);
    return v;
  }
};

ordered_json meta_to_json(const Checkpoint& c) {
  ordered_json j;
  j["config"] = ordered_json::parse(config_to_json(c.config));
  j["epoch"] = c.epoch;
  j["rng_state"] = c.rng_state;
  if (std::isnan(c.final_loss))
    j["final_loss"] = nullptr;
  else
    j["final_loss"] = c.final_loss;
  j["clamp_events"] = c.clamp_events;
  return j;
}

}  // namespace

void checkpoint_save(const Checkpoint& ckpt, const std::string& path) {
  std::string buf;
  buf += "AMDE";
  put_u32(buf, ckpt.version);

  const std::string meta = meta_to_json(ckpt).dump();
  put_u32(buf, static_cast<std::uint32_t>(meta.size()));
  buf += meta;

  put_u32(buf, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf += name;
    buf += static_cast<char>(tensor.shape().size());
    for (int d : tensor.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    buf.append(reinterpret_cast<const char*>(tensor.data().data()), tensor.size() * sizeof(double));
  }

  put_u32(buf, crc32_ieee(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw Error(ErrorKind::Io, "short write on checkpoint '" + path + "'");
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 12) throw Error(ErrorKind::Truncated, "checkpoint: shorter than the fixed header");

  // Trailing CRC covers everything before it.
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  const std::uint32_t actual_crc =
      crc32_ieee(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4);
  if (stored_crc != actual_crc)
    throw Error(ErrorKind::Checksum, "checkpoint: CRC mismatch, file is corrupt");

  Reader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4};
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, "AMDE", 4) != 0)
    throw Error(ErrorKind::Format, "checkpoint: bad magic, not an AMDE file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::Version, "checkpoint: format version " + std::to_string(version) +
                                        ", expected " + std::to_string(kCheckpointVersion));

  const std::uint32_t meta_len = r.u32();
  std::string meta(meta_len, '\0');
  r.take(meta.data(), meta_len);

  Checkpoint out;
  out.version = version;
  ordered_json j;
  try {
    j = ordered_json::parse(meta);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, std::string("checkpoint: malformed metadata json: ") + e.what());
  }
  out.config = config_from_json(j.at("config").dump());
  out.epoch = j.at("epoch").get<int>();
  out.rng_state = j.at("rng_state").get<std::uint64_t>();
  out.final_loss = j.at("final_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                : j.at("final_loss").get<double>();
  out.clamp_events = j.at("clamp_events").get<long>();

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.take(name.data(), name_len);
    const std::uint8_t ndim = r.u8();
    Shape shape(ndim);
    for (std::uint8_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(r.u32());
    std::vector<double> payload(shape_numel(shape));
    r.take(payload.data(), payload.size() * sizeof(double));
    out.tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(payload)));
  }
  if (r.remaining != 0)
    throw Error(ErrorKind::Format, "checkpoint: trailing bytes after the declared payload");
  return out;
}

Checkpoint checkpoint_from_model(const EncoderModel& model, const TrainConfig& config) {
  Checkpoint c;
  c.config = config;
  for (const auto& [name, tensor] : model.parameters()) c.tensors.emplace_back(name, tensor.clone());
  return c;
}

EncoderModel model_from_checkpoint(const Checkpoint& ckpt) {
  EncoderModel model = EncoderModel::init(ckpt.config.encoder, ckpt.config.seed);
  auto params = model.parameters();
  if (params.size() != ckpt.tensors.size())
    throw Error(ErrorKind::Format, "checkpoint: tensor count does not match the configured model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [have_name, have] = params[i];
    const auto& [want_name, want] = ckpt.tensors[i];
    if (have_name != want_name || have.shape() != want.shape())
      throw Error(ErrorKind::Format, "checkpoint: tensor '" + want_name + "' does not match model layout");
    Tensor dst = have;
    std::copy(want.data().begin(), want.data().end(), dst.mutable_data().begin());
  }
  return model;
}

}  // namespace amde
