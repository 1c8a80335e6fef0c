#include "loadsynth/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "loadsynth/errors.hpp"

namespace loadsynth {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'P', 'D', 'C', 'K', 'P', 'T', '\0'};

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <class U>
U get_le(const std::string& in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

json dates_json(const std::vector<Date>& dates) {
  json a = json::array();
  for (const auto& d : dates) a.push_back(format_date(d));
  return a;
}

std::vector<Date> dates_from(const json& a) {
  std::vector<Date> out;
  for (const auto& s : a) out.push_back(parse_date(s.get<std::string>()));
  return out;
}

}  // namespace

diffusion::NoiseSchedule ModelCheckpoint::schedule() const {
  return diffusion::NoiseSchedule::linear(steps, beta_start, beta_end);
}

std::vector<TensorRecord> snapshot_parameters(const ad::ParameterSet& params) {
  std::vector<TensorRecord> out;
  for (const auto& p : params.items()) {
    TensorRecord r{p.name, p.var.shape(), {}};
    r.values.reserve(p.var.value().size());
    for (double v : p.var.value().data()) {
      if (!std::isfinite(v)) throw NumericalError("parameter '" + p.name + "' is not finite");
      r.values.push_back(static_cast<float>(v));
    }
    out.push_back(std::move(r));
  }
  return out;
}

nn::NoiseEstimator build_model(const ModelCheckpoint& ckpt) {
  nn::NoiseEstimator model(ckpt.config.estimator(), 0);
  const auto items = model.parameters().items();
  if (items.size() != ckpt.tensors.size()) {
    throw ValidationError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, architecture needs " +
                          std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const TensorRecord& r = ckpt.tensors[i];
    if (r.name != items[i].name || r.shape != items[i].var.shape()) {
      throw ValidationError("checkpoint tensor '" + r.name + "' does not match parameter '" + items[i].name + "'");
    }
    ad::Var v = items[i].var;
    auto dst = v.mutable_value().data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<double>(r.values[k]);
  }
  return model;
}

std::string serialize_checkpoint(const ModelCheckpoint& c) {
  json h;
  h["config"] = json::parse(config_to_json(c.config));
  h["schedule"] = {{"steps", c.steps}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
  h["stats"] = json::object();
  for (const auto& [id, s] : c.stats) h["stats"][id] = {{"mean", s.mean}, {"std", s.std}};
  h["typical_loads"] = json::object();
  for (const auto& [id, t] : c.typical_loads) h["typical_loads"][id] = t;
  h["partitions"] = json::object();
  for (const auto& [id, p] : c.partitions) {
    h["partitions"][id] = {
        {"train", dates_json(p.train)}, {"validation", dates_json(p.validation)}, {"test", dates_json(p.test)}};
  }
  h["tensors"] = json::array();
  std::size_t offset = 0;
  for (const auto& t : c.tensors) {
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    if (n != t.values.size()) throw ValidationError("tensor '" + t.name + "' shape does not match its values");
    h["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += n;
  }
  const std::string header = h.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, header.size());
  out += header;
  out.reserve(out.size() + 4 * offset);
  for (const auto& t : c.tensors)
    for (float f : t.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

ModelCheckpoint deserialize_checkpoint(const std::string& bytes) {
  constexpr std::size_t kPrefix = sizeof kMagic + 4 + 8;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError("not a loadsynth checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(bytes, 12);
  if (header_len > bytes.size() - kPrefix) throw ValidationError("checkpoint header is truncated");

  ModelCheckpoint c;
  try {
    const json h = json::parse(bytes.substr(kPrefix, header_len));
    c.config = config_from_json(h.at("config").dump());
    const json& s = h.at("schedule");
    c.steps = s.at("steps").get<int>();
    c.beta_start = s.at("beta_start").get<double>();
    c.beta_end = s.at("beta_end").get<double>();
    for (const auto& [id, st] : h.at("stats").items()) {
      c.stats[id] = {st.at("mean").get<double>(), st.at("std").get<double>()};
    }
    for (const auto& [id, t] : h.at("typical_loads").items()) c.typical_loads[id] = t.get<std::vector<double>>();
    for (const auto& [id, p] : h.at("partitions").items()) {
      c.partitions[id] = {dates_from(p.at("train")), dates_from(p.at("validation")), dates_from(p.at("test"))};
    }
    const std::size_t payload_at = kPrefix + header_len;
    const std::size_t n_floats = (bytes.size() - payload_at) / 4;
    if ((bytes.size() - payload_at) % 4 != 0) throw ValidationError("checkpoint payload is not a whole number of floats");
    std::size_t expected = 0;
    for (const auto& t : h.at("tensors")) {
      TensorRecord r{t.at("name").get<std::string>(), t.at("shape").get<Shape>(), {}};
      std::size_t n = 1;
      for (auto d : r.shape) n *= d;
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset != expected || offset + n > n_floats) throw ValidationError("checkpoint tensor table is inconsistent");
      r.values.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        r.values[k] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, payload_at + 4 * (offset + k)));
      }
      expected += n;
      c.tensors.push_back(std::move(r));
    }
    if (expected != n_floats) throw ValidationError("checkpoint payload has trailing data");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace loadsynth
