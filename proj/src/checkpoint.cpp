#include "patcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "patcnn/config.hpp"

namespace patcnn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'A', 'T', 'C', 'N', 'N', 'C', 'K'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(path + ": truncated checkpoint");
  return v;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  KeyValueDoc doc = ckpt.meta.train_config;
  write_section(doc, ckpt.model);
  const auto& m = ckpt.meta;
  doc.set_u64("meta.epochs_run", m.epochs_run);
  doc.set_u64("meta.seed", m.seed);
  doc.set_doubles("meta.train_losses", m.train_losses);
  doc.set_doubles("meta.val_losses", m.val_losses);
  doc.set_u64("meta.best_epoch", m.best_epoch);
  doc.set_double("meta.best_val_loss", m.best_val_loss);
  doc.set_bool("meta.validated_on_training", m.validated_on_training);
  doc.set("meta.train_ids", join(m.train_ids));
  doc.set("meta.val_ids", join(m.val_ids));
  const std::string text = doc.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.weights.size()));
  for (const auto& t : ckpt.weights) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint64_t>(out, t.values.size());
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + p);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(p + ": not a checkpoint file");
  const auto version = take<std::uint32_t>(in, p);
  if (version != kCheckpointVersion)
    throw FormatError(p + ": unsupported checkpoint version " + std::to_string(version));
  const auto text_len = take<std::uint64_t>(in, p);
  if (text_len > (1u << 26)) throw FormatError(p + ": corrupt header");
  std::string text(text_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(text_len))) throw FormatError(p + ": truncated checkpoint");

  Checkpoint ckpt;
  const KeyValueDoc doc = KeyValueDoc::parse(text, p);
  try {
    read_section(doc, ckpt.model);
  } catch (const DomainError& e) {
    throw FormatError(p + ": " + e.what());
  }
  auto& m = ckpt.meta;
  m.epochs_run = doc.get_u64("meta.epochs_run", 0);
  m.seed = doc.get_u64("meta.seed", 0);
  m.train_losses = doc.get_doubles("meta.train_losses", {});
  m.val_losses = doc.get_doubles("meta.val_losses", {});
  m.best_epoch = doc.get_u64("meta.best_epoch", 0);
  m.best_val_loss = doc.get_double("meta.best_val_loss", 0);
  m.validated_on_training = doc.get_bool("meta.validated_on_training", false);
  m.train_ids = split_list(doc.get_string("meta.train_ids", ""));
  m.val_ids = split_list(doc.get_string("meta.val_ids", ""));
  for (const auto& [k, v] : doc.entries())
    if (k.rfind("model.", 0) != 0 && k.rfind("meta.", 0) != 0) m.train_config.set(k, v);

  const auto count = take<std::uint32_t>(in, p);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = take<std::uint32_t>(in, p);
    if (name_len > 4096) throw FormatError(p + ": corrupt tensor name");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw FormatError(p + ": truncated checkpoint");
    const auto n = take<std::uint64_t>(in, p);
    if (n > (1ull << 32)) throw FormatError(p + ": corrupt tensor size");
    t.values.resize(n);
    if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * sizeof(float))))
      throw FormatError(p + ": truncated checkpoint");
    ckpt.weights.push_back(std::move(t));
  }
  return ckpt;
}

std::vector<NamedTensor> export_weights(ResUNet<float>& model) {
  std::vector<NamedTensor> out;
  model.visit_params([&](nn::Param<float>& p) { out.push_back({p.name, p.value}); });
  model.visit_buffers([&](nn::Buffer<float>& b) { out.push_back({b.name, b.value}); });
  return out;
}

void import_weights(ResUNet<float>& model, const std::vector<NamedTensor>& weights) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : weights)
    if (!by_name.emplace(t.name, &t).second) throw FormatError("checkpoint: duplicate tensor " + t.name);
  std::size_t matched = 0;
  auto assign = [&](const std::string& name, std::vector<float>& dst) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor " + name);
    if (it->second->values.size() != dst.size())
      throw FormatError("checkpoint: tensor " + name + " has " + std::to_string(it->second->values.size()) +
                        " values, model expects " + std::to_string(dst.size()));
    dst = it->second->values;
    ++matched;
  };
  model.visit_params([&](nn::Param<float>& p) { assign(p.name, p.value); });
  model.visit_buffers([&](nn::Buffer<float>& b) { assign(b.name, b.value); });
  if (matched != weights.size()) throw FormatError("checkpoint: holds tensors the model does not define");
}

ResUNet<float> build_model(const Checkpoint& ckpt) {
  ResUNet<float> model(ckpt.model);
  import_weights(model, ckpt.weights);
  return model;
}

}  // namespace patcnn
