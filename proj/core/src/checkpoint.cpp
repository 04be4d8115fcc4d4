#include "uniskel/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uniskel {

namespace {

constexpr char kMagic[4] = {'U', 'S', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint " + path + ": truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& in, const std::string& path) {
  const auto len = take<std::uint64_t>(in, path);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint " + path + ": truncated string");
  return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  put_string(out, name);
  put(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) put(out, static_cast<std::int32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size()) * static_cast<std::streamsize>(sizeof(double)));
}

std::pair<std::string, Tensor> take_tensor(std::istream& in, const std::string& path) {
  std::string name = take_string(in, path);
  const auto rank = take<std::uint32_t>(in, path);
  std::vector<int> shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(take<std::int32_t>(in, path));
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size()) * static_cast<std::streamsize>(sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint " + path + ": truncated tensor " + name);
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& config_text,
                     const std::vector<LossHistoryRow>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put(out, kVersion);
  put_string(out, config_text);
  put_string(out, model.semantic.source);
  put(out, static_cast<std::uint64_t>(history.size()));
  for (const LossHistoryRow& row : history) {
    put(out, row.total);
    put(out, row.con);
    put(out, row.reg);
    put(out, row.rec);
  }
  const auto& names = model.params.names();
  put(out, static_cast<std::uint64_t>(names.size() + 3));
  for (const auto& name : names) put_tensor(out, name, model.params.get(name));
  put_tensor(out, "buffer.lift.bn.running_mean", model.lift_bn.running_mean);
  put_tensor(out, "buffer.lift.bn.running_var", model.lift_bn.running_var);
  put_tensor(out, "semantic.embeddings", model.semantic.embeddings);
  if (!out) throw std::runtime_error("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint " + path + ": bad magic");
  }
  const auto version = take<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint " + path + ": unsupported version " +
                             std::to_string(version));
  }
  LoadedCheckpoint loaded;
  loaded.config_text = take_string(in, path);
  loaded.config = RunConfig::parse_text(loaded.config_text);
  const std::string semantic_source = take_string(in, path);
  const auto rows = take<std::uint64_t>(in, path);
  loaded.history.resize(rows);
  for (auto& row : loaded.history) {
    row.total = take<double>(in, path);
    row.con = take<double>(in, path);
    row.reg = take<double>(in, path);
    row.rec = take<double>(in, path);
  }
  const auto count = take<std::uint64_t>(in, path);
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) tensors.push_back(take_tensor(in, path));

  SemanticTable table;
  table.source = semantic_source;
  bool have_embeddings = false;
  for (auto& [name, tensor] : tensors) {
    if (name == "semantic.embeddings") {
      table.embeddings = tensor;
      have_embeddings = true;
    }
  }
  if (!have_embeddings) {
    throw std::runtime_error("checkpoint " + path + ": missing semantic embeddings");
  }
  loaded.model = make_model(loaded.config.model_config(), std::move(table));
  for (auto& [name, tensor] : tensors) {
    if (name == "semantic.embeddings") continue;
    if (name == "buffer.lift.bn.running_mean") {
      loaded.model.lift_bn.running_mean = std::move(tensor);
    } else if (name == "buffer.lift.bn.running_var") {
      loaded.model.lift_bn.running_var = std::move(tensor);
    } else {
      Tensor& dst = loaded.model.params.get(name);
      if (dst.shape() != tensor.shape()) {
        throw std::runtime_error("checkpoint " + path + ": tensor " + name + " has shape " +
                                 tensor.shape_str() + ", expected " + dst.shape_str());
      }
      const bool track = dst.requires_grad;
      dst = std::move(tensor);
      dst.requires_grad = track;
    }
  }
  return loaded;
}

}  // namespace uniskel
