#include "uniskel/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uniskel {

static_assert(std::endian::native == std::endian::little,
              "HSKL readers/writers assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'S', 'K', 'L'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t topology_code(TopologyId id) {
  switch (id) {
    case TopologyId::J25: return 0;
    case TopologyId::C17: return 1;
    case TopologyId::C20: return 2;
    case TopologyId::U30: return 3;
  }
  throw std::logic_error("unknown topology id");
}

TopologyId topology_from_code(std::uint32_t code) {
  switch (code) {
    case 0: return TopologyId::J25;
    case 1: return TopologyId::C17;
    case 2: return TopologyId::C20;
    case 3: return TopologyId::U30;
  }
  throw std::runtime_error("HSKL: unknown topology code " + std::to_string(code));
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("HSKL " + path + ": truncated while reading " + what);
  return v;
}

}  // namespace

SkeletonSequence PairedDataset::sequence_j25(int index) const {
  SkeletonSequence s;
  s.topology = TopologyId::J25;
  s.persons = persons;
  s.frames = frames;
  s.label = labels[static_cast<std::size_t>(index)];
  s.data = Tensor({persons, frames, 25, 3});
  const std::int64_t per = s.data.size();
  std::memcpy(s.data.data(), j25.data() + static_cast<std::int64_t>(index) * per,
              static_cast<std::size_t>(per) * sizeof(double));
  return s;
}

SkeletonSequence PairedDataset::sequence_c17(int index) const {
  SkeletonSequence s;
  s.topology = TopologyId::C17;
  s.persons = persons;
  s.frames = frames;
  s.label = labels[static_cast<std::size_t>(index)];
  s.data = Tensor({persons, frames, 17, 2});
  const std::int64_t per = s.data.size();
  std::memcpy(s.data.data(), c17.data() + static_cast<std::int64_t>(index) * per,
              static_cast<std::size_t>(per) * sizeof(double));
  return s;
}

void PairedDataset::validate() const {
  if (samples <= 0 || static_cast<int>(labels.size()) != samples) {
    throw std::invalid_argument("paired dataset: label table does not match sample count");
  }
  const std::vector<int> j_shape = {samples, persons, frames, 25, 3};
  const std::vector<int> c_shape = {samples, persons, frames, 17, 2};
  if (j25.shape() != j_shape || c17.shape() != c_shape) {
    throw std::invalid_argument("paired dataset: stream shapes disagree, " + j25.shape_str() +
                                " vs " + c17.shape_str());
  }
}

void write_hskl(const std::string& path, TopologyId topology, const Tensor& data,
                const std::vector<int>& labels) {
  if (data.rank() != 5) {
    throw std::invalid_argument("write_hskl wants [samples,persons,frames,joints,dims], got " +
                                data.shape_str());
  }
  const int samples = data.dim(0);
  if (static_cast<int>(labels.size()) != samples) {
    throw std::invalid_argument("write_hskl: label table size does not match sample count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_raw(out, kVersion);
  write_raw(out, topology_code(topology));
  for (int a = 0; a < 5; ++a) write_raw(out, static_cast<std::uint32_t>(data.dim(a)));
  for (int label : labels) write_raw(out, static_cast<std::int32_t>(label));
  for (std::int64_t i = 0; i < data.size(); ++i) {
    write_raw(out, static_cast<float>(data[i]));
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

HsklFile read_hskl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("HSKL " + path + ": bad magic, not an HSKL file");
  }
  const auto version = read_raw<std::uint32_t>(in, path, "version");
  if (version != kVersion) {
    throw std::runtime_error("HSKL " + path + ": unsupported version " + std::to_string(version));
  }
  HsklFile file;
  file.topology = topology_from_code(read_raw<std::uint32_t>(in, path, "topology"));
  std::uint32_t ext[5];
  for (auto& e : ext) e = read_raw<std::uint32_t>(in, path, "extent");
  const Topology& topo = topology(file.topology);
  if (static_cast<int>(ext[3]) != topo.joints()) {
    throw std::runtime_error("HSKL " + path + ": header says " + std::to_string(ext[3]) +
                             " joints but topology " + topology_name(file.topology) + " has " +
                             std::to_string(topo.joints()));
  }
  if (ext[4] != 2 && ext[4] != 3) {
    throw std::runtime_error("HSKL " + path + ": dims must be 2 or 3");
  }
  std::int64_t total = 1;
  for (auto e : ext) {
    if (e == 0) throw std::runtime_error("HSKL " + path + ": zero extent in header");
    total *= e;
  }
  file.labels.resize(ext[0]);
  for (auto& label : file.labels) label = read_raw<std::int32_t>(in, path, "label");

  const std::streampos payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::int64_t actual = static_cast<std::int64_t>(in.tellg() - payload_start);
  const std::int64_t expected = total * static_cast<std::int64_t>(sizeof(float));
  if (actual != expected) {
    throw std::runtime_error("HSKL " + path + ": payload is " + std::to_string(actual) +
                             " bytes, expected " + std::to_string(expected));
  }
  in.seekg(payload_start);
  file.data = Tensor({static_cast<int>(ext[0]), static_cast<int>(ext[1]),
                      static_cast<int>(ext[2]), static_cast<int>(ext[3]),
                      static_cast<int>(ext[4])});
  std::vector<float> buf(static_cast<std::size_t>(total));
  in.read(reinterpret_cast<char*>(buf.data()), expected);
  if (!in) throw std::runtime_error("HSKL " + path + ": truncated payload");
  for (std::int64_t i = 0; i < total; ++i) file.data[i] = buf[static_cast<std::size_t>(i)];
  return file;
}

PairedDataset load_paired(const std::string& path_3d, const std::string& path_2d) {
  HsklFile f3 = read_hskl(path_3d);
  HsklFile f2 = read_hskl(path_2d);
  if (f3.topology != TopologyId::J25 || f2.topology != TopologyId::C17) {
    throw std::runtime_error("load_paired wants a J25 file and a C17 file");
  }
  PairedDataset d;
  d.samples = f3.data.dim(0);
  d.persons = f3.data.dim(1);
  d.frames = f3.data.dim(2);
  d.j25 = std::move(f3.data);
  d.c17 = std::move(f2.data);
  d.labels = std::move(f3.labels);
  if (f2.labels != d.labels) {
    throw std::runtime_error("load_paired: label tables of the two streams disagree");
  }
  d.validate();
  return d;
}

}  // namespace uniskel
