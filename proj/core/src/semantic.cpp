#include "uniskel/semantic.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace uniskel {

const std::array<std::string, kNumDirections>& direction_words() {
  static const std::array<std::string, kNumDirections> words = {
      "right", "left", "up", "down", "front", "back", "unmove"};
  return words;
}

SemanticTable load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("embedding file " + path + ": " + e.what());
  }
  if (!doc.contains("dim") || !doc.contains("words") || !doc.contains("vectors")) {
    throw std::runtime_error("embedding file " + path +
                             ": expected keys dim, words, vectors");
  }
  const int dim = doc["dim"].get<int>();
  if (dim < 1) throw std::runtime_error("embedding file " + path + ": dim must be >= 1");
  const auto words = doc["words"].get<std::vector<std::string>>();
  const auto& canonical = direction_words();
  if (words.size() != canonical.size() ||
      !std::equal(words.begin(), words.end(), canonical.begin())) {
    throw std::runtime_error("embedding file " + path +
                             ": vocabulary must be the 7 canonical direction words in order");
  }
  const auto vectors = doc["vectors"].get<std::vector<std::vector<double>>>();
  if (vectors.size() != canonical.size()) {
    throw std::runtime_error("embedding file " + path + ": vocabulary error, expected 7 rows, got " +
                             std::to_string(vectors.size()));
  }
  SemanticTable table;
  table.embeddings = Tensor({kNumDirections, dim});
  for (int w = 0; w < kNumDirections; ++w) {
    if (static_cast<int>(vectors[static_cast<std::size_t>(w)].size()) != dim) {
      throw std::runtime_error("embedding file " + path + ": row " + std::to_string(w) +
                               " has wrong length");
    }
    for (int c = 0; c < dim; ++c) {
      const double v = vectors[static_cast<std::size_t>(w)][static_cast<std::size_t>(c)];
      if (!std::isfinite(v)) {
        throw std::runtime_error("embedding file " + path + ": non-finite value at row " +
                                 std::to_string(w) + ", column " + std::to_string(c));
      }
      table.embeddings[static_cast<std::int64_t>(w) * dim + c] = v;
    }
  }
  table.source = "file:" + path;
  return table;
}

SemanticTable fallback_embeddings(std::uint64_t seed, int dim) {
  if (dim < 1) throw std::invalid_argument("fallback embedding dim must be >= 1");
  Rng rng(derive_seed(seed, 0x53454dULL));
  SemanticTable table;
  table.embeddings = Tensor({kNumDirections, dim});
  for (int w = 0; w < kNumDirections; ++w) {
    double norm2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double v = rng.normal();
      table.embeddings[static_cast<std::int64_t>(w) * dim + c] = v;
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int c = 0; c < dim; ++c) table.embeddings[static_cast<std::int64_t>(w) * dim + c] *= inv;
  }
  table.source = "fallback:" + std::to_string(seed);
  return table;
}

void init_reducer_params(ParamStore& params, int dim, Rng& rng) {
  params.add("reducer.w", xavier_init({dim, 1}, rng));
  params.add("reducer.b", Tensor({1}));
}

Var reduce_embeddings(Tape& tape, BoundParams& bound, const SemanticTable& table) {
  Var w = bound["reducer.w"];
  const Tensor& rw = tape.value(w);
  if (rw.dim(0) != table.dim()) {
    throw std::invalid_argument("reducer width " + rw.shape_str() +
                                " does not match embedding dim " + std::to_string(table.dim()));
  }
  Var e = tape.constant(table.embeddings);
  Var reduced = tape.linear(e, w, bound["reducer.b"]);  // [7,1]
  return tape.reshape(reduced, {kNumDirections});
}

std::vector<int> motion_word_indices(const Tensor& data) {
  if (data.rank() != 4 || data.dim(3) != 3) {
    throw std::invalid_argument("motion_word_indices wants [cells,frames,joints,3], got " +
                                data.shape_str());
  }
  const int cells = data.dim(0), frames = data.dim(1), joints = data.dim(2);
  if (frames < 2) {
    throw std::invalid_argument("motion encoding needs at least 2 frames, got " +
                                std::to_string(frames));
  }
  // per-axis word pairs: positive difference first
  static constexpr int kPos[3] = {static_cast<int>(Direction::right),
                                  static_cast<int>(Direction::up),
                                  static_cast<int>(Direction::front)};
  static constexpr int kNeg[3] = {static_cast<int>(Direction::left),
                                  static_cast<int>(Direction::down),
                                  static_cast<int>(Direction::back)};
  constexpr int kUnmove = static_cast<int>(Direction::unmove);
  auto quantize = [](double v) { return std::llround(v * 1e6); };  // 1e-6 grid

  std::vector<int> out(static_cast<std::size_t>(data.size()));
  std::size_t w = 0;
  for (int cell = 0; cell < cells; ++cell) {
    for (int f = 0; f < frames; ++f) {
      const double* cur =
          data.data() + ((static_cast<std::int64_t>(cell) * frames + f) * joints) * 3;
      const double* prev =
          f == 0 ? nullptr
                 : data.data() + ((static_cast<std::int64_t>(cell) * frames + f - 1) * joints) * 3;
      for (int j = 0; j < joints; ++j) {
        for (int axis = 0; axis < 3; ++axis) {
          int word = kUnmove;
          if (prev != nullptr) {
            const long long dq = quantize(cur[j * 3 + axis]) - quantize(prev[j * 3 + axis]);
            if (dq > 0) word = kPos[axis];
            else if (dq < 0) word = kNeg[axis];
          }
          out[w++] = word;
        }
      }
    }
  }
  return out;
}

Var encode_motion(Tape& tape, const Tensor& data, Var reduced) {
  std::vector<int> indices = motion_word_indices(data);
  const int rows = data.dim(0) * data.dim(1);
  return tape.lookup(reduced, std::move(indices), {rows, data.dim(2), 3});
}

UnifiedSkeleton prompt_semantic(Tape& tape, Var sem_rows, Var prompt_s, int samples, int persons,
                                int frames) {
  const Tensor& tv = tape.value(sem_rows);
  if (tv.rank() != 3 || tv.dim(1) != 25 || tv.dim(2) != 3) {
    throw std::invalid_argument("prompt_semantic wants [rows,25,3] built over the 25-joint "
                                "skeleton, got " + tv.shape_str());
  }
  const UnifiedSlotMap& map = unified_slot_map();
  std::vector<int> slots(map.slot_of_j25.begin(), map.slot_of_j25.end());
  Var partial = tape.scatter_slots(sem_rows, std::move(slots), 30);
  std::array<bool, 30> occupied{};
  for (int s : map.slot_of_j25) occupied[static_cast<std::size_t>(s)] = true;
  return build_prompted_unified(tape, partial, occupied, prompt_s, StreamId::S, samples, persons,
                                frames);
}

}  // namespace uniskel
