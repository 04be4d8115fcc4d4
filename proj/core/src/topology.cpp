#include "uniskel/topology.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace uniskel {

namespace {

Topology make_j25() {
  return Topology{TopologyId::J25,
                  {"base_of_spine", "middle_of_spine", "neck", "head", "l_shoulder", "l_elbow",
                   "l_wrist", "l_hand", "r_shoulder", "r_elbow", "r_wrist", "r_hand", "l_hip",
                   "l_knee", "l_ankle", "l_foot", "r_hip", "r_knee", "r_ankle", "r_foot", "spine",
                   "l_hand_tip", "l_thumb", "r_hand_tip", "r_thumb"},
                  3};
}

Topology make_c17() {
  return Topology{TopologyId::C17,
                  {"nose", "l_eye", "r_eye", "l_ear", "r_ear", "l_shoulder", "r_shoulder",
                   "l_elbow", "r_elbow", "l_wrist", "r_wrist", "l_hip", "r_hip", "l_knee",
                   "r_knee", "l_ankle", "r_ankle"},
                  2};
}

Topology make_c20() {
  Topology t = make_c17();
  t.id = TopologyId::C20;
  t.joint_names.insert(t.joint_names.end(), {"spine", "base_of_spine", "middle_of_spine"});
  return t;
}

Topology make_u30() {
  const UnifiedSlotMap& m = unified_slot_map();
  Topology t;
  t.id = TopologyId::U30;
  t.dims = 3;
  t.joint_names.assign(m.slot_names.begin(), m.slot_names.end());
  return t;
}

UnifiedSlotMap make_slot_map() {
  UnifiedSlotMap m;
  m.slot_names = {"nose",      "l_eye",      "r_eye",       "l_ear",        "r_ear",
                  "l_shoulder", "r_shoulder", "l_elbow",     "r_elbow",      "l_wrist",
                  "r_wrist",    "l_hip",      "r_hip",       "l_knee",       "r_knee",
                  "l_ankle",    "r_ankle",    "spine",       "middle_of_spine", "base_of_spine",
                  "head",       "neck",       "l_hand",      "r_hand",       "l_hand_tip",
                  "r_hand_tip", "l_thumb",    "r_thumb",     "l_foot",       "r_foot"};
  m.slot_of_j25 = {19, 18, 21, 20, 5, 7, 9, 22, 6, 8, 10, 23, 11, 13,
                   15, 28, 12, 14, 16, 29, 17, 24, 26, 25, 27};
  m.slot_of_c20 = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 19, 18};
  for (int i = 0; i < 15; ++i) m.common_slots[static_cast<std::size_t>(i)] = 5 + i;
  return m;
}

}  // namespace

const Topology& topology(TopologyId id) {
  static const Topology j25 = make_j25();
  static const Topology c17 = make_c17();
  static const Topology c20 = make_c20();
  static const Topology u30 = make_u30();
  switch (id) {
    case TopologyId::J25: return j25;
    case TopologyId::C17: return c17;
    case TopologyId::C20: return c20;
    case TopologyId::U30: return u30;
  }
  throw std::logic_error("unknown topology id");
}

std::string topology_name(TopologyId id) {
  switch (id) {
    case TopologyId::J25: return "J25";
    case TopologyId::C17: return "C17";
    case TopologyId::C20: return "C20";
    case TopologyId::U30: return "U30";
  }
  throw std::logic_error("unknown topology id");
}

TopologyId topology_from_name(const std::string& name) {
  if (name == "J25") return TopologyId::J25;
  if (name == "C17") return TopologyId::C17;
  if (name == "C20") return TopologyId::C20;
  if (name == "U30") return TopologyId::U30;
  throw std::invalid_argument("unknown topology name '" + name + "'");
}

const UnifiedSlotMap& unified_slot_map() {
  static const UnifiedSlotMap m = make_slot_map();
  return m;
}

std::string stream_name(StreamId s) {
  switch (s) {
    case StreamId::J: return "J";
    case StreamId::C: return "C";
    case StreamId::S: return "S";
  }
  throw std::logic_error("unknown stream");
}

void SkeletonSequence::validate() const {
  const Topology& topo = uniskel::topology(this->topology);
  if (persons != 1 && persons != 2) {
    throw std::invalid_argument("skeleton sequence supports 1 or 2 persons, got " +
                                std::to_string(persons));
  }
  if (frames < 2) {
    throw std::invalid_argument("skeleton sequence needs at least 2 frames, got " +
                                std::to_string(frames));
  }
  if (data.rank() != 4 || data.dim(0) != persons || data.dim(1) != frames ||
      data.dim(2) != topo.joints()) {
    throw std::invalid_argument("skeleton data shape " + data.shape_str() +
                                " inconsistent with topology " + topology_name(this->topology));
  }
  if (!data.all_finite()) {
    throw std::invalid_argument("skeleton data contains non-finite values");
  }
}

SkeletonSequence interpolate_spine(const SkeletonSequence& s) {
  if (s.topology != TopologyId::C17) {
    throw std::invalid_argument("interpolate_spine wants topology C17, got " +
                                topology_name(s.topology));
  }
  const int m = s.persons, t = s.frames, d = s.dims();
  SkeletonSequence out;
  out.topology = TopologyId::C20;
  out.persons = m;
  out.frames = t;
  out.label = s.label;
  out.data = Tensor({m, t, 20, d});
  for (int p = 0; p < m; ++p) {
    for (int f = 0; f < t; ++f) {
      const double* src = s.data.data() + (static_cast<std::int64_t>(p) * t + f) * 17 * d;
      double* dst = out.data.data() + (static_cast<std::int64_t>(p) * t + f) * 20 * d;
      std::copy(src, src + 17 * d, dst);
      for (int c = 0; c < d; ++c) {
        const double spine =
            0.5 * (src[c17::l_shoulder * d + c] + src[c17::r_shoulder * d + c]);
        const double base = 0.5 * (src[c17::l_hip * d + c] + src[c17::r_hip * d + c]);
        dst[c20::spine * d + c] = spine;
        dst[c20::base_of_spine * d + c] = base;
        dst[c20::middle_of_spine * d + c] = 0.5 * (spine + base);
      }
    }
  }
  return out;
}

PartialSlots to_unified_slots(const SkeletonSequence& s) {
  if (s.dims() != 3) {
    throw std::invalid_argument("to_unified_slots wants 3D joints; lift the " +
                                topology_name(s.topology) + " sequence first");
  }
  const UnifiedSlotMap& map = unified_slot_map();
  const int* slot_of = nullptr;
  int joints = 0;
  if (s.topology == TopologyId::J25) {
    slot_of = map.slot_of_j25.data();
    joints = 25;
  } else if (s.topology == TopologyId::C20) {
    slot_of = map.slot_of_c20.data();
    joints = 20;
  } else {
    throw std::invalid_argument("no unified slot mapping for topology " +
                                topology_name(s.topology));
  }
  PartialSlots out;
  out.persons = s.persons;
  out.frames = s.frames;
  out.data = Tensor({s.persons, s.frames, 30, 3});
  for (int j = 0; j < joints; ++j) out.occupied[static_cast<std::size_t>(slot_of[j])] = true;
  const std::int64_t cells = static_cast<std::int64_t>(s.persons) * s.frames;
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double* src = s.data.data() + cell * joints * 3;
    double* dst = out.data.data() + cell * 30 * 3;
    for (int j = 0; j < joints; ++j) {
      for (int c = 0; c < 3; ++c) dst[slot_of[j] * 3 + c] = src[j * 3 + c];
    }
  }
  return out;
}

Tensor read_back_slots(const Tensor& slots_data, TopologyId source) {
  if (slots_data.rank() < 2 || slots_data.dim(slots_data.rank() - 2) != 30 ||
      slots_data.dim(slots_data.rank() - 1) != 3) {
    throw std::invalid_argument("read_back_slots wants [...,30,3], got " + slots_data.shape_str());
  }
  const UnifiedSlotMap& map = unified_slot_map();
  const int* slot_of = nullptr;
  int joints = 0;
  if (source == TopologyId::J25) {
    slot_of = map.slot_of_j25.data();
    joints = 25;
  } else if (source == TopologyId::C20) {
    slot_of = map.slot_of_c20.data();
    joints = 20;
  } else {
    throw std::invalid_argument("no unified slot mapping for topology " + topology_name(source));
  }
  const std::int64_t cells = slots_data.size() / (30 * 3);
  std::vector<int> shape(slots_data.shape());
  shape[shape.size() - 2] = joints;
  Tensor out(shape);
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double* src = slots_data.data() + cell * 30 * 3;
    double* dst = out.data() + cell * joints * 3;
    for (int j = 0; j < joints; ++j) {
      for (int c = 0; c < 3; ++c) dst[j * 3 + c] = src[slot_of[j] * 3 + c];
    }
  }
  return out;
}

std::vector<int> prompt_slots(StreamId stream) {
  switch (stream) {
    case StreamId::J:
    case StreamId::S: return {0, 1, 2, 3, 4};
    case StreamId::C: return {20, 21, 22, 23, 24, 25, 26, 27, 28, 29};
  }
  throw std::logic_error("unknown stream");
}

UnifiedSkeleton build_prompted_unified(Tape& tape, Var partial,
                                       const std::array<bool, 30>& occupied, Var prompt,
                                       StreamId stream, int samples, int persons, int frames) {
  const std::vector<int> missing = prompt_slots(stream);
  for (int s = 0; s < 30; ++s) {
    const bool should_be_missing =
        std::find(missing.begin(), missing.end(), s) != missing.end();
    if (occupied[static_cast<std::size_t>(s)] == should_be_missing) {
      throw std::invalid_argument("occupancy does not match stream " + stream_name(stream) +
                                  " at slot " + std::to_string(s + 1));
    }
  }
  const Tensor& pv = tape.value(prompt);
  if (pv.rank() != 2 || pv.dim(0) != static_cast<int>(missing.size()) || pv.dim(1) != 3) {
    throw std::invalid_argument("prompt for stream " + stream_name(stream) + " must be [" +
                                std::to_string(missing.size()) + "x3], got " + pv.shape_str());
  }
  UnifiedSkeleton u;
  u.samples = samples;
  u.persons = persons;
  u.frames = frames;
  u.data = tape.fill_slots(partial, prompt, missing);
  for (int s = 0; s < 30; ++s) u.provenance[static_cast<std::size_t>(s)] = SlotProvenance::real;
  for (int s : missing) u.provenance[static_cast<std::size_t>(s)] = SlotProvenance::prompt;
  if (stream == StreamId::C) {
    // the three spine slots of the C branch were synthesized from shoulders/hips
    u.provenance[17] = SlotProvenance::interpolated;
    u.provenance[18] = SlotProvenance::interpolated;
    u.provenance[19] = SlotProvenance::interpolated;
  }
  return u;
}

UnifiedSkeleton build_prompted_unified(Tape& tape, const PartialSlots& partial, Var prompt,
                                       StreamId stream) {
  Tensor flat({partial.persons * partial.frames, 30, 3});
  std::copy(partial.data.data(), partial.data.data() + partial.data.size(), flat.data());
  Var base = tape.constant(std::move(flat));
  return build_prompted_unified(tape, base, partial.occupied, prompt, stream, 1, partial.persons,
                                partial.frames);
}

CommonJointPairs common_joint_pairs(const Tensor& ua, const Tensor& ub) {
  if (!ua.same_shape(ub)) {
    throw std::invalid_argument("common_joint_pairs: shape mismatch " + ua.shape_str() + " vs " +
                                ub.shape_str());
  }
  if (ua.rank() != 3 || ua.dim(1) != 30 || ua.dim(2) != 3) {
    throw std::invalid_argument("common_joint_pairs wants [rows,30,3], got " + ua.shape_str());
  }
  const UnifiedSlotMap& map = unified_slot_map();
  const int rows = ua.dim(0);
  CommonJointPairs out;
  out.a = Tensor({rows, 15, 3});
  out.b = Tensor({rows, 15, 3});
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < 15; ++i) {
      const int s = map.common_slots[static_cast<std::size_t>(i)];
      for (int c = 0; c < 3; ++c) {
        out.a[(static_cast<std::int64_t>(r) * 15 + i) * 3 + c] =
            ua[(static_cast<std::int64_t>(r) * 30 + s) * 3 + c];
        out.b[(static_cast<std::int64_t>(r) * 15 + i) * 3 + c] =
            ub[(static_cast<std::int64_t>(r) * 30 + s) * 3 + c];
      }
    }
  }
  return out;
}

void write_topology_reference(const std::string& path) {
  nlohmann::json doc;
  for (TopologyId id : {TopologyId::J25, TopologyId::C17, TopologyId::C20, TopologyId::U30}) {
    const Topology& t = topology(id);
    doc["topologies"][topology_name(id)] = {{"joints", t.joint_names}, {"dims", t.dims}};
  }
  const UnifiedSlotMap& m = unified_slot_map();
  // slot numbering is 1-based in the reference file, matching the band
  // convention facial 1-5 / common 6-20 / head-hand-foot 21-30
  auto one_based = [](const auto& arr) {
    std::vector<int> v;
    for (int s : arr) v.push_back(s + 1);
    return v;
  };
  doc["unified"]["slot_names"] = m.slot_names;
  doc["unified"]["slot_of_J25"] = one_based(m.slot_of_j25);
  doc["unified"]["slot_of_C20"] = one_based(m.slot_of_c20);
  doc["unified"]["common_slots"] = one_based(m.common_slots);
  doc["unified"]["bands"] = {{"facial", {1, 5}}, {"common", {6, 20}}, {"head_hand_foot", {21, 30}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology reference to " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace uniskel
