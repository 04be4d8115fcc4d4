#include "uniskel/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace uniskel {

bool StreamSet::has(StreamId id) const {
  switch (id) {
    case StreamId::J: return j;
    case StreamId::C: return c;
    case StreamId::S: return s;
  }
  return false;
}

StreamSet StreamSet::parse(const std::string& text) {
  StreamSet set{false, false, false};
  for (char ch : text) {
    switch (ch) {
      case 'J': case 'j': set.j = true; break;
      case 'C': case 'c': set.c = true; break;
      case 'S': case 's': set.s = true; break;
      default:
        throw std::invalid_argument("stream subset '" + text + "' contains unknown stream '" +
                                    std::string(1, ch) + "'");
    }
  }
  if (set.count() == 0) {
    throw std::invalid_argument("stream subset must name at least one of J, C, S");
  }
  return set;
}

std::string StreamSet::str() const {
  std::string out;
  if (j) out += 'J';
  if (c) out += 'C';
  if (s) out += 'S';
  return out;
}

Model make_model(const ModelConfig& cfg, SemanticTable table) {
  Model model;
  model.cfg = cfg;
  model.semantic = std::move(table);
  Rng rng(derive_seed(cfg.init_seed, 0x1417ULL));
  model.params.add("prompt.J", uniform_init({5, 3}, -0.1, 0.1, rng));
  model.params.add("prompt.C", uniform_init({10, 3}, -0.1, 0.1, rng));
  model.params.add("prompt.S", uniform_init({5, 3}, -0.1, 0.1, rng));
  init_lift_params(model.params, cfg.lift, rng);
  init_reducer_params(model.params, model.semantic.dim(), rng);
  init_encoder_params(model.params, cfg.encoder, rng);
  model.lift_bn = make_lift_bn_state();
  return model;
}

namespace {

Tensor rows_view(const Tensor& t, int rows, int joints, int dims) {
  Tensor out({rows, joints, dims});
  std::copy(t.data(), t.data() + t.size(), out.data());
  return out;
}

UnifiedSkeleton unify_j25_rows(Tape& tape, BoundParams& bound, const Tensor& j25_rows,
                               const BatchMeta& meta) {
  const UnifiedSlotMap& map = unified_slot_map();
  std::vector<int> slots(map.slot_of_j25.begin(), map.slot_of_j25.end());
  Var partial = tape.scatter_slots(tape.constant(j25_rows), std::move(slots), 30);
  std::array<bool, 30> occupied{};
  for (int s : map.slot_of_j25) occupied[static_cast<std::size_t>(s)] = true;
  return build_prompted_unified(tape, partial, occupied, bound["prompt.J"], StreamId::J,
                                meta.samples, meta.persons, meta.frames);
}

UnifiedSkeleton unify_c20_rows(Tape& tape, BoundParams& bound, Var lifted,
                               const BatchMeta& meta) {
  const UnifiedSlotMap& map = unified_slot_map();
  std::vector<int> slots(map.slot_of_c20.begin(), map.slot_of_c20.end());
  Var partial = tape.scatter_slots(lifted, std::move(slots), 30);
  std::array<bool, 30> occupied{};
  for (int s : map.slot_of_c20) occupied[static_cast<std::size_t>(s)] = true;
  return build_prompted_unified(tape, partial, occupied, bound["prompt.C"], StreamId::C,
                                meta.samples, meta.persons, meta.frames);
}

}  // namespace

ForwardResult model_forward(Tape& tape, Model& model, BoundParams& bound, const RawBatch& batch,
                            const ForwardOptions& options) {
  const BatchMeta& meta = batch.meta;
  const int rows = meta.rows();
  const StreamSet& streams = options.streams;
  if (streams.count() == 0) throw std::invalid_argument("model_forward: empty stream subset");
  if (batch.j25.rank() != 4 || batch.j25.dim(0) * batch.j25.dim(1) != rows) {
    throw std::invalid_argument("model_forward: 3D stream shape " + batch.j25.shape_str() +
                                " does not match batch meta");
  }

  ForwardResult out;
  out.meta = meta;

  // prompted unified skeletons
  const bool need_uj = streams.j || streams.c;  // C needs the regression target
  Tensor j25_rows;
  if (need_uj || streams.s) {
    j25_rows = rows_view(batch.j25, rows, 25, 3);
  }
  if (need_uj) {
    out.u_j = unify_j25_rows(tape, bound, j25_rows, meta);
  }
  if (streams.c) {
    if (batch.c20_2d.rank() != 4 || batch.c20_2d.dim(0) * batch.c20_2d.dim(1) != rows) {
      throw std::invalid_argument("model_forward: 2D stream shape " + batch.c20_2d.shape_str() +
                                  " does not match batch meta");
    }
    Var c2d = tape.constant(rows_view(batch.c20_2d, rows, 20, 2));
    Var lifted = lift_rows(tape, bound, model.cfg.lift, c2d, model.lift_bn, options.mode);
    out.u_c = unify_c20_rows(tape, bound, lifted, meta);
  }
  if (streams.s) {
    Var reduced = reduce_embeddings(tape, bound, model.semantic);
    Var sem = encode_motion(tape, batch.j25, reduced);
    out.u_s = prompt_semantic(tape, sem, bound["prompt.S"], meta.samples, meta.persons,
                              meta.frames);
  }

  // stream embeddings and early fusion
  std::vector<Var> embeddings;
  Var h_j, h_c, h_s;
  if (streams.j) {
    h_j = embed_stream(tape, bound, model.cfg.encoder, out.u_j.data, StreamId::J, meta);
    embeddings.push_back(h_j);
  }
  if (streams.c) {
    h_c = embed_stream(tape, bound, model.cfg.encoder, out.u_c.data, StreamId::C, meta);
    embeddings.push_back(h_c);
  }
  if (streams.s) {
    h_s = embed_stream(tape, bound, model.cfg.encoder, out.u_s.data, StreamId::S, meta);
    embeddings.push_back(h_s);
  }
  Var h_fused = early_fusion(tape, bound, embeddings);

  // one shared encoder for every input
  if (streams.j) out.j.y = encode(tape, bound, model.cfg.encoder, h_j, meta);
  if (streams.c) out.c.y = encode(tape, bound, model.cfg.encoder, h_c, meta);
  if (streams.s) out.s.y = encode(tape, bound, model.cfg.encoder, h_s, meta);
  out.y_fused = encode(tape, bound, model.cfg.encoder, h_fused, meta);

  // skeleton-specific projections of both the stream and the fused feature
  if (streams.j) {
    out.j.z = project(tape, bound, out.j.y, StreamId::J);
    out.j.z_fused = project(tape, bound, out.y_fused, StreamId::J);
  }
  if (streams.c) {
    out.c.z = project(tape, bound, out.c.y, StreamId::C);
    out.c.z_fused = project(tape, bound, out.y_fused, StreamId::C);
  }
  if (streams.s) {
    out.s.z = project(tape, bound, out.s.y, StreamId::S);
    out.s.z_fused = project(tape, bound, out.y_fused, StreamId::S);
  }

  if (!options.with_losses) return out;

  std::vector<std::pair<Var, Var>> pairs;
  std::vector<Var> projected;
  for (const StreamOutputs* so : {&out.j, &out.c, &out.s}) {
    if (!so->z.valid()) continue;
    pairs.emplace_back(so->z, so->z_fused);
    projected.push_back(so->z);
    projected.push_back(so->z_fused);
  }
  ConsistencyTerms con = consistency_loss(tape, pairs, options.loss);
  out.l_con = con.value;
  out.consistency_fused_terms = con.fused_terms;
  out.consistency_cross_terms = con.cross_terms;
  out.l_reg = vc_loss(tape, projected, options.loss);
  if (streams.c) {
    out.l_rec = rec_loss(tape, out.u_c, out.u_j);
  }
  out.loss = total_loss(tape, out.l_con, out.l_reg, out.l_rec, options.loss);
  return out;
}

}  // namespace uniskel
