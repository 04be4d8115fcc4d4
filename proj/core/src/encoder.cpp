#include "uniskel/encoder.hpp"

#include <stdexcept>

namespace uniskel {

namespace {

void init_block(ParamStore& params, const std::string& prefix, int d, int ffn, Rng& rng) {
  params.add(prefix + ".ln1.gain", Tensor::full({d}, 1.0));
  params.add(prefix + ".ln1.bias", Tensor({d}));
  params.add(prefix + ".attn.wq", xavier_init({d, d}, rng));
  params.add(prefix + ".attn.bq", Tensor({d}));
  params.add(prefix + ".attn.wk", xavier_init({d, d}, rng));
  params.add(prefix + ".attn.bk", Tensor({d}));
  params.add(prefix + ".attn.wv", xavier_init({d, d}, rng));
  params.add(prefix + ".attn.bv", Tensor({d}));
  params.add(prefix + ".attn.wo", xavier_init({d, d}, rng));
  params.add(prefix + ".attn.bo", Tensor({d}));
  params.add(prefix + ".ln2.gain", Tensor::full({d}, 1.0));
  params.add(prefix + ".ln2.bias", Tensor({d}));
  params.add(prefix + ".ffn1.w", xavier_init({d, ffn}, rng));
  params.add(prefix + ".ffn1.b", Tensor({ffn}));
  params.add(prefix + ".ffn2.w", xavier_init({ffn, d}, rng));
  params.add(prefix + ".ffn2.b", Tensor({d}));
}

/// Pre-norm single-head block: x + attn(LN(x)), then x + ffn(LN(x)).
Var transformer_block(Tape& tape, BoundParams& bound, const std::string& prefix, Var x) {
  Var a = tape.layer_norm(x, bound[prefix + ".ln1.gain"], bound[prefix + ".ln1.bias"]);
  Var q = tape.linear(a, bound[prefix + ".attn.wq"], bound[prefix + ".attn.bq"]);
  Var k = tape.linear(a, bound[prefix + ".attn.wk"], bound[prefix + ".attn.bk"]);
  Var v = tape.linear(a, bound[prefix + ".attn.wv"], bound[prefix + ".attn.bv"]);
  Var ctx = tape.attention(q, k, v);
  x = tape.add(x, tape.linear(ctx, bound[prefix + ".attn.wo"], bound[prefix + ".attn.bo"]));
  Var b = tape.layer_norm(x, bound[prefix + ".ln2.gain"], bound[prefix + ".ln2.bias"]);
  Var f = tape.linear(b, bound[prefix + ".ffn1.w"], bound[prefix + ".ffn1.b"]);
  f = tape.gelu(f);
  f = tape.linear(f, bound[prefix + ".ffn2.w"], bound[prefix + ".ffn2.b"]);
  return tape.add(x, f);
}

}  // namespace

void init_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng) {
  const int d = cfg.d_model;
  for (StreamId s : {StreamId::J, StreamId::C, StreamId::S}) {
    params.add("embed." + stream_name(s) + ".w", xavier_init({3, d}, rng));
    params.add("embed." + stream_name(s) + ".b", Tensor({d}));
  }
  params.add("embed.pos_spatial", uniform_init({30, d}, -0.1, 0.1, rng));
  params.add("embed.pos_temporal", uniform_init({cfg.max_frames, d}, -0.1, 0.1, rng));
  params.add("fusion.w", xavier_init({d, d}, rng));
  params.add("fusion.b", Tensor({d}));
  for (int i = 0; i < cfg.spatial_layers; ++i) {
    init_block(params, "enc.spatial" + std::to_string(i), d, cfg.ffn_hidden, rng);
  }
  for (int i = 0; i < cfg.temporal_layers; ++i) {
    init_block(params, "enc.temporal" + std::to_string(i), d, cfg.ffn_hidden, rng);
  }
  params.add("enc.out.w", xavier_init({d, cfg.feature_dim}, rng));
  params.add("enc.out.b", Tensor({cfg.feature_dim}));
  for (StreamId s : {StreamId::J, StreamId::C, StreamId::S}) {
    const std::string p = "proj." + stream_name(s);
    params.add(p + ".w1", xavier_init({cfg.feature_dim, cfg.projector_hidden}, rng));
    params.add(p + ".b1", Tensor({cfg.projector_hidden}));
    params.add(p + ".w2", xavier_init({cfg.projector_hidden, cfg.feature_dim}, rng));
    params.add(p + ".b2", Tensor({cfg.feature_dim}));
  }
}

Var embed_stream(Tape& tape, BoundParams& bound, const EncoderConfig& cfg, Var u,
                 StreamId stream, const BatchMeta& meta) {
  const Tensor& tu = tape.value(u);
  if (tu.rank() != 3 || tu.dim(1) != 30 || tu.dim(2) != 3) {
    throw std::invalid_argument("embed_stream wants [rows,30,3], got " + tu.shape_str());
  }
  if (tu.dim(0) != meta.rows()) {
    throw std::invalid_argument("embed_stream: row count does not match batch meta");
  }
  if (meta.frames > cfg.max_frames) {
    throw std::invalid_argument("sequence length " + std::to_string(meta.frames) +
                                " exceeds temporal position table of " +
                                std::to_string(cfg.max_frames));
  }
  const std::string name = stream_name(stream);
  Var x = tape.linear(u, bound["embed." + name + ".w"], bound["embed." + name + ".b"]);
  std::vector<int> frame_of_row(static_cast<std::size_t>(meta.rows()));
  for (int r = 0; r < meta.rows(); ++r) frame_of_row[static_cast<std::size_t>(r)] = r % meta.frames;
  return tape.add_positional(x, bound["embed.pos_spatial"], bound["embed.pos_temporal"],
                             std::move(frame_of_row));
}

Var early_fusion(Tape& tape, BoundParams& bound, const std::vector<Var>& embeddings) {
  if (embeddings.empty()) {
    throw std::invalid_argument("early_fusion needs at least one stream embedding");
  }
  Var sum = embeddings[0];
  for (std::size_t i = 1; i < embeddings.size(); ++i) {
    sum = tape.add(sum, embeddings[i]);
  }
  Var mean = tape.scale(sum, 1.0 / static_cast<double>(embeddings.size()));
  return tape.linear(mean, bound["fusion.w"], bound["fusion.b"]);
}

Var encode(Tape& tape, BoundParams& bound, const EncoderConfig& cfg, Var h,
           const BatchMeta& meta) {
  const Tensor& th = tape.value(h);
  if (th.rank() != 3 || th.dim(0) != meta.rows() || th.dim(1) != 30 ||
      th.dim(2) != cfg.d_model) {
    throw std::invalid_argument("encode wants [rows,30,d_model], got " + th.shape_str());
  }
  Var x = h;
  for (int i = 0; i < cfg.spatial_layers; ++i) {
    x = transformer_block(tape, bound, "enc.spatial" + std::to_string(i), x);
  }
  x = tape.regroup(x, meta.samples * meta.persons, meta.frames, 30);
  for (int i = 0; i < cfg.temporal_layers; ++i) {
    x = transformer_block(tape, bound, "enc.temporal" + std::to_string(i), x);
  }
  Var pooled = tape.pool_rows(x, meta.samples);
  return tape.linear(pooled, bound["enc.out.w"], bound["enc.out.b"]);
}

Var project(Tape& tape, BoundParams& bound, Var y, StreamId stream) {
  const std::string p = "proj." + stream_name(stream);
  Var z = tape.linear(y, bound[p + ".w1"], bound[p + ".b1"]);
  z = tape.gelu(z);
  return tape.linear(z, bound[p + ".w2"], bound[p + ".b2"]);
}

void set_projector_identity(ParamStore& params, StreamId stream) {
  const std::string p = "proj." + stream_name(stream);
  Tensor& w1 = params.get(p + ".w1");
  Tensor& w2 = params.get(p + ".w2");
  if (w1.dim(0) != w1.dim(1) || w2.dim(0) != w2.dim(1)) {
    throw std::invalid_argument("identity projector needs square widths");
  }
  w1 = identity_matrix(w1.dim(0));
  w2 = identity_matrix(w2.dim(0));
  w1.requires_grad = w2.requires_grad = true;
  params.get(p + ".b1") = Tensor({w1.dim(0)});
  params.get(p + ".b2") = Tensor({w2.dim(0)});
  params.get(p + ".b1").requires_grad = true;
  params.get(p + ".b2").requires_grad = true;
}

}  // namespace uniskel
