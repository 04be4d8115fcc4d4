#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "uniskel/config.hpp"
#include "uniskel/gradcheck.hpp"
#include "uniskel/model.hpp"
#include "uniskel/rng.hpp"
#include "uniskel/trainer.hpp"

namespace uniskel {

namespace {

constexpr double kH = 1e-4;
constexpr double kOpThreshold = 1e-4;

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Random values kept clear of a kink at zero so central differences stay
/// on one branch.
Tensor rand_tensor_off_zero(std::vector<int> shape, Rng& rng, double margin = 0.05) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(margin, 1.0);
    t[i] = rng.uniform01() < 0.5 ? -mag : mag;
  }
  return t;
}

using CaseFn = std::function<double(Rng&)>;

double sweep(const CaseFn& one_draw, Rng& rng, int draws = 10) {
  double worst = 0.0;
  for (int i = 0; i < draws; ++i) worst = std::max(worst, one_draw(rng));
  return worst;
}

// ---------------------------------------------------------------------------
// full-model term checks
// ---------------------------------------------------------------------------

struct ToyFixture {
  RunConfig cfg;
  Model model;
  RawBatch batch;
};

ToyFixture make_toy_fixture(std::uint64_t seed) {
  ToyFixture fx;
  RunConfig& cfg = fx.cfg;
  cfg.generator.classes = 2;
  cfg.generator.train_per_class = 2;
  cfg.generator.test_per_class = 1;
  cfg.generator.frames = 8;  // generator minimum; the batch is resampled to 4 below
  cfg.generator.persons = 1;
  cfg.generator.noise_std = 0.02;
  cfg.generator.seed = seed;
  cfg.semantic.fallback_dim = 5;
  cfg.model.d_model = 6;
  cfg.model.ffn_hidden = 8;
  cfg.model.feature_dim = 6;
  cfg.model.projector_hidden = 6;
  cfg.model.lift_hidden = 6;
  cfg.train.seed = seed;
  cfg.train.batch_size = 3;

  PairedDataset data = generate(cfg.train_generator());
  // crop to 4 frames so the toy forward stays cheap
  const int n = 3, m = 1, t = 4;
  PairedDataset small;
  small.samples = n;
  small.persons = m;
  small.frames = t;
  small.labels.assign(data.labels.begin(), data.labels.begin() + n);
  small.j25 = Tensor({n, m, t, 25, 3});
  small.c17 = Tensor({n, m, t, 17, 2});
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < t; ++f) {
      for (int j = 0; j < 25 * 3; ++j) {
        small.j25[((static_cast<std::int64_t>(i) * m * t) + f) * 75 + j] =
            data.j25[((static_cast<std::int64_t>(i) * m * data.frames) + f) * 75 + j];
      }
      for (int j = 0; j < 17 * 2; ++j) {
        small.c17[((static_cast<std::int64_t>(i) * m * t) + f) * 34 + j] =
            data.c17[((static_cast<std::int64_t>(i) * m * data.frames) + f) * 34 + j];
      }
    }
  }
  ModelConfig mc = cfg.model_config();
  mc.encoder.max_frames = t;
  fx.model = make_model(mc, fallback_embeddings(cfg.semantic.fallback_seed,
                                                cfg.semantic.fallback_dim));
  std::vector<int> indices = {0, 1, 2};
  fx.batch = assemble_batch(small, indices, nullptr, 0);
  // Jitter the toy batch so every batch-norm column sees healthy variance;
  // near-constant columns make 1/sqrt(var+eps) too curved for finite
  // differences at h=1e-4.
  Rng jitter(derive_seed(seed, 0x71FFULL));
  for (std::int64_t i = 0; i < fx.batch.c20_2d.size(); ++i) {
    fx.batch.c20_2d[i] += jitter.uniform(-0.25, 0.25);
  }
  for (std::int64_t i = 0; i < fx.batch.j25.size(); ++i) {
    fx.batch.j25[i] += jitter.uniform(-0.1, 0.1);
  }
  // evaluate at a generic parameter point rather than the symmetric init
  Rng param_jitter(derive_seed(seed, 0xBEEFULL));
  for (const auto& name : fx.model.params.names()) {
    Tensor& p = fx.model.params.get(name);
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] += param_jitter.uniform(-0.3, 0.3);
  }
  return fx;
}

constexpr int kNumTerms = 6;  // con, rec, V, C, VC, total

std::array<Var, kNumTerms> term_vars(Tape& tape, ToyFixture& fx, BoundParams& bound) {
  ForwardOptions options;
  options.streams = StreamSet{true, true, true};
  options.loss = fx.cfg.loss;
  options.mode = BatchNormMode::train;
  ForwardResult fwd = model_forward(tape, fx.model, bound, fx.batch, options);
  return {fwd.l_con,
          fwd.l_rec,
          variance_term(tape, fwd.j.z, fx.cfg.loss),
          covariance_term(tape, fwd.j.z),
          vc(tape, fwd.j.z, fx.cfg.loss),
          fwd.loss};
}

/// One finite-difference sweep over every parameter entry, all six terms
/// evaluated per perturbed forward.
std::array<double, kNumTerms> full_model_checks(std::uint64_t seed) {
  ToyFixture fx = make_toy_fixture(seed);

  // analytic gradients, one backward pass per term
  std::vector<std::vector<std::pair<std::string, Tensor>>> analytic(kNumTerms);
  for (int term = 0; term < kNumTerms; ++term) {
    Tape tape;
    BoundParams bound(tape, fx.model.params);
    std::array<Var, kNumTerms> outs = term_vars(tape, fx, bound);
    tape.backward(outs[static_cast<std::size_t>(term)]);
    for (const auto& [name, grad] : bound.gradients()) {
      analytic[static_cast<std::size_t>(term)].emplace_back(name, *grad);
    }
  }

  auto forward_values = [&]() {
    Tape t2;
    BoundParams b2(t2, fx.model.params);
    std::array<Var, kNumTerms> outs = term_vars(t2, fx, b2);
    std::array<double, kNumTerms> vals{};
    for (int term = 0; term < kNumTerms; ++term) {
      vals[static_cast<std::size_t>(term)] = t2.value(outs[static_cast<std::size_t>(term)]).item();
    }
    return vals;
  };

  std::array<double, kNumTerms> worst{};
  std::size_t flat = 0;
  for (const auto& [name, grad0] : analytic[0]) {
    (void)grad0;
    Tensor& param = fx.model.params.get(name);
    for (std::int64_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + kH;
      const auto up = forward_values();
      param[i] = saved - kH;
      const auto down = forward_values();
      param[i] = saved;
      for (int term = 0; term < kNumTerms; ++term) {
        const double numeric =
            (up[static_cast<std::size_t>(term)] - down[static_cast<std::size_t>(term)]) /
            (2.0 * kH);
        const double a = analytic[static_cast<std::size_t>(term)][flat].second[i];
        worst[static_cast<std::size_t>(term)] =
            std::max(worst[static_cast<std::size_t>(term)],
                     std::abs(a - numeric) / std::max(1.0, std::abs(a)));
      }
    }
    ++flat;
  }
  return worst;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suites(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x6C4DULL));
  std::vector<GradCheckCase> cases;
  auto push = [&cases](const std::string& name, double err, double threshold = kOpThreshold) {
    cases.push_back(GradCheckCase{name, err, threshold, err < threshold});
  };

  push("matmul", sweep([](Rng& r) {
    const int m = r.uniform_int(1, 8), k = r.uniform_int(1, 8), n = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor({m, k}, r), rand_tensor({k, n}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.matmul(v[0], v[1])); }, in,
        kH);
  }, rng));

  push("matmul_batched", sweep([](Rng& r) {
    const int b = r.uniform_int(1, 3), m = r.uniform_int(1, 6), k = r.uniform_int(1, 6),
              n = r.uniform_int(1, 6);
    std::vector<Tensor> in = {rand_tensor({b, m, k}, r), rand_tensor({b, k, n}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.matmul(v[0], v[1])); }, in,
        kH);
  }, rng));

  push("matmul_nt", sweep([](Rng& r) {
    const int b = r.uniform_int(1, 3), m = r.uniform_int(1, 6), k = r.uniform_int(1, 6),
              n = r.uniform_int(1, 6);
    std::vector<Tensor> in = {rand_tensor({b, m, k}, r), rand_tensor({b, n, k}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.matmul_nt(v[0], v[1])); },
        in, kH);
  }, rng));

  push("matmul_tn", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8), m = r.uniform_int(1, 8), k = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor({n, m}, r), rand_tensor({n, k}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.matmul_tn(v[0], v[1])); },
        in, kH);
  }, rng));

  push("linear", sweep([](Rng& r) {
    const int a = r.uniform_int(1, 4), b = r.uniform_int(1, 4), k = r.uniform_int(1, 6),
              n = r.uniform_int(1, 6);
    std::vector<Tensor> in = {rand_tensor({a, b, k}, r), rand_tensor({k, n}, r),
                              rand_tensor({n}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum_all(t.linear(v[0], v[1], v[2]));
        },
        in, kH);
  }, rng));

  push("elementwise", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8), m = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor({n, m}, r), rand_tensor({n, m}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) {
          Var x = t.add(v[0], v[1]);
          x = t.mul(x, t.sub(v[0], t.scale(v[1], 0.5)));
          x = t.add_scalar(t.rsub_scalar(0.25, x), 0.125);
          return t.mean_all(x);
        },
        in, kH);
  }, rng));

  push("leaky_relu", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8), m = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor_off_zero({n, m}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum_all(t.leaky_relu(v[0], 0.01));
        },
        in, kH);
  }, rng));

  push("relu", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8), m = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor_off_zero({n, m}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.relu(v[0])); }, in, kH);
  }, rng));

  push("gelu", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8), m = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor({n, m}, r, -2.0, 2.0)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.gelu(v[0])); }, in, kH);
  }, rng));

  push("sqrt", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8);
    std::vector<Tensor> in = {rand_tensor({n}, r, 0.1, 2.0)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) { return t.sum_all(t.sqrt_guarded(v[0])); }, in,
        kH);
  }, rng));

  push("softmax_rows", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 6), m = r.uniform_int(2, 8);
    std::vector<Tensor> in = {rand_tensor({n, m}, r), rand_tensor({n, m}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum_all(t.mul(t.softmax_rows(v[0]), v[1]));
        },
        in, kH);
  }, rng));

  push("attention", sweep([](Rng& r) {
    const int l = r.uniform_int(1, 5), d = r.uniform_int(1, 6);
    std::vector<Tensor> in = {rand_tensor({l, d}, r), rand_tensor({l, d}, r),
                              rand_tensor({l, d}, r), rand_tensor({l, d}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum_all(t.mul(t.attention(v[0], v[1], v[2]), v[3]));
        },
        in, kH);
  }, rng));

  push("layer_norm", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 6), d = r.uniform_int(2, 8);
    std::vector<Tensor> in = {rand_tensor({n, d}, r), rand_tensor({d}, r, 0.5, 1.5),
                              rand_tensor({d}, r), rand_tensor({n, d}, r)};
    return gradient_check(
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum_all(t.mul(t.layer_norm(v[0], v[1], v[2]), v[3]));
        },
        in, kH);
  }, rng));

  push("batch_norm_train", sweep([](Rng& r) {
    const int n = r.uniform_int(2, 8), f = r.uniform_int(1, 6);
    std::vector<Tensor> in = {rand_tensor({n, f}, r), rand_tensor({f}, r, 0.5, 1.5),
                              rand_tensor({f}, r), rand_tensor({n, f}, r)};
    return gradient_check(
        [f](Tape& t, const std::vector<Var>& v) {
          BatchNormState state;
          state.running_mean = Tensor({f});
          state.running_var = Tensor::full({f}, 1.0);
          return t.sum_all(
              t.mul(t.batch_norm(v[0], v[1], v[2], state, BatchNormMode::train), v[3]));
        },
        in, kH);
  }, rng));

  push("batch_norm_eval", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 8), f = r.uniform_int(1, 6);
    Tensor mean = rand_tensor({f}, r);
    Tensor var = rand_tensor({f}, r, 0.5, 2.0);
    std::vector<Tensor> in = {rand_tensor({n, f}, r), rand_tensor({f}, r, 0.5, 1.5),
                              rand_tensor({f}, r)};
    return gradient_check(
        [f, mean, var](Tape& t, const std::vector<Var>& v) {
          BatchNormState state;
          state.running_mean = mean;
          state.running_var = var;
          return t.sum_all(t.batch_norm(v[0], v[1], v[2], state, BatchNormMode::eval));
        },
        in, kH);
  }, rng));

  push("cross_entropy", sweep([](Rng& r) {
    const int n = r.uniform_int(1, 6), k = r.uniform_int(2, 6);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& label : labels) label = r.uniform_int(0, k - 1);
    std::vector<Tensor> in = {rand_tensor({n, k}, r)};
    return gradient_check(
        [labels](Tape& t, const std::vector<Var>& v) {
          return t.softmax_cross_entropy(v[0], labels);
        },
        in, kH);
  }, rng));

  push("indexing_ops", sweep([](Rng& r) {
    const int rows = r.uniform_int(1, 4);
    std::vector<Tensor> in = {rand_tensor({rows, 5, 2}, r), rand_tensor({2, 2}, r),
                              rand_tensor({7}, r)};
    return gradient_check(
        [rows](Tape& t, const std::vector<Var>& v) {
          Var u = t.scatter_slots(v[0], {0, 2, 4, 5, 6}, 8);
          u = t.fill_slots(u, v[1], {1, 3});
          Var g = t.gather_slots(u, {0, 1, 2, 3});
          Var looked = t.lookup(v[2], std::vector<int>(static_cast<std::size_t>(rows) * 8, 3),
                                {rows, 8});
          return t.add(t.sum_all(g), t.mean_all(looked));
        },
        in, kH);
  }, rng));

  push("positional_pool_regroup", sweep([](Rng& r) {
    const int g = r.uniform_int(1, 2), t_len = r.uniform_int(2, 4), s = r.uniform_int(2, 4),
              d = r.uniform_int(1, 4);
    std::vector<int> frame_of_row(static_cast<std::size_t>(g * t_len));
    for (int i = 0; i < g * t_len; ++i) frame_of_row[static_cast<std::size_t>(i)] = i % t_len;
    std::vector<Tensor> in = {rand_tensor({g * t_len, s, d}, r), rand_tensor({s, d}, r),
                              rand_tensor({t_len, d}, r)};
    return gradient_check(
        [g, t_len, s, frame_of_row](Tape& t, const std::vector<Var>& v) {
          Var x = t.add_positional(v[0], v[1], v[2], frame_of_row);
          x = t.regroup(x, g, t_len, s);
          return t.sum_all(t.pool_rows(x, g));
        },
        in, kH);
  }, rng));

  push("column_stats", sweep([](Rng& r) {
    const int n = r.uniform_int(2, 8), d = r.uniform_int(2, 6);
    std::vector<Tensor> in = {rand_tensor({n, d}, r)};
    return gradient_check(
        [n](Tape& t, const std::vector<Var>& v) {
          Var centered = t.sub_row(v[0], t.col_mean(v[0]));
          Var cov = t.scale(t.matmul_tn(centered, centered), 1.0 / (n - 1));
          return t.add(t.sum_offdiag_sq(cov), t.sum_all(t.col_sum(centered)));
        },
        in, kH);
  }, rng));

  const std::array<double, kNumTerms> model_errs = full_model_checks(derive_seed(seed, 0x70BULL));
  push("model_consistency_loss", model_errs[0]);
  push("model_reconstruction_loss", model_errs[1]);
  push("model_variance_term", model_errs[2]);
  push("model_covariance_term", model_errs[3]);
  push("model_vc", model_errs[4]);
  push("model_total_loss", model_errs[5]);

  return cases;
}

}  // namespace uniskel
