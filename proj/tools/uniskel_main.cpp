#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "uniskel/checkpoint.hpp"
#include "uniskel/config.hpp"
#include "uniskel/eval.hpp"
#include "uniskel/gradcheck.hpp"
#include "uniskel/trainer.hpp"

namespace fs = std::filesystem;
using namespace uniskel;

namespace {

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::load_file(config_path);
  for (const auto& assignment : overrides) cfg.apply_override(assignment);
  cfg.validate();
  return cfg;
}

void write_snapshot(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "config.resolved.ini");
  out << cfg.to_text();
}

void write_metrics(const RunConfig& cfg, const std::string& out_dir, const std::string& task,
                   double top1, int n_test) {
  nlohmann::json doc = {{"task", task},
                        {"top1", top1},
                        {"n_test", n_test},
                        {"seed", cfg.train.seed},
                        {"config_hash", cfg.hash()}};
  std::ofstream out(fs::path(out_dir) / "metrics.json");
  out << doc.dump(2) << "\n";
  std::cout << doc.dump() << "\n";
}

void write_history_csv(const std::vector<LossHistoryRow>& history, const std::string& path) {
  std::ofstream out(path);
  out << "epoch,L,L_con,L_reg,L_rec\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    out << e << "," << history[e].total << "," << history[e].con << "," << history[e].reg << ","
        << history[e].rec << "\n";
  }
}

int cmd_generate(const RunConfig& cfg, const std::string& out_dir) {
  write_snapshot(cfg, out_dir);
  const fs::path dir(out_dir);
  PairedDataset train = generate(cfg.train_generator());
  PairedDataset test = generate(cfg.test_generator());
  write_hskl(dir / "train_j25.hskl", TopologyId::J25, train.j25, train.labels);
  write_hskl(dir / "train_c17.hskl", TopologyId::C17, train.c17, train.labels);
  write_hskl(dir / "test_j25.hskl", TopologyId::J25, test.j25, test.labels);
  write_hskl(dir / "test_c17.hskl", TopologyId::C17, test.c17, test.labels);
  write_topology_reference(dir / "topology.json");
  std::cout << "wrote " << train.samples << " train / " << test.samples << " test samples to "
            << out_dir << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& out_dir) {
  write_snapshot(cfg, out_dir);
  const fs::path dir(out_dir);
  PairedDataset train = obtain_train_dataset(cfg);
  Model model = build_model(cfg);
  PretrainResult result = pretrain(model, train, cfg);
  save_checkpoint(dir / "checkpoint.uskp", model, cfg.to_text(), result.history);
  write_history_csv(result.history, dir / "loss_history.csv");
  std::cout << "pretrained " << cfg.train.epochs << " epochs on streams " << cfg.train.streams
            << "; final loss " << result.history.back().total << "\n";
  return 0;
}

RunConfig checkpoint_config(const LoadedCheckpoint& loaded,
                            const std::vector<std::string>& overrides) {
  RunConfig cfg = loaded.config;
  for (const auto& assignment : overrides) cfg.apply_override(assignment);
  cfg.validate();
  return cfg;
}

int cmd_probe(const std::string& ckpt_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, const std::string& features) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  RunConfig cfg = checkpoint_config(loaded, overrides);
  write_snapshot(cfg, out_dir);
  PairedDataset train = obtain_train_dataset(cfg);
  PairedDataset test = obtain_test_dataset(cfg);
  const StreamSet streams = cfg.stream_set();
  FeatureKind kind = FeatureKind::fused;
  if (features == "J") kind = FeatureKind::stream_j;
  else if (features == "C") kind = FeatureKind::stream_c;
  else if (features == "S") kind = FeatureKind::stream_s;
  else if (features != "fused") throw std::invalid_argument("--features must be fused, J, C or S");
  Tensor ftrain = extract_features(loaded.model, train, streams, kind);
  Tensor ftest = extract_features(loaded.model, test, streams, kind);
  const double top1 = linear_probe(ftrain, train.labels, ftest, test.labels,
                                   cfg.generator.classes, cfg.probe, cfg.train.seed);
  write_metrics(cfg, out_dir, "probe", top1, test.samples);
  return 0;
}

int cmd_retrieve(const std::string& ckpt_path, const std::vector<std::string>& overrides,
                 const std::string& out_dir) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  RunConfig cfg = checkpoint_config(loaded, overrides);
  write_snapshot(cfg, out_dir);
  PairedDataset train = obtain_train_dataset(cfg);
  PairedDataset test = obtain_test_dataset(cfg);
  const StreamSet streams = cfg.stream_set();
  Tensor gallery = extract_features(loaded.model, train, streams, FeatureKind::fused);
  Tensor query = extract_features(loaded.model, test, streams, FeatureKind::fused);
  const double top1 = retrieve_top1(query, test.labels, gallery, train.labels);
  write_metrics(cfg, out_dir, "retrieve", top1, test.samples);
  return 0;
}

int cmd_semi(const std::string& ckpt_path, const std::vector<std::string>& overrides,
             const std::string& out_dir) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  RunConfig cfg = checkpoint_config(loaded, overrides);
  write_snapshot(cfg, out_dir);
  PairedDataset train = obtain_train_dataset(cfg);
  PairedDataset test = obtain_test_dataset(cfg);
  const double top1 = semi_supervised(loaded.model, train, test, cfg, cfg.semi.fraction);
  write_metrics(cfg, out_dir, "semi", top1, test.samples);
  return 0;
}

int cmd_convert(const std::string& ckpt_path, const std::string& input,
                const std::string& out_dir) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  write_snapshot(loaded.config, out_dir);
  HsklFile file = read_hskl(input);
  if (file.topology != TopologyId::C17 || file.data.dim(4) != 2) {
    throw std::runtime_error("convert wants a 2D C17 HSKL file");
  }
  Model& model = loaded.model;
  const int n = file.data.dim(0), m = file.data.dim(1), t = file.data.dim(2);
  Tensor lifted({n, m, t, 20, 3});
  for (int i = 0; i < n; ++i) {
    SkeletonSequence seq;
    seq.topology = TopologyId::C17;
    seq.persons = m;
    seq.frames = t;
    seq.data = Tensor({m, t, 17, 2});
    std::copy(file.data.data() + static_cast<std::int64_t>(i) * seq.data.size(),
              file.data.data() + static_cast<std::int64_t>(i + 1) * seq.data.size(),
              seq.data.data());
    SkeletonSequence c20 = normalize_2d(interpolate_spine(seq));
    Tape tape;
    BoundParams bound(tape, model.params);
    SkeletonSequence out3d =
        lift_sequence(tape, bound, model.cfg.lift, c20, model.lift_bn, BatchNormMode::eval);
    std::copy(out3d.data.data(), out3d.data.data() + out3d.data.size(),
              lifted.data() + static_cast<std::int64_t>(i) * out3d.data.size());
  }
  const fs::path out_path = fs::path(out_dir) / "lifted_c20.hskl";
  write_hskl(out_path, TopologyId::C20, lifted, file.labels);
  std::cout << "wrote " << out_path.string() << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  const auto cases = run_gradcheck_suites(seed);
  bool all_ok = true;
  for (const auto& c : cases) {
    std::cout << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  max_rel_err=" << c.max_rel_err
              << " (threshold " << c.threshold << ")\n";
    all_ok = all_ok && c.passed;
  }
  std::cout << (all_ok ? "all gradient checks passed" : "gradient checks FAILED") << "\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified heterogeneous-skeleton action representation learning"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", ckpt_path, input_path, features = "fused";
  std::vector<std::string> overrides;
  std::uint64_t gradcheck_seed = 0;

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config) cmd->add_option("--config", config_path, "config file (key = value)");
    cmd->add_option("--set", overrides, "override, e.g. --set train.epochs=5");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* generate = app.add_subcommand("generate", "emit synthetic HSKL train/test splits");
  add_common(generate, true);
  CLI::App* pretrain = app.add_subcommand("pretrain", "self-supervised pretraining");
  add_common(pretrain, true);
  CLI::App* probe = app.add_subcommand("probe", "linear probe on frozen features");
  add_common(probe, false);
  probe->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  probe->add_option("--features", features, "fused (default), J, C or S");
  CLI::App* retrieve = app.add_subcommand("retrieve", "cosine 1-NN retrieval");
  add_common(retrieve, false);
  retrieve->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  CLI::App* semi = app.add_subcommand("semi", "semi-supervised fine-tuning");
  add_common(semi, false);
  semi->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  CLI::App* convert = app.add_subcommand("convert", "lift a 2D HSKL file to 3D");
  add_common(convert, false);
  convert->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  convert->add_option("--input", input_path, "2D C17 HSKL file")->required();
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  gradcheck->add_option("--seed", gradcheck_seed, "random seed for the suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(resolve_config(config_path, overrides), out_dir);
    if (pretrain->parsed()) return cmd_pretrain(resolve_config(config_path, overrides), out_dir);
    if (probe->parsed()) return cmd_probe(ckpt_path, overrides, out_dir, features);
    if (retrieve->parsed()) return cmd_retrieve(ckpt_path, overrides, out_dir);
    if (semi->parsed()) return cmd_semi(ckpt_path, overrides, out_dir);
    if (convert->parsed()) return cmd_convert(ckpt_path, input_path, out_dir);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
