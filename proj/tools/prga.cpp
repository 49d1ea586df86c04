// prga: command-line front end.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "prga/checkpoint.hpp"
#include "prga/embank.hpp"
#include "prga/episodes.hpp"
#include "prga/error.hpp"
#include "prga/format.hpp"
#include "prga/gradcheck.hpp"
#include "prga/kernels.hpp"
#include "prga/synth.hpp"
#include "prga/train.hpp"

namespace fs = std::filesystem;
using namespace prga;

namespace {

// Bad flag values found after CLI11 has parsed the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": not a number list: '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// --------------------------------------------------------------- config flags

struct ConfigFlags {
  std::string json_path;
  std::optional<double> lr, weight_decay, alpha, beta;
  std::optional<int> epochs, layers, hidden, shots;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode, aggregators;

  void attach(CLI::App* app) {
    app->add_option("--config-json", json_path, "TrainConfig JSON; flags below override it")->check(CLI::ExistingFile);
    app->add_option("--lr", lr, "initial learning rate");
    app->add_option("--epochs", epochs);
    app->add_option("--weight-decay", weight_decay);
    app->add_option("--alpha", alpha, "cache residual weight");
    app->add_option("--beta", beta, "affinity sharpness");
    app->add_option("--mode", mode, "a1 | a2 | combined | self");
    app->add_option("--aggregators", aggregators, "comma list of mean,max,min,std");
    app->add_option("--layers", layers);
    app->add_option("--hidden", hidden, "graph width, 0 = embedding width");
    app->add_option("--seed", seed);
    app->add_option("--shots", shots, "K support items per class");
  }

  TrainConfig resolve() const {
    TrainConfig c;
    if (!json_path.empty()) {
      try {
        c = nlohmann::json::parse(read_file(json_path)).get<TrainConfig>();
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("--config-json: " + std::string(e.what()));
      }
    }
    if (lr) c.lr0 = *lr;
    if (epochs) c.epochs = *epochs;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (layers) c.layers = *layers;
    if (hidden) c.hidden = *hidden;
    if (seed) c.seed = *seed;
    if (shots) c.shots = *shots;
    if (mode) c.mode = as_usage([&] { return parse_attention_mode(*mode); });
    if (aggregators) c.aggregators = as_usage([&] { return parse_aggregators(*aggregators); });
    as_usage([&] {
      c.validate();
      return 0;
    });
    return c;
  }
};

fs::path sibling(const fs::path& of, const std::string& name) {
  const fs::path dir = of.parent_path();
  return dir.empty() ? fs::path(name) : dir / name;
}

// --------------------------------------------------------------- commands

struct TilesArgs {
  int width = 0, height = 0;
  std::string grids;
  bool full = false;
};

int cmd_tiles(const TilesArgs& a) {
  TileSpec spec;
  spec.image_w = a.width;
  spec.image_h = a.height;
  spec.grids = as_usage([&] { return parse_grids(a.grids); });
  spec.include_full = a.full;
  const auto rects = as_usage([&] { return tile_rects(spec); });
  for (const auto& r : rects) std::printf("%d %d %d %d\n", r.x, r.y, r.w, r.h);
  return 0;
}

struct SynthArgs {
  fs::path bank, wc;
  PlantedTaskSpec spec;
};

int cmd_synth(const SynthArgs& a) {
  const PlantedTask task = make_planted_task(a.spec);
  write_bank(task.bank, a.bank);
  write_classifier(task.classifier, a.wc);
  std::printf("wrote %zu items (N=%zu d=%u P=%u) to %s\n", task.bank.item_count(), task.bank.class_count(),
              task.bank.dim, task.bank.patches_per_item, a.bank.string().c_str());
  return 0;
}

struct TrainArgs {
  fs::path bank, wc, out, loss_csv, manifest;
  std::uint64_t episode_seed = 0;
  bool episode_seed_set = false;
  bool support_all = false;
  std::string tiling;
  ConfigFlags flags;
};

int cmd_train(const TrainArgs& a) {
  const TrainConfig cfg = a.flags.resolve();
  const fs::path loss_path = a.loss_csv.empty() ? sibling(a.out, "loss.csv") : a.loss_csv;
  const fs::path manifest_path = a.manifest.empty() ? fs::path(a.out.string() + ".manifest.json") : a.manifest;
  const std::uint64_t ep_seed = a.episode_seed_set ? a.episode_seed : cfg.seed;

  cli::RunManifest m;
  m.command = "train";
  m.config = {{"train", cfg}, {"episode_seed", ep_seed}, {"support_all", a.support_all}, {"tiling", a.tiling}};
  m.inputs = {a.bank, a.wc};
  m.outputs = {a.out, fs::path(a.out.string() + ".json"), loss_path};
  m.write(manifest_path);

  const EmbeddingBank bank = load_bank(a.bank);
  const ClassifierWeights wc = load_classifier(a.wc);
  EmbeddingBank support;
  if (a.support_all) {
    support = bank;
  } else {
    const Episode ep = sample_episode(bank, static_cast<std::uint32_t>(cfg.shots), ep_seed);
    support = bank.subset(ep.support_items());
  }
  const TrainResult r = train(support, wc, cfg);
  write_checkpoint(r.model, a.out);
  write_file(loss_path, loss_csv(r.log));
  std::printf("trained %s on %zu support items, final loss %s\n", std::string(to_string(cfg.mode)).c_str(),
              support.item_count(), format_double(r.log.back().loss).c_str());
  return 0;
}

struct EvalArgs {
  fs::path ckpt, bank, logits;
  std::optional<double> alpha, beta;
  std::string keys = "refined";
  int shots = 4;
  std::uint64_t episode_seed = 0;
  bool all = false;
};

int cmd_eval(const EvalArgs& a) {
  const KeySource source = as_usage([&] {
    if (a.keys == "refined") return KeySource::Refined;
    if (a.keys == "initial") return KeySource::Initial;
    throw Error(ErrorKind::InvalidArgument, "--keys must be refined or initial");
  });
  Model model = load_checkpoint(a.ckpt);
  if (a.alpha) model.cache.alpha = *a.alpha;
  if (a.beta) model.cache.beta = *a.beta;
  as_usage([&] {
    model.cache.validate();
    return 0;
  });
  const EmbeddingBank bank = load_bank(a.bank);
  std::vector<std::size_t> items;
  if (a.all) {
    for (std::size_t i = 0; i < bank.item_count(); ++i) items.push_back(i);
  } else {
    items = sample_episode(bank, static_cast<std::uint32_t>(a.shots), a.episode_seed).query;
  }
  const double acc = evaluate_items(model, bank, items, source);

  if (!a.logits.empty()) {
    Eigen::MatrixXd queries(static_cast<Eigen::Index>(items.size()), bank.dim);
    for (std::size_t q = 0; q < items.size(); ++q)
      queries.row(static_cast<Eigen::Index>(q)) = bank.global_vector(items[q]).transpose();
    const Eigen::MatrixXd logits = kernels::infer_batch_parallel(queries, model.cache, source);
    std::string csv = "item,label,prediction";
    for (Eigen::Index k = 0; k < logits.cols(); ++k) csv += ",logit_" + std::to_string(k);
    csv += '\n';
    for (std::size_t q = 0; q < items.size(); ++q) {
      const auto row = static_cast<Eigen::Index>(q);
      csv += std::to_string(items[q]) + ',' + std::to_string(bank.labels[items[q]]) + ',' +
             std::to_string(predict(logits.row(row).transpose()));
      for (Eigen::Index k = 0; k < logits.cols(); ++k) csv += ',' + format_double(logits(row, k));
      csv += '\n';
    }
    write_file(a.logits, csv);
  }
  std::printf("accuracy %s over %zu queries\n", format_double(acc).c_str(), items.size());
  return 0;
}

struct GridArgs {
  fs::path bank, wc, out = "grid.csv", manifest;
  std::string alphas, betas;
  std::uint64_t episode_seed = 0;
  bool episode_seed_set = false;
  ConfigFlags flags;
};

int cmd_grid(const GridArgs& a) {
  const TrainConfig cfg = a.flags.resolve();
  const auto alphas = parse_list(a.alphas, "--alphas");
  const auto betas = parse_list(a.betas, "--betas");
  const std::uint64_t ep_seed = a.episode_seed_set ? a.episode_seed : cfg.seed;

  cli::RunManifest m;
  m.command = "grid";
  m.config = {{"train", cfg}, {"alphas", alphas}, {"betas", betas}, {"episode_seed", ep_seed}};
  m.inputs = {a.bank, a.wc};
  m.outputs = {a.out};
  m.write(a.manifest.empty() ? fs::path(a.out.string() + ".manifest.json") : a.manifest);

  const EmbeddingBank bank = load_bank(a.bank);
  const ClassifierWeights wc = load_classifier(a.wc);
  const Episode ep = sample_episode(bank, static_cast<std::uint32_t>(cfg.shots), ep_seed);
  const GridResult g = grid_search(bank, wc, ep, cfg, alphas, betas);
  write_file(a.out, g.csv());
  std::fputs(g.csv().c_str(), stdout);
  std::printf("best alpha=%s beta=%s accuracy %s\n", format_double(g.alphas[g.best_alpha]).c_str(),
              format_double(g.betas[g.best_beta]).c_str(), format_double(g.accuracy(
                  static_cast<Eigen::Index>(g.best_alpha), static_cast<Eigen::Index>(g.best_beta))).c_str());
  return 0;
}

struct AblateArgs {
  std::vector<std::string> banks;  // LABEL=PATH or PATH
  fs::path wc, out = "ablation.csv", manifest;
  std::string modes = "a1,a2,combined,self";
  std::string seeds = "0,1,2";
  ConfigFlags flags;
};

int cmd_ablate(const AblateArgs& a) {
  const TrainConfig cfg = a.flags.resolve();
  std::vector<AttentionMode> modes;
  for (std::size_t pos = 0; pos <= a.modes.size();) {
    const auto comma = a.modes.find(',', pos);
    const std::string name = a.modes.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    modes.push_back(as_usage([&] { return parse_attention_mode(name); }));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  std::vector<std::uint64_t> seeds;
  for (const double s : parse_list(a.seeds, "--seeds")) {
    if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s))) throw UsageError("--seeds: whole numbers");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }

  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& b : a.banks) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) named.emplace_back("", b);
    else named.emplace_back(b.substr(0, eq), b.substr(eq + 1));
  }

  cli::RunManifest m;
  m.command = "ablate";
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& [label, path] : named) labels.push_back(label);
  m.config = {{"train", cfg}, {"modes", a.modes}, {"seeds", seeds}, {"bank_labels", labels}};
  for (const auto& [label, path] : named) m.inputs.push_back(path);
  m.inputs.push_back(a.wc);
  m.outputs = {a.out};
  m.write(a.manifest.empty() ? fs::path(a.out.string() + ".manifest.json") : a.manifest);

  std::vector<EmbeddingBank> loaded;
  loaded.reserve(named.size());
  for (const auto& [label, path] : named) loaded.push_back(load_bank(path));
  std::vector<AblationBank> banks;
  for (std::size_t i = 0; i < named.size(); ++i) {
    const std::string label = named[i].first.empty() ? std::to_string(loaded[i].patches_per_item) : named[i].first;
    banks.push_back({label, &loaded[i]});
  }
  const ClassifierWeights wc = load_classifier(a.wc);
  const auto rows = ablate(banks, wc, cfg, modes, seeds);
  write_file(a.out, ablation_csv(rows));
  std::printf("%-9s %-8s %s\n", "variant", "patches", "mean (per seed)");
  for (const auto& r : rows) {
    std::string per;
    for (const double v : r.accuracy) per += (per.empty() ? "" : " ") + format_double(v);
    std::printf("%-9s %-8s %s (%s)\n", std::string(to_string(r.mode)).c_str(), r.patches.c_str(),
                format_double(r.mean).c_str(), per.c_str());
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  const auto suite = gradcheck_suite(seed);
  double worst = 0.0;
  std::size_t failures = 0;
  std::string where;
  for (const auto& s : suite) {
    failures += s.report.failures;
    if (s.report.max_rel_error >= worst) {
      worst = s.report.max_rel_error;
      where = std::string(to_string(s.mode)) + "/" + join_aggregators(s.aggregators) + " " + s.report.worst;
    }
  }
  std::printf("instances %zu, max rel error %.3e (%s), failures %zu\n", suite.size(), worst, where.c_str(), failures);
  return failures == 0 && worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prga: patch-relational graph attention cache for few-shot classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));

  TilesArgs tiles;
  auto* c_tiles = app.add_subcommand("tiles", "print grid-tiling rectangles, one 'x y w h' per line");
  c_tiles->add_option("--width", tiles.width)->required()->check(CLI::PositiveNumber);
  c_tiles->add_option("--height", tiles.height)->required()->check(CLI::PositiveNumber);
  c_tiles->add_option("--grids", tiles.grids, "e.g. 3x3,4x4")->required();
  c_tiles->add_flag("--full", tiles.full, "append the full image");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "write the planted-relation task as EBK1 + WCM1");
  c_synth->add_option("--out-bank", synth.bank)->required();
  c_synth->add_option("--out-wc", synth.wc)->required();
  c_synth->add_option("--per-class", synth.spec.per_class);
  c_synth->add_option("--dim", synth.spec.dim);
  c_synth->add_option("--patches", synth.spec.patches);
  c_synth->add_option("--seed", synth.spec.seed);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train the cache on one episode's support set");
  c_train->add_option("--bank", tr.bank)->required()->check(CLI::ExistingFile);
  c_train->add_option("--wc", tr.wc)->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "checkpoint path; a .json sidecar is written next to it")->required();
  c_train->add_option("--loss-csv", tr.loss_csv, "default: loss.csv next to --out");
  c_train->add_option("--manifest", tr.manifest, "default: <out>.manifest.json");
  auto* ep_opt = c_train->add_option("--episode-seed", tr.episode_seed, "episode draw; default: --seed");
  c_train->add_flag("--support-all", tr.support_all, "use every bank item as support");
  c_train->add_option("--tiling", tr.tiling, "tiling label recorded in the manifest");
  tr.flags.attach(c_train);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "score query items with a checkpoint");
  c_eval->add_option("--ckpt", ev.ckpt)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--bank", ev.bank)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--alpha", ev.alpha, "override the checkpoint alpha");
  c_eval->add_option("--beta", ev.beta, "override the checkpoint beta");
  c_eval->add_option("--keys", ev.keys, "refined | initial");
  c_eval->add_option("--shots", ev.shots);
  c_eval->add_option("--episode-seed", ev.episode_seed);
  c_eval->add_flag("--all", ev.all, "score every bank item instead of the episode queries");
  c_eval->add_option("--logits", ev.logits, "write per-query logits CSV");

  GridArgs gr;
  auto* c_grid = app.add_subcommand("grid", "alpha x beta grid search");
  c_grid->add_option("--bank", gr.bank)->required()->check(CLI::ExistingFile);
  c_grid->add_option("--wc", gr.wc)->required()->check(CLI::ExistingFile);
  c_grid->add_option("--alphas", gr.alphas)->required();
  c_grid->add_option("--betas", gr.betas)->required();
  c_grid->add_option("--out", gr.out);
  c_grid->add_option("--manifest", gr.manifest);
  auto* grid_ep = c_grid->add_option("--episode-seed", gr.episode_seed);
  gr.flags.attach(c_grid);

  AblateArgs ab;
  auto* c_ablate = app.add_subcommand("ablate", "attention-mode ablation over seeds and banks");
  c_ablate->add_option("--bank", ab.banks, "LABEL=PATH or PATH; repeatable")->required();
  c_ablate->add_option("--wc", ab.wc)->required()->check(CLI::ExistingFile);
  c_ablate->add_option("--modes", ab.modes);
  c_ablate->add_option("--seeds", ab.seeds);
  c_ablate->add_option("--out", ab.out);
  c_ablate->add_option("--manifest", ab.manifest);
  ab.flags.attach(c_ablate);

  std::uint64_t gc_seed = 0;
  auto* c_gc = app.add_subcommand("gradcheck", "tape gradients vs central differences");
  c_gc->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    const auto subs = app.get_subcommands();
    std::cerr << "usage error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (c_tiles->parsed()) return cmd_tiles(tiles);
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_train->parsed()) {
      tr.episode_seed_set = ep_opt->count() > 0;
      return cmd_train(tr);
    }
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_grid->parsed()) {
      gr.episode_seed_set = grid_ep->count() > 0;
      return cmd_grid(gr);
    }
    if (c_ablate->parsed()) return cmd_ablate(ab);
    if (c_gc->parsed()) return cmd_gradcheck(gc_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
