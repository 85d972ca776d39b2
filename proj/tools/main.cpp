// chromseg: command-line pipeline for overlapping-chromosome segmentation.
//
//   gen -> clean -> split -> train -> eval, plus baseline / hist / render.
//
// Every command writes `<out>.manifest.json` next to its primary output.
// Exit codes: 0 success, 1 invalid flags or configuration, 2 missing input
// file, 3 numerical divergence, 4 malformed input file or I/O failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chromseg/baselines.hpp"
#include "chromseg/checkpoint.hpp"
#include "chromseg/datagen.hpp"
#include "chromseg/dataset.hpp"
#include "chromseg/evaluation.hpp"
#include "chromseg/preprocess.hpp"
#include "chromseg/train.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace chromseg;

namespace {

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_inputs(std::initializer_list<fs::path> paths) {
  for (const auto& p : paths)
    if (!p.empty() && !fs::exists(p)) throw MissingInput("input file not found: " + p.string());
}

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  std::string config;
};

void add_common(CLI::App* sub, Common& c, bool out_required = true) {
  sub->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
  auto* out = sub->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
  sub->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  sub->add_option("--config", c.config, "Plain 'key = value' file; command-line flags win");
}

// Resolved option values of a subcommand, in declaration order.
nlohmann::json resolved_options(const CLI::App* sub) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) j[name] = r.front();
      else j[name] = r;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

cli::RunManifest start_manifest(const std::vector<std::string>& argv, const CLI::App* sub, const Common& c) {
  cli::RunManifest m;
  m.command_line = argv;
  m.config = resolved_options(sub);
  m.seeds["seed"] = c.seed;
  return m;
}

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::optional<ops::ClassWeights> parse_class_weights(const std::string& spec, const Dataset& train_set) {
  if (spec == "none") return std::nullopt;
  if (spec == "auto") return nn::inverse_frequency_weights(train_set);
  ops::ClassWeights w{};
  std::stringstream ss(spec);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 4) throw ConfigError("--class-weights takes exactly 4 values");
    try {
      w[i++] = std::stod(item);
    } catch (const std::exception&) {
      throw ConfigError("--class-weights: not a number: " + item);
    }
  }
  if (i != 4) throw ConfigError("--class-weights takes 'auto', 'none' or 4 comma-separated values");
  return w;
}

std::vector<LabelMap> labels_of(const Dataset& ds) {
  std::vector<LabelMap> out;
  out.reserve(ds.size());
  for (const auto& s : ds) out.push_back(s.label);
  return out;
}

std::vector<GrayImage> images_of(const Dataset& ds) {
  std::vector<GrayImage> out;
  out.reserve(ds.size());
  for (const auto& s : ds) out.push_back(s.image);
  return out;
}

void print_report(const eval::IouReport& r) { std::cout << eval::report_text(r); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Appends `--key value` for each config-file entry whose flag is not already
// on the command line. Keys are option names without dashes; '#' starts a
// comment. Boolean flags take true/false.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  std::string path;
  const CLI::App* sub = &app;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].starts_with("--config=")) path = args[i].substr(9);
    else if (const CLI::App* next = sub->get_subcommand_no_throw(args[i])) sub = next;
  }
  if (path.empty()) return args;
  if (!fs::exists(path)) throw MissingInput("config file not found: " + path);
  std::ifstream in(path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || key == "config") throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    const bool given = std::any_of(args.begin() + 1, args.end(),
                                   [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
    if (given) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1") args.push_back(flag);
      else if (value != "false" && value != "0")
        throw ConfigError(path + ":" + std::to_string(line_no) + ": '" + key + "' takes true or false");
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (!args.empty()) args.front() = "chromseg";

  CLI::App app{"Overlapping-chromosome segmentation pipeline"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.require_subcommand(1, 1);

  // gen
  Common gen_c;
  datagen::GenConfig gen_cfg;
  int angle_step = 15;
  std::string source_dir;
  auto* gen = app.add_subcommand("gen", "Generate a CHRSEG01 dataset of overlapping pairs");
  add_common(gen, gen_c);
  gen->add_option("--n", gen_cfg.n_samples, "Samples to emit")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_option("--library-size", gen_cfg.library_size, "Phantom chromosomes in the source library")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000));
  gen->add_option("--max-translation", gen_cfg.max_translation, "Max relative shift (pixels)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--min-overlap", gen_cfg.min_overlap, "Minimum overlap pixels per sample")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--angle-step", angle_step, "Rotation grid step in degrees")->capture_default_str()->check(CLI::Range(1, 360));
  gen->add_option("--source-dir", source_dir, "Directory of <id>_gray.pgm / <id>_mask.pgm pairs");
  gen->add_flag("--halve-source", gen_cfg.halve_source_resolution, "Halve imported source resolution");

  // clean
  Common clean_c;
  std::string clean_in;
  auto* clean = app.add_subcommand("clean", "Repair labels, remove artifacts, crop to 88x88");
  add_common(clean, clean_c);
  clean->add_option("--in", clean_in, "Input dataset")->required();

  // split
  Common split_c;
  std::string split_in;
  preprocess::SplitSpec split_spec;
  auto* split = app.add_subcommand("split", "Seeded 64/16/20 train/val/test split; --out is a path prefix");
  add_common(split, split_c);
  split->add_option("--in", split_in, "Input dataset")->required();

  // train
  Common train_c;
  std::string train_in, val_in, history_out, weights_spec = "auto", optimizer_name = "adam", init_from;
  nn::NetConfig net_cfg;
  nn::TrainConfig tcfg;
  bool save_optimizer = false, quiet = false;
  auto* train = app.add_subcommand("train", "Train the segmentation network");
  add_common(train, train_c);
  train->add_option("--train", train_in, "Training dataset")->required();
  train->add_option("--val", val_in, "Validation dataset");
  train->add_option("--history", history_out, "History CSV (default <out>.history.csv)");
  train->add_option("--epochs", tcfg.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--batch-size", tcfg.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", tcfg.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--optimizer", optimizer_name)->capture_default_str()->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--class-weights", weights_spec, "auto | none | w0,w1,w2,w3")->capture_default_str();
  train->add_option("--depth", net_cfg.depth)->capture_default_str()->check(CLI::Range(1, 6));
  train->add_option("--base-filters", net_cfg.base_filters)->capture_default_str()->check(CLI::Range(1, 4096));
  train->add_option("--init", init_from, "Start from this checkpoint instead of a fresh initialisation");
  train->add_flag("--save-optimizer", save_optimizer, "Store Adam moments in the checkpoint");
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  // eval
  Common eval_c;
  std::string eval_data, eval_ckpt, eval_pred;
  int eval_batch = 8;
  auto* evalc = app.add_subcommand("eval", "Per-class IOU of a checkpoint (or a prediction file) on a dataset");
  add_common(evalc, eval_c);
  evalc->add_option("--data", eval_data, "Ground-truth dataset")->required();
  auto* ck_opt = evalc->add_option("--checkpoint", eval_ckpt, "Model checkpoint");
  auto* pred_opt = evalc->add_option("--pred", eval_pred, "CHRSEG01 file whose labels are predictions");
  ck_opt->excludes(pred_opt);
  evalc->add_option("--batch-size", eval_batch)->capture_default_str()->check(CLI::PositiveNumber);

  // baseline
  Common base_c;
  std::string base_train, base_data;
  baselines::GeometricParams geo;
  auto* baseline = app.add_subcommand("baseline", "Non-neural baselines on the merged 3-class task");
  baseline->require_subcommand(1, 1);
  auto* thr = baseline->add_subcommand("threshold", "Two-threshold intensity classifier");
  auto* geom = baseline->add_subcommand("geometric", "Contour / reflex-point crossing resolver");
  for (auto* sub : {thr, geom}) {
    add_common(sub, base_c);
    sub->add_option("--train", base_train, "Dataset the thresholds are fitted on")->required();
    sub->add_option("--data", base_data, "Evaluation dataset")->required();
  }
  geom->add_option("--epsilon", geo.epsilon, "Polygon approximation tolerance (pixels)")->capture_default_str();
  geom->add_option("--margin", geo.margin_deg, "Reflex angle margin (degrees)")->capture_default_str();

  // hist
  Common hist_c;
  std::string hist_data;
  auto* hist = app.add_subcommand("hist", "Intensity histograms of single vs overlap pixels (CSV)");
  add_common(hist, hist_c);
  hist->add_option("--data", hist_data, "Dataset")->required();

  // render
  Common render_c;
  std::string render_data, render_ckpt;
  int render_first = 0, render_count = 8;
  auto* render = app.add_subcommand("render", "Input / truth / prediction PPM triptychs; --out is a directory");
  add_common(render, render_c);
  render->add_option("--data", render_data, "Dataset")->required();
  render->add_option("--checkpoint", render_ckpt, "Model checkpoint (truth is repeated when absent)");
  render->add_option("--first", render_first)->capture_default_str()->check(CLI::NonNegativeNumber);
  render->add_option("--count", render_count)->capture_default_str()->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> expanded;
    try {
      expanded = expand_config(app, args);
    } catch (const MissingInput& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (*gen) {
      gen_cfg.seed = gen_c.seed;
      gen_cfg.angle_set.clear();
      for (int a = 0; a < 360; a += angle_step) gen_cfg.angle_set.push_back(a);
      if (!source_dir.empty()) {
        if (!fs::is_directory(source_dir)) throw MissingInput("source directory not found: " + source_dir);
        gen_cfg.source_dir = source_dir;
      }
      const auto sources = datagen::load_sources(gen_cfg);
      datagen::GenStats stats;
      const Dataset ds = datagen::generate_dataset(gen_cfg, sources, gen_c.threads, &stats);
      write_dataset(ds, gen_c.out);
      std::ostringstream meta;
      meta << "index,id_a,id_b,angle_a,angle_b,dx_a,dy_a,dx_b,dy_b,seed\n";
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& m = ds[i].meta;
        meta << i << ',' << m.pair_ids[0] << ',' << m.pair_ids[1] << ',' << m.angles_deg[0] << ',' << m.angles_deg[1]
             << ',' << m.offsets[0][0] << ',' << m.offsets[0][1] << ',' << m.offsets[1][0] << ',' << m.offsets[1][1]
             << ',' << cli::hex64(m.seed) << '\n';
      }
      const fs::path meta_path = gen_c.out + ".meta.csv";
      write_text(meta_path, meta.str());
      auto man = start_manifest(args, gen, gen_c);
      if (gen_cfg.source_dir) {
        for (const auto& e : fs::directory_iterator(*gen_cfg.source_dir))
          if (e.path().extension() == ".pgm") man.inputs.push_back(e.path());
        std::sort(man.inputs.begin(), man.inputs.end());
      }
      man.outputs = {gen_c.out, meta_path};
      man.write(manifest_path(gen_c.out));
      std::cout << "wrote " << ds.size() << " samples to " << gen_c.out << " (" << stats.draws << " draws)\n";
    } else if (*clean) {
      require_inputs({clean_in});
      const Dataset ds = preprocess::clean(read_dataset(clean_in), clean_c.threads);
      write_dataset(ds, clean_c.out);
      auto man = start_manifest(args, clean, clean_c);
      man.inputs = {clean_in};
      man.outputs = {clean_c.out};
      man.write(manifest_path(clean_c.out));
      std::cout << "cleaned " << ds.size() << " samples -> " << clean_c.out << "\n";
    } else if (*split) {
      require_inputs({split_in});
      split_spec.seed = split_c.seed;
      const auto parts = preprocess::split(read_dataset(split_in), split_spec);
      const fs::path tr = split_c.out + "_train.chrseg", va = split_c.out + "_val.chrseg", te = split_c.out + "_test.chrseg";
      write_dataset(parts.train, tr);
      write_dataset(parts.val, va);
      write_dataset(parts.test, te);
      auto man = start_manifest(args, split, split_c);
      man.inputs = {split_in};
      man.outputs = {tr, va, te};
      man.write(manifest_path(split_c.out));
      std::cout << "train " << parts.train.size() << ", val " << parts.val.size() << ", test " << parts.test.size() << "\n";
    } else if (*train) {
      require_inputs({train_in, val_in, init_from});
      const Dataset train_set = read_dataset(train_in);
      const Dataset val_set = val_in.empty() ? Dataset{} : read_dataset(val_in);
      tcfg.seed = train_c.seed;
      tcfg.optimizer = optimizer_name == "sgd" ? nn::Optimizer::sgd : nn::Optimizer::adam;
      tcfg.class_weights = parse_class_weights(weights_spec, train_set);
      nn::ModelParams<float> params;
      if (!init_from.empty()) {
        auto ck = nn::load_checkpoint(init_from);
        net_cfg = ck.config;
        params = std::move(ck.params);
      } else {
        net_cfg.validate();
        params = nn::init_params<float>(net_cfg, mix_seed(train_c.seed, 0x1417ULL));
      }
      auto progress = [&](const nn::EpochRecord& r) {
        if (quiet) return;
        std::cout << "epoch " << r.epoch << "  train_loss " << r.train_loss << "  val_loss " << r.val_loss << "  val_iou";
        for (double v : r.val_iou) std::cout << ' ' << v;
        std::cout << std::endl;
      };
      const auto result = nn::train(net_cfg, std::move(params), train_set, val_set, tcfg, progress);
      nn::save_checkpoint(train_c.out, net_cfg, result.params, save_optimizer ? &result.optimizer : nullptr);
      const fs::path hist_path = history_out.empty() ? fs::path(train_c.out + ".history.csv") : fs::path(history_out);
      nn::write_history_csv(hist_path, result.history);
      auto man = start_manifest(args, train, train_c);
      if (tcfg.class_weights) man.config["resolved_class_weights"] = *tcfg.class_weights;
      man.config["best_epoch"] = result.best_epoch;
      man.inputs = {train_in};
      if (!val_in.empty()) man.inputs.push_back(val_in);
      if (!init_from.empty()) man.inputs.push_back(init_from);
      man.outputs = {train_c.out, hist_path};
      man.write(manifest_path(train_c.out));
      std::cout << "best epoch " << result.best_epoch << "; checkpoint " << train_c.out << "\n";
    } else if (*evalc) {
      if (eval_ckpt.empty() == eval_pred.empty()) throw ConfigError("eval needs exactly one of --checkpoint or --pred");
      require_inputs({eval_data, eval_ckpt, eval_pred});
      const Dataset truth_ds = read_dataset(eval_data);
      std::vector<LabelMap> pred;
      if (!eval_ckpt.empty()) {
        const auto ck = nn::load_checkpoint(eval_ckpt);
        const auto images = images_of(truth_ds);
        pred = nn::predict(ck.config, ck.params, images, eval_batch, eval_c.threads);
      } else {
        pred = labels_of(read_dataset(eval_pred));
      }
      const auto truth = labels_of(truth_ds);
      auto report = eval::evaluate(pred, truth, eval_c.threads);
      auto merged = eval::evaluate(eval::merge_chromosome_classes(pred), eval::merge_chromosome_classes(truth), eval_c.threads);
      merged.merged = true;
      auto j = eval::report_json(report);
      j["merged_report"] = eval::report_json(merged);
      write_text(eval_c.out, j.dump(2) + "\n");
      auto man = start_manifest(args, evalc, eval_c);
      man.inputs = {eval_data};
      if (!eval_ckpt.empty()) man.inputs.push_back(eval_ckpt);
      if (!eval_pred.empty()) man.inputs.push_back(eval_pred);
      man.outputs = {eval_c.out};
      man.write(manifest_path(eval_c.out));
      print_report(report);
    } else if (*baseline) {
      const bool geometric = geom->parsed();
      CLI::App* sub = geometric ? geom : thr;
      require_inputs({base_train, base_data});
      const baselines::ThresholdModel model = baselines::fit_threshold(read_dataset(base_train));
      const Dataset data = read_dataset(base_data);
      std::vector<LabelMap> pred;
      std::size_t applicable = 0;
      for (const auto& s : data) {
        if (geometric) {
          auto r = baselines::geometric_resolve(s.image, model, geo);
          applicable += r.applicable;
          pred.push_back(std::move(r.prediction));
        } else {
          pred.push_back(baselines::threshold_predict(model, s.image));
        }
      }
      auto report = eval::evaluate(pred, eval::merge_chromosome_classes(labels_of(data)), base_c.threads);
      report.merged = true;
      auto j = eval::report_json(report);
      j["method"] = geometric ? "geometric" : "threshold";
      j["threshold"] = {{"low_bin", model.low_bin}, {"high_bin", model.high_bin},
                        {"t_low", model.t_low()}, {"t_high", model.t_high()}};
      if (geometric)
        j["applicable_fraction"] = data.empty() ? 0.0 : static_cast<double>(applicable) / static_cast<double>(data.size());
      write_text(base_c.out, j.dump(2) + "\n");
      auto man = start_manifest(args, sub, base_c);
      man.inputs = {base_train, base_data};
      man.outputs = {base_c.out};
      man.write(manifest_path(base_c.out));
      print_report(report);
      if (geometric) std::cout << "applicable_fraction: " << j["applicable_fraction"].get<double>() << "\n";
    } else if (*hist) {
      require_inputs({hist_data});
      const auto h = eval::intensity_histogram(read_dataset(hist_data));
      write_text(hist_c.out, eval::histogram_csv(h));
      auto man = start_manifest(args, hist, hist_c);
      man.inputs = {hist_data};
      man.outputs = {hist_c.out};
      man.write(manifest_path(hist_c.out));
      std::cout << "overlap mass inside single-class support: " << eval::overlap_mass_in_single_support(h) << "\n";
    } else if (*render) {
      require_inputs({render_data, render_ckpt});
      const Dataset ds = read_dataset(render_data);
      const std::size_t lo = std::min<std::size_t>(render_first, ds.size());
      const std::size_t hi = std::min<std::size_t>(lo + render_count, ds.size());
      std::vector<GrayImage> images;
      for (std::size_t i = lo; i < hi; ++i) images.push_back(ds[i].image);
      std::vector<LabelMap> pred;
      if (!render_ckpt.empty()) {
        const auto ck = nn::load_checkpoint(render_ckpt);
        pred = nn::predict(ck.config, ck.params, images, 8, render_c.threads);
      }
      fs::create_directories(render_c.out);
      auto man = start_manifest(args, render, render_c);
      man.inputs = {render_data};
      if (!render_ckpt.empty()) man.inputs.push_back(render_ckpt);
      for (std::size_t i = lo; i < hi; ++i) {
        const LabelMap& p = pred.empty() ? ds[i].label : pred[i - lo];
        const fs::path path = fs::path(render_c.out) / ("sample_" + std::to_string(i) + ".ppm");
        netpbm::write_ppm(path, eval::render_triptych(ds[i].image, ds[i].label, p));
        man.outputs.push_back(path);
      }
      man.write(fs::path(render_c.out) / "manifest.json");
      std::cout << "rendered " << (hi - lo) << " triptychs into " << render_c.out << "\n";
    }
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
