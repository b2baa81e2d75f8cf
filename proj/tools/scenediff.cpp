#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "scenediff/checkpoint.hpp"
#include "scenediff/config.hpp"
#include "scenediff/latent.hpp"
#include "scenediff/scene_io.hpp"
#include "scenediff/ssc.hpp"
#include "scenediff/toy_scene.hpp"
#include "scenediff/training.hpp"
#include "scenediff/vqvae.hpp"

namespace fs = std::filesystem;
using namespace scenediff;
using json = nlohmann::json;

namespace {

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.file, "Config file of 'key = value' lines");
  cmd->add_option("--set", a.overrides, "Override a config key (key=value); repeatable");
  cmd->add_option("--data", a.data, "Dataset directory (with manifest.json)");
  cmd->add_option("--out", a.out, "Output path");
  cmd->add_option("--seed", a.seed, "Random seed");
  cmd->add_option("--epochs", a.epochs, "Training epochs");
}

// Precedence: built-in defaults < config file < --set < dedicated flags.
RunConfig resolve_config(const ConfigArgs& a) {
  RunConfig cfg;
  if (!a.file.empty()) {
    ParsedConfig parsed = load_run_config(a.file);
    cfg = parsed.config;
    for (const std::string& key : parsed.defaulted)
      std::cout << "config: " << key << " not set, using default " << cfg.get(key) << '\n';
  }
  for (const std::string& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::InvalidArgument, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.data.empty()) cfg.data = a.data;
  if (!a.out.empty()) cfg.out = a.out;
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  return cfg;
}

const std::string& require(const std::string& value, const char* what) {
  if (value.empty()) fail(ErrorKind::InvalidArgument, std::string("missing ") + what);
  return value;
}

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

Rgb parse_hex(const std::string& s) {
  if (s.size() != 6) fail(ErrorKind::InvalidArgument, "bad color '" + s + "'");
  const unsigned long v = std::stoul(s, nullptr, 16);
  return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

void put_class_table(Checkpoint& ckpt, const ClassTable& table, Dims dims) {
  std::string names, colors;
  for (int c = 0; c < table.num_classes(); ++c) {
    names += (c ? "," : "") + table.names()[static_cast<std::size_t>(c)];
    colors += (c ? "," : "") + hex(table.colors()[static_cast<std::size_t>(c)]);
  }
  ckpt.metadata["classes.names"] = names;
  ckpt.metadata["classes.colors"] = colors;
  ckpt.metadata["data.dims"] = to_string(dims);
}

ClassTable get_class_table(const Checkpoint& ckpt) {
  std::vector<Rgb> colors;
  for (const std::string& c : split(ckpt.meta("classes.colors"), ',')) colors.push_back(parse_hex(c));
  return ClassTable(split(ckpt.meta("classes.names"), ','), std::move(colors));
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) fs::create_directories(parent, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + parent.string() + ": " + ec.message());
}

struct Dataset {
  std::vector<VoxelGrid> scenes;
  ClassTable table;
};

Dataset load_dataset(const std::string& dir, int expected_classes) {
  const fs::path root(require(dir, "--data directory"));
  std::ifstream in(root / "manifest.json");
  if (!in) fail(ErrorKind::Io, "cannot open " + (root / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, "manifest: " + std::string(e.what()));
  }
  Dataset ds;
  for (const auto& f : manifest.at("scenes")) {
    auto [grid, table] = load_scene(root / f.get<std::string>());
    if (!ds.scenes.empty() && grid.dims != ds.scenes.front().dims)
      fail(ErrorKind::DimMismatch, "scene " + f.get<std::string>() + " has dims " + to_string(grid.dims));
    ds.scenes.push_back(std::move(grid));
    ds.table = std::move(table);
  }
  if (ds.scenes.empty()) fail(ErrorKind::EmptyInput, "dataset " + dir + " lists no scenes");
  if (ds.table.num_classes() != expected_classes)
    fail(ErrorKind::ConfigMismatch, "dataset has " + std::to_string(ds.table.num_classes()) +
                                        " classes but the config says " + std::to_string(expected_classes));
  return ds;
}

DiffusionTrainConfig diffusion_train_config(const RunConfig& cfg) {
  DiffusionTrainConfig t;
  t.adam.learning_rate = cfg.lr;
  t.w0 = cfg.w0;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seed;
  return t;
}

void log_loss(int epoch, double loss) { std::cout << "epoch " << epoch << " loss " << loss << std::endl; }
void log_epoch(int epoch, const LossRecord& r) { log_loss(epoch, r.total); }

DenoiserMeta meta_for(const RunConfig& cfg, long steps) {
  return {cfg.schedule, cfg.steps, cfg.w0, steps};
}

int cmd_gen_data(const std::string& out, int scenes, const std::string& dims, int classes, std::uint64_t seed) {
  ToySceneParams params;
  params.dims = parse_dims(dims);
  params.num_classes = classes;
  const ClassTable table = toy_class_table(classes);
  const std::vector<VoxelGrid> grids = generate_toy_dataset(params, scenes, seed);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out + ": " + ec.message());
  json manifest;
  manifest["dims"] = {params.dims.x, params.dims.y, params.dims.z};
  manifest["seed"] = seed;
  manifest["classes"] = json::array();
  for (int c = 0; c < table.num_classes(); ++c) {
    const Rgb& col = table.colors()[static_cast<std::size_t>(c)];
    manifest["classes"].push_back({{"name", table.names()[static_cast<std::size_t>(c)]}, {"color", {col[0], col[1], col[2]}}});
  }
  manifest["scenes"] = json::array();
  for (std::size_t i = 0; i < grids.size(); ++i) {
    std::ostringstream name;
    name << "scene_" << std::setw(4) << std::setfill('0') << i << ".vxsc";
    save_scene(grids[i], table, fs::path(out) / name.str());
    manifest["scenes"].push_back(name.str());
  }
  std::ofstream mf(fs::path(out) / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) fail(ErrorKind::Io, "cannot write manifest in " + out);
  std::cout << "wrote " << grids.size() << " scenes to " << out << '\n';
  return 0;
}

int cmd_train_diffusion(const RunConfig& cfg, bool conditional) {
  const Dataset ds = load_dataset(cfg.data, cfg.classes);
  const NoiseSchedule schedule = cfg.noise_schedule();
  DiffusionTrainResult r = [&] {
    if (!conditional)
      return train_diffusion(ConvDenoiser<float>::init(cfg.denoiser(false), cfg.seed), ds.scenes, {}, schedule,
                             diffusion_train_config(cfg), log_epoch);
    const auto tasks = build_tasks(ds.scenes, cfg.sparsity, cfg.seed);
    return train_conditional(tasks, cfg.denoiser(true), schedule, diffusion_train_config(cfg), log_epoch);
  }();
  Checkpoint ckpt = denoiser_checkpoint(r.net, meta_for(cfg, r.steps));
  put_class_table(ckpt, ds.table, ds.scenes.front().dims);
  save_checkpoint(ckpt, require(cfg.out, "--out checkpoint path"));
  std::cout << "saved " << cfg.out << '\n';
  return 0;
}

int cmd_train_vqvae(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.data, cfg.classes);
  VqTrainConfig t;
  t.adam.learning_rate = cfg.lr;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.vq_batch_size;
  t.seed = cfg.seed;
  VqTrainResult r = train_vqvae(ds.scenes, cfg.vqvae(), t, [](const VqEpochReport& e) {
    std::cout << "epoch " << e.epoch << " loss " << e.loss.total << " miou " << e.recon.miou << std::endl;
  });
  Checkpoint ckpt = vqvae_checkpoint(r.model);
  put_class_table(ckpt, ds.table, ds.scenes.front().dims);
  save_checkpoint(ckpt, require(cfg.out, "--out checkpoint path"));
  std::cout << "saved " << cfg.out << '\n';
  return 0;
}

int cmd_train_latent(const RunConfig& cfg, const std::string& vqvae_path) {
  const Dataset ds = load_dataset(cfg.data, cfg.classes);
  const VqVae<float> vq = vqvae_from_checkpoint(load_checkpoint(require(vqvae_path, "--vqvae checkpoint")));
  LatentDiffusionConfig lc;
  lc.codebook_size = vq.config().codebook_size;
  lc.steps = cfg.steps;
  lc.schedule = cfg.schedule;
  lc.denoiser = latent_denoiser_config(cfg.denoiser(false), lc.codebook_size);
  DiffusionTrainResult r = train_latent_denoiser(ds.scenes, vq, lc, diffusion_train_config(cfg), log_epoch);
  Checkpoint ckpt = latent_checkpoint(r.net, vq, meta_for(cfg, r.steps));
  put_class_table(ckpt, ds.table, ds.scenes.front().dims);
  save_checkpoint(ckpt, require(cfg.out, "--out checkpoint path"));
  std::cout << "saved " << cfg.out << '\n';
  return 0;
}

int cmd_train_baseline(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.data, cfg.classes);
  const auto tasks = build_tasks(ds.scenes, cfg.sparsity, cfg.seed);
  BaselineTrainConfig t;
  t.adam.learning_rate = cfg.lr;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seed;
  BaselineTrainResult r = train_baseline(tasks, cfg.denoiser(true), t, log_loss);
  Checkpoint ckpt = baseline_checkpoint(r.model);
  put_class_table(ckpt, ds.table, ds.scenes.front().dims);
  save_checkpoint(ckpt, require(cfg.out, "--out checkpoint path"));
  std::cout << "saved " << cfg.out << '\n';
  return 0;
}

std::string numbered(const std::string& prefix, int i) {
  std::ostringstream name;
  name << prefix << std::setw(3) << std::setfill('0') << i << ".vxsc";
  return name.str();
}

int cmd_sample(const std::string& ckpt_path, const std::string& vqvae_path, int count, std::uint64_t seed,
               const std::string& out, const std::string& mode_name) {
  const Checkpoint ckpt = load_checkpoint(require(ckpt_path, "--ckpt"));
  const ClassTable table = get_class_table(ckpt);
  const Dims dims = parse_dims(ckpt.meta("data.dims"));
  const ReverseMode mode = mode_name == "sample-x0" ? ReverseMode::SampleX0 : ReverseMode::Marginalize;
  if (mode_name != "sample-x0" && mode_name != "marginalize")
    fail(ErrorKind::InvalidArgument, "unknown reverse mode '" + mode_name + "'");
  fs::create_directories(require(out, "--out directory"));
  const std::string kind = ckpt.meta("kind");
  const Rng root(seed);
  if (kind == "latent") {
    std::optional<VqVae<float>> override_vq;
    if (!vqvae_path.empty()) override_vq = vqvae_from_checkpoint(load_checkpoint(vqvae_path));
    const LatentModel m = latent_from_checkpoint(ckpt, override_vq ? &*override_vq : nullptr);
    const NetworkDenoiser model(m.denoiser);
    const NoiseSchedule schedule = make_schedule(m.meta.schedule, m.meta.steps);
    const Dims ld = m.vqvae.config().latent_dims(dims);
    for (int i = 0; i < count; ++i) {
      Rng rng = root.split(static_cast<std::uint64_t>(i));
      save_scene(sample_latent(model, m.vqvae, ld, schedule, rng, mode), table, fs::path(out) / numbered("sample_", i));
    }
  } else if (kind == "denoiser") {
    const ConvDenoiser<float> net = denoiser_from_checkpoint(ckpt);
    if (net.config().conditioned) fail(ErrorKind::ConfigMismatch, "checkpoint is conditional; use 'complete'");
    const DenoiserMeta meta = denoiser_meta(ckpt);
    const NetworkDenoiser model(net);
    const NoiseSchedule schedule = make_schedule(meta.schedule, meta.steps);
    for (int i = 0; i < count; ++i) {
      Rng rng = root.split(static_cast<std::uint64_t>(i));
      save_scene(sample_loop(model, dims, nullptr, schedule, rng, mode), table, fs::path(out) / numbered("sample_", i));
    }
  } else {
    fail(ErrorKind::ConfigMismatch, "cannot sample from a '" + kind + "' checkpoint");
  }
  std::cout << "wrote " << count << " samples to " << out << '\n';
  return 0;
}

int cmd_complete(const std::string& ckpt_path, const std::string& condition_path, std::optional<double> rate,
                 std::uint64_t seed, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(require(ckpt_path, "--ckpt"));
  const ClassTable table = get_class_table(ckpt);
  auto [scene, scene_table] = load_scene(require(condition_path, "--condition"));
  // Nonzero labels are observations; a full scene can be thinned with --sparsify.
  VoxelGrid condition = rate ? sparsify(scene, *rate, seed) : occupancy(scene);
  const std::string kind = ckpt.meta("kind");
  VoxelGrid result;
  if (kind == "baseline") {
    const BaselineCompleter model = baseline_from_checkpoint(ckpt);
    result = model.predict(condition);
  } else if (kind == "denoiser") {
    const ConvDenoiser<float> net = denoiser_from_checkpoint(ckpt);
    if (!net.config().conditioned) fail(ErrorKind::ConfigMismatch, "checkpoint is unconditional; use 'sample'");
    const DenoiserMeta meta = denoiser_meta(ckpt);
    const NetworkDenoiser model(net);
    Rng rng(seed);
    result = complete(model, condition, make_schedule(meta.schedule, meta.steps), rng);
  } else {
    fail(ErrorKind::ConfigMismatch, "cannot complete with a '" + kind + "' checkpoint");
  }
  ensure_parent(require(out, "--out path"));
  save_scene(result, table, out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

struct LoadedMethod {
  std::unique_ptr<NetworkDenoiser> diffusion;
  std::unique_ptr<BaselineCompleter> baseline;
  std::unique_ptr<NoiseSchedule> schedule;
};

int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& specs, const std::string& tasks_dir, int best_of) {
  const Dataset ds = load_dataset(tasks_dir, cfg.classes);
  const auto tasks = build_tasks(ds.scenes, cfg.sparsity, cfg.seed);
  std::vector<LoadedMethod> loaded;
  std::vector<CompletionMethod> methods;
  loaded.reserve(specs.size());
  for (const std::string& spec : specs) {
    const auto eq = spec.find('=');
    const std::string kind = spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? "" : spec.substr(eq + 1);
    if (kind == "majority") {
      const std::vector<VoxelGrid> train = cfg.data.empty() ? ds.scenes : load_dataset(cfg.data, cfg.classes).scenes;
      methods.push_back(majority_method(majority_class(train)));
    } else if (kind == "oracle") {
      methods.push_back(oracle_method());
    } else if (kind == "all-free") {
      methods.push_back(all_free_method());
    } else if (kind == "baseline") {
      LoadedMethod& m = loaded.emplace_back();
      m.baseline = std::make_unique<BaselineCompleter>(baseline_from_checkpoint(load_checkpoint(require(path, "baseline checkpoint"))));
      methods.push_back(baseline_method(*m.baseline));
    } else if (kind == "diffusion") {
      const Checkpoint ckpt = load_checkpoint(require(path, "diffusion checkpoint"));
      const DenoiserMeta meta = denoiser_meta(ckpt);
      LoadedMethod& m = loaded.emplace_back();
      m.diffusion = std::make_unique<NetworkDenoiser>(denoiser_from_checkpoint(ckpt));
      if (!m.diffusion->network().config().conditioned)
        fail(ErrorKind::ConfigMismatch, "diffusion method needs a conditional checkpoint");
      m.schedule = std::make_unique<NoiseSchedule>(make_schedule(meta.schedule, meta.steps));
      methods.push_back(diffusion_method(*m.diffusion, *m.schedule, cfg.seed));
      if (best_of > 1) methods.push_back(best_of_n_method(*m.diffusion, *m.schedule, cfg.seed, best_of));
    } else {
      fail(ErrorKind::InvalidArgument, "unknown method '" + kind + "'");
    }
  }
  const std::vector<MethodResult> results = evaluate(methods, tasks, cfg.classes);
  write_eval_table(std::cout, results, ds.table);
  if (!cfg.out.empty()) {
    std::ofstream txt(cfg.out + ".txt"), csv(cfg.out + ".csv");
    write_eval_table(txt, results, ds.table);
    write_eval_csv(csv, results, ds.table);
    if (!txt || !csv) fail(ErrorKind::Io, "cannot write " + cfg.out + ".{txt,csv}");
  }
  return 0;
}

int cmd_export(const std::string& scene_path, const std::string& format, const std::string& out) {
  auto [grid, table] = load_scene(require(scene_path, "--scene"));
  ensure_parent(require(out, "--out"));
  if (format == "ply") {
    export_ply(grid, table, require(out, "--out"));
    std::cout << "wrote " << out << '\n';
  } else if (format == "slices") {
    const auto files = export_slices(grid, table, require(out, "--out"));
    std::cout << "wrote " << files.size() << " slices\n";
  } else {
    fail(ErrorKind::InvalidArgument, "unknown export format '" + format + "' (ply|slices)");
  }
  return 0;
}

int cmd_timing(const RunConfig& cfg, int trials, int epoch_scenes) {
  TimingConfig t;
  t.voxel_dims = cfg.dims;
  t.num_classes = cfg.classes;
  t.steps = cfg.steps;
  t.denoiser = cfg.denoiser(false);
  t.vqvae = cfg.vqvae();
  t.trials = trials;
  t.epoch_scenes = epoch_scenes;
  t.seed = cfg.seed;
  const auto rows = timing_report(t);
  write_timing_table(std::cout, rows);
  if (!cfg.out.empty()) {
    std::ofstream txt(cfg.out + ".txt"), csv(cfg.out + ".csv");
    write_timing_table(txt, rows);
    write_timing_csv(csv, rows);
    if (!txt || !csv) fail(ErrorKind::Io, "cannot write " + cfg.out + ".{txt,csv}");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete and latent diffusion for semantic voxel scenes"};
  app.require_subcommand(1);

  std::string gd_out;
  int gd_scenes = 10, gd_classes = 5;
  std::string gd_dims = "16x16x4";
  std::uint64_t gd_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Write procedural toy scenes and a manifest");
  gen->add_option("--out", gd_out, "Output directory")->required();
  gen->add_option("--scenes", gd_scenes, "Number of scenes");
  gen->add_option("--dims", gd_dims, "Grid size XxYxZ");
  gen->add_option("--classes", gd_classes, "Number of classes (4..11)");
  gen->add_option("--seed", gd_seed, "Random seed");

  ConfigArgs td_args, tv_args, tl_args, tb_args, ev_args, tm_args;
  bool conditional = false;
  auto* td = app.add_subcommand("train-diffusion", "Train a voxel-space diffusion denoiser");
  add_config_flags(td, td_args);
  td->add_flag("--conditional", conditional, "Condition on sparse occupancy (scene completion)");
  auto* tv = app.add_subcommand("train-vqvae", "Train the VQ-VAE");
  add_config_flags(tv, tv_args);
  std::string tl_vqvae;
  auto* tl = app.add_subcommand("train-latent", "Train a diffusion denoiser over VQ-VAE codebook indices");
  add_config_flags(tl, tl_args);
  tl->add_option("--vqvae", tl_vqvae, "Trained VQ-VAE checkpoint")->required();
  auto* tb = app.add_subcommand("train-baseline", "Train the discriminative completion baseline");
  add_config_flags(tb, tb_args);

  std::string s_ckpt, s_vqvae, s_out, s_mode = "marginalize";
  int s_count = 1;
  std::uint64_t s_seed = 0;
  auto* sample = app.add_subcommand("sample", "Generate scenes from a voxel or latent checkpoint");
  sample->add_option("--ckpt", s_ckpt, "Checkpoint")->required();
  sample->add_option("--vqvae", s_vqvae, "VQ-VAE checkpoint replacing the bundled one");
  sample->add_option("--count", s_count, "Number of samples");
  sample->add_option("--seed", s_seed, "Random seed");
  sample->add_option("--out", s_out, "Output directory")->required();
  sample->add_option("--mode", s_mode, "Reverse step: marginalize | sample-x0");

  std::string c_ckpt, c_cond, c_out;
  std::optional<double> c_rate;
  std::uint64_t c_seed = 0;
  auto* comp = app.add_subcommand("complete", "Complete a scene from a sparse observation");
  comp->add_option("--ckpt", c_ckpt, "Conditional diffusion or baseline checkpoint")->required();
  comp->add_option("--condition", c_cond, "Scene file; nonzero voxels are observations")->required();
  comp->add_option("--sparsify", c_rate, "Keep only this fraction of the observed voxels");
  comp->add_option("--seed", c_seed, "Random seed");
  comp->add_option("--out", c_out, "Output scene file")->required();

  std::vector<std::string> e_methods;
  std::string e_tasks;
  int e_best = 1;
  auto* ev = app.add_subcommand("eval", "Compare completion methods on held-out scenes");
  add_config_flags(ev, ev_args);
  ev->add_option("--methods", e_methods,
                 "majority | oracle | all-free | baseline=CKPT | diffusion=CKPT (comma separated)")
      ->delimiter(',')
      ->required();
  ev->add_option("--tasks", e_tasks, "Dataset directory to build completion tasks from")->required();
  ev->add_option("--best-of", e_best, "Also report best-of-n for diffusion methods");

  std::string x_scene, x_format = "ply", x_out;
  auto* exp = app.add_subcommand("export", "Export a scene as PLY or per-layer PPM slices");
  exp->add_option("--scene", x_scene, "Scene file")->required();
  exp->add_option("--format", x_format, "ply | slices");
  exp->add_option("--out", x_out, "Output file (ply) or path stem (slices)")->required();

  int tm_trials = 3, tm_scenes = 4;
  auto* tm = app.add_subcommand("timing", "Time voxel vs latent diffusion training and sampling");
  add_config_flags(tm, tm_args);
  tm->add_option("--trials", tm_trials, "Timed trials per configuration");
  tm->add_option("--epoch-scenes", tm_scenes, "Scenes per timed training epoch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gd_out, gd_scenes, gd_dims, gd_classes, gd_seed);
    if (*td) return cmd_train_diffusion(resolve_config(td_args), conditional);
    if (*tv) return cmd_train_vqvae(resolve_config(tv_args));
    if (*tl) return cmd_train_latent(resolve_config(tl_args), tl_vqvae);
    if (*tb) return cmd_train_baseline(resolve_config(tb_args));
    if (*sample) return cmd_sample(s_ckpt, s_vqvae, s_count, s_seed, s_out, s_mode);
    if (*comp) return cmd_complete(c_ckpt, c_cond, c_rate, c_seed, c_out);
    if (*ev) return cmd_eval(resolve_config(ev_args), e_methods, e_tasks, e_best);
    if (*exp) return cmd_export(x_scene, x_format, x_out);
    if (*tm) return cmd_timing(resolve_config(tm_args), tm_trials, tm_scenes);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
