#include "cfx/cli/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cfx/baselines/baselines.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/cli/config.hpp"
#include "cfx/cli/dataset.hpp"
#include "cfx/explain/infer.hpp"
#include "cfx/fragvocab/vocab.hpp"
#include "cfx/genvae/vae.hpp"
#include "cfx/ppo/ppo.hpp"

namespace cfx::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string kebab(std::string key) {
  for (auto& ch : key)
    if (ch == '_') ch = '-';
  return key;
}

struct Options {
  std::string config_file;
  std::string run_dir = "run";
  std::string csv, out, pool, method;
  bool no_pretrain = false;
  bool no_adapter_training = false;
  std::size_t k_max = 20;
};

class RunDirLock {
 public:
  explicit RunDirLock(const fs::path& dir) : path_(dir / ".cfx.lock") {
    fs::create_directories(dir);
    FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
      throw std::runtime_error("run directory " + dir.string() + " is locked by another process (remove " +
                               path_.string() + " if it is stale)");
    std::fclose(f);
  }
  ~RunDirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  fs::path path_;
};

struct Paths {
  fs::path root;
  fs::path data() const { return root / "data"; }
  fs::path bundle() const { return data() / "bundle.json"; }
  fs::path gnn() const { return root / "models" / "gnn.cfxm"; }
  fs::path vocab() const { return root / "models" / "vocab.json"; }
  fs::path vae() const { return root / "models" / "vae.cfxm"; }
  fs::path adapter(bool no_pretrain, std::uint64_t seed) const {
    return root / "models" / ("adapter" + std::string(no_pretrain ? "-no-pretrain" : "") + "-s" + std::to_string(seed) + ".cfxm");
  }
  fs::path log(const std::string& name) const { return root / "logs" / (name + ".jsonl"); }
  fs::path pool(const std::string& name) const { return root / "pools" / (name + ".json"); }
  fs::path report(const std::string& name) const { return root / "reports" / (name + ".json"); }
  fs::path manifest(const std::string& name) const { return root / "manifests" / (name + ".json"); }
};

void require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw MissingArtifact("missing " + p.string() + "; produce it with `cfx " + producer + "`");
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hash_text(bytes);
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

void write_manifest(const Paths& paths, const std::string& name, const RunConfig& cfg,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  auto table = [&](const std::vector<fs::path>& files) {
    json t = json::object();
    for (const auto& f : files) t[f.lexically_relative(paths.root).generic_string()] = file_hash(f);
    return t;
  };
  write_json(paths.manifest(name), {{"command", name},
                                    {"config_hash", config_hash(cfg)},
                                    {"config", to_json(cfg)},
                                    {"inputs", table(inputs)},
                                    {"outputs", table(outputs)}});
}

gnn::TrunkConfig gnn_trunk(const RunConfig& c) {
  return {c.gnn_hidden, c.gnn_layers, c.gnn_update == "additive" ? gnn::UpdateMode::Additive : gnn::UpdateMode::Concat};
}

genvae::VaeConfig vae_config(const RunConfig& c) {
  genvae::VaeConfig v;
  v.latent = c.latent;
  return v;
}

genvae::DecodeOptions decode_options(const RunConfig& c) {
  genvae::DecodeOptions d;
  d.mode = c.decode == "sample" ? genvae::DecodeMode::Sample : genvae::DecodeMode::Beam;
  d.beam = c.beam;
  d.temperature = c.temperature;
  return d;
}

explain::SelectionMode selection(const RunConfig& c) {
  return c.selection == "modular" ? explain::SelectionMode::Modular : explain::SelectionMode::SetCoverage;
}

std::vector<chem::Molecule> corpus_of(const std::vector<gnn::LabeledMolecule>& split) {
  std::vector<chem::Molecule> out;
  for (const auto& m : split) out.push_back(m.mol);
  return out;
}

DatasetBundle load_bundle(const Paths& paths) {
  require(paths.bundle(), "prep");
  return DatasetBundle::load(paths.data());
}

gnn::GnnModel load_gnn(const Paths& paths) {
  require(paths.gnn(), "train-gnn");
  return gnn::GnnModel::load(paths.gnn());
}

std::vector<chem::Molecule> predicted_as(const DatasetBundle& bundle, const gnn::GnnModel& model, int cls) {
  std::vector<chem::Molecule> inputs;
  for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (const auto& m : *split)
      if (model.predict(m.mol) == cls) inputs.push_back(m.mol);
  if (inputs.empty()) throw std::runtime_error("no molecule is predicted as the explained class");
  return inputs;
}

// Everything the explanation commands share. The scorer keeps a pointer to
// `gnn`, so a World is built in place and never moved.
struct World {
  World(const Paths& paths, const RunConfig& cfg)
      : bundle(load_bundle(paths)),
        gnn(load_gnn(paths)),
        inputs(predicted_as(bundle, gnn, cfg.explain_class)),
        scorer(inputs, gnn, 1 - cfg.explain_class, {cfg.alpha, cfg.beta, cfg.delta}, {cfg.fp_radius, cfg.fp_nbits}) {}
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  DatasetBundle bundle;
  gnn::GnnModel gnn;
  std::vector<chem::Molecule> inputs;  // molecules predicted as the explained class
  explain::Scorer scorer;
};

genvae::VaeModel load_generator(const Paths& paths, const RunConfig& cfg, const chem::ElementSet& elements,
                                bool no_pretrain) {
  require(paths.vocab(), "mine-vocab");
  auto vocab = fragvocab::FragmentVocab::load(paths.vocab());
  if (no_pretrain) return genvae::VaeModel(std::move(vocab), elements, vae_config(cfg), cfg.seed + 7919);
  require(paths.vae(), "train-vae");
  return genvae::VaeModel::load(paths.vae(), std::move(vocab));
}

json pool_json(const std::string& method, const RunConfig& cfg, std::size_t evaluations,
               const std::vector<explain::CandidateScore>& pool) {
  json cands = json::array();
  for (const auto& c : pool) cands.push_back(chem::write_smiles(c.mol));
  return {{"method", method},        {"config_hash", config_hash(cfg)}, {"seed", cfg.seed},
          {"delta", cfg.delta},      {"fp_radius", cfg.fp_radius},      {"fp_nbits", cfg.fp_nbits},
          {"explain_class", cfg.explain_class}, {"evaluations", evaluations}, {"candidates", cands}};
}

// Writes pool and report files for one method and returns the report.
json emit(const Paths& paths, const std::string& name, const RunConfig& cfg, const World& w,
          const std::vector<explain::CandidateScore>& pool, std::size_t evaluations, std::vector<fs::path> inputs,
          std::ostream& out) {
  auto report = explain::summarize(pool, w.scorer, cfg.k, selection(cfg));
  report.config = to_json(cfg);
  report.seeds = {{"seed", cfg.seed}};
  json rj = report.to_json();
  rj["method"] = name;
  write_json(paths.pool(name), pool_json(name, cfg, evaluations, pool));
  write_json(paths.report(name), rj);
  write_manifest(paths, name, cfg, inputs, {paths.pool(name), paths.report(name)});
  for (const auto& wmsg : report.warnings) out << "warning: " << wmsg << '\n';
  json summary{{"method", name},
               {"coverage", report.coverage},
               {"cost", rj["cost"]},
               {"selected", report.candidates.size()},
               {"pool", report.pool_size},
               {"evaluations", evaluations}};
  out << summary.dump() << '\n';
  return summary;
}

std::string seed_tag(const RunConfig& cfg) { return "-s" + std::to_string(cfg.seed); }

// ---- subcommands --------------------------------------------------------

void cmd_toy_data(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  const fs::path dest = o.out.empty() ? paths.root / "toy.csv" : fs::path(o.out);
  auto rows = toy_dataset({cfg.toy_count, 4, 10, cfg.seed});
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  write_csv(dest, rows);
  std::size_t pos = 0;
  for (const auto& r : rows) pos += static_cast<std::size_t>(r.label);
  out << json{{"rows", rows.size()}, {"positive", pos}, {"path", dest.string()}}.dump() << '\n';
}

void cmd_prep(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  if (o.csv.empty()) throw ConfigError("prep needs --csv");
  require(o.csv, "toy-data");
  std::size_t bad = 0;
  auto rows = read_csv(o.csv, &bad);
  const double bad_rate = static_cast<double>(bad) / static_cast<double>(std::max<std::size_t>(1, rows.size() + bad));
  if (bad_rate > 0.1) throw DatasetError("more than 10% of the CSV rows are malformed");
  PrepOptions po;
  po.min_element_count = cfg.min_element_count;
  po.seed = cfg.seed;
  auto bundle = prep(rows, po, fs::path(o.csv).filename().string());
  bundle.provenance["malformed_rows"] = bad;
  bundle.provenance["explain_class"] = cfg.explain_class;
  bundle.save(paths.data());
  write_manifest(paths, "prep", cfg, {o.csv},
                 {paths.bundle(), paths.data() / "train.csv", paths.data() / "valid.csv", paths.data() / "test.csv"});
  out << json{{"train", bundle.train.size()}, {"valid", bundle.valid.size()}, {"test", bundle.test.size()},
              {"elements", bundle.elements.symbols()}}
             .dump()
      << '\n';
}

void cmd_train_gnn(const Paths& paths, const RunConfig& cfg, std::ostream& out) {
  auto bundle = load_bundle(paths);
  gnn::GnnTrainConfig gc;
  gc.epochs = cfg.gnn_epochs;
  gc.lr = cfg.gnn_lr;
  gc.batch_size = cfg.gnn_batch;
  gc.seed = cfg.seed;
  gc.trunk = gnn_trunk(cfg);
  gc.elements = bundle.elements;
  auto log = open_out(paths.log("gnn"));
  auto r = gnn::train_classifier(bundle.train, bundle.valid, gc, &log);
  log.close();
  fs::create_directories(paths.gnn().parent_path());
  r.model.save(paths.gnn());
  write_manifest(paths, "train-gnn", cfg, {paths.bundle(), paths.data() / "train.csv", paths.data() / "valid.csv"},
                 {paths.gnn(), paths.log("gnn")});
  out << json{{"best_epoch", r.best_epoch},
              {"train_acc", gnn::accuracy(r.model, bundle.train)},
              {"valid_acc", r.best_valid_acc},
              {"test_acc", gnn::accuracy(r.model, bundle.test)}}
             .dump()
      << '\n';
}

void cmd_mine_vocab(const Paths& paths, const RunConfig& cfg, std::ostream& out) {
  auto bundle = load_bundle(paths);
  auto vocab = fragvocab::mine_vocab(corpus_of(bundle.train), cfg.vocab_size);
  fs::create_directories(paths.vocab().parent_path());
  vocab.save(paths.vocab());
  write_manifest(paths, "mine-vocab", cfg, {paths.data() / "train.csv"}, {paths.vocab()});
  out << json{{"size", vocab.size()}, {"max_fragment_atoms", vocab.max_fragment_atoms()}}.dump() << '\n';
}

void cmd_train_vae(const Paths& paths, const RunConfig& cfg, std::ostream& out) {
  auto bundle = load_bundle(paths);
  require(paths.vocab(), "mine-vocab");
  auto vocab = fragvocab::FragmentVocab::load(paths.vocab());
  genvae::VaeTrainConfig tc;
  tc.epochs = cfg.vae_epochs;
  tc.lr = cfg.vae_lr;
  tc.batch_size = cfg.vae_batch;
  tc.kl_weight = cfg.vae_kl_weight;
  tc.seed = cfg.seed;
  const auto corpus = corpus_of(bundle.train);
  auto log = open_out(paths.log("vae"));
  auto r = genvae::train_vae(corpus, vocab, bundle.elements, vae_config(cfg), tc, &log);
  log.close();
  r.model.save(paths.vae());
  std::vector<genvae::Example> examples;
  for (const auto& m : corpus) {
    auto e = genvae::make_example(m, vocab);
    if (e.tokens.size() <= static_cast<std::size_t>(r.model.config().n_max)) examples.push_back(std::move(e));
  }
  write_manifest(paths, "train-vae", cfg, {paths.data() / "train.csv", paths.vocab()}, {paths.vae(), paths.log("vae")});
  out << json{{"best_epoch", r.best_epoch}, {"skipped", r.skipped},
              {"token_accuracy", genvae::token_accuracy(r.model, examples)}}
             .dump()
      << '\n';
}

void cmd_train_adapter(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  const World w(paths, cfg);
  auto vae = load_generator(paths, cfg, w.bundle.elements, o.no_pretrain);
  ppo::AdapterTrainConfig ac;
  ac.updates = cfg.adapter_updates;
  ac.inputs_per_update = cfg.inputs_per_update;
  ac.lr = cfg.adapter_lr;
  ac.ucb_c = cfg.ucb_c;
  ac.seed = cfg.seed;
  ac.hidden = cfg.adapter_hidden;
  ac.rollout = {cfg.t_train, cfg.n_samples, decode_options(cfg)};
  ac.ppo = {cfg.clip, cfg.ppo_epochs, 0.5, cfg.kl_limit};
  const std::string name = "adapter" + std::string(o.no_pretrain ? "-no-pretrain" : "") + seed_tag(cfg);
  auto log = open_out(paths.log(name));
  auto r = ppo::train_adapter(w.inputs, vae, w.scorer, ac, &log);
  log.close();
  const fs::path ckpt = paths.adapter(o.no_pretrain, cfg.seed);
  r.model.save(ckpt);
  std::vector<fs::path> inputs{paths.bundle(), paths.gnn(), paths.vocab()};
  if (!o.no_pretrain) inputs.push_back(paths.vae());
  write_manifest(paths, name, cfg, inputs, {ckpt, paths.log(name)});
  out << json{{"first_reward", r.first_reward}, {"best_reward", r.best_reward}, {"best_update", r.best_update}}.dump()
      << '\n';
}

void cmd_explain(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  const World w(paths, cfg);
  auto vae = load_generator(paths, cfg, w.bundle.elements, o.no_pretrain);
  std::vector<fs::path> inputs{paths.bundle(), paths.gnn(), paths.vocab()};
  if (!o.no_pretrain) inputs.push_back(paths.vae());
  std::optional<adapter::AdapterModel> policy;
  if (o.no_adapter_training) {
    policy.emplace(adapter::AdapterConfig{vae.graph_width(), cfg.adapter_hidden, vae.config().latent, 0.5}, cfg.seed);
  } else {
    const fs::path ckpt = paths.adapter(o.no_pretrain, cfg.seed);
    require(ckpt, std::string("train-adapter") + (o.no_pretrain ? " --no-pretrain" : "") + " --seed " +
                      std::to_string(cfg.seed));
    policy.emplace(adapter::AdapterModel::load(ckpt));
    inputs.push_back(ckpt);
  }
  explain::InferConfig ic;
  ic.steps = cfg.t_infer;
  ic.k = cfg.k;
  ic.final_only = cfg.final_only;
  ic.action = cfg.action == "mean" ? adapter::ActionMode::Mean : adapter::ActionMode::Sample;
  ic.decode = decode_options(cfg);
  ic.mode = selection(cfg);
  ic.seed = cfg.seed;
  const auto h = explain::harvest(vae, &*policy, w.scorer, ic);
  std::string name = "rlhex";
  if (o.no_pretrain) name += "-no-pretrain";
  if (o.no_adapter_training) name += "-no-adapter-training";
  if (cfg.final_only) name += "-final-only";
  emit(paths, name + seed_tag(cfg), cfg, w, explain::build_pool(h.candidates, w.scorer), h.decodes, inputs, out);
}

void cmd_baseline(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  const World w(paths, cfg);
  std::vector<fs::path> inputs{paths.bundle(), paths.gnn()};
  baselines::BaselineResult r;
  if (o.method == "walk") {
    r = baselines::walk_baseline(w.scorer, w.bundle.elements, cfg.walk_steps, cfg.seed);
  } else {
    auto vae = load_generator(paths, cfg, w.bundle.elements, false);
    inputs.push_back(paths.vocab());
    inputs.push_back(paths.vae());
    if (o.method == "sample") {
      r = baselines::sample_baseline(vae, w.scorer, cfg.t_infer, decode_options(cfg), cfg.seed);
    } else {
      baselines::SaConfig sc;
      sc.steps = cfg.t_infer;
      sc.schedule = {cfg.sa_temperature, cfg.sa_period};
      sc.propose_from_input = cfg.sa_from_input;
      sc.decode = decode_options(cfg);
      r = baselines::sa_baseline(vae, w.scorer, sc, cfg.seed);
    }
  }
  emit(paths, o.method + seed_tag(cfg), cfg, w, explain::build_pool(r.pool, w.scorer), r.evaluations, inputs, out);
}

struct LoadedPool {
  json meta;
  std::vector<chem::Molecule> mols;
};

LoadedPool load_pool(const std::string& file, const RunConfig& cfg) {
  if (file.empty()) throw ConfigError("--pool is required");
  require(file, "explain or cfx baseline");
  std::ifstream in(file);
  LoadedPool p;
  p.meta = json::parse(in);
  if (p.meta.at("delta").get<double>() != cfg.delta || p.meta.at("fp_radius").get<int>() != cfg.fp_radius ||
      p.meta.at("fp_nbits").get<std::size_t>() != cfg.fp_nbits)
    throw ConfigError("pool " + file + " was produced with different delta or fingerprint settings");
  if (p.meta.contains("explain_class") && p.meta.at("explain_class").get<int>() != cfg.explain_class)
    throw ConfigError("pool " + file + " explains a different class");
  for (const auto& s : p.meta.at("candidates")) p.mols.push_back(chem::parse_smiles(s.get<std::string>()));
  return p;
}

void cmd_evaluate(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  auto pool = load_pool(o.pool, cfg);
  const World w(paths, cfg);
  // Pools written by the methods are already counterfactual; here any valid
  // candidate counts so external pools share the same metric path.
  auto scored = explain::build_pool(pool.mols, w.scorer, false);
  auto report = explain::summarize(scored, w.scorer, cfg.k, selection(cfg));
  report.config = to_json(cfg);
  json j = report.to_json();
  j["pool"] = fs::path(o.pool).filename().string();
  j["method"] = pool.meta.value("method", "");
  const std::string name = "evaluate-" + fs::path(o.pool).stem().string();
  write_json(paths.report(name), j);
  write_manifest(paths, name, cfg, {o.pool, paths.gnn(), paths.bundle()}, {paths.report(name)});
  out << json{{"pool", j["pool"]}, {"k", cfg.k}, {"coverage", report.coverage}, {"cost", j["cost"]}}.dump() << '\n';
}

void cmd_sweep_k(const Paths& paths, const RunConfig& cfg, const Options& o, std::ostream& out) {
  auto pool = load_pool(o.pool, cfg);
  const World w(paths, cfg);
  auto scored = explain::build_pool(pool.mols, w.scorer, false);
  const fs::path csv = paths.root / "reports" / ("sweep-" + fs::path(o.pool).stem().string() + ".csv");
  auto f = open_out(csv);
  f << "k,coverage,cost\n";
  for (std::size_t k = 1; k <= o.k_max; ++k) {
    auto r = explain::summarize(scored, w.scorer, k, selection(cfg));
    f << k << ',' << r.coverage << ',';
    if (r.cost) f << *r.cost;
    f << '\n';
  }
  f.close();
  write_manifest(paths, "sweep-" + fs::path(o.pool).stem().string(), cfg, {o.pool, paths.gnn(), paths.bundle()}, {csv});
  out << json{{"csv", csv.string()}, {"k_max", o.k_max}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual explanations for molecular graph classifiers", "cfx"};
  app.require_subcommand(1);
  Options o;
  std::map<std::string, std::string> flag_values;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_file, "flat key = value config file");
    sub->add_option("--run-dir", o.run_dir, "run directory")->capture_default_str();
    for (const auto& f : config_fields()) {
      const std::string flag = "--" + kebab(f.key);
      const bool boolean = f.key == "final_only" || f.key == "sa_from_input";
      if (boolean)
        sub->add_flag(flag, flag_values[f.key], f.help);
      else
        sub->add_option(flag, flag_values[f.key], f.help);
    }
    return sub;
  };
  auto* toy = common(app.add_subcommand("toy-data", "write the rule-labeled toy dataset"));
  toy->add_option("--out", o.out, "CSV destination (default <run-dir>/toy.csv)");
  auto* prep_cmd = common(app.add_subcommand("prep", "parse, filter, dedupe and split a CSV"));
  prep_cmd->add_option("--csv", o.csv, "rows smiles,label")->required();
  auto* train_gnn = common(app.add_subcommand("train-gnn", "train the classifier"));
  auto* mine = common(app.add_subcommand("mine-vocab", "mine the fragment vocabulary"));
  auto* train_vae = common(app.add_subcommand("train-vae", "train the generator"));
  auto* train_adapter = common(app.add_subcommand("train-adapter", "train the latent-shift adapter"));
  train_adapter->add_flag("--no-pretrain", o.no_pretrain, "use a randomly initialized generator");
  auto* explain_cmd = common(app.add_subcommand("explain", "run inference and select explanations"));
  explain_cmd->add_flag("--no-pretrain", o.no_pretrain, "use a randomly initialized generator");
  explain_cmd->add_flag("--no-adapter-training", o.no_adapter_training, "use an untrained adapter");
  auto* baseline = common(app.add_subcommand("baseline", "run a comparison method"));
  baseline->add_option("method", o.method, "sample | sa | walk")
      ->required()
      ->check(CLI::IsMember({"sample", "sa", "walk"}));
  auto* evaluate = common(app.add_subcommand("evaluate", "coverage and cost of any candidate pool"));
  evaluate->add_option("--pool", o.pool, "pool JSON")->required();
  auto* sweep = common(app.add_subcommand("sweep-k", "coverage and cost for k = 1..k-max"));
  sweep->add_option("--pool", o.pool, "pool JSON")->required();
  sweep->add_option("--k-max", o.k_max, "largest k")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfigError;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  RunConfig cfg;
  try {
    if (const char* env = std::getenv("CFX_SEED")) set_config_value(cfg, "seed", env);
    if (!o.config_file.empty()) load_config_file(cfg, o.config_file);
    for (const auto& f : config_fields()) {
      const auto* opt = sub->get_option_no_throw("--" + kebab(f.key));
      if (opt && opt->count() > 0) set_config_value(cfg, f.key, flag_values[f.key]);
    }
    validate(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  const Paths paths{o.run_dir};
  try {
    RunDirLock lock(paths.root);
    const auto t0 = std::chrono::steady_clock::now();
    if (sub == toy) cmd_toy_data(paths, cfg, o, out);
    else if (sub == prep_cmd) cmd_prep(paths, cfg, o, out);
    else if (sub == train_gnn) cmd_train_gnn(paths, cfg, out);
    else if (sub == mine) cmd_mine_vocab(paths, cfg, out);
    else if (sub == train_vae) cmd_train_vae(paths, cfg, out);
    else if (sub == train_adapter) cmd_train_adapter(paths, cfg, o, out);
    else if (sub == explain_cmd) cmd_explain(paths, cfg, o, out);
    else if (sub == baseline) cmd_baseline(paths, cfg, o, out);
    else if (sub == evaluate) cmd_evaluate(paths, cfg, o, out);
    else if (sub == sweep) cmd_sweep_k(paths, cfg, o, out);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << command << " finished in " << sec << " s\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MissingArtifact& e) {
    err << "missing prerequisite: " << e.what() << '\n';
    return kMissingPrerequisite;
  } catch (const std::exception& e) {
    err << command << " failed: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace cfx::cli
