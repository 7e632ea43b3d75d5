#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "acton/act2vec.hpp"
#include "acton/digest.hpp"
#include "acton/eval.hpp"
#include "acton/experiments.hpp"
#include "acton/ingest.hpp"
#include "acton/models.hpp"
#include "acton/persist.hpp"
#include "acton/synthgen.hpp"

namespace acton::cli {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Manifest

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

void Manifest::input(const fs::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", sha256_hex(read_file(path))}});
}

void Manifest::output(const fs::path& path) { outputs_.push_back(path.string()); }

void Manifest::write(const fs::path& dir) const {
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  json j{{"command", command_}, {"argv", argv_},     {"config", config_},
         {"seeds", seeds_},     {"inputs", inputs_}, {"outputs", outputs_},
         {"wall_clock_s", secs}};
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

namespace {

// ---------------------------------------------------------------------------
// Helpers

std::vector<fs::path> paths_of(const json& cfg, const char* key) {
  std::vector<fs::path> out;
  if (!cfg.contains(key) || cfg[key].is_null()) return out;
  if (cfg[key].is_string()) {
    out.emplace_back(cfg[key].get<std::string>());
  } else {
    for (const auto& p : cfg[key]) out.emplace_back(p.get<std::string>());
  }
  return out;
}

fs::path required_path(const json& cfg, const char* key) {
  auto ps = paths_of(cfg, key);
  require(ps.size() == 1, ErrorCode::InvalidConfig, std::string("--") + key + " is required");
  return ps.front();
}

std::optional<fs::path> optional_path(const json& cfg, const char* key) {
  auto ps = paths_of(cfg, key);
  if (ps.empty()) return std::nullopt;
  return ps.front();
}

Task task_of(const json& cfg) {
  require(cfg.contains("task"), ErrorCode::InvalidConfig, "--task is required");
  auto t = parse_task(cfg["task"].get<std::string>());
  require(t.has_value(), ErrorCode::InvalidConfig, "unknown task " + cfg["task"].get<std::string>());
  return *t;
}

void emit(Run& r, const std::string& name, std::string_view bytes) {
  const auto path = r.out / name;
  write_file_atomic(path, bytes);
  r.manifest->output(path);
}

/// Parses and concatenates activity files, then aligns every sequence to
/// the configured number of days.
Dataset load_activity(Run& r, const std::vector<fs::path>& files) {
  require(!files.empty(), ErrorCode::InvalidConfig, "--activity is required");
  const int period = r.config.value("sampling_period_s", kDefaultSamplingPeriod);
  Dataset ds;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    require(in.good(), ErrorCode::IoError, "cannot open " + f.string());
    r.manifest->input(f);
    Dataset part = parse_activity_csv(in, period);
    for (auto& s : part.sequences) ds.sequences.push_back(std::move(s));
    ds.provenance.sources.push_back(f.string());
  }
  ds.validate();
  const int days = r.config.value("days", kDefaultDays);
  const auto flagged = align_lengths(ds, days);
  if (!flagged.empty() && r.log)
    *r.log << "note: " << flagged.size() << " subject(s) exceed 10% missing after alignment\n";
  return ds;
}

void attach_labels(Run& r, Dataset& ds, const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + file.string());
  r.manifest->input(file);
  LabelTable table = parse_labels_csv(in);
  for (auto& [id, rec] : table)
    if (std::any_of(ds.sequences.begin(), ds.sequences.end(),
                    [&](const RawSequence& s) { return s.subject_id == id; }))
      ds.labels.emplace(id, std::move(rec));
}

Vocabulary load_vocab(Run& r, const fs::path& file) {
  r.manifest->input(file);
  return parse_vocabulary(read_file(file));
}

std::vector<LabelRecord> aligned_labels(const Dataset& ds) {
  std::vector<LabelRecord> out;
  out.reserve(ds.sequences.size());
  for (const auto& s : ds.sequences) {
    auto it = ds.labels.find(s.subject_id);
    if (it != ds.labels.end()) {
      out.push_back(it->second);
    } else {
      LabelRecord rec;
      rec.subject_id = s.subject_id;
      out.push_back(rec);
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::MalformedRow, where + ": not a number '" + s + "'");
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::MalformedRow, where + ": not an integer '" + s + "'");
}

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

std::string write_features(const std::vector<std::string>& ids,
                           const std::vector<std::vector<double>>& rows) {
  std::string out = "subject_id";
  const std::size_t k = rows.empty() ? 0 : rows.front().size();
  for (std::size_t j = 0; j < k; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    for (double v : rows[i]) out += "," + fmt(v);
    out += '\n';
  }
  return out;
}

FeatureTable read_features(const fs::path& file) {
  std::istringstream in(read_file(file));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::EmptyInput, file.string() + " is empty");
  const auto header = split_csv(strip_cr(line));
  require(!header.empty() && header[0] == "subject_id", ErrorCode::HeaderMismatch,
          file.string() + ": expected subject_id first");
  FeatureTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = file.string() + ":" + std::to_string(lineno);
    require(cells.size() == header.size(), ErrorCode::MalformedRow, where + ": wrong column count");
    t.ids.push_back(cells[0]);
    std::vector<double> row;
    row.reserve(cells.size() - 1);
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(parse_double(cells[j], where));
    t.rows.push_back(std::move(row));
  }
  require(!t.ids.empty(), ErrorCode::EmptyInput, file.string() + " has no rows");
  return t;
}

std::string report_table(const std::vector<MetricsReport>& reports, int n_classes) {
  std::vector<std::string> cols{"accuracy", "macro_f1", "weighted_f1"};
  if (n_classes == 2) cols = {"accuracy", "precision", "recall", "specificity", "f1", "macro_f1"};
  return format_table(reports, cols);
}

void check_finite(double v, const std::string& what) {
  require(std::isfinite(v), ErrorCode::NumericFailure, "non-finite " + what);
}

// Subject-level features at sample granularity: raw values absent from the
// embedding vocabulary get their numeric neighbours' mean vector.
std::vector<double> sample_features(const Vocabulary& vocab, const EmbeddingSpace& space,
                                    const RawSequence& raw) {
  std::vector<double> out;
  out.reserve(raw.counts.size() * space.dim);
  std::map<RawCount, std::vector<double>> oov;
  for (RawCount c : raw.counts) {
    std::span<const double> row;
    if (c == kMissingCount || vocab.contains(c)) {
      row = space.symbol_vectors.row(static_cast<std::size_t>(vocab.encode(c)));
    } else {
      auto it = oov.find(c);
      if (it == oov.end()) it = oov.emplace(c, resolve_oov(vocab, space, c)).first;
      row = it->second;
    }
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// synth

void run_synth(Run& r) {
  SynthConfig cfg;
  from_json(r.config, cfg);
  cfg.threads = r.deterministic ? cfg.threads : std::max(cfg.threads, r.threads);
  json effective;
  to_json(effective, cfg);
  r.manifest->config(effective);
  r.manifest->seed("synth", cfg.seed);

  auto result = generate_cohort(cfg);
  for (const auto& w : result.warnings)
    if (r.log) *r.log << "warning: " << w << "\n";

  std::ostringstream act, lab;
  write_activity_csv(act, result.dataset);
  write_labels_csv(lab, result.dataset);
  emit(r, "activity.csv", act.str());
  emit(r, "labels.csv", lab.str());
  r.manifest->note("cohort_digest", result.dataset.provenance.digest);
  r.manifest->note("warnings", result.warnings);
}

// ---------------------------------------------------------------------------
// vocab

void run_vocab(Run& r) {
  r.manifest->config(r.config);
  Dataset ds = load_activity(r, paths_of(r.config, "activity"));
  emit(r, "vocab.txt", serialize_vocabulary(build_vocabulary(ds)));
}

// ---------------------------------------------------------------------------
// train-embed

void run_train_embed(Run& r) {
  const auto level = parse_granularity(r.config.value("granularity", std::string("day")));
  TrainConfig cfg = train_config_from_json(r.config, TrainConfig::defaults_for(level));
  cfg.threads = r.deterministic ? 1 : r.threads;

  Dataset labelled = load_activity(r, paths_of(r.config, "activity"));
  std::optional<Dataset> extra;
  if (auto u = paths_of(r.config, "unlabeled"); !u.empty()) extra = load_activity(r, u);

  std::vector<const Dataset*> all{&labelled};
  if (extra) all.push_back(&*extra);
  const Vocabulary vocab = build_vocabulary(all);
  std::vector<ActivitySequence> corpus = encode_dataset(vocab, labelled);
  if (extra) {
    auto more = encode_dataset(vocab, *extra);
    corpus.insert(corpus.end(), std::make_move_iterator(more.begin()),
                  std::make_move_iterator(more.end()));
  }

  json effective = r.config;
  effective.update(train_config_to_json(cfg));
  r.manifest->config(effective);
  r.manifest->seed("embed", cfg.seed);

  TrainResult res = train(corpus, vocab.size(), cfg);
  std::string trace = "epoch,symbol_loss,neighbor_loss,smoothing_loss,targets,combined_mean\n";
  for (const auto& e : res.trace) {
    check_finite(e.combined_mean(), "embedding loss at epoch " + std::to_string(e.epoch));
    trace += std::to_string(e.epoch) + "," + fmt(e.symbol_loss) + "," + fmt(e.neighbor_loss) + "," +
             fmt(e.smoothing_loss) + "," + std::to_string(e.targets) + "," + fmt(e.combined_mean()) +
             "\n";
  }
  emit(r, "embeddings.emb", serialize_embeddings(res.space));
  emit(r, "loss_trace.csv", trace);
  emit(r, "vocab.txt", serialize_vocabulary(vocab));
  if (r.log && !res.trace.empty())
    *r.log << "trained " << res.trace.size() << " epoch(s), final mean loss "
           << res.trace.back().combined_mean() << "\n";
}

// ---------------------------------------------------------------------------
// features

void run_features(Run& r) {
  const auto emb_path = required_path(r.config, "embeddings");
  r.manifest->input(emb_path);
  const EmbeddingSpace space = load_embeddings(emb_path);
  json effective = r.config;
  effective["sampling_period_s"] = space.sampling_period_s;
  r.config = effective;
  r.manifest->config(effective);

  const Vocabulary vocab = load_vocab(r, required_path(r.config, "vocab"));
  Dataset ds = load_activity(r, paths_of(r.config, "activity"));

  InferConfig inf;
  inf.steps = r.config.value("infer_steps", inf.steps);
  inf.seed = r.config.value("seed", inf.seed);
  r.manifest->seed("infer", inf.seed);

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  if (space.granularity.level == GranularityLevel::Sample) {
    require(space.symbol_vectors.rows() == vocab.size(), ErrorCode::DimensionMismatch,
            "vocabulary does not match the embedding symbol table");
    for (const auto& s : ds.sequences) {
      ids.push_back(s.subject_id);
      rows.push_back(sample_features(vocab, space, s));
    }
  } else {
    const auto seqs = encode_dataset(vocab, ds);
    rows = corpus_features(space, seqs, inf);
    for (const auto& s : seqs) ids.push_back(s.subject_id);
  }
  for (const auto& row : rows)
    for (double v : row) check_finite(v, "feature");
  emit(r, "features.csv", write_features(ids, rows));
}

// ---------------------------------------------------------------------------
// train-linear

void run_train_linear(Run& r) {
  const Task task = task_of(r.config);
  const int k = class_count(task);
  const auto feat_path = required_path(r.config, "features");
  r.manifest->input(feat_path);
  FeatureTable ft = read_features(feat_path);

  const auto lab_path = required_path(r.config, "labels");
  r.manifest->input(lab_path);
  std::ifstream in(lab_path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + lab_path.string());
  const LabelTable table = parse_labels_csv(in);
  std::vector<LabelRecord> labels;
  for (const auto& id : ft.ids) {
    auto it = table.find(id);
    LabelRecord rec;
    rec.subject_id = id;
    labels.push_back(it == table.end() ? rec : it->second);
  }

  LogRegConfig lr;
  lr.l2 = r.config.value("l2", lr.l2);
  lr.epochs = r.config.value("epochs", lr.epochs);
  lr.lr = r.config.value("lr", lr.lr);
  const int repeats = r.config.value("repeats", 10);
  const double test_fraction = r.config.value("test_fraction", 0.2);
  const double dev_fraction = r.config.value("dev_fraction", 0.1);
  const std::uint64_t seed = r.config.value("seed", std::uint64_t{7});
  require(repeats >= 1, ErrorCode::InvalidConfig, "--repeats must be positive");

  json effective = r.config;
  effective.update({{"l2", lr.l2}, {"epochs", lr.epochs}, {"lr", lr.lr}, {"repeats", repeats},
                    {"test_fraction", test_fraction}, {"dev_fraction", dev_fraction}, {"seed", seed}});
  r.manifest->config(effective);
  r.manifest->seed("protocol_base", seed);

  const std::size_t n = ft.ids.size();
  auto split_for = [&](std::uint64_t s) { return make_split(n, test_fraction, dev_fraction, s); };
  auto probe = [&](std::uint64_t s) {
    LogRegConfig c = lr;
    c.seed = s;
    return probe_evaluation(ft.rows, labels, task, split_for(s), c);
  };
  auto majority = [&](std::uint64_t s) { return majority_evaluation(labels, task, split_for(s)); };
  auto random = [&](std::uint64_t s) {
    Evaluation ev = majority_evaluation(labels, task, split_for(s));
    ev.preds = predict_random(ev.golds.size(), k, derive_seed(s, 1));
    return ev;
  };
  const int threads = r.deterministic ? 1 : r.threads;
  std::vector<MetricsReport> reports{
      run_protocol("probe", probe, repeats, seed, threads),
      run_protocol("majority", majority, repeats, seed, threads),
      run_protocol("random", random, repeats, seed, threads)};

  // Model fitted on the first run's training rows, for inspection and reuse.
  const Split split = split_for(seed);
  const TaskRows rows = task_rows(labels, task, split.train);
  std::vector<std::vector<double>> xs;
  for (std::size_t i : rows.index) xs.push_back(ft.rows[i]);
  LogRegConfig c = lr;
  c.seed = seed;
  const LinearModel model = train_logreg(xs, rows.label, k, c);

  json report{{"task", to_string(task)}};
  for (const auto& rep : reports) report[rep.name] = rep.to_json();
  json mj{{"n_classes", model.n_classes},
          {"mean", model.mean},
          {"scale", model.scale},
          {"weights", model.weights}};
  emit(r, "report.json", report.dump(2) + "\n");
  emit(r, "table.txt", report_table(reports, k));
  emit(r, "model.json", mj.dump(2) + "\n");
  if (r.log) *r.log << report_table(reports, k);
}

// ---------------------------------------------------------------------------
// train-cnn / train-multi

void run_train_cnn(Run& r, bool multi) {
  Dataset ds = load_activity(r, paths_of(r.config, "activity"));
  attach_labels(r, ds, required_path(r.config, "labels"));

  Vocabulary vocab;
  if (auto v = optional_path(r.config, "vocab")) vocab = load_vocab(r, *v);
  else vocab = build_vocabulary(ds);
  const auto seqs = encode_dataset(vocab, ds);
  const auto labels = aligned_labels(ds);

  std::optional<EmbeddingSpace> pre;
  if (auto p = optional_path(r.config, "pretrained")) {
    r.manifest->input(*p);
    pre = load_embeddings(*p);
  }

  std::optional<TrainingState> state;
  if (auto ck = optional_path(r.config, "resume")) {
    r.manifest->input(*ck);
    state = load_checkpoint(*ck);
  }

  ModelTrainConfig cfg;
  if (state) {
    cfg = state->config;
  } else {
    NetworkSpec& spec = cfg.spec;
    if (multi) {
      spec.tasks.assign(kAllTasks.begin(), kAllTasks.end());
      spec.depth = kMultiTaskDepth;
      spec.alpha = pre ? kAlphaPretrain : kAlphaNoPretrain;
    } else {
      const Task t = task_of(r.config);
      spec.tasks = {t};
      spec.depth = default_depth(t);
      spec.alpha.fill(0.0);
      spec.alpha[static_cast<std::size_t>(t)] = 1.0;
    }
    if (pre) spec.embed_dim = pre->dim;
    from_json(r.config, spec);
    if (multi && r.config.contains("alpha_preset")) {
      const auto name = r.config["alpha_preset"].get<std::string>();
      require(name == "pretrain" || name == "no-pretrain" || name == "uniform",
              ErrorCode::InvalidConfig, "unknown alpha preset " + name);
      if (name == "pretrain") spec.alpha = kAlphaPretrain;
      else if (name == "no-pretrain") spec.alpha = kAlphaNoPretrain;
      else spec.alpha.fill(1.0 / kTaskCount);
    }
    spec.vocab_size = vocab.size();
    spec.seq_len = seqs.empty() ? 0 : seqs.front().symbols.size();
    from_json(r.config, cfg);
    from_json(r.config, spec);  // spec keys win over a nested "spec" object
    spec.vocab_size = vocab.size();
    spec.seq_len = seqs.empty() ? 0 : seqs.front().symbols.size();
    spec.validate();
  }
  const int target_epochs = r.config.value("epochs", cfg.epochs);
  require(!state || target_epochs >= state->epochs_done, ErrorCode::InvalidConfig,
          "--epochs is below the epochs already in the checkpoint");
  require(cfg.spec.vocab_size == vocab.size(), ErrorCode::ShapeMismatch,
          "vocabulary size differs from the network's embedding table");

  const double test_fraction = r.config.value("test_fraction", 0.2);
  const double dev_fraction = r.config.value("dev_fraction", 0.1);
  const std::uint64_t split_seed = r.config.value("split_seed", std::uint64_t{0});
  const Split split = make_split(seqs.size(), test_fraction, dev_fraction, split_seed);
  const auto train_labels = restrict_labels(labels, split.train);

  json effective = r.config;
  json cj;
  to_json(cj, cfg);
  effective["model"] = cj;
  effective["epochs"] = target_epochs;
  effective.update({{"test_fraction", test_fraction}, {"dev_fraction", dev_fraction},
                    {"split_seed", split_seed}});
  r.manifest->config(effective);
  r.manifest->seed("model", cfg.seed);
  r.manifest->seed("split", split_seed);

  if (!state) state = init_training(cfg, pre ? &*pre : nullptr);
  train_epochs(*state, seqs, train_labels, target_epochs - state->epochs_done);
  state->config.epochs = target_epochs;

  std::string trace = "epoch,loss,batches,train_accuracy\n";
  for (const auto& e : state->trace) {
    check_finite(e.loss, "training loss at epoch " + std::to_string(e.epoch));
    trace += std::to_string(e.epoch) + "," + fmt(e.loss) + "," + std::to_string(e.batches) + "," +
             fmt(e.train_accuracy) + "\n";
  }

  json report{{"split", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}}}};
  std::vector<MetricsReport> table;
  const std::uint64_t seeds[] = {cfg.seed};
  for (Task t : state->model.spec().tasks) {
    Evaluation ev = cnn_evaluation(state->model, seqs, labels, t, split.test);
    if (ev.golds.empty()) continue;
    const Evaluation base = majority_evaluation(labels, t, split);
    auto rep = summarize(std::string(to_string(t)), std::span(&ev, 1), seeds);
    auto maj = summarize(std::string(to_string(t)) + " majority", std::span(&base, 1), seeds);
    report["tasks"][std::string(to_string(t))] = {{"cnn", rep.to_json()}, {"majority", maj.to_json()}};
    table.push_back(std::move(rep));
    table.push_back(std::move(maj));
  }
  emit(r, "model.ckpt", serialize_checkpoint(*state));
  emit(r, "trace.csv", trace);
  emit(r, "vocab.txt", serialize_vocabulary(vocab));
  emit(r, "report.json", report.dump(2) + "\n");
  if (!table.empty()) {
    const std::vector<std::string> cols{"accuracy", "macro_f1", "weighted_f1"};
    const auto text = format_table(table, cols);
    emit(r, "table.txt", text);
    if (r.log) *r.log << text;
  }
}

// ---------------------------------------------------------------------------
// infer

void run_infer(Run& r) {
  r.manifest->config(r.config);
  const auto ck = required_path(r.config, "checkpoint");
  r.manifest->input(ck);
  TrainingState state = load_checkpoint(ck);
  const Vocabulary vocab = load_vocab(r, required_path(r.config, "vocab"));
  Dataset ds = load_activity(r, paths_of(r.config, "activity"));
  const auto seqs = encode_dataset(vocab, ds);
  const auto& spec = state.model.spec();
  require(vocab.size() == spec.vocab_size, ErrorCode::ShapeMismatch,
          "vocabulary size differs from the checkpoint");

  std::string out = "subject_id,task,pred,probabilities\n";
  for (const auto& s : seqs) {
    require(s.symbols.size() == spec.seq_len, ErrorCode::ShapeMismatch,
            s.subject_id + ": sequence length differs from the checkpoint");
    const auto probs = predict_proba(state.model, s);
    for (std::size_t h = 0; h < probs.size(); ++h) {
      std::string ps;
      for (double p : probs[h]) {
        check_finite(p, "probability");
        ps += (ps.empty() ? "" : " ") + fmt(p);
      }
      out += s.subject_id + "," + std::string(to_string(spec.tasks[h])) + "," +
             std::to_string(argmax(probs[h])) + "," + ps + "\n";
    }
  }
  emit(r, "predictions.csv", out);
}

// ---------------------------------------------------------------------------
// eval

void run_eval(Run& r) {
  r.manifest->config(r.config);
  const Task task = task_of(r.config);
  const auto pred_path = required_path(r.config, "predictions");
  const auto lab_path = required_path(r.config, "labels");
  r.manifest->input(pred_path);
  r.manifest->input(lab_path);
  std::ifstream in(lab_path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + lab_path.string());
  const LabelTable table = parse_labels_csv(in);

  std::istringstream ps(read_file(pred_path));
  std::string line;
  require(static_cast<bool>(std::getline(ps, line)), ErrorCode::EmptyInput, "no predictions");
  const auto header = split_csv(strip_cr(line));
  require(header.size() >= 3 && header[0] == "subject_id" && header[1] == "task" && header[2] == "pred",
          ErrorCode::HeaderMismatch, "predictions need subject_id,task,pred columns");
  Evaluation ev;
  ev.n_classes = class_count(task);
  std::size_t lineno = 1;
  while (std::getline(ps, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = pred_path.string() + ":" + std::to_string(lineno);
    require(cells.size() >= 3, ErrorCode::MalformedRow, where + ": too few columns");
    if (cells[1] != to_string(task)) continue;
    auto it = table.find(cells[0]);
    if (it == table.end() || !it->second[task]) continue;
    ev.preds.push_back(parse_int(cells[2], where));
    ev.golds.push_back(*it->second[task]);
  }
  require(!ev.golds.empty(), ErrorCode::InsufficientData, "no labelled predictions for the task");
  const std::uint64_t seeds[] = {0};
  const auto rep = summarize(std::string(to_string(task)), std::span(&ev, 1), seeds);
  const auto cm = ConfusionMatrix::from(ev.preds, ev.golds, ev.n_classes);
  json confusion = json::array();
  for (int g = 0; g < cm.classes(); ++g) {
    json row = json::array();
    for (int p = 0; p < cm.classes(); ++p) row.push_back(cm.at(g, p));
    confusion.push_back(row);
  }
  json report{{"task", to_string(task)}, {"report", rep.to_json()}, {"confusion", confusion}};
  emit(r, "report.json", report.dump(2) + "\n");
  const auto text = report_table({rep}, ev.n_classes);
  emit(r, "table.txt", text);
  if (r.log) *r.log << text;
}

// ---------------------------------------------------------------------------
// gradcheck

void run_gradcheck(Run& r) {
  NetworkSpec spec;
  spec.vocab_size = 12;
  spec.seq_len = 32;
  spec.embed_dim = 4;
  spec.filters = 3;
  spec.kernel = 3;
  spec.pool_window = 2;
  spec.depth = 2;
  spec.dense_units = 5;
  if (auto n = optional_path(r.config, "network")) {
    r.manifest->input(*n);
    from_json(json::parse(read_file(*n)), spec);
  }
  from_json(r.config, spec);
  spec.validate();
  const std::size_t batch = r.config.value("batch", std::size_t{4});
  const double tol = r.config.value("tolerance", 1e-4);
  const std::size_t per = r.config.value("max_per_param", std::size_t{0});
  const std::uint64_t seed = r.config.value("seed", std::uint64_t{7});
  json effective = r.config;
  json sj;
  to_json(sj, spec);
  effective["network"] = sj;
  effective.update({{"batch", batch}, {"tolerance", tol}, {"max_per_param", per}});
  r.manifest->config(effective);
  r.manifest->seed("gradcheck", seed);

  const auto rep = check_network_gradients(spec, batch, seed, tol, per);
  json j{{"passed", rep.passed},           {"max_rel_error", rep.max_rel_error},
         {"worst_path", rep.worst_path},   {"worst_index", rep.worst_index},
         {"worst_analytic", rep.worst_analytic}, {"worst_numeric", rep.worst_numeric},
         {"checked", rep.checked},         {"tolerance", rep.tolerance}};
  emit(r, "gradcheck.json", j.dump(2) + "\n");
  if (r.log)
    *r.log << (rep.passed ? "PASS" : "FAIL") << " max relative error " << rep.max_rel_error
           << " over " << rep.checked << " entries (worst " << rep.worst_path << ")\n";
  require(rep.passed, ErrorCode::NumericFailure,
          "gradient check failed at " + rep.worst_path + " (" + fmt(rep.max_rel_error) + ")");
}

// ---------------------------------------------------------------------------
// export

void run_export(Run& r) {
  r.manifest->config(r.config);
  const auto emb_path = required_path(r.config, "embeddings");
  r.manifest->input(emb_path);
  const EmbeddingSpace space = load_embeddings(emb_path);
  const auto format = r.config.value("format", std::string("tsv"));

  // Row names: raw symbol values at sample granularity, subject:index otherwise.
  std::vector<std::string> names;
  const Matrix* table = nullptr;
  if (space.granularity.level == GranularityLevel::Sample) {
    table = &space.symbol_vectors;
    for (std::size_t i = 0; i < table->rows(); ++i) names.push_back("symbol" + std::to_string(i));
  } else {
    table = &space.segment_vectors;
    for (std::size_t s = 0; s < space.subject_ids.size(); ++s)
      for (std::size_t k = 0; k < space.segments_per_subject[s]; ++k)
        names.push_back(space.subject_ids[s] + ":" + std::to_string(k));
  }
  require(names.size() == table->rows(), ErrorCode::ShapeMismatch, "row names do not match table");

  std::string out;
  std::string file;
  if (format == "tsv") {
    file = "embeddings.tsv";
    for (std::size_t i = 0; i < names.size(); ++i) {
      out += names[i];
      for (double v : table->row(i)) out += "\t" + fmt(v);
      out += '\n';
    }
  } else if (format == "word2vec") {
    file = "embeddings.w2v.txt";
    out = std::to_string(table->rows()) + " " + std::to_string(table->cols()) + "\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
      out += names[i];
      for (double v : table->row(i)) out += " " + fmt(v);
      out += '\n';
    }
  } else if (format == "json") {
    file = "embeddings.json";
    json vecs = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto row = table->row(i);
      vecs[names[i]] = std::vector<double>(row.begin(), row.end());
    }
    json j{{"granularity", to_string(space.granularity.level)},
           {"dim", space.dim},
           {"vectors", vecs}};
    out = j.dump() + "\n";
  } else {
    fail(ErrorCode::InvalidConfig, "unknown export format " + format);
  }
  emit(r, file, out);
}

}  // namespace acton::cli
