#include "acton_cli/cli.hpp"

#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "acton/error.hpp"
#include "acton/persist.hpp"
#include "commands.hpp"

namespace acton::cli {

using nlohmann::json;

namespace {

enum class Kind { Int, Double, Text, Paths, Switch, Alpha };

/// One flag bound to a key of the command's JSON configuration.
struct Flag {
  std::string name;
  std::string key;
  Kind kind;
  std::string help;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Flag> flags;
  std::function<void(Run&)> run;
};

const std::vector<Flag> kActivityFlags{
    {"--activity", "activity", Kind::Paths, "activity CSV (repeatable)"},
    {"--sampling-period", "sampling_period_s", Kind::Int, "seconds per sample (default 30)"},
    {"--days", "days", Kind::Int, "days kept per subject (default 7)"},
};

const std::vector<Flag> kNetworkFlags{
    {"--dim", "embed_dim", Kind::Int, "symbol embedding width (default 100)"},
    {"--filters", "filters", Kind::Int, "convolution filters (default 64)"},
    {"--kernel", "kernel", Kind::Int, "convolution width (default 5)"},
    {"--padding", "padding", Kind::Int, "convolution padding (default kernel-1)"},
    {"--pool", "pool_window", Kind::Int, "average-pool window (default 4)"},
    {"--pool-stride", "pool_stride", Kind::Int, "pool stride (default the window)"},
    {"--depth", "depth", Kind::Int, "conv/pool/norm blocks (default per task, 3 multi-task)"},
    {"--dense", "dense_units", Kind::Int, "dense width (default 64)"},
    {"--dropout", "dropout", Kind::Double, "dropout rate (default 0.5)"},
    {"--l1", "l1", Kind::Double, "L1 weight of the elastic net (default 0.25)"},
    {"--l2", "l2", Kind::Double, "L2 weight of the elastic net (default 0.25)"},
};

const std::vector<Flag> kCnnFlags{
    {"--labels", "labels", Kind::Paths, "labels CSV"},
    {"--vocab", "vocab", Kind::Paths, "vocabulary file (default: built from the activity)"},
    {"--pretrained", "pretrained", Kind::Paths, "sample-level embeddings to initialise E"},
    {"--resume", "resume", Kind::Paths, "checkpoint to continue from"},
    {"--epochs", "epochs", Kind::Int, "total epochs (default 30)"},
    {"--batch-size", "batch_size", Kind::Int, "mini-batch size (default 32)"},
    {"--lr", "lr", Kind::Double, "Adam learning rate (default 1e-3)"},
    {"--test-fraction", "test_fraction", Kind::Double, "held-out share (default 0.2)"},
    {"--dev-fraction", "dev_fraction", Kind::Double, "development share (default 0.1)"},
    {"--split-seed", "split_seed", Kind::Int, "seed of the train/dev/test split (default 0)"},
    {"--track-accuracy", "track_accuracy", Kind::Switch, "record training accuracy per epoch"},
};

std::vector<Flag> join(std::initializer_list<std::vector<Flag>> parts) {
  std::vector<Flag> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<Command> commands() {
  return {
      {"synth", "generate a synthetic actigraphy cohort",
       {{"--subjects", "n_subjects", Kind::Int, "number of subjects"},
        {"--days", "days", Kind::Int, "days per subject"},
        {"--sampling-period", "sampling_period_s", Kind::Int, "seconds per sample"},
        {"--labeled-fraction", "labeled_fraction", Kind::Double, "share of subjects with labels"}},
       run_synth},
      {"vocab", "build the activity symbol vocabulary", kActivityFlags, run_vocab},
      {"train-embed", "learn activity embeddings",
       join({kActivityFlags,
             {{"--unlabeled", "unlabeled", Kind::Paths, "extra unlabelled activity CSV (repeatable)"},
              {"--granularity", "granularity", Kind::Text, "sample, hour, day or week (default day)"},
              {"--dim", "dim", Kind::Int, "embedding width (default 100)"},
              {"--window", "window", Kind::Int, "window (default 20/20/30/50 by granularity)"},
              {"--negatives", "negatives", Kind::Int, "negative samples (default 5)"},
              {"--eta", "eta", Kind::Double, "smoothing strength (default 0.5 hour, 0.25 day)"},
              {"--neighbors", "neighbor_set_size", Kind::Int, "neighbour set size, 2 or 4"},
              {"--epochs", "epochs", Kind::Int, "epochs (default 20)"},
              {"--lr-start", "lr_start", Kind::Double, "initial learning rate (default 0.025)"},
              {"--lr-end", "lr_end", Kind::Double, "final learning rate (default 1e-4)"},
              {"--tol", "convergence_tol", Kind::Double, "early-stop relative tolerance"}}}),
       run_train_embed},
      {"features", "subject feature vectors from an embedding space",
       join({kActivityFlags,
             {{"--embeddings", "embeddings", Kind::Paths, "embedding file"},
              {"--vocab", "vocab", Kind::Paths, "vocabulary written with the embeddings"},
              {"--infer-steps", "infer_steps", Kind::Int, "inference epochs for new subjects (default 50)"}}}),
       run_features},
      {"train-linear", "logistic-regression probe with baselines",
       {{"--features", "features", Kind::Paths, "features CSV"},
        {"--labels", "labels", Kind::Paths, "labels CSV"},
        {"--task", "task", Kind::Text, "apnea, diabetes, hypertension or insomnia"},
        {"--repeats", "repeats", Kind::Int, "runs averaged (default 10)"},
        {"--test-fraction", "test_fraction", Kind::Double, "held-out share (default 0.2)"},
        {"--dev-fraction", "dev_fraction", Kind::Double, "development share (default 0.1)"},
        {"--l2", "l2", Kind::Double, "ridge penalty (default 1e-4)"},
        {"--epochs", "epochs", Kind::Int, "optimiser epochs (default 100)"},
        {"--lr", "lr", Kind::Double, "step size (default 0.05)"}},
       run_train_linear},
      {"train-cnn", "task-specific convolutional classifier",
       join({kActivityFlags, kCnnFlags, kNetworkFlags,
             {{"--task", "task", Kind::Text, "apnea, diabetes, hypertension or insomnia"}}}),
       [](Run& r) { run_train_cnn(r, false); }},
      {"train-multi", "multi-task convolutional classifier",
       join({kActivityFlags, kCnnFlags, kNetworkFlags,
             {{"--alpha", "alpha", Kind::Alpha,
               "task weights a,d,h,i or a preset: pretrain, no-pretrain, uniform"}}}),
       [](Run& r) { run_train_cnn(r, true); }},
      {"infer", "class predictions from a checkpoint",
       join({kActivityFlags,
             {{"--checkpoint", "checkpoint", Kind::Paths, "model checkpoint"},
              {"--vocab", "vocab", Kind::Paths, "vocabulary written with the model"}}}),
       run_infer},
      {"eval", "metrics of a predictions file",
       {{"--predictions", "predictions", Kind::Paths, "predictions CSV"},
        {"--labels", "labels", Kind::Paths, "labels CSV"},
        {"--task", "task", Kind::Text, "task to score"}},
       run_eval},
      {"gradcheck", "finite-difference check of the network gradients",
       join({kNetworkFlags,
             {{"--network", "network", Kind::Paths, "network spec JSON"},
              {"--vocab-size", "vocab_size", Kind::Int, "symbols"},
              {"--seq-len", "seq_len", Kind::Int, "sequence length"},
              {"--batch", "batch", Kind::Int, "batch size (default 4)"},
              {"--tolerance", "tolerance", Kind::Double, "max relative error (default 1e-4)"},
              {"--max-per-param", "max_per_param", Kind::Int, "entries checked per tensor (0 = all)"}}}),
       run_gradcheck},
      {"export", "convert embeddings to another format",
       {{"--embeddings", "embeddings", Kind::Paths, "embedding file"},
        {"--format", "format", Kind::Text, "tsv, word2vec or json"}},
       run_export},
  };
}

/// Raw flag text kept until parsing finishes.
struct Bound {
  const Flag* flag = nullptr;
  CLI::Option* opt = nullptr;
  std::string text;
  std::vector<std::string> texts;
  bool on = false;
};

json flag_value(const Bound& b) {
  const Flag& f = *b.flag;
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::InvalidConfig, f.name + ": " + why + " '" + b.text + "'");
  };
  switch (f.kind) {
    case Kind::Int: {
      try {
        std::size_t used = 0;
        long long v = std::stoll(b.text, &used);
        if (used != b.text.size()) bad("expected an integer");
        return v;
      } catch (const std::logic_error&) {
        bad("expected an integer");
      }
    }
    case Kind::Double: {
      try {
        std::size_t used = 0;
        double v = std::stod(b.text, &used);
        if (used != b.text.size()) bad("expected a number");
        return v;
      } catch (const std::logic_error&) {
        bad("expected a number");
      }
    }
    case Kind::Text:
      return b.text;
    case Kind::Paths:
      return b.texts;
    case Kind::Switch:
      return b.on;
    case Kind::Alpha: {
      if (b.text == "pretrain" || b.text == "no-pretrain" || b.text == "uniform") return b.text;
      json a = json::array();
      std::stringstream ss(b.text);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          a.push_back(std::stod(cell));
        } catch (const std::logic_error&) {
          bad("expected four comma-separated weights");
        }
      }
      if (a.size() != 4) bad("expected four comma-separated weights");
      return a;
    }
  }
  return nullptr;
}

/// A manifest can be passed back as --config; its effective config is used.
json read_config_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  require(j.is_object(), ErrorCode::InvalidConfig, path + ": expected a JSON object");
  if (j.contains("command") && j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

int code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig: return kUsage;
    case ErrorCode::NumericFailure: return kNumeric;
    default: return kData;
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"acton: activity embeddings and disorder classifiers", "acton"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  const auto cmds = commands();
  std::vector<std::vector<Bound>> bound(cmds.size());
  struct Common {
    std::string config;
    std::string out = ".";
    std::string seed;
    int threads = 1;
    bool deterministic = false;
  };
  std::vector<Common> common(cmds.size());
  std::vector<CLI::Option*> seed_opts(cmds.size()), threads_opts(cmds.size());
  std::vector<CLI::App*> subs;

  for (std::size_t c = 0; c < cmds.size(); ++c) {
    auto* sub = app.add_subcommand(cmds[c].name, cmds[c].help);
    subs.push_back(sub);
    auto& cm = common[c];
    sub->add_option("--config", cm.config, "JSON file whose keys override defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", cm.out, "output directory (default .)");
    seed_opts[c] = sub->add_option("--seed", cm.seed, "random seed (default $ACTON_SEED or 7)");
    threads_opts[c] = sub->add_option("--threads", cm.threads, "worker threads; >1 allows throughput mode");
    sub->add_flag("--deterministic", cm.deterministic, "force the single-writer path (default)");
    auto& bs = bound[c];
    bs.reserve(cmds[c].flags.size());
    for (const auto& f : cmds[c].flags) {
      bs.push_back({&f, nullptr, {}, {}, false});
      Bound& b = bs.back();
      if (f.kind == Kind::Switch) b.opt = sub->add_flag(f.name, b.on, f.help);
      else if (f.kind == Kind::Paths) b.opt = sub->add_option(f.name, b.texts, f.help);
      else b.opt = sub->add_option(f.name, b.text, f.help);
    }
  }

  std::vector<std::string> rev(argv.rbegin(), argv.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string help = app.help();
    for (auto* s : subs)
      if (s->parsed()) help = s->help();
    err << "ERROR " << error_code_name(ErrorCode::InvalidConfig) << ": " << e.what() << "\n" << help;
    return kUsage;
  }

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;
  const Command& cmd = cmds[which];
  const Common& cm = common[which];

  Manifest manifest(cmd.name, argv);
  Run run;
  run.out = cm.out;
  run.log = &out;
  run.manifest = &manifest;
  try {
    json cfg = json::object();
    if (const char* env = std::getenv("ACTON_SEED"); env && *env) {
      try {
        cfg["seed"] = std::stoull(env);
      } catch (const std::logic_error&) {
        fail(ErrorCode::InvalidConfig, std::string("ACTON_SEED is not a number: ") + env);
      }
    } else {
      cfg["seed"] = 7;
    }
    if (!cm.config.empty()) {
      manifest.input(cm.config);
      cfg.merge_patch(read_config_file(cm.config));
    }
    for (const auto& b : bound[which])
      if (b.opt->count() > 0) cfg[b.flag->key] = flag_value(b);
    if (seed_opts[which]->count() > 0) {
      try {
        cfg["seed"] = std::stoull(cm.seed);
      } catch (const std::logic_error&) {
        fail(ErrorCode::InvalidConfig, "--seed is not a number: " + cm.seed);
      }
    }
    if (cfg.contains("alpha") && cfg["alpha"].is_string()) {
      cfg["alpha_preset"] = cfg["alpha"];
      cfg.erase("alpha");
    }
    run.threads = cm.threads;
    require(run.threads >= 1, ErrorCode::InvalidConfig, "--threads must be positive");
    run.deterministic = cm.deterministic || run.threads == 1;
    if (threads_opts[which]->count() > 0) cfg["threads"] = run.threads;
    run.config = std::move(cfg);

    std::filesystem::create_directories(run.out);
    cmd.run(run);
    manifest.note("status", "ok");
    manifest.note("deterministic", run.deterministic);
    manifest.write(run.out);
    return kOk;
  } catch (const Error& e) {
    err << "ERROR " << e.what() << "\n";  // what() already leads with the code name
    return code_for(e.code());
  } catch (const json::exception& e) {
    err << "ERROR " << error_code_name(ErrorCode::InvalidConfig) << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "ERROR " << error_code_name(ErrorCode::IoError) << ": " << e.what() << "\n";
    return kData;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace acton::cli
