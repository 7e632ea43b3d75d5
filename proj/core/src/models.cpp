#include "acton/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acton/act2vec.hpp"
#include "acton/error.hpp"

namespace acton {

// ---------------------------------------------------------------------------
// Baselines

std::size_t argmax(std::span<const double> scores) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

int majority_class(std::span<const int> labels, int n_classes) {
  require(n_classes >= 2, ErrorCode::InvalidConfig, "need at least two classes");
  std::vector<std::size_t> freq(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) {
    require(y >= 0 && y < n_classes, ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
    ++freq[static_cast<std::size_t>(y)];
  }
  return static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());
}

std::vector<int> predict_majority(int majority, std::size_t n) { return std::vector<int>(n, majority); }

std::vector<int> predict_random(std::size_t n, int n_classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(n);
  for (auto& y : out) y = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_classes)));
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

std::vector<double> LinearModel::class_scores(std::span<const double> x) const {
  require(x.size() == mean.size(), ErrorCode::DimensionMismatch,
          "feature length " + std::to_string(x.size()) + " vs model " + std::to_string(mean.size()));
  const std::size_t d = mean.size();
  std::vector<double> probs;
  for (const auto& w : weights) {
    double s = w[d];
    for (std::size_t i = 0; i < d; ++i) s += w[i] * (x[i] - mean[i]) / scale[i];
    probs.push_back(sigmoid(s));
  }
  if (n_classes == 2) return {1.0 - probs[0], probs[0]};
  return probs;
}

int LinearModel::predict(std::span<const double> x) const {
  return static_cast<int>(argmax(class_scores(x)));
}

std::vector<int> LinearModel::predict(const std::vector<std::vector<double>>& xs) const {
  std::vector<int> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict(x));
  return out;
}

LinearModel train_logreg(const std::vector<std::vector<double>>& features,
                         std::span<const int> labels, int n_classes, const LogRegConfig& cfg) {
  require(features.size() == labels.size(), ErrorCode::LengthMismatch,
          "features and labels differ in length");
  require(!features.empty(), ErrorCode::EmptyInput, "no training rows");
  std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
  for (int y : labels) {
    require(y >= 0 && y < n_classes, ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
    seen[static_cast<std::size_t>(y)] = true;
  }
  require(std::count(seen.begin(), seen.end(), true) >= 2, ErrorCode::SingleClassTrainingSet,
          "training labels contain a single class");

  const std::size_t n = features.size(), d = features[0].size();
  LinearModel m;
  m.n_classes = n_classes;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 0.0);
  for (const auto& x : features) {
    require(x.size() == d, ErrorCode::DimensionMismatch, "ragged feature rows");
    for (std::size_t i = 0; i < d; ++i) {
      require(std::isfinite(x[i]), ErrorCode::NumericFailure, "non-finite feature");
      m.mean[i] += x[i];
    }
  }
  for (auto& v : m.mean) v /= static_cast<double>(n);
  for (const auto& x : features)
    for (std::size_t i = 0; i < d; ++i) m.scale[i] += (x[i] - m.mean[i]) * (x[i] - m.mean[i]);
  for (auto& v : m.scale) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-12) v = 1.0;
  }
  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) z[r][i] = (features[r][i] - m.mean[i]) / m.scale[i];

  const std::size_t units = n_classes == 2 ? 1 : static_cast<std::size_t>(n_classes);
  m.weights.assign(units, std::vector<double>(d + 1, 0.0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.lr / (1.0 + 0.05 * e);
    for (std::size_t r : order) {
      for (std::size_t u = 0; u < units; ++u) {
        const int positive = n_classes == 2 ? 1 : static_cast<int>(u);
        auto& w = m.weights[u];
        double s = w[d];
        for (std::size_t i = 0; i < d; ++i) s += w[i] * z[r][i];
        const double g = sigmoid(s) - (labels[r] == positive ? 1.0 : 0.0);
        for (std::size_t i = 0; i < d; ++i) w[i] -= lr * (g * z[r][i] + cfg.l2 * w[i]);
        w[d] -= lr * g;
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Network spec

std::size_t NetworkSpec::final_length() const {
  std::size_t L = seq_len;
  for (std::size_t i = 0; i < depth; ++i) {
    L = Conv1D::output_length(L, kernel, conv_padding());
    L = AvgPool1D::output_length(L, pool_window, stride());
  }
  return L;
}

namespace {

void check_alpha(std::span<const double> alpha) {
  double sum = 0.0;
  for (double a : alpha) {
    require(a >= 0.0 && std::isfinite(a), ErrorCode::AlphaSumViolation, "negative task weight");
    sum += a;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::AlphaSumViolation,
          "task weights sum to " + std::to_string(sum));
}

}  // namespace

void NetworkSpec::validate() const {
  require(vocab_size > 0 && seq_len > 0 && embed_dim > 0 && filters > 0 && kernel > 0 &&
              depth > 0 && dense_units > 0,
          ErrorCode::InvalidConfig, "network dimensions must be positive");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::InvalidConfig, "dropout must lie in [0, 1)");
  require(l1 >= 0.0 && l2 >= 0.0, ErrorCode::InvalidConfig, "negative regularisation");
  require(!tasks.empty(), ErrorCode::InvalidConfig, "no task heads");
  for (std::size_t i = 0; i < tasks.size(); ++i)
    for (std::size_t j = i + 1; j < tasks.size(); ++j)
      require(tasks[i] != tasks[j], ErrorCode::InvalidConfig, "duplicate task head");
  check_alpha(alpha);
  (void)final_length();
}

void to_json(nlohmann::json& j, const NetworkSpec& s) {
  std::vector<std::string> tasks;
  for (Task t : s.tasks) tasks.emplace_back(to_string(t));
  j = nlohmann::json{{"vocab_size", s.vocab_size},   {"seq_len", s.seq_len},
                     {"embed_dim", s.embed_dim},     {"filters", s.filters},
                     {"kernel", s.kernel},           {"pool_window", s.pool_window},
                     {"depth", s.depth},             {"dense_units", s.dense_units},
                     {"dropout", s.dropout},         {"l1", s.l1},
                     {"l2", s.l2},                   {"tasks", tasks},
                     {"alpha", s.alpha}};
  j["padding"] = s.padding ? nlohmann::json(*s.padding) : nlohmann::json(nullptr);
  j["pool_stride"] = s.pool_stride ? nlohmann::json(*s.pool_stride) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, NetworkSpec& s) {
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  s.seq_len = j.value("seq_len", s.seq_len);
  s.embed_dim = j.value("embed_dim", s.embed_dim);
  s.filters = j.value("filters", s.filters);
  s.kernel = j.value("kernel", s.kernel);
  s.pool_window = j.value("pool_window", s.pool_window);
  s.depth = j.value("depth", s.depth);
  s.dense_units = j.value("dense_units", s.dense_units);
  s.dropout = j.value("dropout", s.dropout);
  s.l1 = j.value("l1", s.l1);
  s.l2 = j.value("l2", s.l2);
  if (j.contains("padding"))
    s.padding = j["padding"].is_null() ? std::nullopt
                                       : std::optional<std::size_t>(j["padding"].get<std::size_t>());
  if (j.contains("pool_stride"))
    s.pool_stride = j["pool_stride"].is_null()
                        ? std::nullopt
                        : std::optional<std::size_t>(j["pool_stride"].get<std::size_t>());
  if (j.contains("tasks")) {
    s.tasks.clear();
    for (const auto& name : j["tasks"]) {
      auto t = parse_task(name.get<std::string>());
      require(t.has_value(), ErrorCode::InvalidConfig, "unknown task " + name.get<std::string>());
      s.tasks.push_back(*t);
    }
  }
  if (j.contains("alpha")) {
    const auto& a = j["alpha"];
    if (a.is_object()) {
      s.alpha.fill(0.0);
      for (const auto& [k, v] : a.items()) {
        auto t = parse_task(k);
        require(t.has_value(), ErrorCode::InvalidConfig, "unknown task " + k);
        s.alpha[static_cast<std::size_t>(*t)] = v.get<double>();
      }
    } else {
      require(a.size() == kTaskCount, ErrorCode::InvalidConfig, "alpha needs four entries");
      for (std::size_t i = 0; i < kTaskCount; ++i) s.alpha[i] = a[i].get<double>();
    }
  }
}

std::size_t default_depth(Task task) noexcept { return task == Task::Diabetes ? 4 : 3; }

double multitask_loss(std::span<const double> losses, std::span<const double> alpha) {
  require(losses.size() == alpha.size(), ErrorCode::LengthMismatch,
          "one weight per task loss required");
  check_alpha(alpha);
  double s = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) s += alpha[i] * losses[i];
  return s;
}

double multitask_loss(std::span<const double> losses, std::span<const double> alpha,
                      std::span<const bool> present) {
  require(losses.size() == alpha.size() && present.size() == alpha.size(),
          ErrorCode::LengthMismatch, "one weight per task loss required");
  check_alpha(alpha);
  double mass = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (present[i]) mass += alpha[i];
  if (mass <= 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (present[i]) s += alpha[i] / mass * losses[i];
  return s;
}

// ---------------------------------------------------------------------------
// CnnModel

CnnModel::CnnModel(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  const std::size_t d = spec_.embed_dim, N = spec_.filters, k = spec_.kernel;
  Rng rng(derive_seed(seed, kShapeInitStream));

  embed = Embedding(spec_.vocab_size, d);
  const double r = 0.5 / static_cast<double>(d);
  for (auto& v : embed.table.value.values()) v = uniform(rng, -r, r);

  for (std::size_t i = 0; i < spec_.depth; ++i) {
    const std::size_t in = i == 0 ? d : N;
    convs.emplace_back(in, N, k, spec_.conv_padding(), true);
    init_uniform_fan_in(convs.back().weight.value, k * in, rng);
    pools.emplace_back(spec_.pool_window, spec_.stride());
    norms.emplace_back(N);
  }
  const std::size_t flat = spec_.final_length() * N;
  dense = Dense(flat, spec_.dense_units, true);
  init_uniform_fan_in(dense.weight.value, flat, rng);
  drop = Dropout(spec_.dropout);

  // each head draws from its own stream so adding or removing heads leaves
  // the others (and the shared encoder) unchanged
  for (Task t : spec_.tasks) {
    Rng hr(derive_seed(seed, kHeadInitStream, static_cast<std::uint64_t>(t)));
    Head h{t, Dense(spec_.dense_units, static_cast<std::size_t>(class_count(t)), false)};
    init_uniform_fan_in(h.layer.weight.value, spec_.dense_units, hr);
    heads.push_back(std::move(h));
  }
}

std::vector<Tensor> CnnModel::forward(std::span<const SymbolId> ids, std::size_t batch, Mode mode,
                                      Rng& rng) {
  require(batch > 0 && ids.size() == batch * spec_.seq_len, ErrorCode::LengthMismatch,
          "expected " + std::to_string(batch) + " sequences of length " +
              std::to_string(spec_.seq_len));
  batch_ = batch;
  Tensor x = embed.forward(ids, batch);
  for (std::size_t i = 0; i < convs.size(); ++i) {
    x = convs[i].forward(x);
    x = pools[i].forward(x);
    x = norms[i].forward(x, mode);
  }
  pre_flatten_shape_ = x.shape();
  x.reshape({batch, x.size() / batch});
  Tensor z = drop.forward(dense.forward(x), mode, rng);
  std::vector<Tensor> probs;
  probs.reserve(heads.size());
  for (auto& h : heads) probs.push_back(softmax(h.layer.forward(z)));
  return probs;
}

void CnnModel::backward(std::span<const Tensor* const> d_logits) {
  require(d_logits.size() == heads.size(), ErrorCode::ShapeMismatch, "one gradient slot per head");
  Tensor dz({batch_, spec_.dense_units});
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (!d_logits[h]) continue;
    const Tensor g = heads[h].layer.backward(*d_logits[h]);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += g[i];
  }
  Tensor dx = dense.backward(drop.backward(dz));
  dx.reshape(pre_flatten_shape_);
  for (std::size_t i = convs.size(); i-- > 0;) {
    dx = norms[i].backward(dx);
    dx = pools[i].backward(dx);
    dx = convs[i].backward(dx);
  }
  embed.backward(dx);
}

std::vector<Param*> CnnModel::shared_parameters() {
  std::vector<Param*> out{&embed.table};
  for (std::size_t i = 0; i < convs.size(); ++i) {
    out.push_back(&convs[i].weight);
    out.push_back(&convs[i].bias);
    out.push_back(&norms[i].gamma);
    out.push_back(&norms[i].beta);
  }
  out.push_back(&dense.weight);
  out.push_back(&dense.bias);
  return out;
}

std::vector<Param*> CnnModel::parameters() {
  auto out = shared_parameters();
  for (auto& h : heads) {
    out.push_back(&h.layer.weight);
    out.push_back(&h.layer.bias);
  }
  return out;
}

std::vector<const Param*> CnnModel::parameters() const {
  auto ps = const_cast<CnnModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::vector<std::string> CnnModel::parameter_names() const {
  std::vector<std::string> names{"embed.table"};
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const std::string k = std::to_string(i);
    names.push_back("conv" + k + ".weight");
    names.push_back("conv" + k + ".bias");
    names.push_back("bn" + k + ".gamma");
    names.push_back("bn" + k + ".beta");
  }
  names.emplace_back("dense.weight");
  names.emplace_back("dense.bias");
  for (const auto& h : heads) {
    names.push_back("head." + std::string(to_string(h.task)) + ".weight");
    names.push_back("head." + std::string(to_string(h.task)) + ".bias");
  }
  return names;
}

std::vector<Tensor*> CnnModel::buffers() {
  std::vector<Tensor*> out;
  for (auto& n : norms) {
    out.push_back(&n.running_mean);
    out.push_back(&n.running_var);
  }
  return out;
}

std::vector<const Tensor*> CnnModel::buffers() const {
  auto bs = const_cast<CnnModel*>(this)->buffers();
  return {bs.begin(), bs.end()};
}

std::optional<std::size_t> CnnModel::head_index(Task task) const {
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i].task == task) return i;
  return std::nullopt;
}

Head& CnnModel::head(Task task) {
  auto i = head_index(task);
  require(i.has_value(), ErrorCode::InvalidConfig, "model has no head for " + std::string(to_string(task)));
  return heads[*i];
}

const Head& CnnModel::head(Task task) const { return const_cast<CnnModel*>(this)->head(task); }

// ---------------------------------------------------------------------------
// Training

void to_json(nlohmann::json& j, const ModelTrainConfig& c) {
  j = nlohmann::json{{"spec", c.spec},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"lr", c.adam.lr},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"adam_eps", c.adam.eps},
                     {"seed", c.seed},
                     {"track_accuracy", c.track_accuracy}};
}

void from_json(const nlohmann::json& j, ModelTrainConfig& c) {
  if (j.contains("spec")) from_json(j["spec"], c.spec);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam.lr = j.value("lr", c.adam.lr);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("adam_eps", c.adam.eps);
  c.seed = j.value("seed", c.seed);
  c.track_accuracy = j.value("track_accuracy", c.track_accuracy);
}

TrainingState init_training(const ModelTrainConfig& cfg, const EmbeddingSpace* pretrained) {
  require(cfg.batch_size > 0 && cfg.epochs >= 0, ErrorCode::InvalidConfig, "bad batch size or epochs");
  TrainingState st;
  st.config = cfg;
  st.model = CnnModel(cfg.spec, cfg.seed);
  if (pretrained) {
    const Matrix& sv = pretrained->symbol_vectors;
    require(sv.rows() > 0, ErrorCode::NoSymbolVectors,
            "pretrained space has no symbol vectors (train it at sample granularity)");
    require(sv.rows() == cfg.spec.vocab_size && sv.cols() == cfg.spec.embed_dim,
            ErrorCode::DimensionMismatch,
            "pretrained table " + std::to_string(sv.rows()) + "x" + std::to_string(sv.cols()) +
                " vs embedding " + std::to_string(cfg.spec.vocab_size) + "x" +
                std::to_string(cfg.spec.embed_dim));
    std::copy(sv.data().begin(), sv.data().end(), st.model.embed.table.value.data());
  }
  st.moments.resize(st.model.parameters().size());
  return st;
}

namespace {

std::vector<SymbolId> gather_ids(std::span<const ActivitySequence> seqs,
                                 std::span<const std::size_t> idx) {
  std::vector<SymbolId> ids;
  for (std::size_t i : idx) ids.insert(ids.end(), seqs[i].symbols.begin(), seqs[i].symbols.end());
  return ids;
}

}  // namespace

void train_epochs(TrainingState& st, std::span<const ActivitySequence> seqs,
                  std::span<const LabelRecord> labels, int epochs) {
  require(seqs.size() == labels.size(), ErrorCode::LengthMismatch,
          "one label record per sequence required");
  CnnModel& m = st.model;
  const NetworkSpec& spec = m.spec();
  const ModelTrainConfig& cfg = st.config;
  for (const auto& s : seqs)
    require(s.symbols.size() == spec.seq_len, ErrorCode::LengthMismatch,
            "sequence " + s.subject_id + " has length " + std::to_string(s.symbols.size()));

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (const auto& h : m.heads)
      if (spec.alpha[static_cast<std::size_t>(h.task)] > 0.0 && labels[i][h.task].has_value()) {
        pool.push_back(i);
        break;
      }
  require(!pool.empty(), ErrorCode::NoLabeledSubjects, "no subject carries a label for a weighted task");

  auto params = m.parameters();
  const std::size_t n_shared = m.shared_parameters().size();
  if (st.moments.size() != params.size()) st.moments.resize(params.size());
  const std::size_t H = m.heads.size();
  const std::size_t rows_per_item = spec.final_length();

  for (int e = 0; e < epochs; ++e) {
    const int epoch = st.epochs_done;
    Rng rng(derive_seed(cfg.seed, kBatchStream, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = pool;
    shuffle(order.begin(), order.end(), rng);
    ModelEpoch rec;
    rec.epoch = epoch + 1;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t bn = std::min(cfg.batch_size, order.size() - b0);
      if (bn * rows_per_item < 2) continue;  // batch-norm needs two rows
      std::span<const std::size_t> idx(order.data() + b0, bn);
      const auto ids = gather_ids(seqs, idx);
      const auto probs = m.forward(ids, bn, Mode::Train, rng);

      std::vector<CrossEntropyResult> ce(H);
      std::vector<bool> present(H, false);
      double mass = 0.0;
      for (std::size_t h = 0; h < H; ++h) {
        const Task t = m.heads[h].task;
        std::vector<int> gold(bn, -1);
        for (std::size_t r = 0; r < bn; ++r)
          if (auto y = labels[idx[r]][t]) gold[r] = *y;
        ce[h] = cross_entropy_elastic_net(probs[h], gold, m.heads[h].layer.weight.value, spec.l1, spec.l2);
        const double a = spec.alpha[static_cast<std::size_t>(t)];
        present[h] = ce[h].counted > 0 && a > 0.0;
        if (present[h]) mass += a;
      }
      if (mass <= 0.0) continue;

      for (auto* p : params) p->zero_grad();
      std::vector<Tensor> scaled(H);
      std::vector<const Tensor*> slots(H, nullptr);
      double loss = 0.0;
      for (std::size_t h = 0; h < H; ++h) {
        if (!present[h]) continue;
        const double w = spec.alpha[static_cast<std::size_t>(m.heads[h].task)] / mass;
        scaled[h] = ce[h].d_logits;
        for (auto& v : scaled[h].values()) v *= w;
        slots[h] = &scaled[h];
        loss += w * ce[h].loss;
      }
      require(std::isfinite(loss), ErrorCode::NumericFailure,
              "non-finite training loss at epoch " + std::to_string(epoch + 1));
      m.backward(slots);
      for (std::size_t h = 0; h < H; ++h) {
        if (!present[h]) continue;
        const double w = spec.alpha[static_cast<std::size_t>(m.heads[h].task)] / mass;
        auto& g = m.heads[h].layer.weight.grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * ce[h].d_weight[i];
      }
      for (std::size_t p = 0; p < n_shared; ++p) adam_step(*params[p], st.moments[p], cfg.adam);
      for (std::size_t h = 0; h < H; ++h) {
        if (!present[h]) continue;
        const std::size_t p = n_shared + 2 * h;
        adam_step(*params[p], st.moments[p], cfg.adam);
        adam_step(*params[p + 1], st.moments[p + 1], cfg.adam);
      }
      rec.loss += loss;
      ++rec.batches;
    }
    if (rec.batches) rec.loss /= static_cast<double>(rec.batches);
    if (cfg.track_accuracy) {
      std::vector<ActivitySequence> members;
      for (std::size_t i : pool) members.push_back(seqs[i]);
      const auto preds = predict(m, members, cfg.batch_size);
      double acc = 0.0;
      std::size_t used = 0;
      for (std::size_t h = 0; h < H; ++h) {
        std::size_t hit = 0, cnt = 0;
        for (std::size_t j = 0; j < pool.size(); ++j)
          if (auto y = labels[pool[j]][m.heads[h].task]) {
            ++cnt;
            hit += preds[h][j] == *y ? 1 : 0;
          }
        if (cnt && spec.alpha[static_cast<std::size_t>(m.heads[h].task)] > 0.0) {
          acc += static_cast<double>(hit) / static_cast<double>(cnt);
          ++used;
        }
      }
      rec.train_accuracy = used ? acc / static_cast<double>(used) : 0.0;
    }
    st.trace.push_back(rec);
    ++st.epochs_done;
  }
}

TrainingState train_model(const ModelTrainConfig& cfg, std::span<const ActivitySequence> seqs,
                          std::span<const LabelRecord> labels, const EmbeddingSpace* pretrained) {
  TrainingState st = init_training(cfg, pretrained);
  train_epochs(st, seqs, labels, cfg.epochs);
  return st;
}

std::vector<std::vector<int>> predict(CnnModel& model, std::span<const ActivitySequence> seqs,
                                      std::size_t batch_size) {
  std::vector<std::vector<int>> out(model.heads.size());
  Rng unused(0);
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (std::size_t b0 = 0; b0 < seqs.size(); b0 += batch_size) {
    const std::size_t bn = std::min(batch_size, seqs.size() - b0);
    std::vector<SymbolId> ids;
    for (std::size_t i = b0; i < b0 + bn; ++i) {
      require(seqs[i].symbols.size() == model.spec().seq_len, ErrorCode::LengthMismatch,
              "sequence " + seqs[i].subject_id + " has the wrong length");
      ids.insert(ids.end(), seqs[i].symbols.begin(), seqs[i].symbols.end());
    }
    const auto probs = model.forward(ids, bn, Mode::Eval, unused);
    for (std::size_t h = 0; h < probs.size(); ++h) {
      const std::size_t K = probs[h].dim(1);
      for (std::size_t r = 0; r < bn; ++r)
        out[h].push_back(static_cast<int>(
            argmax(std::span<const double>(probs[h].data() + r * K, K))));
    }
  }
  return out;
}

std::vector<std::vector<double>> predict_proba(CnnModel& model, const ActivitySequence& seq) {
  Rng unused(0);
  const auto probs = model.forward(seq.symbols, 1, Mode::Eval, unused);
  std::vector<std::vector<double>> out;
  for (const auto& p : probs) out.emplace_back(p.storage());
  return out;
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport check_network_gradients(const NetworkSpec& spec, std::size_t batch,
                                        std::uint64_t seed, double tolerance,
                                        std::size_t max_per_param) {
  CnnModel m(spec, seed);
  m.drop = Dropout(0.0);
  Rng rng(derive_seed(seed, 31));
  // perturb batch-norm affine parameters and biases so their gradients are generic
  for (auto& n : m.norms) {
    for (auto& v : n.gamma.value.values()) v = uniform(rng, 0.5, 1.5);
    for (auto& v : n.beta.value.values()) v = uniform(rng, -0.5, 0.5);
  }
  std::vector<SymbolId> ids(batch * spec.seq_len);
  for (auto& id : ids) id = static_cast<SymbolId>(uniform_index(rng, spec.vocab_size));
  std::vector<std::vector<int>> gold(m.heads.size());
  for (std::size_t h = 0; h < m.heads.size(); ++h)
    for (std::size_t r = 0; r < batch; ++r)
      gold[h].push_back(static_cast<int>(
          uniform_index(rng, static_cast<std::size_t>(class_count(m.heads[h].task)))));

  auto weight_of = [&](std::size_t h) { return spec.alpha[static_cast<std::size_t>(m.heads[h].task)]; };
  Rng unused(0);
  auto loss = [&] {
    const auto probs = m.forward(ids, batch, Mode::Train, unused);
    double total = 0.0;
    for (std::size_t h = 0; h < probs.size(); ++h)
      total += weight_of(h) *
               cross_entropy_elastic_net(probs[h], gold[h], m.heads[h].layer.weight.value, spec.l1, spec.l2).loss;
    return total;
  };

  auto params = m.parameters();
  for (auto* p : params) p->zero_grad();
  const auto probs = m.forward(ids, batch, Mode::Train, unused);
  std::vector<Tensor> scaled(m.heads.size());
  std::vector<const Tensor*> slots;
  std::vector<Tensor> dw(m.heads.size());
  for (std::size_t h = 0; h < probs.size(); ++h) {
    auto ce = cross_entropy_elastic_net(probs[h], gold[h], m.heads[h].layer.weight.value, spec.l1, spec.l2);
    scaled[h] = ce.d_logits;
    for (auto& v : scaled[h].values()) v *= weight_of(h);
    dw[h] = ce.d_weight;
    slots.push_back(&scaled[h]);
  }
  m.backward(slots);
  for (std::size_t h = 0; h < m.heads.size(); ++h) {
    auto& g = m.heads[h].layer.weight.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight_of(h) * dw[h][i];
  }

  const auto names = m.parameter_names();
  std::vector<GradTarget> targets;
  for (std::size_t i = 0; i < params.size(); ++i)
    targets.push_back({names[i], params[i]->value.values(), params[i]->grad.values()});
  return check_gradients(loss, targets, tolerance, 1e-5, max_per_param);
}

}  // namespace acton
