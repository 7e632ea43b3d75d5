#include "acton/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "acton/digest.hpp"
#include "acton/random.hpp"

namespace acton {
namespace {

constexpr std::uint64_t kSubjectStream = 101;
constexpr double kPi = 3.14159265358979323846;

using Mat4 = Eigen::Matrix<double, kTaskCount, kTaskCount>;

Mat4 to_eigen(const CorrelationMatrix& m) {
  Mat4 e;
  for (std::size_t i = 0; i < kTaskCount; ++i)
    for (std::size_t j = 0; j < kTaskCount; ++j) e(static_cast<long>(i), static_cast<long>(j)) = m[i][j];
  return e;
}

CorrelationMatrix from_eigen(const Mat4& e) {
  CorrelationMatrix m{};
  for (std::size_t i = 0; i < kTaskCount; ++i)
    for (std::size_t j = 0; j < kTaskCount; ++j) m[i][j] = e(static_cast<long>(i), static_cast<long>(j));
  return m;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_sf(double x) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), x));
}

// P(Z1 > a, Z2 > b) - P(Z1 > a) P(Z2 > b) for standard bivariate normal with
// correlation r, via d/dr Phi2(a, b; r) = phi2(a, b; r).
double excess_joint_tail(double a, double b, double r) {
  if (r == 0.0) return 0.0;
  auto density = [a, b](double s) {
    const double q = 1.0 - s * s;
    return std::exp(-(a * a - 2.0 * s * a * b + b * b) / (2.0 * q)) / (2.0 * kPi * std::sqrt(q));
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(density, 0.0, r, 15, 1e-12);
}

struct OrdinalMoments {
  double mean = 0.0;
  double var = 0.0;
};

OrdinalMoments ordinal_moments(std::span<const double> th) {
  OrdinalMoments m;
  double second = 0.0;
  for (double a : th) m.mean += normal_sf(a);
  for (double a : th)
    for (double b : th) second += normal_sf(std::max(a, b));
  m.var = second - m.mean * m.mean;
  return m;
}

struct SubjectDraw {
  RawSequence sequence;
  std::optional<LabelRecord> labels;
};

int day_of_week(std::size_t day) { return static_cast<int>(day % 7); }

SubjectDraw draw_subject(const SynthConfig& cfg, std::size_t s, const Eigen::Matrix<double, kTaskCount, kTaskCount>& chol,
                         const std::array<std::vector<double>, kTaskCount>& thresholds) {
  Rng rng(derive_seed(cfg.seed, kSubjectStream, s));
  SubjectDraw out;
  char id[32];
  std::snprintf(id, sizeof id, "subj%05zu", s);
  out.sequence.subject_id = id;
  out.sequence.sampling_period_s = cfg.sampling_period_s;

  // labels from the latent Gaussian copula
  Eigen::Matrix<double, kTaskCount, 1> nz;
  for (std::size_t t = 0; t < kTaskCount; ++t) nz(static_cast<long>(t)) = standard_normal(rng);
  const Eigen::Matrix<double, kTaskCount, 1> z = chol * nz;
  std::array<int, kTaskCount> truth{};
  for (std::size_t t = 0; t < kTaskCount; ++t)
    for (double th : thresholds[t]) truth[t] += z(static_cast<long>(t)) > th ? 1 : 0;

  const bool labelled = uniform01(rng) < cfg.labeled_fraction;
  LabelRecord rec;
  rec.subject_id = out.sequence.subject_id;
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    const bool has = uniform01(rng) < cfg.tasks[t].label_fraction;
    if (labelled && has) rec.values[t] = truth[t];
  }
  if (labelled && rec.any()) out.labels = rec;

  // archetype effects, combined over the subject's positive labels
  const BaseSignal& b = cfg.base;
  double amplitude = b.amplitude_median * std::exp(b.amplitude_log_sd * standard_normal(rng));
  double movement_p = b.sleep_movement_probability;
  std::array<double, 7> day_factor{1, 1, 1, 1, 1, 1, 1};
  auto suppress = [&](const std::vector<int>& days, double cut, bool compensate) {
    if (cut == 0.0 || days.empty()) return;
    std::array<bool, 7> hit{};
    for (int d : days) hit[static_cast<std::size_t>(((d % 7) + 7) % 7)] = true;
    const auto affected = static_cast<double>(std::count(hit.begin(), hit.end(), true));
    for (std::size_t d = 0; d < 7; ++d) {
      if (hit[d]) day_factor[d] *= 1.0 - cut;
      else if (compensate && affected < 7) day_factor[d] *= 1.0 + cut * affected / (7.0 - affected);
    }
  };
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    const Archetype& a = cfg.tasks[t].archetype;
    if (truth[t] == 0) {
      suppress(a.negative_suppression_days, a.daytime_suppression, a.weekday_compensation);
      continue;
    }
    const double severity = class_count(static_cast<Task>(t)) == 2 ? 1.0 : 0.5 * truth[t];
    amplitude *= 1.0 + (a.amplitude_scale - 1.0) * severity;
    movement_p += a.fragmentation_rate * severity;
    suppress(a.suppression_days, a.daytime_suppression * severity, a.weekday_compensation);
  }
  movement_p = std::clamp(movement_p, 0.0, 1.0);

  const double onset_mean = b.sleep_onset_hour + b.sleep_onset_sd * standard_normal(rng);
  const auto n_days = static_cast<std::size_t>(cfg.days);
  // night k starts on day k-1 evening; night 0 covers the first morning
  std::vector<double> night_start(n_days + 1);
  for (std::size_t k = 0; k <= n_days; ++k)
    night_start[k] = (static_cast<double>(k) - 1.0) * 24.0 + onset_mean +
                     b.sleep_onset_daily_sd * standard_normal(rng);

  const std::size_t n = samples_for_days(cfg.days, cfg.sampling_period_s);
  const double hours_per_sample = cfg.sampling_period_s / 3600.0;
  const double sigma = b.noise_log_sd;
  out.sequence.counts.resize(n);
  std::size_t night = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t_h = static_cast<double>(i) * hours_per_sample;
    while (night + 1 <= n_days && t_h >= night_start[night + 1]) ++night;
    const bool asleep = t_h >= night_start[night] && t_h < night_start[night] + b.sleep_hours;
    RawCount c = 0;
    if (asleep) {
      if (uniform01(rng) < movement_p)
        c = 1 + static_cast<RawCount>(std::floor(-b.sleep_movement_mean * std::log1p(-uniform01(rng))));
    } else if (uniform01(rng) >= b.idle_probability) {
      const std::size_t day = static_cast<std::size_t>(t_h / 24.0);
      const double hour = std::fmod(t_h, 24.0);
      const double mu = amplitude * day_factor[static_cast<std::size_t>(day_of_week(day))] *
                        (1.0 + b.circadian_depth * std::sin(2.0 * kPi * (hour - 10.0) / 24.0));
      const double v = mu * std::exp(sigma * standard_normal(rng) - 0.5 * sigma * sigma);
      c = static_cast<RawCount>(std::lround(v));
    }
    out.sequence.counts[i] = std::clamp<RawCount>(c, 0, kMaxActivityCount);
  }
  return out;
}

}  // namespace

CorrelationMatrix identity_correlation() {
  CorrelationMatrix m{};
  for (std::size_t i = 0; i < kTaskCount; ++i) m[i][i] = 1.0;
  return m;
}

SynthConfig::SynthConfig() {
  auto& apnea = tasks[static_cast<std::size_t>(Task::Apnea)];
  apnea.prevalence = 0.3;
  apnea.archetype.fragmentation_rate = 0.12;
  auto& diabetes = tasks[static_cast<std::size_t>(Task::Diabetes)];
  diabetes.archetype.amplitude_scale = 0.8;
  auto& hyper = tasks[static_cast<std::size_t>(Task::Hypertension)];
  hyper.prevalence = 0.35;
  hyper.archetype.daytime_suppression = 0.2;
  auto& insomnia = tasks[static_cast<std::size_t>(Task::Insomnia)];
  insomnia.archetype.fragmentation_rate = 0.08;
  insomnia.archetype.daytime_suppression = 0.1;
}

std::vector<double> task_thresholds(Task task, const TaskSynthSpec& spec) {
  if (class_count(task) == 2) {
    require(spec.prevalence > 0.0 && spec.prevalence < 1.0, ErrorCode::InvalidConfig,
            "prevalence must lie in (0, 1)");
    return {normal_quantile(1.0 - spec.prevalence)};
  }
  return {normal_quantile(1.0 / 3.0), normal_quantile(2.0 / 3.0)};
}

double implied_label_correlation(double r, std::span<const double> ta, std::span<const double> tb) {
  double cov = 0.0;
  for (double a : ta)
    for (double b : tb) cov += excess_joint_tail(a, b, r);
  const auto ma = ordinal_moments(ta);
  const auto mb = ordinal_moments(tb);
  return cov / std::sqrt(ma.var * mb.var);
}

double calibrate_latent_correlation(double target, std::span<const double> ta,
                                    std::span<const double> tb) {
  if (target == 0.0) return 0.0;
  double lo = -0.9999, hi = 0.9999;
  const double f_lo = implied_label_correlation(lo, ta, tb);
  const double f_hi = implied_label_correlation(hi, ta, tb);
  require(target >= f_lo - 1e-9 && target <= f_hi + 1e-9, ErrorCode::InfeasibleCorrelation,
          "label correlation " + std::to_string(target) + " outside achievable range [" +
              std::to_string(f_lo) + ", " + std::to_string(f_hi) + "]");
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (implied_label_correlation(mid, ta, tb) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

CorrelationMatrix nearest_correlation(const CorrelationMatrix& m) {
  Mat4 y = to_eigen(m);
  Mat4 ds = Mat4::Zero();
  for (int it = 0; it < 500; ++it) {
    const Mat4 r = y - ds;
    Eigen::SelfAdjointEigenSolver<Mat4> es(r);
    const auto vals = es.eigenvalues().cwiseMax(1e-10);
    const Mat4 x = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
    ds = x - r;
    Mat4 next = x;
    next.diagonal().setOnes();
    if ((next - y).norm() < 1e-14) {
      y = next;
      break;
    }
    y = next;
  }
  return from_eigen(y);
}

SynthOutput generate_cohort(const SynthConfig& cfg) {
  require(cfg.n_subjects > 0, ErrorCode::InvalidConfig, "n_subjects must be positive");
  require(cfg.days > 0, ErrorCode::InvalidConfig, "days must be positive");
  require(cfg.labeled_fraction >= 0.0 && cfg.labeled_fraction <= 1.0, ErrorCode::InvalidConfig,
          "labeled_fraction must lie in [0, 1]");
  require(cfg.threads >= 1, ErrorCode::InvalidConfig, "threads must be >= 1");
  samples_for_days(cfg.days, cfg.sampling_period_s);

  SynthOutput out;
  std::array<std::vector<double>, kTaskCount> thresholds;
  for (std::size_t t = 0; t < kTaskCount; ++t)
    thresholds[t] = task_thresholds(static_cast<Task>(t), cfg.tasks[t]);

  // validate and calibrate the co-morbidity matrix
  CorrelationMatrix target = cfg.comorbidity;
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    require(std::abs(target[i][i] - 1.0) < 1e-12, ErrorCode::InvalidConfig,
            "comorbidity diagonal must be 1");
    for (std::size_t j = 0; j < kTaskCount; ++j)
      require(target[i][j] >= -1.0 && target[i][j] <= 1.0, ErrorCode::InvalidConfig,
              "comorbidity entries must lie in [-1, 1]");
  }
  CorrelationMatrix latent = identity_correlation();
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    for (std::size_t j = i + 1; j < kTaskCount; ++j) {
      double t = target[i][j];
      if (target[i][j] != target[j][i]) {
        t = 0.5 * (target[i][j] + target[j][i]);
        out.warnings.push_back("comorbidity matrix not symmetric; averaged entry (" +
                               std::string(to_string(static_cast<Task>(i))) + ", " +
                               std::string(to_string(static_cast<Task>(j))) + ")");
      }
      latent[i][j] = latent[j][i] = calibrate_latent_correlation(t, thresholds[i], thresholds[j]);
    }
  }
  {
    Eigen::SelfAdjointEigenSolver<Mat4> es(to_eigen(latent));
    if (es.eigenvalues().minCoeff() < 1e-10) {
      latent = nearest_correlation(latent);
      out.warnings.push_back("comorbidity targets jointly infeasible; using nearest valid correlation matrix");
    }
  }
  Eigen::LLT<Mat4> llt(to_eigen(latent));
  require(llt.info() == Eigen::Success, ErrorCode::InfeasibleCorrelation,
          "latent correlation matrix is not positive definite after repair");
  const Mat4 chol = llt.matrixL();
  out.latent = latent;

  std::vector<SubjectDraw> draws(cfg.n_subjects);
  if (cfg.threads <= 1) {
    for (std::size_t s = 0; s < cfg.n_subjects; ++s) draws[s] = draw_subject(cfg, s, chol, thresholds);
  } else {
    std::vector<std::jthread> pool;
    const auto workers = static_cast<std::size_t>(cfg.threads);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < cfg.n_subjects; s += workers)
          draws[s] = draw_subject(cfg, s, chol, thresholds);
      });
  }

  Dataset& ds = out.dataset;
  ds.sequences.reserve(cfg.n_subjects);
  for (auto& d : draws) {
    if (d.labels) ds.labels.emplace(d.labels->subject_id, *d.labels);
    ds.sequences.push_back(std::move(d.sequence));
  }
  ds.provenance.sources.push_back("synthgen:seed=" + std::to_string(cfg.seed));
  Sha256 h;
  for (const auto& seq : ds.sequences) {
    h.update(seq.subject_id).update("\n");
    h.update(seq.counts.data(), seq.counts.size() * sizeof(RawCount));
  }
  for (const auto& [id, rec] : ds.labels) {
    h.update(id).update("\n");
    for (const auto& v : rec.values) {
      const int x = v.value_or(-1);
      h.update(&x, sizeof x);
    }
  }
  ds.provenance.digest = h.hex();

  if (cfg.n_subjects >= 500) {
    for (Task t : kAllTasks) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(class_count(t)), 0);
      std::size_t total = 0;
      for (const auto& [id, rec] : ds.labels)
        if (rec[t]) ++counts[static_cast<std::size_t>(*rec[t])], ++total;
      if (total == 0) continue;
      for (std::size_t c = 0; c < counts.size(); ++c)
        if (static_cast<double>(counts[c]) < 0.10 * static_cast<double>(total))
          out.warnings.push_back("class " + std::to_string(c) + " of " + std::string(to_string(t)) +
                                 " has prevalence below 10%");
    }
  }
  return out;
}

LabelCorrelation label_correlation(const LabelTable& labels) {
  LabelCorrelation out;
  bool any = false;
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    out.matrix[i][i] = 1.0;
    for (std::size_t j = i + 1; j < kTaskCount; ++j) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      std::size_t n = 0;
      for (const auto& [id, rec] : labels) {
        if (!rec.values[i] || !rec.values[j]) continue;
        const double x = *rec.values[i], y = *rec.values[j];
        sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
        ++n;
      }
      out.support[i][j] = out.support[j][i] = n;
      if (n < 2) continue;
      any = true;
      const double nn = static_cast<double>(n);
      const double vx = sxx - sx * sx / nn, vy = syy - sy * sy / nn;
      if (vx <= 0.0) out.degenerate[i] = true;
      if (vy <= 0.0) out.degenerate[j] = true;
      if (vx <= 0.0 || vy <= 0.0) continue;
      out.matrix[i][j] = out.matrix[j][i] = (sxy - sx * sy / nn) / std::sqrt(vx * vy);
    }
  }
  require(any, ErrorCode::InsufficientData, "need at least two subjects sharing a pair of labels");
  return out;
}

ActivityGap daytime_activity_gap(const Dataset& ds, Task task) {
  ActivityGap gap;
  double pos_sum = 0, neg_sum = 0;
  for (const auto& seq : ds.sequences) {
    auto it = ds.labels.find(seq.subject_id);
    if (it == ds.labels.end() || !it->second[task]) continue;
    const double per_hour = 3600.0 / seq.sampling_period_s;
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < seq.counts.size(); ++i) {
      const double hour = std::fmod(static_cast<double>(i) / per_hour, 24.0);
      if (hour < 9.0 || hour >= 21.0 || seq.counts[i] < 0) continue;
      sum += seq.counts[i];
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    if (*it->second[task] > 0) pos_sum += mean, ++gap.positives;
    else neg_sum += mean, ++gap.negatives;
  }
  if (gap.positives) gap.positive_mean = pos_sum / static_cast<double>(gap.positives);
  if (gap.negatives) gap.negative_mean = neg_sum / static_cast<double>(gap.negatives);
  return gap;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const SynthConfig& c) {
  const auto& b = c.base;
  j = nlohmann::json{{"n_subjects", c.n_subjects},
                     {"days", c.days},
                     {"sampling_period_s", c.sampling_period_s},
                     {"labeled_fraction", c.labeled_fraction},
                     {"seed", c.seed},
                     {"threads", c.threads}};
  j["base"] = {{"amplitude_median", b.amplitude_median},
               {"amplitude_log_sd", b.amplitude_log_sd},
               {"circadian_depth", b.circadian_depth},
               {"noise_log_sd", b.noise_log_sd},
               {"idle_probability", b.idle_probability},
               {"sleep_onset_hour", b.sleep_onset_hour},
               {"sleep_onset_sd", b.sleep_onset_sd},
               {"sleep_onset_daily_sd", b.sleep_onset_daily_sd},
               {"sleep_hours", b.sleep_hours},
               {"sleep_movement_probability", b.sleep_movement_probability},
               {"sleep_movement_mean", b.sleep_movement_mean}};
  for (Task t : kAllTasks) {
    const auto& s = c.tasks[static_cast<std::size_t>(t)];
    j["tasks"][std::string(to_string(t))] = {
        {"prevalence", s.prevalence},
        {"label_fraction", s.label_fraction},
        {"archetype",
         {{"amplitude_scale", s.archetype.amplitude_scale},
          {"fragmentation_rate", s.archetype.fragmentation_rate},
          {"daytime_suppression", s.archetype.daytime_suppression},
          {"suppression_days", s.archetype.suppression_days},
          {"weekday_compensation", s.archetype.weekday_compensation},
          {"negative_suppression_days", s.archetype.negative_suppression_days}}}};
  }
  j["comorbidity"] = c.comorbidity;
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  try {
    read_opt(j, "n_subjects", c.n_subjects);
    read_opt(j, "days", c.days);
    read_opt(j, "sampling_period_s", c.sampling_period_s);
    read_opt(j, "labeled_fraction", c.labeled_fraction);
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    if (j.contains("base")) {
      const auto& jb = j.at("base");
      auto& b = c.base;
      read_opt(jb, "amplitude_median", b.amplitude_median);
      read_opt(jb, "amplitude_log_sd", b.amplitude_log_sd);
      read_opt(jb, "circadian_depth", b.circadian_depth);
      read_opt(jb, "noise_log_sd", b.noise_log_sd);
      read_opt(jb, "idle_probability", b.idle_probability);
      read_opt(jb, "sleep_onset_hour", b.sleep_onset_hour);
      read_opt(jb, "sleep_onset_sd", b.sleep_onset_sd);
      read_opt(jb, "sleep_onset_daily_sd", b.sleep_onset_daily_sd);
      read_opt(jb, "sleep_hours", b.sleep_hours);
      read_opt(jb, "sleep_movement_probability", b.sleep_movement_probability);
      read_opt(jb, "sleep_movement_mean", b.sleep_movement_mean);
    }
    if (j.contains("tasks")) {
      for (const auto& [name, jt] : j.at("tasks").items()) {
        auto task = parse_task(name);
        require(task.has_value(), ErrorCode::InvalidConfig, "unknown task '" + name + "'");
        auto& s = c.tasks[static_cast<std::size_t>(*task)];
        read_opt(jt, "prevalence", s.prevalence);
        read_opt(jt, "label_fraction", s.label_fraction);
        if (jt.contains("archetype")) {
          const auto& ja = jt.at("archetype");
          read_opt(ja, "amplitude_scale", s.archetype.amplitude_scale);
          read_opt(ja, "fragmentation_rate", s.archetype.fragmentation_rate);
          read_opt(ja, "daytime_suppression", s.archetype.daytime_suppression);
          read_opt(ja, "suppression_days", s.archetype.suppression_days);
          read_opt(ja, "weekday_compensation", s.archetype.weekday_compensation);
          read_opt(ja, "negative_suppression_days", s.archetype.negative_suppression_days);
        }
      }
    }
    read_opt(j, "comorbidity", c.comorbidity);
    if (j.contains("comorbidity_pairs")) {
      for (const auto& p : j.at("comorbidity_pairs")) {
        auto a = parse_task(p.at("a").get<std::string>());
        auto b = parse_task(p.at("b").get<std::string>());
        require(a && b && *a != *b, ErrorCode::InvalidConfig, "bad comorbidity pair");
        const double rho = p.at("rho").get<double>();
        c.comorbidity[static_cast<std::size_t>(*a)][static_cast<std::size_t>(*b)] = rho;
        c.comorbidity[static_cast<std::size_t>(*b)][static_cast<std::size_t>(*a)] = rho;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("synth config: ") + e.what());
  }
}

}  // namespace acton
