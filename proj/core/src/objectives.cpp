#include "fedbuff/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "fedbuff/errors.hpp"

namespace fedbuff {

namespace {

// Smooth bounded non-convex regularizer r(w) = sum_j w_j^2 / (1 + w_j^2).
// Per-coordinate curvature |r''| peaks at 2 (at the origin), so the
// regularizer contributes at most 2 * weight to the smoothness constant.
double reg_value(const ParamVector& w) {
  double s = 0.0;
  for (double x : w) s += x * x / (1.0 + x * x);
  return s;
}

void add_reg_gradient(ParamVector& g, const ParamVector& w, double weight) {
  for (size_t j = 0; j < w.size(); ++j) {
    const double denom = 1.0 + w[j] * w[j];
    g[j] += weight * 2.0 * w[j] / (denom * denom);
  }
}

// max_u |d/du (u^2/(1+u^2))| = 3*sqrt(3)/8, attained at u = 1/sqrt(3)
constexpr double kRegGradCoordMax = 0.649519052838329;

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-z)) without overflow
double log1p_exp_neg(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

// Deterministic center layout: pairs +-shift*e_axis walking through the
// axes, so the mean over an even number of clients is exactly zero.
ParamVector center_direction(int i, int d) {
  ParamVector dir(d, 0.0);
  const int axis = (i / 2) % d;
  dir[axis] = (i % 2 == 0) ? 1.0 : -1.0;
  return dir;
}

ParamVector dataset_mean(const ClientDataset& ds, int d) {
  ParamVector mean(d, 0.0);
  for (const auto& p : ds.points) {
    for (int j = 0; j < d; ++j) mean[j] += p.features[j];
  }
  const double inv = 1.0 / static_cast<double>(ds.points.size());
  for (double& x : mean) x *= inv;
  return mean;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::QuadraticMixture: return "quadratic_mixture";
    case Family::LogisticNonconvex: return "logistic_nonconvex";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "quadratic_mixture") return Family::QuadraticMixture;
  if (name == "logistic_nonconvex") return Family::LogisticNonconvex;
  throw ConfigError("problem.family: unknown family '" + name + "'");
}

ProblemConstants ProblemConstants::with_batch_size(int64_t b) const {
  if (b < 1) throw ConfigError("batch_size_b: must be >= 1");
  ProblemConstants out = *this;
  out.batch_size_b = b;
  out.sigma_hat_sq = sigma_sq / static_cast<double>(b);
  return out;
}

Problem Problem::generate(const ProblemSpec& spec) {
  if (spec.n < 1) throw ConfigError("problem.n: must be >= 1");
  if (spec.d < 1) throw ConfigError("problem.d: must be >= 1");
  if (spec.scale <= 0.0) throw ConfigError("problem.scale: must be > 0");
  if (spec.heterogeneity_shift < 0.0) throw ConfigError("problem.heterogeneity_shift: must be >= 0");
  if (spec.regularizer_weight < 0.0) throw ConfigError("problem.regularizer_weight: must be >= 0");
  if (spec.dispersion < 0.0) throw ConfigError("problem.dispersion: must be >= 0");
  if (spec.points_per_client < 1) throw ConfigError("problem.points_per_client: must be >= 1");

  Problem p;
  p.family_ = spec.family;
  p.scale_ = spec.scale;
  p.reg_weight_ = spec.regularizer_weight;
  p.d_ = spec.d;
  p.clients_.resize(spec.n);

  const int m = spec.points_per_client;
  for (int i = 0; i < spec.n; ++i) {
    ClientDataset& ds = p.clients_[i];
    ds.client_id = i;
    ds.points.resize(m);

    ParamVector center = center_direction(i, spec.d);
    scale_inplace(center, spec.heterogeneity_shift);

    if (spec.family == Family::QuadraticMixture) {
      // Points sit at center +- dispersion*e_axis in cancelling pairs, so the
      // client mean is exactly the center and the per-sample variance is
      // exactly scale^2 * dispersion^2 (times (m-1)/m when m is odd).
      for (int k = 0; k < m; ++k) {
        DataPoint& pt = ds.points[k];
        pt.features = center;
        pt.label = 0.0;
        const bool unpaired_last = (m % 2 == 1) && (k == m - 1);
        if (!unpaired_last) {
          const int axis = (k / 2) % spec.d;
          const double sign = (k % 2 == 0) ? 1.0 : -1.0;
          pt.features[axis] += sign * spec.dispersion;
        }
      }
    } else {
      RngStream rng = derive_stream(spec.seed, StreamTag::kDataset,
                                    {static_cast<uint64_t>(i)});
      const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(spec.d));
      for (int k = 0; k < m; ++k) {
        DataPoint& pt = ds.points[k];
        pt.features.resize(spec.d);
        double teacher_score = 0.0;
        for (int j = 0; j < spec.d; ++j) {
          pt.features[j] = center[j] + rng.normal();
          teacher_score += pt.features[j] * inv_sqrt_d;
        }
        pt.label = teacher_score >= 0.0 ? 1.0 : -1.0;
      }
    }
  }

  p.compute_constants();
  return p;
}

Problem Problem::quadratic_from_points(double scale,
                                       std::vector<std::vector<ParamVector>> client_points) {
  if (scale <= 0.0) throw ConfigError("scale: must be > 0");
  if (client_points.empty()) throw ConfigError("client_points: must be non-empty");
  Problem p;
  p.family_ = Family::QuadraticMixture;
  p.scale_ = scale;
  p.d_ = static_cast<int>(client_points.front().front().size());
  p.clients_.resize(client_points.size());
  for (size_t i = 0; i < client_points.size(); ++i) {
    if (client_points[i].empty()) throw ConfigError("client dataset must be non-empty");
    ClientDataset& ds = p.clients_[i];
    ds.client_id = static_cast<int>(i);
    for (auto& pt : client_points[i]) {
      check_dim(pt, p.d_, "quadratic_from_points");
      ds.points.push_back(DataPoint{std::move(pt), 0.0});
    }
  }
  p.compute_constants();
  return p;
}

Problem Problem::logistic_from_data(double regularizer_weight,
                                    std::vector<ClientDataset> clients, int d) {
  if (regularizer_weight < 0.0) throw ConfigError("regularizer_weight: must be >= 0");
  if (clients.empty()) throw ConfigError("clients: must be non-empty");
  Problem p;
  p.family_ = Family::LogisticNonconvex;
  p.scale_ = 1.0;
  p.reg_weight_ = regularizer_weight;
  p.d_ = d;
  p.clients_ = std::move(clients);
  for (const auto& ds : p.clients_) {
    if (ds.points.empty()) throw ConfigError("client dataset must be non-empty");
  }
  p.compute_constants();
  return p;
}

void Problem::compute_constants() {
  ProblemConstants c;
  const int n = static_cast<int>(clients_.size());

  if (family_ == Family::QuadraticMixture) {
    c.L = scale_;

    std::vector<ParamVector> centers(n);
    for (int i = 0; i < n; ++i) centers[i] = dataset_mean(clients_[i], d_);

    ParamVector grand(d_, 0.0);
    for (const auto& ci : centers) add_inplace(grand, ci);
    scale_inplace(grand, 1.0 / n);

    double center_disp = 0.0;  // (1/n) sum ||c_i - c_bar||^2
    for (const auto& ci : centers) center_disp += dist_sq(ci, grand);
    center_disp /= n;
    c.gamma_sq = scale_ * scale_ * center_disp;

    // Per-sample gradient variance is w-independent: scale^2 * E||xi - c_i||^2.
    double max_point_disp = 0.0;
    double mean_sq_norm = 0.0;  // (1/n) sum_i mean_xi ||xi||^2
    for (int i = 0; i < n; ++i) {
      double disp = 0.0;
      double sq = 0.0;
      for (const auto& pt : clients_[i].points) {
        disp += dist_sq(pt.features, centers[i]);
        sq += norm_sq(pt.features);
      }
      disp /= clients_[i].points.size();
      sq /= clients_[i].points.size();
      max_point_disp = std::max(max_point_disp, disp);
      mean_sq_norm += sq;
    }
    mean_sq_norm /= n;
    c.sigma_sq = scale_ * scale_ * max_point_disp;

    // f(w) = (scale/2)(||w - c_bar||^2 + M2 - ||c_bar||^2), minimized at c_bar.
    c.f_star = 0.5 * scale_ * (mean_sq_norm - norm_sq(grand));
  } else {
    double max_x_sq = 0.0;
    double max_mean_x_sq = 0.0;
    for (const auto& ds : clients_) {
      double mean_sq = 0.0;
      for (const auto& pt : ds.points) {
        const double sq = norm_sq(pt.features);
        max_x_sq = std::max(max_x_sq, sq);
        mean_sq += sq;
      }
      mean_sq /= ds.points.size();
      max_mean_x_sq = std::max(max_mean_x_sq, mean_sq);
    }
    // Data term curvature is at most ||x||^2/4; regularizer adds at most
    // 2*weight per coordinate.
    c.L = max_x_sq / 4.0 + 2.0 * reg_weight_;
    // The regularizer gradient is sample-independent, so it cancels in the
    // per-sample deviation; variance is bounded by the mean squared feature
    // norm (sigmoid factor < 1).
    c.sigma_sq = max_mean_x_sq;
    // ||grad f_i|| <= max||x|| + weight * sqrt(d) * max|r'| =: G, and the
    // average squared deviation from the mean gradient is at most (2G)^2.
    const double g_max = std::sqrt(max_x_sq) +
                         reg_weight_ * kRegGradCoordMax * std::sqrt(static_cast<double>(d_));
    c.gamma_sq = 4.0 * g_max * g_max;
    // Both loss terms are nonnegative; 0 is a certified lower bound.
    c.f_star = 0.0;
  }

  c.batch_size_b = 1;
  c.sigma_hat_sq = c.sigma_sq;
  constants_ = c;
}

double Problem::sample_value(const DataPoint& p, const ParamVector& w) const {
  if (family_ == Family::QuadraticMixture) {
    return 0.5 * scale_ * dist_sq(w, p.features);
  }
  const double margin = p.label * dot(p.features, w);
  return log1p_exp_neg(margin) + reg_weight_ * reg_value(w);
}

ParamVector Problem::sample_gradient(const DataPoint& p, const ParamVector& w) const {
  ParamVector g(d_, 0.0);
  if (family_ == Family::QuadraticMixture) {
    for (int j = 0; j < d_; ++j) g[j] = scale_ * (w[j] - p.features[j]);
    return g;
  }
  const double margin = p.label * dot(p.features, w);
  const double coeff = -p.label * sigmoid(-margin);
  for (int j = 0; j < d_; ++j) g[j] = coeff * p.features[j];
  add_reg_gradient(g, w, reg_weight_);
  return g;
}

ParamVector Problem::full_gradient(int client, const ParamVector& w) const {
  check_dim(w, d_, "full_gradient");
  const auto& ds = clients_[client];
  ParamVector acc(d_, 0.0);
  for (const auto& pt : ds.points) {
    add_inplace(acc, sample_gradient(pt, w));
  }
  scale_inplace(acc, 1.0 / static_cast<double>(ds.points.size()));
  return acc;
}

double Problem::client_value(int client, const ParamVector& w) const {
  check_dim(w, d_, "client_value");
  const auto& ds = clients_[client];
  double acc = 0.0;
  for (const auto& pt : ds.points) acc += sample_value(pt, w);
  return acc / static_cast<double>(ds.points.size());
}

ParamVector Problem::stochastic_gradient(int client, const ParamVector& w, int64_t batch_size,
                                         RngStream& rng) const {
  check_dim(w, d_, "stochastic_gradient");
  if (batch_size == 0) return full_gradient(client, w);  // full-batch mode
  if (batch_size < 0) throw ConfigError("batch_size: must be >= 0");
  const auto& ds = clients_[client];
  const auto m = static_cast<uint64_t>(ds.points.size());
  ParamVector acc(d_, 0.0);
  for (int64_t k = 0; k < batch_size; ++k) {
    const auto idx = static_cast<size_t>(rng.uniform_u64(m));
    add_inplace(acc, sample_gradient(ds.points[idx], w));
  }
  scale_inplace(acc, 1.0 / static_cast<double>(batch_size));
  return acc;
}

double Problem::global_value(const ParamVector& w) const {
  check_dim(w, d_, "global_value");
  double acc = 0.0;
  for (int i = 0; i < n(); ++i) acc += client_value(i, w);
  return acc / static_cast<double>(n());
}

ParamVector Problem::global_gradient(const ParamVector& w) const {
  check_dim(w, d_, "global_gradient");
  ParamVector acc(d_, 0.0);
  for (int i = 0; i < n(); ++i) {
    add_inplace(acc, full_gradient(i, w));
  }
  scale_inplace(acc, 1.0 / static_cast<double>(n()));
  return acc;
}

double Problem::measure_diversity(std::span<const ParamVector> probes) const {
  if (probes.empty()) throw ConfigError("measure_diversity: probe_points must be non-empty");
  double worst = 0.0;
  for (const auto& w : probes) {
    const ParamVector g = global_gradient(w);
    double acc = 0.0;
    for (int i = 0; i < n(); ++i) {
      acc += dist_sq(full_gradient(i, w), g);
    }
    worst = std::max(worst, acc / static_cast<double>(n()));
  }
  return worst;
}

double Problem::estimate_variance(int client, std::span<const ParamVector> probes) const {
  if (probes.empty()) throw ConfigError("estimate_variance: probe_points must be non-empty");
  const auto& ds = clients_[client];
  double worst = 0.0;
  for (const auto& w : probes) {
    const ParamVector mean = full_gradient(client, w);
    double acc = 0.0;
    for (const auto& pt : ds.points) {
      acc += dist_sq(sample_gradient(pt, w), mean);
    }
    worst = std::max(worst, acc / static_cast<double>(ds.points.size()));
  }
  return worst;
}

std::vector<ParamVector> make_probe_points(int d, double radius, int count, uint64_t seed) {
  std::vector<ParamVector> probes;
  probes.push_back(zeros(d));
  for (int j = 0; j < d; ++j) {
    ParamVector plus = zeros(d);
    plus[j] = radius;
    probes.push_back(plus);
    plus[j] = -radius;
    probes.push_back(std::move(plus));
  }
  probes.push_back(ParamVector(d, radius));
  probes.push_back(ParamVector(d, -radius));
  RngStream rng = derive_stream(seed, StreamTag::kProbe);
  for (int k = 0; k < count; ++k) {
    ParamVector w(d);
    for (int j = 0; j < d; ++j) w[j] = rng.uniform_real(-radius, radius);
    probes.push_back(std::move(w));
  }
  return probes;
}

}  // namespace fedbuff
