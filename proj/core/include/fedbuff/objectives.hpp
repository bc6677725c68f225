#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedbuff/rng.hpp"
#include "fedbuff/vec_ops.hpp"

namespace fedbuff {

// Synthetic heterogeneous objective families. Both families keep every
// constant the convergence analysis consumes (L, sigma^2, gamma^2, f*)
// either exact or a certified closed-form upper bound, so assumption checks
// are inequalities against known values rather than estimates of estimates.

enum class Family { QuadraticMixture, LogisticNonconvex };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct DataPoint {
  std::vector<double> features;
  double label = 0.0;  // +-1 for logistic; unused for quadratic
};

struct ClientDataset {
  int client_id = 0;
  std::vector<DataPoint> points;  // non-empty; uniform sampling realizes p_i
};

struct ProblemSpec {
  Family family = Family::QuadraticMixture;
  int n = 1;                        // clients
  int d = 1;                        // dimension
  double heterogeneity_shift = 1.0; // client center/mean offset magnitude; drives gamma^2
  double regularizer_weight = 0.0;  // logistic only
  double scale = 1.0;               // global curvature multiplier; L for the quadratic family
  uint64_t seed = 0;
  int points_per_client = 8;
  double dispersion = 1.0;          // quadratic only: per-point spread around the client center; drives sigma^2
};

struct ProblemConstants {
  double L = 0.0;            // smoothness constant (exact for quadratic, closed-form bound for logistic)
  double sigma_sq = 0.0;     // per-sample gradient variance bound, sup over w
  double sigma_hat_sq = 0.0; // sigma_sq / batch_size_b
  double gamma_sq = 0.0;     // population diversity bound, sup over w
  double f_star = 0.0;       // lower bound on the global objective (exact minimum for quadratic)
  int64_t batch_size_b = 1;

  // Same constants under batch size b (sigma_hat_sq = sigma_sq / b exactly).
  ProblemConstants with_batch_size(int64_t b) const;
};

class Problem {
 public:
  static Problem generate(const ProblemSpec& spec);

  // Direct constructors for tests and hand-built instances. Constants are
  // recomputed from the supplied data.
  static Problem quadratic_from_points(double scale,
                                       std::vector<std::vector<ParamVector>> client_points);
  static Problem logistic_from_data(double regularizer_weight,
                                    std::vector<ClientDataset> clients, int d);

  Family family() const { return family_; }
  int n() const { return static_cast<int>(clients_.size()); }
  int dim() const { return d_; }
  const ProblemConstants& constants() const { return constants_; }
  const std::vector<ClientDataset>& clients() const { return clients_; }

  double sample_value(const DataPoint& p, const ParamVector& w) const;
  ParamVector sample_gradient(const DataPoint& p, const ParamVector& w) const;

  // Exact mean over the client's points, fixed summation order.
  ParamVector full_gradient(int client, const ParamVector& w) const;
  double client_value(int client, const ParamVector& w) const;

  // Mean of per-sample gradients over batch_size points drawn uniformly with
  // replacement. batch_size == 0 selects full-batch mode (exact gradient).
  ParamVector stochastic_gradient(int client, const ParamVector& w, int64_t batch_size,
                                  RngStream& rng) const;

  // f(w) = (1/n) sum f_i(w) and its gradient, exact averages.
  double global_value(const ParamVector& w) const;
  ParamVector global_gradient(const ParamVector& w) const;

  // max over probe points of (1/n) sum_i ||grad f_i(w) - grad f(w)||^2.
  // A certified lower bound on the true gamma^2.
  double measure_diversity(std::span<const ParamVector> probes) const;

  // max over probe points of the exact per-sample gradient variance at w.
  double estimate_variance(int client, std::span<const ParamVector> probes) const;

 private:
  Problem() = default;
  void compute_constants();

  Family family_ = Family::QuadraticMixture;
  double scale_ = 1.0;
  double reg_weight_ = 0.0;
  int d_ = 0;
  std::vector<ClientDataset> clients_;
  ProblemConstants constants_;
};

// Fixed grid (origin, +-R along each axis, +-R diagonal) plus `count` seeded
// uniform points in [-R, R]^d.
std::vector<ParamVector> make_probe_points(int d, double radius, int count, uint64_t seed);

}  // namespace fedbuff
