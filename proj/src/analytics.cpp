#include "aopi/analytics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace aopi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPoleGuard = 1e-12;   // relative distance to the FCFS pole
constexpr double kRateTol = 1e-9;      // |AoPI - target| accuracy of inversions

void validate_common(double lambda, double mu, double p) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("p must lie in (0, 1]");
  }
}

void validate_fcfs_stable(double lambda, double mu) {
  if (mu - lambda < kPoleGuard * mu) {
    std::ostringstream os;
    os << "fcfs age undefined at lambda=" << lambda << ", mu=" << mu
       << ": requires lambda < mu";
    throw InstabilityError(os.str());
  }
}

}  // namespace

double aopi_fcfs(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  validate_fcfs_stable(lambda, mu);
  const double num = 2.0 * lambda * lambda * lambda + lambda * mu * mu -
                     mu * lambda * lambda;
  const double den = mu * mu * (mu * mu - lambda * lambda);
  return (1.0 + 1.0 / p) / lambda + 1.0 / mu + num / den;
}

double aopi_lcfsp(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  return (1.0 + 1.0 / p) / lambda + 1.0 / (p * mu);
}

double mean_aopi(const AopiInputs& in) {
  return in.policy == Policy::kFcfs ? aopi_fcfs(in.lambda, in.mu, in.p)
                                    : aopi_lcfsp(in.lambda, in.mu, in.p);
}

double aopi_fcfs_dlambda(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  validate_fcfs_stable(lambda, mu);
  const double num = 2.0 * lambda * lambda * lambda + lambda * mu * mu -
                     mu * lambda * lambda;
  const double den = mu * mu * (mu * mu - lambda * lambda);
  const double dnum = 6.0 * lambda * lambda + mu * mu - 2.0 * mu * lambda;
  const double dden = -2.0 * mu * mu * lambda;
  return -(1.0 + 1.0 / p) / (lambda * lambda) +
         (dnum * den - num * dden) / (den * den);
}

double aopi_fcfs_dmu(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  validate_fcfs_stable(lambda, mu);
  const double num = 2.0 * lambda * lambda * lambda + lambda * mu * mu -
                     mu * lambda * lambda;
  const double den = mu * mu * (mu * mu - lambda * lambda);
  const double dnum = 2.0 * lambda * mu - lambda * lambda;
  const double dden = 4.0 * mu * mu * mu - 2.0 * mu * lambda * lambda;
  return -1.0 / (mu * mu) + (dnum * den - num * dden) / (den * den);
}

double aopi_lcfsp_dlambda(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  return -(1.0 + 1.0 / p) / (lambda * lambda);
}

double aopi_lcfsp_dmu(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  return -1.0 / (p * mu * mu);
}

double mean_aopi_dlambda(const AopiInputs& in) {
  return in.policy == Policy::kFcfs
             ? aopi_fcfs_dlambda(in.lambda, in.mu, in.p)
             : aopi_lcfsp_dlambda(in.lambda, in.mu, in.p);
}

double mean_aopi_dmu(const AopiInputs& in) {
  return in.policy == Policy::kFcfs ? aopi_fcfs_dmu(in.lambda, in.mu, in.p)
                                    : aopi_lcfsp_dmu(in.lambda, in.mu, in.p);
}

double policy_threshold(double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (rho >= 1.0) return 0.0;
  const double num = 1.0 - rho * rho;
  const double den =
      2.0 * rho * rho * rho - 2.0 * rho * rho + rho + 1.0;
  const double p_star = num / den;
  if (p_star < 0.0) return 0.0;
  if (p_star > 1.0) return 1.0;
  return p_star;
}

PolicyChoice best_policy(double lambda, double mu, double p) {
  validate_common(lambda, mu, p);
  const double lcfsp = aopi_lcfsp(lambda, mu, p);
  double fcfs = kInf;
  if (mu - lambda >= kPoleGuard * mu) {
    fcfs = aopi_fcfs(lambda, mu, p);
  }
  // Ties (within absolute 1e-12) go to LCFS-P, which never needs stability.
  const Policy pick =
      fcfs < lcfsp - 1e-12 ? Policy::kFcfs : Policy::kLcfsp;
  return {pick, fcfs, lcfsp};
}

std::optional<double> min_mu_for_target(Policy policy, double target_s,
                                        double lambda, double p) {
  if (!(target_s > 0.0)) throw std::invalid_argument("target must be positive");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("p must lie in (0, 1]");

  const double floor = (1.0 + 1.0 / p) / lambda;   // limit as mu -> inf
  if (floor >= target_s) return std::nullopt;

  if (policy == Policy::kLcfsp) {
    return 1.0 / (p * (target_s - floor));
  }

  // FCFS: the age decreases in mu from +inf (at mu -> lambda) toward floor,
  // so bisect for the smallest mu with age <= target.
  double lo = lambda * (1.0 + 1e-9);   // age(lo) > target (near the pole)
  double hi = 2.0 * lambda;
  if (aopi_fcfs(lambda, lo, p) <= target_s) return lo;
  while (aopi_fcfs(lambda, hi, p) > target_s) {
    hi *= 2.0;
    if (hi > lambda * 1e18) return std::nullopt;   // never reached in practice
  }
  for (int iter = 0; iter < 400; ++iter) {
    if (target_s - aopi_fcfs(lambda, hi, p) <= kRateTol) break;
    const double mid = 0.5 * (lo + hi);
    if (aopi_fcfs(lambda, mid, p) <= target_s) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::optional<double> min_lambda_for_target(Policy policy, double target_s,
                                            double mu, double p) {
  if (!(target_s > 0.0)) throw std::invalid_argument("target must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("p must lie in (0, 1]");

  if (policy == Policy::kLcfsp) {
    const double comp = 1.0 / (p * mu);   // limit as lambda -> inf
    if (comp >= target_s) return std::nullopt;
    return (1.0 + 1.0 / p) / (target_s - comp);
  }

  // FCFS: convex in lambda on (0, mu); reach the target on the decreasing
  // branch left of the minimizer, if the minimum is low enough.
  const double lambda_best = optimal_lambda_fcfs(mu, p);
  if (aopi_fcfs(lambda_best, mu, p) > target_s) return std::nullopt;
  double lo = lambda_best * 1e-12;
  double hi = lambda_best;
  while (aopi_fcfs(lo, mu, p) <= target_s) {
    lo *= 0.5;   // move left until strictly above the target
    if (lo < mu * 1e-300) break;
  }
  for (int iter = 0; iter < 400; ++iter) {
    if (target_s - aopi_fcfs(hi, mu, p) <= kRateTol) break;
    const double mid = 0.5 * (lo + hi);
    if (aopi_fcfs(mid, mu, p) <= target_s) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double optimal_lambda_fcfs(double mu, double p) {
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("p must lie in (0, 1]");

  const double inv_phi = 0.6180339887498948482;
  double a = mu * 1e-9;
  double b = mu * (1.0 - 1e-9);
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = aopi_fcfs(x1, mu, p);
  double f2 = aopi_fcfs(x2, mu, p);
  while (b - a > 1e-8 * mu) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = aopi_fcfs(x1, mu, p);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = aopi_fcfs(x2, mu, p);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace aopi
