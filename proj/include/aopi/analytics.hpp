#pragma once

#include <optional>

#include "aopi/model.hpp"

namespace aopi {

// Closed-form mean Age of Processed Information (AoPI) of a single camera
// served by an M/M/1 edge queue with a zero-wait source: frame i+1 starts
// transmitting the instant frame i arrives at the server. Each completed
// frame is accurately recognized with probability p; the age tracks the
// newest accurately recognized frame.
//
// FCFS:   (1 + 1/p)/lambda + 1/mu
//         + (2 lambda^3 + lambda mu^2 - mu lambda^2) / (mu^4 - mu^2 lambda^2)
// LCFS-P: (1 + 1/p)/lambda + 1/(p mu)
//
// Both require lambda > 0, mu > 0, 0 < p <= 1; FCFS additionally requires
// lambda < mu (the form diverges at the stability boundary and is guarded
// at mu - lambda < 1e-12 * mu).
double aopi_fcfs(double lambda, double mu, double p);
double aopi_lcfsp(double lambda, double mu, double p);

// Dispatch on inputs.policy.
double mean_aopi(const AopiInputs& inputs);

// Partial derivatives of the closed forms, used by the resource solvers.
double aopi_fcfs_dlambda(double lambda, double mu, double p);
double aopi_fcfs_dmu(double lambda, double mu, double p);
double aopi_lcfsp_dlambda(double lambda, double mu, double p);
double aopi_lcfsp_dmu(double lambda, double mu, double p);
double mean_aopi_dlambda(const AopiInputs& inputs);
double mean_aopi_dmu(const AopiInputs& inputs);

// Accuracy threshold p*(rho) at which the two disciplines tie for a load
// rho = lambda / mu: FCFS yields the lower age iff p < p*. Clamped to
// [0, 1]; identically 0 for rho >= 1 (FCFS infeasible, LCFS-P wins).
double policy_threshold(double rho);

struct PolicyChoice {
  Policy policy;
  double aopi_fcfs;   // +inf when FCFS is unstable
  double aopi_lcfsp;
};

// Picks the discipline with the lower closed-form age; ties go to LCFS-P.
PolicyChoice best_policy(double lambda, double mu, double p);

// Smallest computation rate mu achieving mean AoPI <= target_s at the given
// lambda and p, or nullopt when no mu can reach the target (the
// transmission-side floor (1 + 1/p)/lambda already meets or exceeds it).
// FCFS is solved by bisection to |AoPI - target| <= 1e-9.
std::optional<double> min_mu_for_target(Policy policy, double target_s,
                                        double lambda, double p);

// Smallest transmission rate lambda achieving mean AoPI <= target_s at the
// given mu and p, or nullopt when unreachable. Under FCFS the age is convex
// in lambda; the returned point lies on the decreasing branch, found by
// bisection to |AoPI - target| <= 1e-9.
std::optional<double> min_lambda_for_target(Policy policy, double target_s,
                                            double mu, double p);

// The arrival rate minimizing the FCFS age at fixed mu and p, located by
// golden-section search on (0, mu) to relative width 1e-8.
double optimal_lambda_fcfs(double mu, double p);

}  // namespace aopi
