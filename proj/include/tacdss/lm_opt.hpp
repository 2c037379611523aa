#pragma once

// Levenberg-Marquardt training for nnet::Network.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "tacdss/errors.hpp"
#include "tacdss/nnet.hpp"

namespace tacdss::lm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LmConfig {
  double mu0 = 1e-3;
  double mu_inc = 10.0;
  double mu_dec = 10.0;
  double mu_max = 1e10;
  int max_epochs = 1500;
  double loss_tol = 0.0;  // stop once sse <= loss_tol

  void validate() const {
    if (!(mu0 > 0.0)) throw InvalidArgument("mu0 must be > 0");
    if (!(mu_inc > 1.0)) throw InvalidArgument("mu_inc must be > 1");
    if (!(mu_dec > 1.0)) throw InvalidArgument("mu_dec must be > 1");
    if (!(mu_max > mu0)) throw InvalidArgument("mu_max must exceed mu0");
    if (max_epochs < 1) throw InvalidArgument("max_epochs must be positive");
    if (!(loss_tol >= 0.0)) throw InvalidArgument("loss_tol must be >= 0");
  }
};

enum class StopReason { kMaxEpochs, kLossTol, kMuMax };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kMaxEpochs: return "max_epochs";
    case StopReason::kLossTol: return "loss_tol";
    case StopReason::kMuMax: return "mu_max";
  }
  return "unknown";
}

inline StopReason stop_reason_from_string(const std::string& s) {
  if (s == "max_epochs") return StopReason::kMaxEpochs;
  if (s == "loss_tol") return StopReason::kLossTol;
  if (s == "mu_max") return StopReason::kMuMax;
  throw InvalidArgument("unknown stop reason '" + s + "'");
}

/// loss_trace[0] and mu_trace[0] describe the starting point; every later
/// entry is one accepted epoch.
struct TrainReport {
  std::vector<double> loss_trace;
  std::vector<double> mu_trace;
  int accepted_steps = 0;
  int rejected_steps = 0;
  int epochs_run = 0;
  double final_sse = 0.0;
  double final_mse = 0.0;
  double final_rmse = 0.0;
  StopReason stop_reason = StopReason::kMaxEpochs;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

class StalledOptimizer : public std::runtime_error {
 public:
  explicit StalledOptimizer(TrainReport partial)
      : std::runtime_error("optimizer stalled: damping exceeded mu_max before any step was accepted"),
        report_(std::move(partial)) {}

  const TrainReport& report() const noexcept { return report_; }

 private:
  TrainReport report_;
};

/// Solves (J^T J + mu I) delta = J^T e. With J = de/dx the caller applies
/// x <- x - delta, which is a descent step on ||e||^2.
inline Vector lm_step(const Matrix& jac, const Vector& e, double mu) {
  if (jac.rows() != e.size()) {
    throw InvalidArgument("lm_step: Jacobian has " + std::to_string(jac.rows()) + " rows but residual has " +
                          std::to_string(e.size()) + " entries");
  }
  if (!(mu >= 0.0)) throw InvalidArgument("lm_step: mu must be >= 0");
  Matrix normal = jac.transpose() * jac;
  normal.diagonal().array() += mu;
  const Vector gradient = jac.transpose() * e;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) throw SingularMatrix("lm_step: damped normal matrix is not positive definite");
  Vector delta = llt.solve(gradient);
  if (!delta.allFinite()) throw SingularMatrix("lm_step: non-finite solution");
  return delta;
}

inline std::pair<nnet::Network, TrainReport> train(nnet::Network net, const nnet::Batch& batch,
                                                   const LmConfig& config) {
  config.validate();
  const double residual_count = static_cast<double>(net.outputs()) * static_cast<double>(batch.size());

  TrainReport report;
  nnet::ParamVector params = net.params();
  Vector e = nnet::residuals(net, batch);
  double loss = e.squaredNorm();
  double mu = config.mu0;
  report.loss_trace.push_back(loss);
  report.mu_trace.push_back(mu);

  auto finish = [&](StopReason reason) {
    report.stop_reason = reason;
    report.final_sse = loss;
    report.final_mse = loss / residual_count;
    report.final_rmse = std::sqrt(report.final_mse);
  };

  while (true) {
    if (loss <= config.loss_tol) {
      finish(StopReason::kLossTol);
      break;
    }
    if (report.epochs_run >= config.max_epochs) {
      finish(StopReason::kMaxEpochs);
      break;
    }
    const Matrix jac = nnet::jacobian(net, batch);
    const Matrix normal = jac.transpose() * jac;
    const Vector gradient = jac.transpose() * e;

    bool accepted = false;
    while (!accepted && mu <= config.mu_max) {
      Matrix damped = normal;
      damped.diagonal().array() += mu;
      Eigen::LLT<Matrix> llt(damped);
      if (llt.info() == Eigen::Success) {
        const Vector delta = llt.solve(gradient);
        const nnet::ParamVector trial = params - delta;
        if (delta.allFinite() && trial.allFinite()) {
          net.set_params(trial);
          Vector trial_e = nnet::residuals(net, batch);
          const double trial_loss = trial_e.squaredNorm();
          if (trial_loss < loss) {
            params = trial;
            e = std::move(trial_e);
            loss = trial_loss;
            mu /= config.mu_dec;
            accepted = true;
            break;
          }
          net.set_params(params);
        }
      }
      ++report.rejected_steps;
      mu *= config.mu_inc;
    }
    if (!accepted) {
      finish(StopReason::kMuMax);
      if (report.accepted_steps == 0) throw StalledOptimizer(std::move(report));
      break;
    }
    ++report.accepted_steps;
    ++report.epochs_run;
    report.loss_trace.push_back(loss);
    report.mu_trace.push_back(mu);
  }
  return {std::move(net), std::move(report)};
}

}  // namespace tacdss::lm
