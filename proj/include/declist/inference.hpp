#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "declist/pipeline.hpp"

namespace declist {

struct BootstrapConfig {
  int replicates = 200;  // B
  std::uint64_t seed = 1;
  double level = 0.95;   // prediction-interval coverage
  bool force_unit_weights = false;   // degenerate test hook (W_i == 1)
  bool refit_cv_per_replicate = false;  // default: reuse the original lambda
};

// Bias-corrected value estimate and prediction interval for R(pi_hat). For
// binary outcomes every step runs on the logit scale and the interval is
// mapped back through the inverse logit.
struct ValueReport {
  DecisionList regime;        // pi_hat
  double value = 0.0;         // R_hat(pi_hat)
  double bias = 0.0;          // bootstrap estimate of the optimization bias
  double corrected = 0.0;     // R_c
  double sigma = 0.0;         // plug-in sd of R_hat(pi_hat)
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
  bool logit_scale = false;
  int replicates_used = 0;
  int replicates_dropped = 0;

  std::string to_json(const RenderNames& names, int indent = 2) const;
};

ValueReport bootstrap_corrected_value(const Dataset& data, const BootstrapConfig& config,
                                      const FitSpec& fit_spec);

// Recomputes the interval of an existing report at another coverage level.
std::pair<double, double> prediction_interval(const ValueReport& report, double level);

}  // namespace declist
