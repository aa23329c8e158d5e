#include "declist/inference.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "declist/error.hpp"
#include "declist/rng.hpp"

namespace declist {

namespace {

constexpr double kLogitClamp = 1e-6;

double to_scale(double v, bool use_logit) {
  if (!use_logit) return v;
  return logit(std::clamp(v, kLogitClamp, 1.0 - kLogitClamp));
}

std::pair<double, double> interval_at(double corrected_scale, double sigma_scale, double level,
                                      bool use_logit) {
  const double alpha = 1.0 - level;
  const double zl = normal_quantile(alpha / 2.0);
  const double zu = normal_quantile(1.0 - alpha / 2.0);
  double lo = corrected_scale + zl * sigma_scale;
  double hi = corrected_scale + zu * sigma_scale;
  if (use_logit) {
    // Open-interval endpoints even when the logit-scale bound underflows.
    lo = std::clamp(expit(lo), 1e-300, 1.0 - 1e-16);
    hi = std::clamp(expit(hi), 1e-300, 1.0 - 1e-16);
  }
  return {lo, hi};
}

}  // namespace

ValueReport bootstrap_corrected_value(const Dataset& data, const BootstrapConfig& config,
                                      const FitSpec& fit_spec) {
  if (config.replicates < 1) throw_validation("bootstrap needs B >= 1");
  if (!(config.level > 0.0 && config.level < 1.0)) throw_validation("level must be in (0,1)");

  // Original fit: pi_hat, its estimated value, and the plug-in variance.
  const FitResult base = fit_pipeline(data, fit_spec);
  const BinIndex bins = bin(data, base.grid);
  InfluenceContext base_ctx(data, base.propensity, base.outcome);
  const std::vector<int> rec_hat = base.pi_hat.evaluate_all(data.covariates);
  const double value_hat = base_ctx.value_of(rec_hat);
  const double sigma = std::sqrt(std::max(base_ctx.variance_of_value(rec_hat), 0.0));
  const bool use_logit = data.outcome_kind == OutcomeKind::Binary;

  // Replicates reuse the original grid and (by default) the original lambda.
  FitSpec rep_spec = fit_spec;
  rep_spec.run_mincost = false;
  if (rep_spec.outcome.lasso && !config.refit_cv_per_replicate) {
    if (base.outcome.selected_lambda) {
      rep_spec.outcome.lasso->fixed_lambda = *base.outcome.selected_lambda;
    }
  }

  const int B = config.replicates;
  std::vector<double> gaps(B, 0.0);
  std::vector<char> ok(B, 0);
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < B; ++b) {
    try {
      Rng rng = Rng::keyed(config.seed, static_cast<std::uint64_t>(b) + 1);
      Eigen::VectorXd w(data.n());
      if (config.force_unit_weights) {
        w.setOnes();
      } else {
        for (Eigen::Index i = 0; i < data.n(); ++i) w[i] = rng.exponential();
      }
      const SearchResult star = search_weighted(data, rep_spec, base.grid, bins, w);
      const std::vector<int> rec_b = star.list.evaluate_all(data.covariates);
      const double perturbed = star.value;                 // R*_b(pi*_b)
      const double original = base_ctx.value_of(rec_b);    // R_hat(pi*_b)
      gaps[b] = to_scale(perturbed, use_logit) - to_scale(original, use_logit);
      ok[b] = 1;
    } catch (const Error&) {
      ok[b] = 0;  // diverged replicate: dropped and counted
    }
  }

  int used = 0;
  double bias = 0.0;
  for (int b = 0; b < B; ++b) {
    if (ok[b]) {
      bias += gaps[b];
      ++used;
    }
  }
  const int dropped = B - used;
  if (dropped * 10 > B) {
    throw_fit("bootstrap: " + std::to_string(dropped) + " of " + std::to_string(B) +
              " replicates diverged (>10%)");
  }
  bias /= std::max(used, 1);

  ValueReport report;
  report.regime = base.pi_hat;
  report.value = value_hat;
  report.bias = bias;
  report.sigma = sigma;
  report.level = config.level;
  report.logit_scale = use_logit;
  report.replicates_used = used;
  report.replicates_dropped = dropped;
  if (use_logit) {
    const double theta = to_scale(value_hat, true) - bias;
    report.corrected = expit(theta);
    const double vc = std::clamp(value_hat, kLogitClamp, 1.0 - kLogitClamp);
    const double sigma_logit = sigma / (vc * (1.0 - vc));  // delta method
    std::tie(report.lower, report.upper) = interval_at(theta, sigma_logit, config.level, true);
  } else {
    report.corrected = value_hat - bias;
    std::tie(report.lower, report.upper) =
        interval_at(report.corrected, sigma, config.level, false);
  }
  return report;
}

std::pair<double, double> prediction_interval(const ValueReport& report, double level) {
  if (!(level > 0.0 && level < 1.0)) throw_validation("level must be in (0,1)");
  if (report.sigma < 0.0) throw_validation("sigma must be nonnegative");
  if (report.logit_scale) {
    const double theta = logit(std::clamp(report.corrected, kLogitClamp, 1.0 - kLogitClamp));
    const double vc = std::clamp(report.value, kLogitClamp, 1.0 - kLogitClamp);
    const double sigma_logit = report.sigma / (vc * (1.0 - vc));
    return interval_at(theta, sigma_logit, level, true);
  }
  return interval_at(report.corrected, report.sigma, level, false);
}

std::string ValueReport::to_json(const RenderNames& names, int indent) const {
  nlohmann::json doc;
  doc["value"] = value;
  doc["bias"] = bias;
  doc["corrected_value"] = corrected;
  doc["sigma"] = sigma;
  doc["level"] = level;
  doc["interval"] = {lower, upper};
  doc["logit_scale"] = logit_scale;
  doc["replicates_used"] = replicates_used;
  doc["replicates_dropped"] = replicates_dropped;
  doc["regime"] = nlohmann::json::parse(regime_to_json(regime, names));
  return doc.dump(indent);
}

}  // namespace declist
