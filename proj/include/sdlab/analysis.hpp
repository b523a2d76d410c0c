#pragma once

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "sdlab/distill.hpp"
#include "sdlab/toy_data.hpp"
#include "sdlab/vec2.hpp"

namespace sdlab {

// Sample Pearson coefficient. Zero variance on either side is an error, not
// a silent number.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: series lengths differ");
  if (a.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::domain_error("pearson: undefined correlation (zero variance series)");
  return sab / std::sqrt(saa * sbb);
}

// Per-run correlation between the estimated noise and the control variate.
struct RunCorrelation {
  DistillMethod method = DistillMethod::kSds;
  std::uint64_t seed = 0;
  Vec2 start;
  double r_flat = 0.0;  // pooled x and y components
  double r_x = 0.0;
  double r_y = 0.0;
};

struct MethodCorrelation {
  int runs = 0;
  double mean_r = 0.0;
  double std_r = 0.0;
  double mean_r_x = 0.0;
  double mean_r_y = 0.0;
};

struct CorrelationReport {
  std::vector<RunCorrelation> runs;
  std::map<DistillMethod, MethodCorrelation> by_method;
};

inline RunCorrelation run_correlation(const TrajectoryRecord& record) {
  std::vector<double> main_flat, cv_flat, main_x, cv_x, main_y, cv_y;
  main_flat.reserve(record.steps.size() * 2);
  cv_flat.reserve(record.steps.size() * 2);
  for (const StepRecord& s : record.steps) {
    main_flat.push_back(s.eps_main.x);
    main_flat.push_back(s.eps_main.y);
    cv_flat.push_back(s.control_variate.x);
    cv_flat.push_back(s.control_variate.y);
    main_x.push_back(s.eps_main.x);
    cv_x.push_back(s.control_variate.x);
    main_y.push_back(s.eps_main.y);
    cv_y.push_back(s.control_variate.y);
  }
  RunCorrelation rc;
  rc.method = record.config.method;
  rc.seed = record.config.seed;
  rc.start = record.start;
  rc.r_flat = pearson(main_flat, cv_flat);
  rc.r_x = pearson(main_x, cv_x);
  rc.r_y = pearson(main_y, cv_y);
  return rc;
}

inline CorrelationReport correlation_report(std::span<const TrajectoryRecord> records) {
  if (records.empty()) throw std::invalid_argument("correlation_report: empty corpus");
  CorrelationReport report;
  std::map<DistillMethod, std::vector<double>> flat_by_method;
  for (const TrajectoryRecord& rec : records) {
    RunCorrelation rc = run_correlation(rec);
    flat_by_method[rc.method].push_back(rc.r_flat);
    report.runs.push_back(rc);
  }
  for (const auto& [method, rs] : flat_by_method) {
    MethodCorrelation agg;
    agg.runs = static_cast<int>(rs.size());
    double sum = 0.0, sum_x = 0.0, sum_y = 0.0;
    for (const RunCorrelation& rc : report.runs) {
      if (rc.method != method) continue;
      sum += rc.r_flat;
      sum_x += rc.r_x;
      sum_y += rc.r_y;
    }
    agg.mean_r = sum / agg.runs;
    agg.mean_r_x = sum_x / agg.runs;
    agg.mean_r_y = sum_y / agg.runs;
    double ss = 0.0;
    for (double r : rs) ss += (r - agg.mean_r) * (r - agg.mean_r);
    agg.std_r = agg.runs > 1 ? std::sqrt(ss / (agg.runs - 1)) : 0.0;
    report.by_method[method] = agg;
  }
  return report;
}

// Terminal-mode statistics over a set of runs.
struct ModeCoverage {
  std::vector<long> histogram;
  long total = 0;
  int distinct_mode_count = 0;
  double normalized_entropy = 0.0;  // H(histogram / total) / ln(class_count)
};

inline ModeCoverage mode_coverage_points(std::span<const Vec2> terminals,
                                         const GaussianMixture& mixture) {
  ModeCoverage cov;
  cov.histogram.assign(mixture.class_count(), 0);
  for (const Vec2& p : terminals) {
    cov.histogram[nearest_mode(mixture, p).first] += 1;
    cov.total += 1;
  }
  double entropy = 0.0;
  for (long h : cov.histogram) {
    if (h == 0) continue;
    cov.distinct_mode_count += 1;
    const double f = static_cast<double>(h) / static_cast<double>(cov.total);
    entropy -= f * std::log(f);
  }
  cov.normalized_entropy = cov.total > 0 ? entropy / std::log(mixture.class_count()) : 0.0;
  return cov;
}

inline ModeCoverage mode_coverage(std::span<const TrajectoryRecord> records,
                                  const GaussianMixture& mixture) {
  std::vector<Vec2> terminals;
  terminals.reserve(records.size());
  for (const TrajectoryRecord& rec : records) terminals.push_back(rec.terminal_theta);
  return mode_coverage_points(terminals, mixture);
}

}  // namespace sdlab
