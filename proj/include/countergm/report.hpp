#ifndef COUNTERGM_REPORT_HPP
#define COUNTERGM_REPORT_HPP

#include <cstdint>
#include <iosfwd>
#include <string>

#include "countergm/distributions.hpp"
#include "countergm/inference.hpp"

namespace countergm {

/// Provenance attached to every emitted artifact.
struct RunMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string command;
};

std::string hex64(std::uint64_t v);

/// Wald test of theta_k = 0 at alpha = 0.05 (two-sided).
bool wald_significant(double estimate, double std_error);

void write_fit_table(std::ostream& out, const FitResult& fit, const RunMeta& meta);
void write_fit_csv(std::ostream& out, const FitResult& fit, const RunMeta& meta);
void write_fit_json(std::ostream& out, const FitResult& fit, const RunMeta& meta);

void write_diagnostics_table(std::ostream& out, const Diagnostics& diag, const RunMeta& meta);
void write_diagnostics_csv(std::ostream& out, const Diagnostics& diag, const RunMeta& meta);
void write_diagnostics_json(std::ostream& out, const Diagnostics& diag, const RunMeta& meta);

/// One row per retained draw; header = term labels.
void write_stats_csv(std::ostream& out, const SampleBatch& batch, const RunMeta& meta);

void write_test_table(std::ostream& out, const McTestResult& r, const RunMeta& meta);
void write_test_csv(std::ostream& out, const McTestResult& r, const RunMeta& meta);
void write_test_json(std::ostream& out, const McTestResult& r, const RunMeta& meta);

}  // namespace countergm

#endif
