#pragma once

#include <filesystem>
#include <string>

#include "splitmc/diagnostics.hpp"
#include "splitmc/engine.hpp"

namespace splitmc {

/// Fixed trace schema, one header row then one row per iteration:
///   n,delta,theta,lambda,d_norm,tstar_norm,dist_to_ref,residual,active_blocks
/// Doubles print as shortest round-trip decimals; NaN prints as an empty
/// field. Writes are atomic (temp file + rename).
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

std::string format_double(double v);

/// Comparison table and ensemble series share the same formatting rules.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// Per-iteration ensemble series:
///   n,mean_dist,median_dist,q25_dist,q75_dist,mean_delta,median_delta,mean_dnorm,median_dnorm
void write_summary_series_csv(const std::filesystem::path& path, const EnsembleSummary& es);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace splitmc
