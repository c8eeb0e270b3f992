#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selmut/diagnostics.hpp"

namespace selmut::io {

inline constexpr std::string_view kTraceHeader = "t,rho,rho_dot,rho_dot_neg,bv_cum,conc,mean,var,max_u";
inline constexpr char kFieldMagic[8] = {'S', 'E', 'L', 'M', 'F', '6', '4', '\0'};

/// 17 significant digits, shortest exponent form; nan and inf spelled out.
std::string format_double(double v);

/// Appends one flushed line per row so an interrupted run leaves a valid prefix.
class TraceCsvWriter {
 public:
  explicit TraceCsvWriter(const std::filesystem::path& path);
  void write(const TraceRow& row);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
};

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);

/// 8-byte magic, uint64 count, then little-endian float64 values.
void write_field(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_field(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

/// Writes text atomically through a temporary sibling.
void write_text(const std::filesystem::path& path, std::string_view text);

/// Matplotlib script that renders the run directory it sits in.
void write_plot_script(const std::filesystem::path& dir);

}  // namespace selmut::io
