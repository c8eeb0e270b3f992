#include "selmut/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "selmut/errors.hpp"

namespace selmut::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TraceCsvWriter::TraceCsvWriter(const std::filesystem::path& path) : path_(path), os_(path, std::ios::binary | std::ios::trunc) {
  if (!os_) throw Error("cannot open " + path.string());
  os_ << kTraceHeader << '\n';
  os_.flush();
}

void TraceCsvWriter::write(const TraceRow& r) {
  const double cols[] = {r.t, r.rho, r.rho_dot, r.rho_dot_neg, r.bv_cum, r.conc, r.mean, r.var, r.max_u};
  std::string line;
  for (std::size_t k = 0; k < std::size(cols); ++k) {
    if (k) line += ',';
    line += format_double(cols[k]);
  }
  line += '\n';
  os_ << line;
  os_.flush();
  if (!os_) throw Error("write failed on " + path_.string());
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  TraceCsvWriter w(path);
  for (const auto& r : trace.rows) w.write(r);
}

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("truncated field file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_field(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string());
  os.write(kFieldMagic, sizeof kFieldMagic);
  put_le<std::uint64_t>(os, values.size());
  for (double v : values) put_le<double>(os, v);
  if (!os) throw Error("write failed on " + path.string());
}

std::vector<double> read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kFieldMagic, 8) != 0) throw Error(path.string() + " is not a field file");
  const auto n = get_le<std::uint64_t>(is);
  if (std::filesystem::file_size(path) != 16 + 8 * n) throw Error(path.string() + " is truncated or has trailing bytes");
  std::vector<double> v(n);
  for (auto& x : v) x = get_le<double>(is);
  return v;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw Error("write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_plot_script(const std::filesystem::path& dir) {
  static constexpr std::string_view script = R"PY(#!/usr/bin/env python3
"""Render the traces of this run directory: python3 plot.py [dir]"""
import glob
import json
import os
import struct
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

root = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def read_field(path):
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != b"SELMF64\0":
            raise ValueError(path + " is not a field file")
        (n,) = struct.unpack("<Q", f.read(8))
        return np.frombuffer(f.read(8 * n), dtype="<f8")


traces = sorted(glob.glob(os.path.join(root, "trace_eps_*.csv")))
report = {}
if os.path.exists(os.path.join(root, "report.json")):
    with open(os.path.join(root, "report.json")) as f:
        report = json.load(f)

fig, ax = plt.subplots(2, 3, figsize=(15, 8))
eps_list, conc = [], []
for path in traces:
    d = np.genfromtxt(path, delimiter=",", names=True)
    eps = float(os.path.basename(path)[len("trace_eps_"):-4])
    ax[0, 0].plot(d["t"], d["rho"], label=f"eps={eps:g}")
    ax[0, 1].plot(d["t"], d["bv_cum"], label=f"eps={eps:g}")
    ax[0, 2].semilogy(d["t"], np.maximum(d["rho_dot_neg"], 1e-300), label=f"eps={eps:g}")
    ax[1, 0].plot(d["t"], d["max_u"], label=f"eps={eps:g}")
    c = d["conc"]
    if np.all(np.isfinite(c)):
        eps_list.append(eps)
        conc.append(np.trapz(c, d["t"]))
for run in report.get("runs", []):
    if "bv_bound" in run:
        ax[0, 1].axhline(run["bv_bound"], ls="--", lw=0.8)
ax[0, 0].set_title("rho(t)")
ax[0, 1].set_title("cumulative BV and budget")
ax[0, 2].set_title("(rho_dot)_-")
ax[1, 0].set_title("max u_eps")
for path in sorted(glob.glob(os.path.join(root, "u_eps_*.f64"))):
    u = read_field(path)
    x = np.linspace(report.get("grid", {}).get("x_min", 0), report.get("grid", {}).get("x_max", 1), u.size)
    ax[1, 1].plot(x, u, label=os.path.basename(path)[2:-4])
ax[1, 1].set_title("u_eps at t_end")
if len(eps_list) >= 2:
    ax[1, 2].loglog(eps_list, conc, "o-")
    s = np.polyfit(np.log(eps_list), np.log(conc), 1)[0]
    ax[1, 2].set_title(f"integrated concentration, slope {s:.2f}")
lyap = os.path.join(root, "lyapunov.csv")
if os.path.exists(lyap):
    d = np.genfromtxt(lyap, delimiter=",", names=True)
    ax2 = ax[1, 2].twinx() if len(eps_list) >= 2 else ax[1, 2]
    ax2.plot(d["t"], d["J"], "k-")
    if len(eps_list) < 2:
        ax[1, 2].set_title("J(t)")
for a in ax.flat:
    if a.get_legend_handles_labels()[0]:
        a.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(root, "summary.png"), dpi=120)
)PY";
  write_text(dir / "plot.py", script);
}

}  // namespace selmut::io
