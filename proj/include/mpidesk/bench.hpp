#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "mpidesk/stack.hpp"

namespace mpidesk {

enum class BenchOp { Alltoall, Bcast, Allreduce };

const char* bench_op_name(BenchOp op);
std::vector<BenchOp> parse_bench_ops(std::string_view spec);  // name or "all"

// 1 B .. 1 MiB in powers of two, the sweep of the latency figures.
std::vector<std::uint64_t> default_bench_sizes();

struct BenchConfig {
  std::vector<BenchOp> ops{BenchOp::Alltoall, BenchOp::Bcast, BenchOp::Allreduce};
  std::vector<std::uint64_t> sizes = default_bench_sizes();
  std::uint32_t iterations = 100;
  std::uint32_t warmup = 10;
  std::uint32_t nranks = 4;
  std::uint32_t repeats = 5;
  std::vector<std::string> backends{"index", "ref"};
  std::vector<StackKind> stacks{StackKind::Native, StackKind::Adapter, StackKind::Engine};
  bool verify = true;

  // Checkpoint workflow: warm up, checkpoint inside the post-warmup pause
  // window, then run the measured sweep (engine stack, single backend).
  bool ckpt_during_pause = false;
  std::uint32_t pause_after_warmup_ms = 100;
  std::filesystem::path ckpt_dir;
};

struct LatencyRecord {
  BenchOp op;
  std::string backend;
  std::string stack;
  std::string phase;  // "run", "pre-restart" or "post-restart"
  std::uint64_t msg_size = 0;
  double median_us = 0.0;
  double stddev_us = 0.0;
  std::optional<double> overhead_pct;  // vs the same-backend native row
};

using BenchCell = std::tuple<std::string, std::string, std::string, std::uint64_t>;

struct BenchResult {
  std::vector<LatencyRecord> records;
  // (op, backend, stack, size) -> digest chained over every timed
  // iteration's verified result buffer on rank 0. Equal digests mean
  // bit-identical results.
  std::map<BenchCell, std::uint64_t> digests;
};

// Full sweep: per size, warmup iterations untimed then timed iterations of
// the collective, each result checked against the serial oracle unless
// verify is off. One record per (op, backend, stack, size).
BenchResult run_osu(const BenchConfig& cfg);

// Resumes a bench checkpoint under a possibly different backend and reruns
// the measured sweep; records carry phase "post-restart".
BenchResult restart_bench(const std::filesystem::path& ckpt_dir, std::string_view backend_name);

// CSV: op,backend,stack,phase,msg_size,median_us,stddev_us,overhead_pct,
// sorted by (op, backend, stack, size), then one summary line per
// (op, backend) with the max overhead across non-native rows.
void emit_report(const std::vector<LatencyRecord>& records, std::ostream& out);

}  // namespace mpidesk
