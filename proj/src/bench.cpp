#include "mpidesk/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <thread>

#include "mpidesk/apps.hpp"
#include "mpidesk/bytes.hpp"
#include "mpidesk/hash.hpp"
#include "mpidesk/runner.hpp"

namespace mpidesk {

const char* bench_op_name(BenchOp op) {
  switch (op) {
    case BenchOp::Alltoall: return "alltoall";
    case BenchOp::Bcast: return "bcast";
    case BenchOp::Allreduce: return "allreduce";
  }
  return "invalid";
}

std::vector<BenchOp> parse_bench_ops(std::string_view spec) {
  if (spec == "all") return {BenchOp::Alltoall, BenchOp::Bcast, BenchOp::Allreduce};
  if (spec == "alltoall") return {BenchOp::Alltoall};
  if (spec == "bcast") return {BenchOp::Bcast};
  if (spec == "allreduce") return {BenchOp::Allreduce};
  raise(ErrorCode::BackendFailure, "unknown benchmark op: " + std::string(spec));
}

std::vector<std::uint64_t> default_bench_sizes() {
  std::vector<std::uint64_t> sizes;
  for (std::uint64_t s = 1; s <= (1u << 20); s <<= 1) sizes.push_back(s);
  return sizes;
}

namespace {

// Deterministic payloads: same (op, size, rep, iter, rank) always produces
// the same bytes, independent of stack and backend, so results are
// comparable everywhere and the serial oracle needs no communication.
std::uint64_t fill_seed(BenchOp op, std::uint64_t size, std::uint32_t rep, std::uint32_t iter,
                        std::uint32_t rank) {
  std::uint64_t s = mix64(static_cast<std::uint64_t>(op) * 0x1001 + 17);
  s ^= mix64(size);
  s ^= mix64((static_cast<std::uint64_t>(rep) << 32) | iter);
  s ^= mix64(0xABCD0000ULL + rank);
  return s;
}

void fill_bytes(std::uint8_t* dst, std::uint64_t stream_offset, std::uint64_t len,
                std::uint64_t seed) {
  std::uint64_t pos = stream_offset;
  std::uint64_t i = 0;
  while (i < len) {
    const std::uint64_t word = mix64(seed + pos / 8);
    if (pos % 8 == 0 && len - i >= 8) {
      for (int b = 0; b < 8; ++b) dst[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
      i += 8;
      pos += 8;
    } else {
      dst[i++] = static_cast<std::uint8_t>(word >> (8 * (pos++ % 8)));
    }
  }
}

// Integer-valued doubles in [-2000, 2000]: sums over a few ranks stay exact.
void fill_f64(double* dst, std::uint64_t count, std::uint64_t seed) {
  for (std::uint64_t i = 0; i < count; ++i) {
    dst[i] = static_cast<double>(static_cast<std::int64_t>(mix64(seed + i) % 4001) - 2000);
  }
}

struct CellStats {
  std::vector<double> samples_us;
  std::uint64_t digest = kFnvOffset;
};

[[noreturn]] void verification_failure(BenchOp op, std::uint64_t size, std::uint32_t rank,
                                       std::uint32_t rep, std::uint32_t iter) {
  char msg[160];
  std::snprintf(msg, sizeof(msg),
                "collective result diverged from serial oracle: op=%s size=%llu rank=%u rep=%u "
                "iter=%u",
                bench_op_name(op), static_cast<unsigned long long>(size), rank, rep, iter);
  raise(ErrorCode::BackendFailure, msg);
}

// One iteration: all ranks align on a barrier, the collective is timed
// locally, and the slowest rank's latency is agreed on with an untimed
// max-reduction. Returns that global latency (same value on every rank).
double bench_iteration(Stack& stack, BenchOp op, std::uint64_t size, std::uint32_t rep,
                       std::uint32_t iter, bool verify, std::uint64_t* digest) {
  const std::uint32_t n = stack.size();
  const std::uint32_t rank = stack.rank();
  using clock = std::chrono::steady_clock;
  stack.barrier();
  double us = 0.0;

  switch (op) {
    case BenchOp::Alltoall: {
      std::vector<std::uint8_t> sendbuf(size * n), recvbuf(size * n);
      fill_bytes(sendbuf.data(), 0, sendbuf.size(), fill_seed(op, size, rep, iter, rank));
      const auto t0 = clock::now();
      stack.alltoall(sendbuf.data(), recvbuf.data(), static_cast<std::uint32_t>(size),
                     DtypeSel::Byte);
      us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
      if (verify) {
        std::vector<std::uint8_t> expected(size);
        for (std::uint32_t peer = 0; peer < n; ++peer) {
          fill_bytes(expected.data(), rank * size, size, fill_seed(op, size, rep, iter, peer));
          if (std::memcmp(recvbuf.data() + peer * size, expected.data(), size) != 0) {
            verification_failure(op, size, rank, rep, iter);
          }
        }
      }
      if (digest) *digest = fnv1a64(recvbuf, *digest);
      break;
    }
    case BenchOp::Bcast: {
      std::vector<std::uint8_t> buf(size);
      fill_bytes(buf.data(), 0, size, fill_seed(op, size, rep, iter, rank));
      const auto t0 = clock::now();
      stack.bcast(buf.data(), static_cast<std::uint32_t>(size), DtypeSel::Byte, 0);
      us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
      if (verify) {
        std::vector<std::uint8_t> expected(size);
        fill_bytes(expected.data(), 0, size, fill_seed(op, size, rep, iter, 0));
        if (std::memcmp(buf.data(), expected.data(), size) != 0) {
          verification_failure(op, size, rank, rep, iter);
        }
      }
      if (digest) *digest = fnv1a64(buf, *digest);
      break;
    }
    case BenchOp::Allreduce: {
      const std::uint64_t count = std::max<std::uint64_t>(1, size / 8);
      std::vector<double> sendbuf(count), recvbuf(count);
      fill_f64(sendbuf.data(), count, fill_seed(op, size, rep, iter, rank));
      const auto t0 = clock::now();
      stack.allreduce(sendbuf.data(), recvbuf.data(), static_cast<std::uint32_t>(count),
                      DtypeSel::F64, OpSel::Sum);
      us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
      if (verify) {
        // Serial oracle: fold every rank's deterministic input in ascending
        // rank order, exactly as the canonical reduction does.
        std::vector<double> acc(count), contrib(count);
        fill_f64(acc.data(), count, fill_seed(op, size, rep, iter, 0));
        for (std::uint32_t r = 1; r < n; ++r) {
          fill_f64(contrib.data(), count, fill_seed(op, size, rep, iter, r));
          for (std::uint64_t i = 0; i < count; ++i) acc[i] += contrib[i];
        }
        if (std::memcmp(recvbuf.data(), acc.data(), count * sizeof(double)) != 0) {
          verification_failure(op, size, rank, rep, iter);
        }
      }
      if (digest) {
        *digest = fnv1a64({reinterpret_cast<const std::uint8_t*>(recvbuf.data()),
                           count * sizeof(double)},
                          *digest);
      }
      break;
    }
  }
  double us_global = 0.0;
  stack.allreduce(&us, &us_global, 1, DtypeSel::F64, OpSel::Max);
  return us_global;
}

std::vector<std::uint8_t> pack_bench_blob(const BenchConfig& cfg) {
  ByteWriter w;
  w.str8("bench");
  w.u32(cfg.nranks);
  w.u8(static_cast<std::uint8_t>(cfg.ops.size()));
  for (BenchOp op : cfg.ops) w.u8(static_cast<std::uint8_t>(op));
  w.u32(static_cast<std::uint32_t>(cfg.sizes.size()));
  for (std::uint64_t s : cfg.sizes) w.u64(s);
  w.u32(cfg.iterations);
  w.u32(cfg.warmup);
  w.u32(cfg.repeats);
  w.u8(cfg.verify ? 1 : 0);
  return w.take();
}

BenchConfig unpack_bench_blob(std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  if (r.str8() != "bench") raise(ErrorCode::BackendFailure, "blob is not a bench checkpoint");
  BenchConfig cfg;
  cfg.nranks = r.u32();
  cfg.ops.resize(r.u8());
  for (BenchOp& op : cfg.ops) op = static_cast<BenchOp>(r.u8());
  cfg.sizes.resize(r.u32());
  for (std::uint64_t& s : cfg.sizes) s = r.u64();
  cfg.iterations = r.u32();
  cfg.warmup = r.u32();
  cfg.repeats = r.u32();
  cfg.verify = r.u8() != 0;
  return cfg;
}

// The measured sweep on one rank; rank 0 fills in stats per (op, size).
void sweep(Stack& stack, const BenchConfig& cfg, std::map<BenchCell, CellStats>* stats) {
  const std::uint32_t rank = stack.rank();
  for (BenchOp op : cfg.ops) {
    for (std::uint64_t size : cfg.sizes) {
      for (std::uint32_t w = 0; w < cfg.warmup; ++w) {
        bench_iteration(stack, op, size, 0xFFFF, w, cfg.verify, nullptr);
      }
      CellStats cell;
      for (std::uint32_t rep = 0; rep < cfg.repeats; ++rep) {
        for (std::uint32_t iter = 0; iter < cfg.iterations; ++iter) {
          const double us = bench_iteration(stack, op, size, rep, iter, cfg.verify,
                                            rank == 0 ? &cell.digest : nullptr);
          if (rank == 0) cell.samples_us.push_back(us);
        }
      }
      if (rank == 0) {
        (*stats)[{bench_op_name(op), stack.backend_name(), stack_kind_name(stack.kind()),
                  size}] = std::move(cell);
      }
    }
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void stats_to_records(const BenchConfig& cfg, const std::string& backend, StackKind stack,
                      const std::string& phase, const std::map<BenchCell, CellStats>& stats,
                      BenchResult* result) {
  for (BenchOp op : cfg.ops) {
    for (std::uint64_t size : cfg.sizes) {
      const BenchCell cell{bench_op_name(op), backend, stack_kind_name(stack), size};
      auto it = stats.find(cell);
      if (it == stats.end()) continue;
      LatencyRecord rec;
      rec.op = op;
      rec.backend = backend;
      rec.stack = stack_kind_name(stack);
      rec.phase = phase;
      rec.msg_size = size;
      rec.median_us = median_of(it->second.samples_us);
      rec.stddev_us = stddev_of(it->second.samples_us);
      result->records.push_back(std::move(rec));
      result->digests[cell] = it->second.digest;
    }
  }
}

void compute_overheads(std::vector<LatencyRecord>* records) {
  std::map<std::tuple<std::string, std::string, std::uint64_t>, double> native_median;
  for (const LatencyRecord& r : *records) {
    if (r.stack == "native") {
      native_median[{bench_op_name(r.op), r.backend, r.msg_size}] = r.median_us;
    }
  }
  for (LatencyRecord& r : *records) {
    if (r.stack == "native") {
      r.overhead_pct = 0.0;
      continue;
    }
    auto it = native_median.find({bench_op_name(r.op), r.backend, r.msg_size});
    if (it != native_median.end() && it->second > 0.0) {
      r.overhead_pct = (r.median_us - it->second) / it->second * 100.0;
    }
  }
}

}  // namespace

BenchResult run_osu(const BenchConfig& cfg) {
  if (cfg.iterations < 1) raise(ErrorCode::BackendFailure, "iterations must be >= 1");
  if (!std::is_sorted(cfg.sizes.begin(), cfg.sizes.end()) ||
      std::adjacent_find(cfg.sizes.begin(), cfg.sizes.end()) != cfg.sizes.end()) {
    raise(ErrorCode::BackendFailure, "sizes must be strictly increasing");
  }
  if (cfg.ckpt_during_pause && cfg.ckpt_dir.empty()) {
    raise(ErrorCode::BackendFailure, "checkpoint workflow needs a checkpoint directory");
  }

  BenchResult result;
  const std::vector<StackKind> stacks =
      cfg.ckpt_during_pause ? std::vector<StackKind>{StackKind::Engine} : cfg.stacks;
  const std::vector<std::string> backends =
      cfg.ckpt_during_pause ? std::vector<std::string>{cfg.backends.front()} : cfg.backends;
  const std::string phase = cfg.ckpt_during_pause ? "pre-restart" : "run";

  for (const std::string& backend : backends) {
    for (StackKind stack_kind : stacks) {
      NetworkFabric fabric(cfg.nranks);
      std::map<BenchCell, CellStats> stats;
      run_on_ranks(fabric, [&](RankId rank) {
        auto stack = make_stack(stack_kind, backend, fabric, rank);
        if (cfg.ckpt_during_pause) {
          // Paper workflow: dummy warm-up traffic, then a pause window in
          // which the checkpoint is taken, then the measured run.
          for (BenchOp op : cfg.ops) {
            for (std::uint32_t w = 0; w < cfg.warmup; ++w) {
              bench_iteration(*stack, op, cfg.sizes.front(), 0xFFFE, w, cfg.verify, nullptr);
            }
          }
          stack->checkpoint(pack_bench_blob(cfg), cfg.ckpt_dir);
          std::this_thread::sleep_for(std::chrono::milliseconds(cfg.pause_after_warmup_ms));
          stack->barrier();
        }
        sweep(*stack, cfg, &stats);
      });
      stats_to_records(cfg, backend, stack_kind, phase, stats, &result);
    }
  }
  compute_overheads(&result.records);
  return result;
}

BenchResult restart_bench(const std::filesystem::path& ckpt_dir, std::string_view backend_name) {
  const CheckpointManifest manifest = read_manifest(ckpt_dir);
  NetworkFabric fabric(manifest.nranks);
  BenchResult result;
  std::map<BenchCell, CellStats> stats;
  BenchConfig cfg;
  std::mutex cfg_m;
  run_on_ranks(fabric, [&](RankId rank) {
    auto restored = EngineSession::restart(ckpt_dir, backend_name, fabric, rank);
    const BenchConfig local = unpack_bench_blob(restored.blob);
    if (rank == 0) {
      std::lock_guard<std::mutex> lock(cfg_m);
      cfg = local;
    }
    auto stack = make_engine_stack(std::move(restored.session));
    sweep(*stack, local, &stats);
  });
  stats_to_records(cfg, std::string(backend_name), StackKind::Engine, "post-restart", stats,
                   &result);
  return result;
}

void emit_report(const std::vector<LatencyRecord>& records, std::ostream& out) {
  std::vector<LatencyRecord> rows = records;
  std::sort(rows.begin(), rows.end(), [](const LatencyRecord& a, const LatencyRecord& b) {
    return std::tuple(std::string_view(bench_op_name(a.op)), a.backend, a.stack, a.msg_size) <
           std::tuple(std::string_view(bench_op_name(b.op)), b.backend, b.stack, b.msg_size);
  });
  out << "op,backend,stack,phase,msg_size,median_us,stddev_us,overhead_pct\n";
  char line[256];
  for (const LatencyRecord& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%s,%s,%llu,%.3f,%.3f", bench_op_name(r.op),
                  r.backend.c_str(), r.stack.c_str(), r.phase.c_str(),
                  static_cast<unsigned long long>(r.msg_size), r.median_us, r.stddev_us);
    out << line;
    if (r.overhead_pct) {
      std::snprintf(line, sizeof(line), ",%.1f\n", *r.overhead_pct);
      out << line;
    } else {
      out << ",\n";
    }
  }
  // The per-(op, backend) statistic the latency figures are summarized by.
  std::map<std::pair<std::string, std::string>, double> max_overhead;
  for (const LatencyRecord& r : rows) {
    if (r.stack == "native" || !r.overhead_pct) continue;
    const std::pair<std::string, std::string> key{bench_op_name(r.op), r.backend};
    auto it = max_overhead.find(key);
    if (it == max_overhead.end() || *r.overhead_pct > it->second) {
      max_overhead[key] = *r.overhead_pct;
    }
  }
  for (const auto& [key, pct] : max_overhead) {
    std::snprintf(line, sizeof(line), "# max_overhead op=%s backend=%s pct=%.1f\n",
                  key.first.c_str(), key.second.c_str(), pct);
    out << line;
  }
}

}  // namespace mpidesk
