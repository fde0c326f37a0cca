#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>

#include "mpidesk/apps.hpp"
#include "mpidesk/bench.hpp"
#include "mpidesk/runner.hpp"

namespace {

using namespace mpidesk;

std::string default_backend() {
  const char* env = std::getenv("MPIDESK_BACKEND");
  return env && *env ? env : "index";
}

void dump_tables(NetworkFabric& fabric, const std::vector<std::string>& tables,
                 const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::BackendFailure, "cannot open " + path);
  for (std::uint32_t r = 0; r < fabric.nranks(); ++r) {
    out << "# rank " << r << "\n" << tables[r];
  }
}

int cmd_run(const std::string& app, const std::string& backend, const std::string& stack_name,
            std::uint32_t ranks, std::uint64_t length, std::uint32_t steps,
            std::int64_t ckpt_at, const std::string& ckpt_dir, const std::string& trace,
            const std::string& dump_table) {
  const StackKind stack_kind = parse_stack_kind(stack_name);
  NetworkFabric fabric(ranks);
  if (!trace.empty()) fabric.set_trace(make_file_trace(trace));

  std::optional<std::uint32_t> ckpt_step;
  if (ckpt_at >= 0) {
    if (ckpt_dir.empty()) raise(ErrorCode::BackendFailure, "--ckpt-at requires --ckpt-dir");
    ckpt_step = static_cast<std::uint32_t>(ckpt_at);
  }

  std::uint64_t final_hash = 0;
  std::vector<std::string> tables(ranks);
  run_on_ranks(fabric, [&](RankId rank) {
    auto stack = make_stack(stack_kind, backend, fabric, rank);
    std::uint64_t h = 0;
    if (app == "wave") {
      WaveConfig cfg;
      cfg.length = length;
      cfg.steps = steps;
      cfg.ckpt_at = ckpt_step;
      cfg.ckpt_dir = ckpt_dir;
      h = run_wave(*stack, cfg);
    } else if (app == "ring") {
      RingConfig cfg;
      cfg.steps = steps;
      cfg.ckpt_at = ckpt_step;
      cfg.ckpt_dir = ckpt_dir;
      h = run_ring(*stack, cfg);
    } else {
      raise(ErrorCode::BackendFailure, "unknown app: " + app);
    }
    if (rank == 0) final_hash = h;
    if (!dump_table.empty()) {
      if (AdapterInstance* a = stack->adapter_instance()) {
        std::ostringstream os;
        a->dump_table(os);
        tables[rank] = os.str();
      }
    }
  });
  if (!dump_table.empty()) dump_tables(fabric, tables, dump_table);
  std::printf("%s final_hash=0x%016llx\n", app.c_str(),
              static_cast<unsigned long long>(final_hash));
  return 0;
}

int cmd_restart(const std::string& ckpt_dir, const std::string& backend,
                const std::string& out_path, const std::string& trace) {
  const CheckpointManifest manifest = read_manifest(ckpt_dir);

  // Peek one image to learn which application to resume.
  std::ifstream probe(std::filesystem::path(ckpt_dir) / manifest.files[0], std::ios::binary);
  if (!probe) raise(ErrorCode::BackendFailure, "cannot read checkpoint image");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(probe)),
                                  std::istreambuf_iterator<char>());
  const std::string app = blob_app_tag(deserialize_image(bytes).blob);

  if (app == "bench") {
    const BenchResult result = restart_bench(ckpt_dir, backend);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) raise(ErrorCode::BackendFailure, "cannot open " + out_path);
    emit_report(result.records, out);
    std::printf("bench post-restart records=%zu out=%s\n", result.records.size(),
                out_path.c_str());
    return 0;
  }

  NetworkFabric fabric(manifest.nranks);
  if (!trace.empty()) fabric.set_trace(make_file_trace(trace));
  std::uint64_t final_hash = 0;
  run_on_ranks(fabric, [&](RankId rank) {
    auto restored = EngineSession::restart(ckpt_dir, backend, fabric, rank);
    auto stack = make_engine_stack(std::move(restored.session));
    std::uint64_t h = 0;
    if (app == "wave") {
      h = resume_wave(*stack, restored.blob);
    } else if (app == "ring") {
      h = resume_ring(*stack, restored.blob);
    } else {
      raise(ErrorCode::BackendFailure, "unknown app in checkpoint: " + app);
    }
    if (rank == 0) final_hash = h;
  });
  std::printf("%s final_hash=0x%016llx\n", app.c_str(),
              static_cast<unsigned long long>(final_hash));
  return 0;
}

int cmd_bench(const std::string& op_spec, std::uint32_t ranks, std::uint32_t repeats,
              std::uint32_t iterations, std::uint32_t warmup, const std::string& sizes_csv,
              bool no_verify, std::uint32_t pause_ms, bool ckpt_during_pause,
              const std::string& ckpt_dir, const std::string& backend,
              const std::string& out_path) {
  BenchConfig cfg;
  cfg.ops = parse_bench_ops(op_spec);
  cfg.nranks = ranks;
  cfg.repeats = repeats;
  cfg.iterations = iterations;
  cfg.warmup = warmup;
  cfg.verify = !no_verify;
  cfg.pause_after_warmup_ms = pause_ms;
  cfg.ckpt_during_pause = ckpt_during_pause;
  cfg.ckpt_dir = ckpt_dir;
  if (ckpt_during_pause) cfg.backends = {backend};
  if (!sizes_csv.empty()) {
    cfg.sizes.clear();
    std::istringstream ss(sizes_csv);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.sizes.push_back(std::stoull(item));
  }

  const BenchResult result = run_osu(cfg);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) raise(ErrorCode::BackendFailure, "cannot open " + out_path);
  emit_report(result.records, out);
  std::printf("bench records=%zu out=%s\n", result.records.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Desk-scale ABI interoperability and transparent checkpointing demo"};
  cli.require_subcommand(1);

  // run
  auto* run = cli.add_subcommand("run", "Run a mini-app on a chosen backend and stack");
  std::string app = "wave";
  std::string backend = default_backend();
  std::string stack_name = "native";
  std::uint32_t ranks = 4;
  std::uint64_t length = 1024;
  std::uint32_t steps = 1000;
  std::int64_t ckpt_at = -1;
  std::string ckpt_dir;
  std::string trace;
  std::string dump_table;
  run->add_option("--app", app, "wave or ring")->check(CLI::IsMember({"wave", "ring"}));
  run->add_option("--backend", backend, "index or ref")
      ->check(CLI::IsMember({"index", "ref"}));
  run->add_option("--stack", stack_name, "native, adapter or engine")
      ->check(CLI::IsMember({"native", "adapter", "engine"}));
  run->add_option("--ranks", ranks, "rank count")->check(CLI::PositiveNumber);
  run->add_option("--length", length, "wave field length");
  run->add_option("--steps", steps, "time steps");
  run->add_option("--ckpt-at", ckpt_at, "checkpoint at this step (engine stack only)");
  run->add_option("--ckpt-dir", ckpt_dir, "checkpoint directory");
  run->add_option("--trace", trace, "append transport events to this file");
  run->add_option("--dump-table", dump_table, "write the adapter translation tables (TSV)");

  // restart
  auto* restart = cli.add_subcommand("restart", "Restart from a checkpoint directory");
  std::string r_dir;
  std::string r_backend = default_backend();
  std::string r_out = "restart_report.csv";
  std::string r_trace;
  restart->add_option("--ckpt-dir", r_dir, "checkpoint directory")->required();
  restart->add_option("--backend", r_backend, "backend to restart under")
      ->check(CLI::IsMember({"index", "ref"}));
  restart->add_option("--out", r_out, "report path when resuming a bench checkpoint");
  restart->add_option("--trace", r_trace, "append transport events to this file");

  // bench
  auto* bench = cli.add_subcommand("bench", "Latency sweep across backends and stacks");
  std::string op_spec = "all";
  std::uint32_t b_ranks = 4;
  std::uint32_t repeats = 5;
  std::uint32_t iterations = 100;
  std::uint32_t warmup = 10;
  std::string sizes_csv;
  bool no_verify = false;
  std::uint32_t pause_ms = 100;
  bool ckpt_during_pause = false;
  std::string b_ckpt_dir;
  std::string b_backend = default_backend();
  std::string out_path = "report.csv";
  bench->add_option("--op", op_spec, "alltoall, bcast, allreduce or all")
      ->check(CLI::IsMember({"alltoall", "bcast", "allreduce", "all"}));
  bench->add_option("--ranks", b_ranks, "rank count")->check(CLI::PositiveNumber);
  bench->add_option("--repeats", repeats, "harness repeats pooled into each record");
  bench->add_option("--iterations", iterations, "timed iterations per repeat");
  bench->add_option("--warmup", warmup, "untimed iterations per size");
  bench->add_option("--sizes", sizes_csv, "comma-separated message sizes in bytes");
  bench->add_flag("--no-verify", no_verify, "skip the serial-oracle result check");
  bench->add_option("--pause-after-warmup-ms", pause_ms,
                    "length of the checkpointable window after warmup");
  bench->add_flag("--ckpt-during-pause", ckpt_during_pause,
                  "checkpoint inside the pause window (restricts to the engine stack)");
  bench->add_option("--ckpt-dir", b_ckpt_dir, "checkpoint directory");
  bench->add_option("--backend", b_backend, "backend for the checkpoint workflow");
  bench->add_option("--out", out_path, "report CSV path");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (cli.got_subcommand(run)) {
      return cmd_run(app, backend, stack_name, ranks, length, steps, ckpt_at, ckpt_dir, trace,
                     dump_table);
    }
    if (cli.got_subcommand(restart)) {
      return cmd_restart(r_dir, r_backend, r_out, r_trace);
    }
    return cmd_bench(op_spec, b_ranks, repeats, iterations, warmup, sizes_csv, no_verify,
                     pause_ms, ckpt_during_pause, b_ckpt_dir, b_backend, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
