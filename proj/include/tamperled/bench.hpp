#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tamperled/network.hpp"

namespace tamperled::bench {

struct WorkloadSpec {
  std::string channel;
  std::string chaincode = "silomonitor";
  std::string function = "ReadTemperature";
  std::vector<std::string> args;  // UTF-8 argument strings
  uint64_t tx_count = 100;
  double send_rate = 50.0;  // tx per second
  uint32_t client_count = 1;
  uint64_t warmup_count = 10;  // first transactions, excluded from stats

  Result<void> validate() const;
};

struct Stats {
  double tps = 0;
  std::optional<double> latency_min;
  std::optional<double> latency_avg;
  std::optional<double> latency_max;
};

// Pure arithmetic over raw latency samples. Empty input yields tps 0 and
// absent latencies. duration must be > 0.
Result<Stats> compute_stats(const std::vector<double>& latencies_s, double duration_s);

struct BenchmarkReport {
  std::string mode;  // "deterministic-logical" or "concurrent-wall"
  std::string function;
  uint64_t tx_count = 0;
  uint64_t warmup_count = 0;
  double send_rate = 0;
  double duration_s = 0;
  Stats stats;
  uint64_t success_count = 0;  // committed VALID, non-warmup
  uint64_t fail_count = 0;     // everything else, non-warmup
  std::map<std::string, uint64_t> flag_counts;  // per validity flag / REJECTED
  std::vector<double> samples;  // raw non-warmup latencies of successes, seconds

  std::string to_table() const;
  std::string to_json() const;
};

// Drives the full submit-to-commit pipeline on the deterministic event loop;
// latency is measured at the issuing client against its anchor peer's commit
// event, in logical time.
Result<BenchmarkReport> run_benchmark(net::SimNetwork& net, const WorkloadSpec& spec,
                                      const std::vector<net::Client*>& clients);

// Wall-clock variant: each client runs on its own thread against the shared
// network (serialized internally); a cutter thread enforces batch timeouts.
Result<BenchmarkReport> run_benchmark_concurrent(net::SimNetwork& net,
                                                 const WorkloadSpec& spec,
                                                 const std::vector<net::Client*>& clients);

}  // namespace tamperled::bench
