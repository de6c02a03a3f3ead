#include "tamperled/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace tamperled::bench {

using json = nlohmann::json;

Result<void> WorkloadSpec::validate() const {
  if (tx_count < 1) return Error(Err::InvalidConfig, "tx_count must be >= 1");
  if (send_rate <= 0) return Error(Err::InvalidConfig, "send_rate must be > 0");
  if (client_count < 1) return Error(Err::InvalidConfig, "client_count must be >= 1");
  if (warmup_count >= tx_count)
    return Error(Err::InvalidConfig, "warmup_count must be smaller than tx_count");
  return {};
}

Result<Stats> compute_stats(const std::vector<double>& latencies_s, double duration_s) {
  if (duration_s <= 0) return Error(Err::BadRequest, "duration must be > 0");
  Stats s;
  s.tps = double(latencies_s.size()) / duration_s;
  if (latencies_s.empty()) return s;
  double mn = latencies_s.front();
  double mx = latencies_s.front();
  double sum = 0;
  for (double v : latencies_s) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
    sum += v;
  }
  s.latency_min = mn;
  s.latency_max = mx;
  s.latency_avg = sum / double(latencies_s.size());
  return s;
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt2(*v) : "-"; }

}  // namespace

std::string BenchmarkReport::to_table() const {
  std::string s;
  s += "+----------------+------+------+-----------+-----------------+-----------------+-----------------+------------------+\n";
  s += "| name           | succ | fail | send rate | max latency (s) | min latency (s) | avg latency (s) | throughput (tps) |\n";
  s += "+----------------+------+------+-----------+-----------------+-----------------+-----------------+------------------+\n";
  char row[256];
  std::snprintf(row, sizeof row, "| %-14s | %4llu | %4llu | %9.1f | %15s | %15s | %15s | %16.1f |\n",
                function.c_str(), static_cast<unsigned long long>(success_count),
                static_cast<unsigned long long>(fail_count), send_rate,
                fmt_opt(stats.latency_max).c_str(), fmt_opt(stats.latency_min).c_str(),
                fmt_opt(stats.latency_avg).c_str(), stats.tps);
  s += row;
  s += "+----------------+------+------+-----------+-----------------+-----------------+-----------------+------------------+\n";
  s += "mode=" + mode + " tx_count=" + std::to_string(tx_count) +
       " warmup=" + std::to_string(warmup_count) + " duration_s=" + fmt2(duration_s) + "\n";
  return s;
}

std::string BenchmarkReport::to_json() const {
  json j{{"mode", mode},
         {"function", function},
         {"tx_count", tx_count},
         {"warmup_count", warmup_count},
         {"send_rate", send_rate},
         {"duration_s", duration_s},
         {"tps", stats.tps},
         {"success_count", success_count},
         {"fail_count", fail_count}};
  if (stats.latency_min) {
    j["latency_min_s"] = *stats.latency_min;
    j["latency_avg_s"] = *stats.latency_avg;
    j["latency_max_s"] = *stats.latency_max;
  } else {
    j["latency_min_s"] = nullptr;
    j["latency_avg_s"] = nullptr;
    j["latency_max_s"] = nullptr;
  }
  j["flag_counts"] = flag_counts;
  j["samples_s"] = samples;
  return j.dump(2);
}

namespace {

struct RunState {
  uint64_t done = 0;
  uint64_t issued = 0;
  std::optional<uint64_t> first_measured_submit_ms;
  uint64_t last_measured_commit_ms = 0;
  BenchmarkReport report;
};

std::vector<Bytes> to_arg_bytes(const std::vector<std::string>& args) {
  std::vector<Bytes> out;
  out.reserve(args.size());
  for (const auto& a : args) out.push_back(to_bytes(a));
  return out;
}

}  // namespace

Result<BenchmarkReport> run_benchmark(net::SimNetwork& net, const WorkloadSpec& spec,
                                      const std::vector<net::Client*>& clients) {
  if (auto v = spec.validate(); !v) return v.error();
  if (clients.empty()) return Error(Err::PreparationFailed, "no load clients");
  if (net.channel_config(spec.channel) == nullptr)
    return Error(Err::NetworkDown, "channel is not up: " + spec.channel);

  auto state = std::make_shared<RunState>();
  state->report.mode = "deterministic-logical";
  state->report.function = spec.function;
  state->report.tx_count = spec.tx_count;
  state->report.warmup_count = spec.warmup_count;
  state->report.send_rate = spec.send_rate;

  const uint64_t start_ms = net.loop().now_ms();
  for (uint64_t i = 0; i < spec.tx_count; ++i) {
    const uint64_t at = start_ms + uint64_t(std::floor(double(i) * 1000.0 / spec.send_rate));
    const bool warmup = i < spec.warmup_count;
    net::Client* client = clients[i % clients.size()];
    net.loop().schedule_at(at, [&net, state, client, warmup, spec] {
      const uint64_t submit_ms = net.loop().now_ms();
      if (!warmup && !state->first_measured_submit_ms)
        state->first_measured_submit_ms = submit_ms;
      ++state->issued;
      client->invoke(spec.channel, spec.chaincode, spec.function, to_arg_bytes(spec.args),
                     [&net, state, warmup, submit_ms](Result<net::CommitEvent> r) {
                       ++state->done;
                       if (warmup) return;
                       if (r.ok()) {
                         const auto& ev = r.value();
                         ++state->report.flag_counts[ledger::validity_name(ev.flag)];
                         state->last_measured_commit_ms =
                             std::max(state->last_measured_commit_ms, ev.commit_time_ms);
                         if (ev.flag == ledger::Validity::valid) {
                           ++state->report.success_count;
                           state->report.samples.push_back(
                               double(ev.commit_time_ms - submit_ms) / 1000.0);
                         } else {
                           ++state->report.fail_count;
                         }
                       } else {
                         ++state->report.flag_counts["REJECTED"];
                         ++state->report.fail_count;
                       }
                     });
    });
  }

  net.run();

  if (state->done != spec.tx_count)
    return Error(Err::NetworkDown, "pipeline stalled: " + std::to_string(state->done) + "/" +
                                       std::to_string(spec.tx_count) + " resolved");

  uint64_t first = state->first_measured_submit_ms.value_or(start_ms);
  uint64_t last = std::max(state->last_measured_commit_ms, first + 1);
  state->report.duration_s = double(last - first) / 1000.0;
  auto stats = compute_stats(state->report.samples, state->report.duration_s);
  if (!stats) return stats.error();
  state->report.stats = stats.value();
  return state->report;
}

Result<BenchmarkReport> run_benchmark_concurrent(net::SimNetwork& net,
                                                 const WorkloadSpec& spec,
                                                 const std::vector<net::Client*>& clients) {
  if (auto v = spec.validate(); !v) return v.error();
  if (clients.empty()) return Error(Err::PreparationFailed, "no load clients");
  const net::ChannelConfig* config = net.channel_config(spec.channel);
  if (config == nullptr) return Error(Err::NetworkDown, "channel is not up: " + spec.channel);

  using Clock = std::chrono::steady_clock;
  struct SubmitInfo {
    Clock::time_point submitted;
    bool warmup;
  };
  struct Shared {
    std::mutex mu;  // serializes all access to the network actors
    std::condition_variable cv;
    std::map<std::string, SubmitInfo> inflight;
    uint64_t completed = 0;
    uint64_t issued = 0;
    std::optional<Clock::time_point> first_measured_submit;
    Clock::time_point last_measured_commit;
    BenchmarkReport report;
  } shared;

  const auto wall_epoch = Clock::now();
  auto wall_ms = [wall_epoch] {
    return uint64_t(std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                          wall_epoch)
                        .count());
  };

  shared.report.mode = "concurrent-wall";
  shared.report.function = spec.function;
  shared.report.tx_count = spec.tx_count;
  shared.report.warmup_count = spec.warmup_count;
  shared.report.send_rate = spec.send_rate;

  auto deliver_and_record = [&](net::BlockDelivery delivery) {
    // mu held. All peers commit; latency comes from the first peer's events.
    std::vector<net::CommitEvent> events;
    bool first_peer = true;
    for (const auto& peer : net.peers()) {
      if (!peer->joined(spec.channel)) continue;
      auto r = peer->deliver_block(delivery);
      if (first_peer && r.ok()) {
        events = std::move(r).value();
        first_peer = false;
      }
    }
    const auto now = Clock::now();
    for (const auto& ev : events) {
      auto it = shared.inflight.find(ev.tx_id.hex());
      if (it == shared.inflight.end()) continue;
      ++shared.completed;
      if (!it->second.warmup) {
        shared.last_measured_commit = std::max(shared.last_measured_commit, now);
        ++shared.report.flag_counts[ledger::validity_name(ev.flag)];
        if (ev.flag == ledger::Validity::valid) {
          ++shared.report.success_count;
          shared.report.samples.push_back(
              std::chrono::duration<double>(now - it->second.submitted).count());
        } else {
          ++shared.report.fail_count;
        }
      }
      shared.inflight.erase(it);
    }
    shared.cv.notify_all();
  };

  std::atomic<bool> cutter_stop{false};
  std::thread cutter([&] {
    while (!cutter_stop.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          std::max<uint64_t>(1, config->batch_timeout_ms / 4)));
      std::lock_guard<std::mutex> lk(shared.mu);
      // Wall-clock batch timeout measured from the oldest queued envelope.
      while (true) {
        auto oldest = net.orderer()->oldest_arrival_ms(spec.channel);
        if (!oldest || wall_ms() < *oldest + config->batch_timeout_ms) break;
        auto cut = net.orderer()->try_cut(spec.channel, wall_ms(), /*timeout_elapsed=*/true);
        if (!cut) break;
        deliver_and_record(std::move(*cut));
      }
    }
  });

  const auto bench_start = Clock::now();
  const uint32_t worker_count = std::min<uint32_t>(spec.client_count, uint32_t(clients.size()));
  std::vector<std::thread> workers;
  for (uint32_t c = 0; c < worker_count; ++c) {
    workers.emplace_back([&, c] {
      net::Client* client = clients[c % clients.size()];
      for (uint64_t i = c; i < spec.tx_count; i += worker_count) {
        const auto planned =
            bench_start + std::chrono::microseconds(uint64_t(double(i) * 1e6 / spec.send_rate));
        std::this_thread::sleep_until(planned);
        const bool warmup = i < spec.warmup_count;

        std::unique_lock<std::mutex> lk(shared.mu);
        tx::Proposal proposal = client->make_proposal(spec.channel, spec.chaincode,
                                                      spec.function, to_arg_bytes(spec.args));
        auto targets = net.endorsing_peers(spec.channel, spec.chaincode);
        std::vector<tx::Endorsement> endorsements;
        for (net::Peer* p : targets) {
          auto e = p->endorse(proposal);
          if (e) endorsements.push_back(std::move(e).value());
        }
        ++shared.issued;
        if (endorsements.empty()) {
          ++shared.completed;
          if (!warmup) {
            ++shared.report.fail_count;
            ++shared.report.flag_counts["REJECTED"];
          }
          continue;
        }
        tx::TransactionEnvelope envelope{std::move(proposal), std::move(endorsements)};
        const auto now = Clock::now();
        auto submitted = net.orderer()->submit(envelope, wall_ms());
        if (!submitted) {
          ++shared.completed;
          if (!warmup) {
            ++shared.report.fail_count;
            ++shared.report.flag_counts["REJECTED"];
          }
          continue;
        }
        if (!warmup && !shared.first_measured_submit) shared.first_measured_submit = now;
        shared.inflight.emplace(submitted.value().hex(), SubmitInfo{now, warmup});
        while (true) {
          auto cut = net.orderer()->try_cut(spec.channel, wall_ms(),
                                            /*timeout_elapsed=*/false);
          if (!cut) break;
          deliver_and_record(std::move(*cut));
        }
      }
    });
  }
  for (auto& w : workers) w.join();

  {
    std::unique_lock<std::mutex> lk(shared.mu);
    shared.cv.wait_for(lk, std::chrono::seconds(30),
                       [&] { return shared.completed >= shared.issued; });
  }
  cutter_stop.store(true);
  cutter.join();

  std::lock_guard<std::mutex> lk(shared.mu);
  auto first = shared.first_measured_submit.value_or(bench_start);
  auto last = shared.last_measured_commit;
  double duration = std::chrono::duration<double>(last - first).count();
  if (duration <= 0) duration = 0.001;
  shared.report.duration_s = duration;
  auto stats = compute_stats(shared.report.samples, duration);
  if (!stats) return stats.error();
  shared.report.stats = stats.value();
  return shared.report;
}

}  // namespace tamperled::bench
