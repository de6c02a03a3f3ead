#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tamperled/bytes.hpp"
#include "tamperled/error.hpp"
#include "tamperled/ledger.hpp"
#include "tamperled/policy.hpp"
#include "tamperled/tx.hpp"

namespace tamperled::chaincode {

// Execution view handed to a contract during endorsement. Reads go against an
// isolated snapshot of committed world state (a transaction never sees its
// own buffered writes); every touched key is captured exactly once into the
// read-write set, so identical snapshots produce byte-identical rwsets on
// every endorsing peer.
class Stub {
 public:
  Stub(const ledger::WorldState& snapshot, policy::Identity caller, uint64_t timestamp_ms)
      : snapshot_(snapshot), caller_(std::move(caller)), timestamp_ms_(timestamp_ms) {}

  std::optional<Bytes> get_state(const std::string& key);
  void put_state(const std::string& key, Bytes value);
  void del_state(const std::string& key);

  const policy::Identity& caller() const { return caller_; }
  // Logical submission time of the proposal, identical on every endorser.
  uint64_t timestamp_ms() const { return timestamp_ms_; }

  tx::ReadWriteSet take_rwset();

 private:
  const ledger::WorldState& snapshot_;
  policy::Identity caller_;
  uint64_t timestamp_ms_;
  std::vector<tx::ReadEntry> reads_;
  std::map<std::string, size_t> read_index_;
  std::vector<tx::WriteEntry> writes_;
  std::map<std::string, size_t> write_index_;
};

class Chaincode {
 public:
  virtual ~Chaincode() = default;
  virtual const std::string& name() const = 0;
  virtual Result<Bytes> invoke(const std::string& function, const std::vector<Bytes>& args,
                               Stub& stub) = 0;
};

struct ExecutionResult {
  tx::ReadWriteSet rwset;
  Bytes response;
};

// Runs one contract call against a snapshot; errors from the contract pass
// through unchanged (no rwset leaves a failed call).
Result<ExecutionResult> execute(Chaincode& contract, const std::string& function,
                                const std::vector<Bytes>& args,
                                const ledger::WorldState& snapshot,
                                const policy::Identity& caller, uint64_t timestamp_ms);

}  // namespace tamperled::chaincode
