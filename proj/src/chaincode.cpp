#include "tamperled/chaincode.hpp"

namespace tamperled::chaincode {

std::optional<Bytes> Stub::get_state(const std::string& key) {
  const ledger::WorldState::Entry* entry = snapshot_.get(key);
  if (read_index_.find(key) == read_index_.end()) {
    tx::ReadEntry re;
    re.key = key;
    if (entry != nullptr) re.version = entry->version;
    read_index_[key] = reads_.size();
    reads_.push_back(std::move(re));
  }
  if (entry == nullptr) return std::nullopt;
  return entry->value;
}

void Stub::put_state(const std::string& key, Bytes value) {
  auto it = write_index_.find(key);
  if (it != write_index_.end()) {
    writes_[it->second].value = std::move(value);
    return;
  }
  write_index_[key] = writes_.size();
  writes_.push_back(tx::WriteEntry{key, std::move(value)});
}

void Stub::del_state(const std::string& key) {
  auto it = write_index_.find(key);
  if (it != write_index_.end()) {
    writes_[it->second].value = std::nullopt;
    return;
  }
  write_index_[key] = writes_.size();
  writes_.push_back(tx::WriteEntry{key, std::nullopt});
}

tx::ReadWriteSet Stub::take_rwset() {
  tx::ReadWriteSet rw;
  rw.reads = std::move(reads_);
  rw.writes = std::move(writes_);
  return rw;
}

Result<ExecutionResult> execute(Chaincode& contract, const std::string& function,
                                const std::vector<Bytes>& args,
                                const ledger::WorldState& snapshot,
                                const policy::Identity& caller, uint64_t timestamp_ms) {
  Stub stub(snapshot, caller, timestamp_ms);
  auto response = contract.invoke(function, args, stub);
  if (!response) return response.error();
  ExecutionResult result;
  result.rwset = stub.take_rwset();
  result.response = std::move(response).value();
  return result;
}

}  // namespace tamperled::chaincode
