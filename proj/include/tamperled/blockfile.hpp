#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tamperled/bytes.hpp"
#include "tamperled/error.hpp"

namespace tamperled::blockfile {

// On-disk layout per channel:
//   blocks.dat — append-only frames: 4-byte big-endian record length + record
//   blocks.idx — 8-byte big-endian offset of each frame start in blocks.dat
// The index is an acceleration structure; open() rebuilds it from the data
// file whenever it disagrees (covers a crash between data and index writes).

inline constexpr const char* kDataFileName = "blocks.dat";
inline constexpr const char* kIndexFileName = "blocks.idx";

struct Frame {
  uint64_t offset;  // of the 4-byte length prefix
  uint32_t length;  // record length (excludes the prefix)
};

// Scans blocks.dat sequentially. A trailing partial frame (crash artifact) is
// truncated away; complete frames are kept even if their contents no longer
// parse, since that is exactly the evidence verification must see.
Result<std::vector<Frame>> scan_and_recover(const std::filesystem::path& dir);

Result<Bytes> read_record(const std::filesystem::path& dir, const Frame& frame);

// Appends one frame (flushed and fsynced before returning) and extends the
// index.
Result<Frame> append_record(const std::filesystem::path& dir, const Bytes& record);

Result<void> write_index(const std::filesystem::path& dir, const std::vector<Frame>& frames);
Result<std::vector<uint64_t>> read_index(const std::filesystem::path& dir);

// XOR-flips one byte of the given block's record (offset is relative to the
// record, not the frame). Used by the tamper-injection utility.
Result<void> flip_record_byte(const std::filesystem::path& dir, uint64_t block_number,
                              uint64_t byte_offset);

}  // namespace tamperled::blockfile
