#include "tamperled/blockfile.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <memory>

#include <unistd.h>

namespace tamperled::blockfile {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using File = std::unique_ptr<FILE, FileCloser>;

File open_file(const fs::path& p, const char* mode) { return File(std::fopen(p.c_str(), mode)); }

uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

void put_be32(uint8_t* p, uint32_t v) {
  p[0] = uint8_t(v >> 24);
  p[1] = uint8_t(v >> 16);
  p[2] = uint8_t(v >> 8);
  p[3] = uint8_t(v);
}

void put_be64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = uint8_t(v >> (8 * (7 - i)));
}

uint64_t be64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

Error io_error(const std::string& what) {
  return Error(Err::Io, what + ": " + std::strerror(errno));
}

}  // namespace

Result<std::vector<Frame>> scan_and_recover(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path data = dir / kDataFileName;
  std::vector<Frame> frames;
  if (!fs::exists(data)) {
    // Fresh store.
    auto f = open_file(data, "wb");
    if (!f) return io_error("create " + data.string());
    if (auto w = write_index(dir, frames); !w) return w.error();
    return frames;
  }

  auto f = open_file(data, "rb");
  if (!f) return io_error("open " + data.string());
  uint64_t file_size = fs::file_size(data, ec);
  if (ec) return Error(Err::Io, "stat " + data.string());

  uint64_t pos = 0;
  uint64_t good_end = 0;
  while (pos + 4 <= file_size) {
    uint8_t len_buf[4];
    if (std::fseek(f.get(), long(pos), SEEK_SET) != 0) return io_error("seek");
    if (std::fread(len_buf, 1, 4, f.get()) != 4) break;
    uint32_t len = be32(len_buf);
    if (pos + 4 + len > file_size) break;  // partial tail frame
    frames.push_back(Frame{pos, len});
    pos += 4 + len;
    good_end = pos;
  }

  if (good_end < file_size) {
    // Truncate the partial tail so the store ends on a complete frame.
    f.reset();
    if (truncate(data.c_str(), off_t(good_end)) != 0) return io_error("truncate");
  }

  // Rebuild the index if it does not match the scan.
  auto idx = read_index(dir);
  bool matches = idx.ok() && idx.value().size() == frames.size();
  if (matches)
    for (size_t i = 0; i < frames.size(); ++i)
      if (idx.value()[i] != frames[i].offset) {
        matches = false;
        break;
      }
  if (!matches)
    if (auto w = write_index(dir, frames); !w) return w.error();
  return frames;
}

Result<Bytes> read_record(const fs::path& dir, const Frame& frame) {
  auto f = open_file(dir / kDataFileName, "rb");
  if (!f) return io_error("open data file");
  if (std::fseek(f.get(), long(frame.offset + 4), SEEK_SET) != 0) return io_error("seek");
  Bytes record(frame.length);
  if (frame.length > 0 && std::fread(record.data(), 1, record.size(), f.get()) != record.size())
    return Error(Err::Io, "short read");
  return record;
}

Result<Frame> append_record(const fs::path& dir, const Bytes& record) {
  const fs::path data = dir / kDataFileName;
  auto f = open_file(data, "ab");
  if (!f) return io_error("open data file for append");
  if (std::fseek(f.get(), 0, SEEK_END) != 0) return io_error("seek end");
  long off = std::ftell(f.get());
  if (off < 0) return io_error("tell");

  uint8_t len_buf[4];
  put_be32(len_buf, uint32_t(record.size()));
  if (std::fwrite(len_buf, 1, 4, f.get()) != 4) return io_error("write frame length");
  if (!record.empty() &&
      std::fwrite(record.data(), 1, record.size(), f.get()) != record.size())
    return io_error("write record");
  if (std::fflush(f.get()) != 0) return io_error("flush");
  if (fsync(fileno(f.get())) != 0) return io_error("fsync");

  Frame frame{uint64_t(off), uint32_t(record.size())};

  // Index extends after the durable data write; open() recovers if we crash
  // in between.
  auto idxf = open_file(dir / kIndexFileName, "ab");
  if (!idxf) return io_error("open index for append");
  uint8_t off_buf[8];
  put_be64(off_buf, frame.offset);
  if (std::fwrite(off_buf, 1, 8, idxf.get()) != 8) return io_error("write index entry");
  if (std::fflush(idxf.get()) != 0) return io_error("flush index");
  return frame;
}

Result<void> write_index(const fs::path& dir, const std::vector<Frame>& frames) {
  auto f = open_file(dir / kIndexFileName, "wb");
  if (!f) return io_error("open index for write");
  for (const Frame& fr : frames) {
    uint8_t buf[8];
    put_be64(buf, fr.offset);
    if (std::fwrite(buf, 1, 8, f.get()) != 8) return io_error("write index");
  }
  if (std::fflush(f.get()) != 0) return io_error("flush index");
  return {};
}

Result<std::vector<uint64_t>> read_index(const fs::path& dir) {
  const fs::path idx = dir / kIndexFileName;
  if (!fs::exists(idx)) return Error(Err::Io, "no index file");
  auto f = open_file(idx, "rb");
  if (!f) return io_error("open index");
  std::vector<uint64_t> offsets;
  uint8_t buf[8];
  while (std::fread(buf, 1, 8, f.get()) == 8) offsets.push_back(be64(buf));
  return offsets;
}

Result<void> flip_record_byte(const fs::path& dir, uint64_t block_number,
                              uint64_t byte_offset) {
  auto frames = scan_and_recover(dir);
  if (!frames) return frames.error();
  if (block_number >= frames.value().size())
    return Error(Err::OutOfRange,
                 "block " + std::to_string(block_number) + " beyond height " +
                     std::to_string(frames.value().size()));
  const Frame& frame = frames.value()[block_number];
  if (byte_offset >= frame.length)
    return Error(Err::OutOfRange, "offset " + std::to_string(byte_offset) +
                                      " beyond record length " + std::to_string(frame.length));
  auto f = open_file(dir / kDataFileName, "rb+");
  if (!f) return io_error("open data file for mutation");
  long pos = long(frame.offset + 4 + byte_offset);
  if (std::fseek(f.get(), pos, SEEK_SET) != 0) return io_error("seek");
  int c = std::fgetc(f.get());
  if (c == EOF) return Error(Err::Io, "read byte");
  uint8_t flipped = uint8_t(c) ^ 0xFF;
  if (std::fseek(f.get(), pos, SEEK_SET) != 0) return io_error("seek");
  if (std::fputc(flipped, f.get()) == EOF) return io_error("write byte");
  if (std::fflush(f.get()) != 0) return io_error("flush");
  return {};
}

}  // namespace tamperled::blockfile
