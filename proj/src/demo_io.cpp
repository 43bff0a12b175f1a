#include "gridrl/demo_io.hpp"

#include <filesystem>
#include <fstream>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t uint(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw IoError("truncated demo file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("truncated demo file");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_demos(const std::string& path, const std::vector<DemoRecord>& demos) {
  std::string out;
  out.append(kDemoMagic, 4);
  put_u32(out, kDemoVersion);
  put_u32(out, static_cast<std::uint32_t>(demos.size()));
  for (const DemoRecord& demo : demos) {
    put_u64(out, demo.scenario_seed);
    put_u32(out, static_cast<std::uint32_t>(demo.task_id));
    put_u32(out, static_cast<std::uint32_t>(demo.tokens.size()));
    for (int token : demo.tokens) {
      if (token < 0 || token > 0xffff) throw IoError("token out of range");
      put_u16(out, static_cast<std::uint16_t>(token));
    }
    out.push_back(demo.success ? '\x01' : '\x00');
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open '" + tmp + "' for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename to '" + path + "' failed: " + ec.message());
}

std::vector<DemoRecord> load_demos(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  Reader reader(std::string((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>()));
  if (reader.str(4) != std::string(kDemoMagic, 4)) {
    throw IoError("'" + path + "' is not a demo file");
  }
  const auto version = static_cast<std::uint32_t>(reader.uint(4));
  if (version != kDemoVersion) {
    throw IoError("unsupported demo file version " + std::to_string(version));
  }
  const auto count = static_cast<std::uint32_t>(reader.uint(4));
  std::vector<DemoRecord> demos;
  demos.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    DemoRecord demo;
    demo.scenario_seed = reader.uint(8);
    demo.task_id = static_cast<int>(reader.uint(4));
    const auto n_tokens = static_cast<std::uint32_t>(reader.uint(4));
    demo.tokens.reserve(n_tokens);
    for (std::uint32_t t = 0; t < n_tokens; ++t) {
      demo.tokens.push_back(static_cast<int>(reader.uint(2)));
    }
    demo.success = reader.uint(1) != 0;
    demos.push_back(std::move(demo));
  }
  if (!reader.at_end()) throw IoError("trailing bytes in '" + path + "'");
  return demos;
}

}  // namespace gridrl
