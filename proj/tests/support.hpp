#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "veryfl/bytes.hpp"
#include "veryfl/contracts.hpp"
#include "veryfl/ledger.hpp"

namespace veryfl::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("veryfl-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Synthetic accounts for driving ContractSet directly, without a ledger.
struct Accounts {
  std::vector<Address> all;
  explicit Accounts(std::size_t n = 11, std::uint64_t seed = 7) {
    for (std::size_t i = 0; i < n; ++i) all.push_back(ledger::derive_address(seed, i));
  }
  const Address& server() const { return all.front(); }
  ledger::ExecContext as(const Address& sender, std::uint64_t height = 1, const Digest& prev = {}) const {
    return {sender, height, prev, 0, server()};
  }
};

}  // namespace veryfl::test
