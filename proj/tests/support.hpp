#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "dbhcam/mask.hpp"

namespace dbhcam::test {

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dbhcam-test-" + std::to_string(rd()));
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

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout
};

/// Runs a shell command, capturing stdout; stderr is appended when `merge`.
inline CommandResult run_command(const std::string& cmd, bool merge = false) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + (merge ? " 2>&1" : " 2>/dev/null")).c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Solid rectangle [x0, x1] x [y0, y1] in a w x h mask.
inline TrunkMask rect_mask(int w, int h, int x0, int x1, int y0, int y1) {
  TrunkMask m(w, h, MaskProvenance::Synthetic);
  for (int y = y0; y <= y1; ++y) m.fill_row(y, x0, x1);
  return m;
}

}  // namespace dbhcam::test
