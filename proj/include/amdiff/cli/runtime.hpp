#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "amdiff/core/error.hpp"

namespace amdiff::cli {

namespace fs = std::filesystem;

inline constexpr const char* kCodeVersion = "amdiff 0.1.0";

enum class ExitCode : int { Ok = 0, Failure = 1, Config = 2, Io = 3, Empty = 4 };

// The command ran but produced nothing usable (no pairs, no molecules).
class EmptyResult : public Error {
public:
  using Error::Error;
};

inline ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::Config;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e)) return ExitCode::Io;
  if (dynamic_cast<const EmptyResult*>(&e)) return ExitCode::Empty;
  return ExitCode::Failure;
}

// Line-delimited JSON events.
class Logger {
public:
  explicit Logger(std::ostream* os = &std::cerr, std::string command = {}) : os_(os), command_(std::move(command)) {}

  void log(const std::string& level, const std::string& event, nlohmann::json fields = nlohmann::json::object()) const {
    if (!os_) return;
    nlohmann::json j{{"ts", utc_now()}, {"level", level}, {"event", event}};
    if (!command_.empty()) j["command"] = command_;
    for (auto& [k, v] : fields.items()) j[k] = v;
    std::lock_guard<std::mutex> lock(mu_);
    *os_ << j.dump() << '\n';
    os_->flush();
  }
  void info(const std::string& event, nlohmann::json f = nlohmann::json::object()) const { log("info", event, std::move(f)); }
  void warn(const std::string& event, nlohmann::json f = nlohmann::json::object()) const { log("warn", event, std::move(f)); }
  void error(const std::string& event, nlohmann::json f = nlohmann::json::object()) const { log("error", event, std::move(f)); }

  static std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
  }

private:
  std::ostream* os_;
  std::string command_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + p.string() + "'");
  return ss.str();
}

// Writes to a sibling temporary and renames it into place.
inline void write_atomic(const fs::path& p, std::string_view data) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  const fs::path tmp = p.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + p.string() + "'");
  }
}

inline void ensure_directory(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create directory '" + p.string() + "'");
}

inline nlohmann::json read_json(const fs::path& p, bool config) {
  const auto text = read_file(p);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    const std::string msg = "'" + p.string() + "' is not valid JSON: " + e.what();
    if (config) throw ConfigError(msg);
    throw ParseError(msg);
  }
}

// Regular files under `dir` with the given extension, sorted by path.
inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext, bool recursive = false) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir.string() + "'");
  std::vector<fs::path> out;
  auto take = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  };
  if (recursive)
    for (const auto& e : fs::recursive_directory_iterator(dir)) take(e);
  else
    for (const auto& e : fs::directory_iterator(dir)) take(e);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Digests

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

inline std::string file_sha256(const fs::path& p) { return sha256_hex(read_file(p)); }

// ---------------------------------------------------------------------------
// Single instance per output directory

class DirectoryLock {
public:
  explicit DirectoryLock(const fs::path& dir) {
    ensure_directory(dir);
    path_ = dir / ".amdiff.lock";
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file '" + path_.string() + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw IoError("output directory '" + dir.string() + "' is in use by another run");
    }
  }
  ~DirectoryLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
  fs::path path_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Worker threads

// AMDIFF_THREADS caps the worker count; unset means the hardware concurrency.
inline std::size_t worker_count() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("AMDIFF_THREADS");
  if (!env || !*env) return hw;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("AMDIFF_THREADS must be a positive integer");
  return std::min<std::size_t>(hw, static_cast<std::size_t>(v));
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first failure by
// index is rethrown after all workers stop.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::string started = Logger::utc_now();
  std::string finished;
  std::vector<std::string> artifacts;

  void add_input(const fs::path& p) { inputs.emplace_back(p.string(), file_sha256(p)); }
  void add_input(const std::string& label, std::string_view bytes) { inputs.emplace_back(label, sha256_hex(bytes)); }

  nlohmann::json to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"sha256", d}});
    return {{"command", command},       {"config", config},     {"seed", seed},
            {"inputs", in},             {"started", started},   {"finished", finished},
            {"artifacts", artifacts},   {"code_version", kCodeVersion}};
  }

  // Stamps the end time and writes manifest.json atomically.
  void write(const fs::path& dir) {
    finished = Logger::utc_now();
    write_atomic(dir / "manifest.json", to_json().dump(2) + "\n");
  }
};

}  // namespace amdiff::cli
