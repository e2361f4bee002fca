#include "uupl/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace uupl {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng(std::random_device{}());
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t v = rng();
  std::string id(16, '0');
  for (auto& c : id) {
    c = kHex[v & 0xf];
    v >>= 4;
  }
  return id;
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp-" + new_session_id();
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoError("cannot create " + tmp.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < text.size()) {
    const auto n = ::write(fd, text.data() + done, text.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      std::filesystem::remove(tmp);
      throw IoError("write failed for " + tmp.string() + ": " + why);
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    std::filesystem::remove(tmp);
    throw IoError("cannot flush " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

void save_session(const Session& s, const std::filesystem::path& path) { atomic_write(path, s.serialize()); }

Session load_session(const std::filesystem::path& path) { return Session::deserialize(read_file(path)); }

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) throw IoError("cannot use data directory " + dir_.string());
}

std::filesystem::path SessionStore::path_for(const std::string& id) const {
  if (!valid_session_id(id)) throw SessionNotFound("no session '" + id + "'");
  return dir_ / (id + ".json");
}

bool SessionStore::exists(const std::string& id) const {
  return valid_session_id(id) && std::filesystem::exists(path_for(id));
}

void SessionStore::save(const Session& s) const { save_session(s, path_for(s.id())); }

std::string SessionStore::load_text(const std::string& id) const {
  const auto path = path_for(id);
  if (!std::filesystem::exists(path)) throw SessionNotFound("no session '" + id + "'");
  return read_file(path);
}

Session SessionStore::load(const std::string& id) const { return Session::deserialize(load_text(id)); }

}  // namespace uupl
