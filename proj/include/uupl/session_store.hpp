#pragma once

#include "uupl/session.hpp"

#include <filesystem>
#include <string>

namespace uupl {

class SessionNotFound : public Error {
 public:
  using Error::Error;
};

/// Lowercase hex, 1 to 64 characters. Anything else never reaches the filesystem.
bool valid_session_id(const std::string& id);

/// 16 random hex characters.
std::string new_session_id();

/// Writes `text` to a temporary file next to `path`, syncs it and renames it
/// over `path`, so readers see either the old or the new content.
void atomic_write(const std::filesystem::path& path, const std::string& text);

void save_session(const Session& s, const std::filesystem::path& path);
/// IoError if unreadable, SchemaVersionError or CorruptSessionError otherwise.
Session load_session(const std::filesystem::path& path);

/// One canonical JSON file per session in a directory.
class SessionStore {
 public:
  /// Creates the directory if needed.
  explicit SessionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const std::string& id) const;
  bool exists(const std::string& id) const;

  void save(const Session& s) const;
  /// SessionNotFound for unknown or malformed ids.
  Session load(const std::string& id) const;
  /// The stored bytes, unparsed.
  std::string load_text(const std::string& id) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace uupl
