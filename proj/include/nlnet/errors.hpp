#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlnet {

/// Malformed input bytes. Carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedFormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// PSNR (and therefore the loss) is undefined when the two images are equal.
class InfinitePsnrError : public std::domain_error {
  using std::domain_error::domain_error;
};

/// Non-finite objective or gradient encountered during optimization.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class CorruptModelError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nlnet
