#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace acton {

/// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
public:
  Sha256();
  ~Sha256();
  Sha256(Sha256&&) noexcept;
  Sha256& operator=(Sha256&&) noexcept;

  Sha256& update(std::string_view bytes);
  Sha256& update(const void* data, std::size_t size);
  /// Lower-case hex digest; the object must not be updated afterwards.
  std::string hex();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace acton
