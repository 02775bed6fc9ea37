#include "tpeval/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace tpeval {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int md_len = 0;
  if (!EVP_Digest(data.data(), data.size(), md.data(), &md_len, EVP_sha256(),
                  nullptr)) {
    throw std::runtime_error("EVP_Digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(md_len * 2);
  for (unsigned int i = 0; i < md_len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string short_digest(std::initializer_list<std::string_view> fields) {
  std::string joined;
  for (const auto& f : fields) {
    joined.append(f);
    joined.push_back('\x1f');
  }
  return sha256_hex(joined).substr(0, 16);
}

}  // namespace tpeval
