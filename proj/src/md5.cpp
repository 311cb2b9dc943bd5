#include "ctune/md5.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "ctune/error.hpp"

namespace ctune {

std::string md5_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_md5(), nullptr)) {
    raise(errc::internal, "md5 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string md5_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return md5_hex(buf.str());
}

}  // namespace ctune
