#pragma once

#include <string>
#include <string_view>

namespace ctune {

// 32 lowercase hex chars, as stored in OBJ_MD5CRC.
std::string md5_hex(std::string_view data);
std::string md5_file(const std::string& path);

}  // namespace ctune
