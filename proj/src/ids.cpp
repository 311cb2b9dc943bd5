#include "ctune/ids.hpp"

#include <random>

#include "ctune/error.hpp"

namespace ctune {

EntityId EntityId::parse(const std::string& text) {
  if (text.empty()) raise(errc::bad_value, "empty entity id");
  u128 value = 0;
  const u128 max = ~static_cast<u128>(0);
  for (char c : text) {
    if (c < '0' || c > '9') raise(errc::bad_value, "entity id is not decimal: " + text);
    unsigned digit = static_cast<unsigned>(c - '0');
    if (value > (max - digit) / 10) raise(errc::bad_value, "entity id overflows 128 bits: " + text);
    value = value * 10 + digit;
  }
  if (value == 0) raise(errc::bad_value, "entity id must be nonzero");
  return EntityId(value);
}

std::string EntityId::str() const {
  if (value_ == 0) return "0";
  char buf[40];
  int pos = 39;
  u128 v = value_;
  while (v != 0) {
    buf[pos--] = static_cast<char>('0' + static_cast<unsigned>(v % 10));
    v /= 10;
  }
  return std::string(buf + pos + 1, buf + 40);
}

IdGenerator::IdGenerator() : rng_(std::random_device{}() | (uint64_t(std::random_device{}()) << 32)) {}

EntityId IdGenerator::next() {
  EntityId::u128 value = 0;
  do {
    value = (static_cast<EntityId::u128>(rng_.next_u64()) << 64) | rng_.next_u64();
  } while (value == 0);
  return EntityId(value);
}

}  // namespace ctune
