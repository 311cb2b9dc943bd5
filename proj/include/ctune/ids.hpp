#pragma once

#include <cstdint>
#include <string>

#include "ctune/rng.hpp"

namespace ctune {

// 128-bit unsigned identifier rendered as a decimal digit string.
class EntityId {
 public:
  using u128 = unsigned __int128;

  EntityId() : value_(0) {}
  explicit EntityId(u128 value) : value_(value) {}

  static EntityId parse(const std::string& text);

  std::string str() const;
  u128 value() const { return value_; }
  bool valid() const { return value_ != 0; }

  friend bool operator==(const EntityId& a, const EntityId& b) { return a.value_ == b.value_; }
  friend bool operator!=(const EntityId& a, const EntityId& b) { return a.value_ != b.value_; }
  friend bool operator<(const EntityId& a, const EntityId& b) { return a.value_ < b.value_; }

 private:
  u128 value_;
};

// Random 128-bit ids, seedable so that whole experiment runs replay
// byte-identically.
class IdGenerator {
 public:
  IdGenerator();  // seeded from the system entropy source
  explicit IdGenerator(uint64_t seed) : rng_(seed) {}

  EntityId next();

 private:
  Rng rng_;
};

}  // namespace ctune
