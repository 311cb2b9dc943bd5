#include "ctune/packet.hpp"

#include <cstdio>
#include <cstdlib>

#include "ctune/error.hpp"

namespace ctune {

namespace {

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')) return false;
  }
  return true;
}

}  // namespace

void Packet::add(std::string key, std::string value) {
  if (has(key)) raise(errc::duplicate_key, key);
  fields_.emplace_back(std::move(key), std::move(value));
}

void Packet::set(std::string key, std::string value) {
  for (auto& field : fields_) {
    if (field.first == key) {
      field.second = std::move(value);
      return;
    }
  }
  fields_.emplace_back(std::move(key), std::move(value));
}

bool Packet::has(const std::string& key) const { return find(key) != nullptr; }

const std::string* Packet::find(const std::string& key) const {
  for (const auto& field : fields_) {
    if (field.first == key) return &field.second;
  }
  return nullptr;
}

const std::string& Packet::get(const std::string& key) const {
  const std::string* value = find(key);
  if (!value) raise(errc::missing_required_key, key);
  return *value;
}

std::string Packet::serialize() const {
  std::string out;
  for (const auto& [key, value] : fields_) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

const char* packet_kind_name(PacketKind kind) {
  switch (kind) {
    case PacketKind::compilation: return "compilation";
    case PacketKind::passes: return "passes";
    case PacketKind::features: return "features";
    case PacketKind::execution: return "execution";
  }
  return "unknown";
}

Packet parse_packet_fields(const std::string& text) {
  Packet packet;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) raise(errc::malformed_line, line);
    std::string key = line.substr(0, eq);
    if (!valid_key(key)) raise(errc::malformed_line, line);
    packet.add(std::move(key), line.substr(eq + 1));
  }
  return packet;
}

ParsedPacket parse_packet(const std::string& text) {
  Packet fields = parse_packet_fields(text);

  static const char* execution_markers[] = {
      "RUN_ID", "RUN_ID_ASSOCIATE", "RUN_TIME", "RUN_TIME_USER", "RUN_TIME_SYS",
      "OUTPUT_CORRECT", "RUN_COMMAND_LINE", "RUN_PG", "RUN_HC", "DATASET_ID"};
  for (const char* marker : execution_markers) {
    if (fields.has(marker)) {
      if (!fields.has("RUN_ID")) raise(errc::missing_required_key, "RUN_ID");
      return {PacketKind::execution, std::move(fields)};
    }
  }
  if (fields.has("PASSES")) {
    if (!fields.has("COMPILE_ID")) raise(errc::missing_required_key, "COMPILE_ID");
    return {PacketKind::passes, std::move(fields)};
  }
  if (fields.has("STATIC_FEATURE_VECTOR")) {
    if (!fields.has("COMPILE_ID")) raise(errc::missing_required_key, "COMPILE_ID");
    return {PacketKind::features, std::move(fields)};
  }
  if (fields.has("COMPILE_ID")) return {PacketKind::compilation, std::move(fields)};
  raise(errc::missing_required_key, "packet has no recognizable identifier key");
}

std::vector<Packet> parse_packet_stream(const std::string& text, bool require_terminator,
                                        bool* dropped_tail) {
  if (dropped_tail) *dropped_tail = false;
  std::vector<Packet> packets;
  std::string block;
  auto flush = [&](bool terminated) {
    if (block.empty()) return;
    if (require_terminator && !terminated) {
      if (dropped_tail) *dropped_tail = true;
      block.clear();
      return;
    }
    packets.push_back(parse_packet_fields(block));
    block.clear();
  };
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush(true);  // blank separator completes the packet
    } else {
      block += line;
      block += '\n';
    }
  }
  // anything left at EOF never saw its blank-line terminator
  flush(false);
  return packets;
}

std::string serialize_packet_stream(const std::vector<Packet>& packets) {
  std::string out;
  for (const auto& packet : packets) {
    out += packet.serialize();
    out += '\n';
  }
  return out;
}

std::string format_float(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

double parse_float(const std::string& text) {
  if (text.empty()) raise(errc::bad_value, "empty number");
  char* end = nullptr;
  double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) raise(errc::bad_value, "not a number: " + text);
  return value;
}

int64_t parse_int(const std::string& text) {
  if (text.empty()) raise(errc::bad_value, "empty integer");
  char* end = nullptr;
  long long value = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) raise(errc::bad_value, "not an integer: " + text);
  return value;
}

uint64_t parse_uint(const std::string& text) {
  int64_t value = parse_int(text);
  if (value < 0) raise(errc::bad_value, "negative value: " + text);
  return static_cast<uint64_t>(value);
}

}  // namespace ctune
