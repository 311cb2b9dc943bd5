#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ctune {

// One information packet: ordered KEY=VALUE lines. Keys are uppercase with
// underscores; values are taken verbatim after the first '='. Blank lines
// separate packets in a stream.
class Packet {
 public:
  using Field = std::pair<std::string, std::string>;

  Packet() = default;

  void add(std::string key, std::string value);              // duplicate key throws
  void set(std::string key, std::string value);              // replace or append
  bool has(const std::string& key) const;
  const std::string* find(const std::string& key) const;
  const std::string& get(const std::string& key) const;      // missing key throws

  const std::vector<Field>& fields() const { return fields_; }
  bool empty() const { return fields_.empty(); }
  size_t size() const { return fields_.size(); }

  std::string serialize() const;  // "KEY=VALUE\n" per field, no trailing blank line

  friend bool operator==(const Packet& a, const Packet& b) { return a.fields_ == b.fields_; }

 private:
  std::vector<Field> fields_;
};

enum class PacketKind { compilation, passes, features, execution };

const char* packet_kind_name(PacketKind kind);

struct ParsedPacket {
  PacketKind kind;
  Packet fields;
};

// Single-packet parse with kind inference from the key set.
ParsedPacket parse_packet(const std::string& text);

// Raw parse without classification; empty input gives an empty packet.
Packet parse_packet_fields(const std::string& text);

// Blank-line separated stream. With require_terminator set, a final packet
// not followed by a blank line is treated as a torn write and dropped
// (reported through dropped_tail).
std::vector<Packet> parse_packet_stream(const std::string& text,
                                        bool require_terminator = false,
                                        bool* dropped_tail = nullptr);

std::string serialize_packet_stream(const std::vector<Packet>& packets);

// Canonical float rendering: six decimal places.
std::string format_float(double value);
double parse_float(const std::string& text);
int64_t parse_int(const std::string& text);
uint64_t parse_uint(const std::string& text);

}  // namespace ctune
