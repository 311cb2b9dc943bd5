#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctune/ids.hpp"
#include "ctune/packet.hpp"
#include "ctune/records.hpp"

namespace ctune {

inline constexpr const char* kCodVersion = "1.0";

struct RepositoryInfo {
  std::string cod_version = kCodVersion;
  std::string created;
  EntityId instance_id;

  Packet to_packet() const;
  static RepositoryInfo from_packet(const Packet& packet);
};

enum class EntityKind { platform, environment, compiler, program, runtime };

EntityKind entity_kind_from_name(const std::string& name);
const char* entity_kind_name(EntityKind kind);

// Descriptor packet builders. environment/runtime entities reuse the
// platform shape (id, name, notes).
Packet platform_packet(const PlatformDescriptor& descriptor);
Packet compiler_packet(const CompilerDescriptor& descriptor);
Packet program_packet(const ProgramDescriptor& descriptor);
PlatformDescriptor platform_from_packet(const Packet& packet);
CompilerDescriptor compiler_from_packet(const Packet& packet);
ProgramDescriptor program_from_packet(const Packet& packet);

struct StoredEntity {
  EntityKind kind;
  EntityId id;
  Packet descriptor;
};

struct QueryCriteria {
  std::optional<EntityId> program_id;
  std::optional<EntityId> platform_id;
  std::optional<EntityId> compiler_id;
  std::optional<int> dataset_number;
  std::optional<double> min_speedup;
  std::optional<int> min_rank;
  std::optional<bool> output_correct;
  bool select_all = false;

  bool any_filter() const;
  void validate() const;
  Packet to_packet() const;
  static QueryCriteria from_packet(const Packet& packet);
};

struct MergeStats {
  size_t new_records = 0;
  size_t duplicates = 0;
  size_t conflicts = 0;
};

// Append-only, file-backed store of entities, compilations, features and
// executions. One writer per directory (advisory lock file); readers take a
// consistent snapshot at open.
//
// Layout: INFORMATION, entities.pk, compilations.pk, executions.pk, lock.
// Feature packets ride in compilations.pk next to the compilation they
// describe; rank updates append to executions.pk.
class Repository {
 public:
  struct CreateOptions {
    std::string cod_version = kCodVersion;
    std::string created;     // empty: now
    EntityId instance_id;    // invalid: random
  };

  static Repository create(const std::filesystem::path& dir);
  static Repository create(const std::filesystem::path& dir, const CreateOptions& options,
                           bool writable = true);
  static Repository open(const std::filesystem::path& dir, bool writable);

  Repository(Repository&&) noexcept;
  Repository& operator=(Repository&&) noexcept;
  Repository(const Repository&) = delete;
  Repository& operator=(const Repository&) = delete;
  ~Repository();

  void close();
  bool writable() const { return writable_; }
  const std::filesystem::path& dir() const { return dir_; }
  const RepositoryInfo& info() const { return info_; }

  // Registration dedups by canonical content hash with the id excluded, so
  // re-registering an identical descriptor returns the existing id. A valid
  // ID field in the descriptor is kept; otherwise a fresh id is drawn.
  EntityId register_entity(EntityKind kind, Packet descriptor, IdGenerator& idgen);
  EntityId register_platform(const PlatformDescriptor& d, IdGenerator& idgen, EntityKind kind = EntityKind::platform);
  EntityId register_compiler(const CompilerDescriptor& d, IdGenerator& idgen);
  EntityId register_program(const ProgramDescriptor& d, IdGenerator& idgen);

  EntityId record(const CompilationRecord& record);
  EntityId record(const ExecutionRecord& record);
  EntityId record_features(const FeatureRecord& record);

  void set_rank(const EntityId& run_id, int rank);

  std::vector<OptimizationCase> query(const QueryCriteria& criteria,
                                      Aggregator agg = Aggregator::median) const;

  // Union keyed by id; identical content counts duplicate, divergent content
  // counts conflicting and the destination copy wins.
  static MergeStats merge(const Repository& source, Repository& destination);

  // Off-line mode: record packets aggregated in plain text files. Stub
  // entities are created for unknown references.
  size_t import_packets(const std::string& text, IdGenerator& idgen);
  size_t import_directory(const std::filesystem::path& path, IdGenerator& idgen);

  // lookups
  const StoredEntity* find_entity(const EntityId& id) const;
  const CompilationRecord* find_compilation(const EntityId& id) const;
  const ExecutionRecord* find_execution(const EntityId& id) const;
  std::vector<const ExecutionRecord*> executions_for_compile(const EntityId& compile_id) const;
  std::vector<const FeatureRecord*> features_for_compile(const EntityId& compile_id) const;
  std::optional<ProgramDescriptor> find_program_by_name(const std::string& name) const;
  std::optional<CompilerDescriptor> find_compiler_by_name(const std::string& name) const;

  const std::vector<StoredEntity>& entities() const { return entities_; }
  const std::vector<CompilationRecord>& compilations() const { return compilations_; }
  const std::vector<ExecutionRecord>& executions() const { return executions_; }
  const std::vector<FeatureRecord>& features() const { return features_; }

  size_t record_count() const {
    return entities_.size() + compilations_.size() + executions_.size() + features_.size();
  }

 private:
  Repository() = default;
  void load();
  void acquire_lock();
  void release_lock();
  void append_entity(const StoredEntity& entity);
  void append_compilation_packet(const Packet& packet);
  void append_execution_packet(const Packet& packet);
  void require_writable() const;

  std::filesystem::path dir_;
  bool writable_ = false;
  bool lock_held_ = false;
  RepositoryInfo info_;

  std::vector<StoredEntity> entities_;
  std::map<EntityId, size_t> entity_index_;
  std::map<std::string, EntityId> entity_by_hash_;
  std::vector<CompilationRecord> compilations_;
  std::map<EntityId, size_t> compilation_index_;
  std::vector<FeatureRecord> features_;
  std::map<EntityId, size_t> feature_index_;
  std::vector<ExecutionRecord> executions_;
  std::map<EntityId, size_t> execution_index_;
};

// Content hash with the identifier field blanked; used for entity dedup.
std::string entity_content_hash(const Packet& descriptor);

}  // namespace ctune
