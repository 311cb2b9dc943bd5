#include "ctune/repository.hpp"

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <sstream>

#include "ctune/error.hpp"
#include "ctune/md5.hpp"

namespace fs = std::filesystem;

namespace ctune {

namespace {

constexpr const char* kInformationFile = "INFORMATION";
constexpr const char* kEntitiesFile = "entities.pk";
constexpr const char* kCompilationsFile = "compilations.pk";
constexpr const char* kExecutionsFile = "executions.pk";
constexpr const char* kLockFile = "lock";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void append_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) raise(errc::storage_failure, "cannot append to " + path.string());
  out << text;
  out.flush();
  if (!out) raise(errc::storage_failure, "write failed: " + path.string());
}

std::string now_date() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%d %H:%M:%S", &tm);
  return buf;
}

bool version_compatible(const std::string& a, const std::string& b) {
  auto major = [](const std::string& v) { return v.substr(0, v.find('.')); };
  return !a.empty() && !b.empty() && major(a) == major(b);
}

}  // namespace

// ---------------------------------------------------------------------------
// info and descriptors
// ---------------------------------------------------------------------------

Packet RepositoryInfo::to_packet() const {
  Packet packet;
  packet.add("COD_VERSION", cod_version);
  packet.add("CREATED", created);
  packet.add("INSTANCE_ID", instance_id.str());
  return packet;
}

RepositoryInfo RepositoryInfo::from_packet(const Packet& packet) {
  RepositoryInfo info;
  info.cod_version = packet.get("COD_VERSION");
  if (info.cod_version.empty()) raise(errc::version_mismatch, "empty COD_VERSION");
  info.created = packet.get("CREATED");
  info.instance_id = EntityId::parse(packet.get("INSTANCE_ID"));
  return info;
}

EntityKind entity_kind_from_name(const std::string& name) {
  if (name == "platform") return EntityKind::platform;
  if (name == "environment") return EntityKind::environment;
  if (name == "compiler") return EntityKind::compiler;
  if (name == "program") return EntityKind::program;
  if (name == "runtime") return EntityKind::runtime;
  raise(errc::bad_value, "unknown entity kind: " + name);
}

const char* entity_kind_name(EntityKind kind) {
  switch (kind) {
    case EntityKind::platform: return "platform";
    case EntityKind::environment: return "environment";
    case EntityKind::compiler: return "compiler";
    case EntityKind::program: return "program";
    case EntityKind::runtime: return "runtime";
  }
  return "platform";
}

Packet platform_packet(const PlatformDescriptor& descriptor) {
  if (descriptor.name.empty()) raise(errc::bad_value, "entity name empty");
  Packet packet;
  packet.add("ID", descriptor.id.valid() ? descriptor.id.str() : "");
  packet.add("NAME", descriptor.name);
  if (!descriptor.notes.empty()) packet.add("NOTES", descriptor.notes);
  return packet;
}

Packet compiler_packet(const CompilerDescriptor& descriptor) {
  if (descriptor.name.empty()) raise(errc::bad_value, "compiler name empty");
  Packet packet;
  packet.add("ID", descriptor.id.valid() ? descriptor.id.str() : "");
  packet.add("NAME", descriptor.name);
  packet.add("INVOCATION_TEMPLATE", descriptor.invocation_template);
  if (!descriptor.flag_space_ref.empty()) packet.add("FLAG_SPACE_REF", descriptor.flag_space_ref);
  return packet;
}

Packet program_packet(const ProgramDescriptor& descriptor) {
  descriptor.validate();
  Packet packet;
  packet.add("ID", descriptor.id.valid() ? descriptor.id.str() : "");
  packet.add("NAME", descriptor.name);
  if (!descriptor.source_dir.empty()) packet.add("SOURCE_DIR", descriptor.source_dir);
  packet.add("DATASET_COUNT", std::to_string(descriptor.dataset_count()));
  for (const auto& dataset : descriptor.datasets) {
    const std::string n = std::to_string(dataset.number);
    packet.add("DATASET_" + n + "_CMD", dataset.command_line);
    packet.add("DATASET_" + n + "_LOOP", std::to_string(dataset.loop_wrapper_bound));
  }
  return packet;
}

PlatformDescriptor platform_from_packet(const Packet& packet) {
  PlatformDescriptor descriptor;
  if (const auto* id = packet.find("ID"); id && !id->empty()) descriptor.id = EntityId::parse(*id);
  descriptor.name = packet.get("NAME");
  if (const auto* notes = packet.find("NOTES")) descriptor.notes = *notes;
  return descriptor;
}

CompilerDescriptor compiler_from_packet(const Packet& packet) {
  CompilerDescriptor descriptor;
  if (const auto* id = packet.find("ID"); id && !id->empty()) descriptor.id = EntityId::parse(*id);
  descriptor.name = packet.get("NAME");
  if (const auto* t = packet.find("INVOCATION_TEMPLATE")) descriptor.invocation_template = *t;
  if (const auto* r = packet.find("FLAG_SPACE_REF")) descriptor.flag_space_ref = *r;
  return descriptor;
}

ProgramDescriptor program_from_packet(const Packet& packet) {
  ProgramDescriptor descriptor;
  if (const auto* id = packet.find("ID"); id && !id->empty()) descriptor.id = EntityId::parse(*id);
  descriptor.name = packet.get("NAME");
  if (const auto* dir = packet.find("SOURCE_DIR")) descriptor.source_dir = *dir;
  int count = 0;
  if (const auto* c = packet.find("DATASET_COUNT")) count = static_cast<int>(parse_int(*c));
  for (int i = 1; i <= count; ++i) {
    DatasetEntry entry;
    entry.number = i;
    const std::string n = std::to_string(i);
    entry.command_line = packet.get("DATASET_" + n + "_CMD");
    entry.loop_wrapper_bound = parse_int(packet.get("DATASET_" + n + "_LOOP"));
    descriptor.datasets.push_back(std::move(entry));
  }
  descriptor.validate();
  return descriptor;
}

std::string entity_content_hash(const Packet& descriptor) {
  Packet blanked = descriptor;
  blanked.set("ID", "");
  return md5_hex(blanked.serialize());
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

bool QueryCriteria::any_filter() const {
  return program_id || platform_id || compiler_id || dataset_number || min_speedup || min_rank ||
         output_correct;
}

void QueryCriteria::validate() const {
  if (!select_all && !any_filter()) {
    raise(errc::bad_value, "query needs at least one filter or the select-all marker");
  }
}

Packet QueryCriteria::to_packet() const {
  Packet packet;
  if (select_all) packet.add("SELECT_ALL", "1");
  if (program_id) packet.add("PROGRAM_ID", program_id->str());
  if (platform_id) packet.add("PLATFORM_ID", platform_id->str());
  if (compiler_id) packet.add("COMPILER_ID", compiler_id->str());
  if (dataset_number) packet.add("DATASET_ID", std::to_string(*dataset_number));
  if (min_speedup) packet.add("MIN_SPEEDUP", format_float(*min_speedup));
  if (min_rank) packet.add("MIN_RANK", std::to_string(*min_rank));
  if (output_correct) packet.add("OUTPUT_CORRECT", *output_correct ? "1" : "0");
  return packet;
}

QueryCriteria QueryCriteria::from_packet(const Packet& packet) {
  QueryCriteria criteria;
  for (const auto& [key, value] : packet.fields()) {
    if (key == "SELECT_ALL") criteria.select_all = value == "1";
    else if (key == "PROGRAM_ID") criteria.program_id = EntityId::parse(value);
    else if (key == "PLATFORM_ID") criteria.platform_id = EntityId::parse(value);
    else if (key == "COMPILER_ID") criteria.compiler_id = EntityId::parse(value);
    else if (key == "DATASET_ID") criteria.dataset_number = static_cast<int>(parse_int(value));
    else if (key == "MIN_SPEEDUP") criteria.min_speedup = parse_float(value);
    else if (key == "MIN_RANK") criteria.min_rank = static_cast<int>(parse_int(value));
    else if (key == "OUTPUT_CORRECT") criteria.output_correct = value == "1";
  }
  criteria.validate();
  return criteria;
}

// ---------------------------------------------------------------------------
// repository lifecycle
// ---------------------------------------------------------------------------

Repository Repository::create(const fs::path& dir) { return create(dir, CreateOptions()); }

Repository Repository::create(const fs::path& dir, const CreateOptions& options, bool writable) {
  if (fs::exists(dir / kInformationFile)) {
    raise(errc::storage_failure, "repository already exists at " + dir.string());
  }
  fs::create_directories(dir);
  RepositoryInfo info;
  info.cod_version = options.cod_version;
  info.created = options.created.empty() ? now_date() : options.created;
  info.instance_id = options.instance_id.valid() ? options.instance_id : IdGenerator().next();
  std::ofstream out(dir / kInformationFile, std::ios::binary);
  out << info.to_packet().serialize() << "\n";
  out.close();
  append_text(dir / kEntitiesFile, "");
  append_text(dir / kCompilationsFile, "");
  append_text(dir / kExecutionsFile, "");
  return open(dir, writable);
}

Repository Repository::open(const fs::path& dir, bool writable) {
  Repository repo;
  repo.dir_ = dir;
  repo.writable_ = writable;
  if (!fs::exists(dir / kInformationFile)) {
    raise(errc::storage_failure, "no repository at " + dir.string());
  }
  repo.info_ = RepositoryInfo::from_packet(parse_packet_fields(read_file(dir / kInformationFile)));
  if (!version_compatible(repo.info_.cod_version, kCodVersion)) {
    raise(errc::version_mismatch,
          "repository version " + repo.info_.cod_version + " vs tool " + kCodVersion);
  }
  if (writable) repo.acquire_lock();
  repo.load();
  return repo;
}

Repository::Repository(Repository&& other) noexcept { *this = std::move(other); }

Repository& Repository::operator=(Repository&& other) noexcept {
  if (this != &other) {
    close();
    dir_ = std::move(other.dir_);
    writable_ = other.writable_;
    lock_held_ = other.lock_held_;
    info_ = std::move(other.info_);
    entities_ = std::move(other.entities_);
    entity_index_ = std::move(other.entity_index_);
    entity_by_hash_ = std::move(other.entity_by_hash_);
    compilations_ = std::move(other.compilations_);
    compilation_index_ = std::move(other.compilation_index_);
    features_ = std::move(other.features_);
    feature_index_ = std::move(other.feature_index_);
    executions_ = std::move(other.executions_);
    execution_index_ = std::move(other.execution_index_);
    other.lock_held_ = false;
    other.writable_ = false;
  }
  return *this;
}

Repository::~Repository() { close(); }

void Repository::close() {
  if (lock_held_) release_lock();
  writable_ = false;
}

void Repository::acquire_lock() {
  const fs::path lock = dir_ / kLockFile;
  if (fs::exists(lock)) {
    pid_t pid = 0;
    try {
      pid = static_cast<pid_t>(parse_int(read_file(lock)));
    } catch (const Error&) {
      pid = 0;
    }
    if (pid > 0 && ::kill(pid, 0) == 0) {
      raise(errc::storage_failure,
            "repository " + dir_.string() + " is locked by pid " + std::to_string(pid));
    }
    // stale lock from a dead writer
    fs::remove(lock);
  }
  std::ofstream out(lock, std::ios::binary);
  out << ::getpid();
  out.close();
  lock_held_ = true;
}

void Repository::release_lock() {
  std::error_code ec;
  fs::remove(dir_ / kLockFile, ec);
  lock_held_ = false;
}

void Repository::require_writable() const {
  if (!writable_) raise(errc::storage_failure, "repository opened read-only");
}

void Repository::load() {
  bool dropped = false;
  for (const auto& packet : parse_packet_stream(read_file(dir_ / kEntitiesFile), true, &dropped)) {
    StoredEntity entity;
    entity.kind = entity_kind_from_name(packet.get("ENTITY_KIND"));
    entity.id = EntityId::parse(packet.get("ID"));
    entity.descriptor = packet;
    entity_index_[entity.id] = entities_.size();
    entity_by_hash_.emplace(entity_content_hash(packet), entity.id);
    entities_.push_back(std::move(entity));
  }
  if (dropped) {
    std::cerr << "ctune: dropped torn packet at tail of " << (dir_ / kEntitiesFile) << "\n";
  }

  for (const auto& packet :
       parse_packet_stream(read_file(dir_ / kCompilationsFile), true, &dropped)) {
    if (packet.has("STATIC_FEATURE_VECTOR")) {
      FeatureRecord record = FeatureRecord::from_packet(packet);
      feature_index_[record.feature_id] = features_.size();
      features_.push_back(std::move(record));
    } else {
      CompilationRecord record = CompilationRecord::from_packet(packet);
      compilation_index_[record.compile_id] = compilations_.size();
      compilations_.push_back(std::move(record));
    }
  }
  if (dropped) {
    std::cerr << "ctune: dropped torn packet at tail of " << (dir_ / kCompilationsFile) << "\n";
  }

  for (const auto& packet : parse_packet_stream(read_file(dir_ / kExecutionsFile), true, &dropped)) {
    if (packet.has("RANK_OF")) {
      EntityId run_id = EntityId::parse(packet.get("RANK_OF"));
      auto it = execution_index_.find(run_id);
      if (it != execution_index_.end()) {
        executions_[it->second].rank = static_cast<int>(parse_int(packet.get("RANK")));
      }
      continue;
    }
    ExecutionRecord record = ExecutionRecord::from_packet(packet);
    execution_index_[record.run_id] = executions_.size();
    executions_.push_back(std::move(record));
  }
  if (dropped) {
    std::cerr << "ctune: dropped torn packet at tail of " << (dir_ / kExecutionsFile) << "\n";
  }
}

// ---------------------------------------------------------------------------
// writes
// ---------------------------------------------------------------------------

void Repository::append_entity(const StoredEntity& entity) {
  append_text(dir_ / kEntitiesFile, entity.descriptor.serialize() + "\n");
}

void Repository::append_compilation_packet(const Packet& packet) {
  append_text(dir_ / kCompilationsFile, packet.serialize() + "\n");
}

void Repository::append_execution_packet(const Packet& packet) {
  append_text(dir_ / kExecutionsFile, packet.serialize() + "\n");
}

EntityId Repository::register_entity(EntityKind kind, Packet descriptor, IdGenerator& idgen) {
  require_writable();
  descriptor.set("ENTITY_KIND", entity_kind_name(kind));

  const std::string hash = entity_content_hash(descriptor);
  auto existing = entity_by_hash_.find(hash);
  if (existing != entity_by_hash_.end()) return existing->second;

  StoredEntity entity;
  entity.kind = kind;
  const std::string* id_field = descriptor.find("ID");
  if (id_field && !id_field->empty()) {
    entity.id = EntityId::parse(*id_field);
    if (entity_index_.count(entity.id)) return entity.id;  // re-registering by id
  } else {
    entity.id = idgen.next();
  }
  descriptor.set("ID", entity.id.str());
  entity.descriptor = descriptor;

  append_entity(entity);
  entity_index_[entity.id] = entities_.size();
  entity_by_hash_.emplace(hash, entity.id);
  entities_.push_back(std::move(entity));
  return entities_.back().id;
}

EntityId Repository::register_platform(const PlatformDescriptor& d, IdGenerator& idgen,
                                       EntityKind kind) {
  return register_entity(kind, platform_packet(d), idgen);
}

EntityId Repository::register_compiler(const CompilerDescriptor& d, IdGenerator& idgen) {
  return register_entity(EntityKind::compiler, compiler_packet(d), idgen);
}

EntityId Repository::register_program(const ProgramDescriptor& d, IdGenerator& idgen) {
  return register_entity(EntityKind::program, program_packet(d), idgen);
}

EntityId Repository::record(const CompilationRecord& record) {
  require_writable();
  if (!record.compile_id.valid()) raise(errc::bad_value, "compilation without COMPILE_ID");
  auto it = compilation_index_.find(record.compile_id);
  if (it != compilation_index_.end()) return record.compile_id;  // first write wins

  for (const EntityId& ref :
       {record.platform_id, record.environment_id, record.compiler_id, record.program_id}) {
    if (!entity_index_.count(ref)) {
      raise(errc::dangling_reference, "compilation references unknown entity " + ref.str());
    }
  }
  append_compilation_packet(record.to_packet());
  compilation_index_[record.compile_id] = compilations_.size();
  compilations_.push_back(record);
  return record.compile_id;
}

EntityId Repository::record(const ExecutionRecord& record) {
  require_writable();
  if (!record.run_id.valid()) raise(errc::bad_value, "execution without RUN_ID");
  auto it = execution_index_.find(record.run_id);
  if (it != execution_index_.end()) return record.run_id;

  if (!compilation_index_.count(record.compile_id)) {
    raise(errc::dangling_reference, "execution references unknown compilation " +
                                        record.compile_id.str());
  }
  for (const EntityId& ref :
       {record.platform_id, record.environment_id, record.compiler_id, record.program_id}) {
    if (!entity_index_.count(ref)) {
      raise(errc::dangling_reference, "execution references unknown entity " + ref.str());
    }
  }
  if (!record.is_baseline() && !execution_index_.count(record.run_id_associate)) {
    raise(errc::dangling_reference,
          "execution references unknown baseline run " + record.run_id_associate.str());
  }
  append_execution_packet(record.to_packet());
  execution_index_[record.run_id] = executions_.size();
  executions_.push_back(record);
  return record.run_id;
}

EntityId Repository::record_features(const FeatureRecord& record) {
  require_writable();
  if (!record.feature_id.valid()) raise(errc::bad_value, "feature record without FEATURE_ID");
  if (record.vector.empty()) raise(errc::bad_value, "feature record with an empty vector");
  auto it = feature_index_.find(record.feature_id);
  if (it != feature_index_.end()) return record.feature_id;
  if (!compilation_index_.count(record.compile_id)) {
    raise(errc::dangling_reference,
          "features reference unknown compilation " + record.compile_id.str());
  }
  append_compilation_packet(record.to_packet());
  feature_index_[record.feature_id] = features_.size();
  features_.push_back(record);
  return record.feature_id;
}

void Repository::set_rank(const EntityId& run_id, int rank) {
  require_writable();
  auto it = execution_index_.find(run_id);
  if (it == execution_index_.end()) raise(errc::unknown_case, "no run " + run_id.str());
  executions_[it->second].rank = rank;
  Packet packet;
  packet.add("RANK_OF", run_id.str());
  packet.add("RANK", std::to_string(rank));
  append_execution_packet(packet);
}

// ---------------------------------------------------------------------------
// lookups and query
// ---------------------------------------------------------------------------

const StoredEntity* Repository::find_entity(const EntityId& id) const {
  auto it = entity_index_.find(id);
  return it == entity_index_.end() ? nullptr : &entities_[it->second];
}

const CompilationRecord* Repository::find_compilation(const EntityId& id) const {
  auto it = compilation_index_.find(id);
  return it == compilation_index_.end() ? nullptr : &compilations_[it->second];
}

const ExecutionRecord* Repository::find_execution(const EntityId& id) const {
  auto it = execution_index_.find(id);
  return it == execution_index_.end() ? nullptr : &executions_[it->second];
}

std::vector<const ExecutionRecord*> Repository::executions_for_compile(
    const EntityId& compile_id) const {
  std::vector<const ExecutionRecord*> out;
  for (const auto& exec : executions_) {
    if (exec.compile_id == compile_id) out.push_back(&exec);
  }
  return out;
}

std::vector<const FeatureRecord*> Repository::features_for_compile(
    const EntityId& compile_id) const {
  std::vector<const FeatureRecord*> out;
  for (const auto& record : features_) {
    if (record.compile_id == compile_id) out.push_back(&record);
  }
  return out;
}

std::optional<ProgramDescriptor> Repository::find_program_by_name(const std::string& name) const {
  for (const auto& entity : entities_) {
    if (entity.kind == EntityKind::program && entity.descriptor.get("NAME") == name) {
      return program_from_packet(entity.descriptor);
    }
  }
  return std::nullopt;
}

std::optional<CompilerDescriptor> Repository::find_compiler_by_name(const std::string& name) const {
  for (const auto& entity : entities_) {
    if (entity.kind == EntityKind::compiler && entity.descriptor.get("NAME") == name) {
      return compiler_from_packet(entity.descriptor);
    }
  }
  return std::nullopt;
}

std::vector<OptimizationCase> Repository::query(const QueryCriteria& criteria,
                                                Aggregator agg) const {
  criteria.validate();

  // deterministic compilation order: date, time, then id
  std::vector<const CompilationRecord*> comps;
  comps.reserve(compilations_.size());
  for (const auto& comp : compilations_) comps.push_back(&comp);
  std::stable_sort(comps.begin(), comps.end(),
                   [](const CompilationRecord* a, const CompilationRecord* b) {
                     if (a->date != b->date) return a->date < b->date;
                     if (a->time != b->time) return a->time < b->time;
                     return a->compile_id < b->compile_id;
                   });

  std::vector<OptimizationCase> cases;
  for (const CompilationRecord* comp : comps) {
    if (criteria.program_id && comp->program_id != *criteria.program_id) continue;
    if (criteria.platform_id && comp->platform_id != *criteria.platform_id) continue;
    if (criteria.compiler_id && comp->compiler_id != *criteria.compiler_id) continue;

    // candidate executions grouped by (dataset, baseline run); the reference
    // runs themselves anchor cases rather than forming them
    std::map<std::pair<int, EntityId>, std::vector<ExecutionRecord>> groups;
    for (const auto& exec : executions_) {
      if (exec.compile_id != comp->compile_id) continue;
      if (exec.is_baseline()) continue;
      groups[{exec.dataset_number, exec.run_id_associate}].push_back(exec);
    }
    for (auto& [key, group] : groups) {
      const auto& [dataset, baseline_run_id] = key;
      if (criteria.dataset_number && dataset != *criteria.dataset_number) continue;

      const ExecutionRecord* baseline_exec = find_execution(baseline_run_id);
      if (!baseline_exec) continue;
      const CompilationRecord* baseline_comp = find_compilation(baseline_exec->compile_id);
      if (!baseline_comp) continue;

      OptimizationCase opt_case;
      try {
        opt_case = derive_case(*comp, group, {*baseline_exec}, *baseline_comp, agg);
      } catch (const Error& err) {
        if (err.code() != errc::incorrect_output) continue;  // underivable metrics
        // keep the case visible with metrics from the correctness-blind path
        opt_case.compilation = *comp;
        opt_case.executions = group;
        opt_case.baseline_compile_id = baseline_comp->compile_id;
        opt_case.baseline_run_id = baseline_run_id;
        std::vector<double> case_times;
        for (const auto& exec : group) {
          for (double t : exec.repeat_times()) case_times.push_back(t);
        }
        const double case_agg = aggregate_times(case_times, agg);
        const double base_agg = aggregate_times(baseline_exec->repeat_times(), agg);
        if (case_agg == 0.0 || base_agg == 0.0 || comp->bin_size == 0 ||
            comp->compile_time == 0.0) {
          continue;
        }
        opt_case.speedup = base_agg / case_agg;
        opt_case.size_ratio =
            static_cast<double>(baseline_comp->bin_size) / static_cast<double>(comp->bin_size);
        opt_case.compile_time_ratio = baseline_comp->compile_time / comp->compile_time;
        opt_case.rank = group.front().rank;
      }

      if (criteria.min_speedup && opt_case.speedup < *criteria.min_speedup) continue;
      if (criteria.min_rank && opt_case.rank < *criteria.min_rank) continue;
      if (criteria.output_correct && opt_case.output_correct() != *criteria.output_correct) continue;
      cases.push_back(std::move(opt_case));
    }
  }
  return cases;
}

// ---------------------------------------------------------------------------
// merge and import
// ---------------------------------------------------------------------------

MergeStats Repository::merge(const Repository& source, Repository& destination) {
  destination.require_writable();
  // a shared store stays homogeneous: merging demands the exact version,
  // while open only gates on the major component
  if (source.info_.cod_version != destination.info_.cod_version) {
    raise(errc::version_mismatch, "source " + source.info_.cod_version + " vs destination " +
                                      destination.info_.cod_version);
  }

  MergeStats stats;
  auto classify = [&stats](const std::string& a, const std::string& b) {
    if (a == b) ++stats.duplicates;
    else ++stats.conflicts;  // destination wins
  };

  for (const auto& entity : source.entities_) {
    auto it = destination.entity_index_.find(entity.id);
    if (it != destination.entity_index_.end()) {
      classify(entity.descriptor.serialize(),
               destination.entities_[it->second].descriptor.serialize());
      continue;
    }
    destination.append_entity(entity);
    destination.entity_index_[entity.id] = destination.entities_.size();
    destination.entity_by_hash_.emplace(entity_content_hash(entity.descriptor), entity.id);
    destination.entities_.push_back(entity);
    ++stats.new_records;
  }

  for (const auto& comp : source.compilations_) {
    auto it = destination.compilation_index_.find(comp.compile_id);
    if (it != destination.compilation_index_.end()) {
      classify(comp.to_packet().serialize(),
               destination.compilations_[it->second].to_packet().serialize());
      continue;
    }
    destination.append_compilation_packet(comp.to_packet());
    destination.compilation_index_[comp.compile_id] = destination.compilations_.size();
    destination.compilations_.push_back(comp);
    ++stats.new_records;
  }

  for (const auto& feature : source.features_) {
    auto it = destination.feature_index_.find(feature.feature_id);
    if (it != destination.feature_index_.end()) {
      classify(feature.to_packet().serialize(),
               destination.features_[it->second].to_packet().serialize());
      continue;
    }
    destination.append_compilation_packet(feature.to_packet());
    destination.feature_index_[feature.feature_id] = destination.features_.size();
    destination.features_.push_back(feature);
    ++stats.new_records;
  }

  for (const auto& exec : source.executions_) {
    auto it = destination.execution_index_.find(exec.run_id);
    if (it != destination.execution_index_.end()) {
      classify(exec.to_packet().serialize(),
               destination.executions_[it->second].to_packet().serialize());
      continue;
    }
    destination.append_execution_packet(exec.to_packet());
    destination.execution_index_[exec.run_id] = destination.executions_.size();
    destination.executions_.push_back(exec);
    ++stats.new_records;
  }
  return stats;
}

size_t Repository::import_packets(const std::string& text, IdGenerator& idgen) {
  require_writable();
  size_t imported = 0;
  auto ensure_entity = [&](EntityKind kind, const EntityId& id) {
    if (!id.valid() || entity_index_.count(id)) return;
    PlatformDescriptor stub;
    stub.id = id;
    stub.name = std::string("imported-") + entity_kind_name(kind) + "-" + id.str();
    Packet packet = platform_packet(stub);
    register_entity(kind, packet, idgen);
  };

  for (const auto& packet : parse_packet_stream(text)) {
    if (packet.empty()) continue;
    if (packet.has("ENTITY_KIND")) {
      register_entity(entity_kind_from_name(packet.get("ENTITY_KIND")), packet, idgen);
      ++imported;
      continue;
    }
    ParsedPacket parsed = parse_packet(packet.serialize());
    switch (parsed.kind) {
      case PacketKind::compilation: {
        CompilationRecord comp = CompilationRecord::from_packet(parsed.fields);
        ensure_entity(EntityKind::platform, comp.platform_id);
        ensure_entity(EntityKind::environment, comp.environment_id);
        ensure_entity(EntityKind::compiler, comp.compiler_id);
        ensure_entity(EntityKind::program, comp.program_id);
        record(comp);
        ++imported;
        break;
      }
      case PacketKind::execution: {
        ExecutionRecord exec = ExecutionRecord::from_packet(parsed.fields);
        ensure_entity(EntityKind::platform, exec.platform_id);
        ensure_entity(EntityKind::environment, exec.environment_id);
        ensure_entity(EntityKind::compiler, exec.compiler_id);
        ensure_entity(EntityKind::program, exec.program_id);
        record(exec);
        ++imported;
        break;
      }
      case PacketKind::features: {
        FeatureRecord features = FeatureRecord::from_packet(parsed.fields);
        if (!features.feature_id.valid()) features.feature_id = idgen.next();
        record_features(features);
        ++imported;
        break;
      }
      case PacketKind::passes:
        break;  // pass lists are not stored
    }
  }
  return imported;
}

size_t Repository::import_directory(const fs::path& path, IdGenerator& idgen) {
  size_t imported = 0;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "_comp" || name == "_run" || name == "_prog_feat" || name == "_comp_passes" ||
        entry.path().extension() == ".pk") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) imported += import_packets(read_file(file), idgen);
  return imported;
}

}  // namespace ctune
