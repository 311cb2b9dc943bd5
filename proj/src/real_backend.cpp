#include "ctune/real_backend.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ctune/error.hpp"
#include "ctune/md5.hpp"
#include "ctune/packet.hpp"
#include "ctune/process.hpp"

namespace fs = std::filesystem;

namespace ctune {

namespace {

// one compile-or-run at a time per program working directory
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fd_ = ::open((dir / "_ccc_dirlock").c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ >= 0) ::flock(fd_, LOCK_EX);
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::storage_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string strip(const std::string& line) {
  size_t begin = line.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  size_t end = line.find_last_not_of(" \t\r");
  return line.substr(begin, end - begin + 1);
}

// name -> (mtime, size) for everything under dir except excluded names
std::map<std::string, std::pair<fs::file_time_type, uintmax_t>> snapshot_dir(
    const fs::path& dir, const std::string& exclude) {
  std::map<std::string, std::pair<fs::file_time_type, uintmax_t>> snap;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == exclude || name.rfind("_ccc", 0) == 0) continue;
    snap[name] = {entry.last_write_time(), entry.file_size()};
  }
  return snap;
}

}  // namespace

std::vector<DatasetEntry> parse_dataset_descriptor(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) lines.push_back(strip(line));

  size_t pos = 0;
  while (pos < lines.size() && lines[pos].empty()) ++pos;
  if (pos >= lines.size()) raise(errc::bad_value, "empty dataset descriptor");
  const int total = static_cast<int>(parse_int(lines[pos++]));

  std::vector<DatasetEntry> datasets;
  while (pos < lines.size()) {
    if (lines[pos].empty() || lines[pos].rfind("====", 0) == 0) {
      ++pos;
      continue;
    }
    DatasetEntry entry;
    entry.number = static_cast<int>(parse_int(lines[pos++]));
    if (pos >= lines.size()) raise(errc::bad_value, "dataset block truncated");
    entry.command_line = lines[pos++];
    if (pos < lines.size() && !lines[pos].empty() && lines[pos].rfind("====", 0) != 0) {
      entry.loop_wrapper_bound = parse_int(lines[pos++]);
    }
    datasets.push_back(std::move(entry));
  }
  if (static_cast<int>(datasets.size()) != total) {
    raise(errc::bad_value, "dataset descriptor declares " + std::to_string(total) + " datasets, " +
                               std::to_string(datasets.size()) + " described");
  }
  std::sort(datasets.begin(), datasets.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.number < b.number; });
  for (size_t i = 0; i < datasets.size(); ++i) {
    if (datasets[i].number != static_cast<int>(i) + 1) {
      raise(errc::bad_value, "dataset numbers must be 1..N with no gaps");
    }
  }
  return datasets;
}

std::vector<DatasetEntry> load_dataset_descriptor(const fs::path& path) {
  return parse_dataset_descriptor(read_file(path));
}

std::string expand_invocation(const std::string& invocation_template, const std::string& sources,
                              const std::string& output, const std::string& flags) {
  std::string cmd = invocation_template;
  auto replace_all = [&cmd](const std::string& what, const std::string& with) {
    size_t pos = 0;
    while ((pos = cmd.find(what, pos)) != std::string::npos) {
      cmd.replace(pos, what.size(), with);
      pos += with.size();
    }
  };
  if (cmd.find("{SOURCES}") == std::string::npos || cmd.find("{OUTPUT}") == std::string::npos ||
      cmd.find("{FLAGS}") == std::string::npos) {
    raise(errc::bad_value,
          "invocation template must contain {SOURCES}, {OUTPUT} and {FLAGS}: " + cmd);
  }
  replace_all("{SOURCES}", sources);
  replace_all("{OUTPUT}", output);
  replace_all("{FLAGS}", flags);
  return cmd;
}

RealBackend::RealBackend(CompilerDescriptor compiler, fs::path workdir)
    : compiler_(std::move(compiler)), workdir_(std::move(workdir)) {
  if (compiler_.invocation_template.empty()) {
    raise(errc::compiler_not_found, "compiler " + compiler_.name + " has no invocation template");
  }
}

fs::path RealBackend::binary_path(const ProgramDescriptor& program) const {
  return workdir_ / ("_ccc_bin_" + program.name);
}

CompileOutcome RealBackend::compile(const ProgramDescriptor& program, const FlagCombination& flags,
                                    const DriverEnv& env) {
  DirLock lock(workdir_);
  fs::path srcdir = program.source_dir.empty() ? workdir_ : fs::path(program.source_dir);
  std::vector<fs::path> sources;
  if (fs::exists(srcdir)) {
    for (const auto& entry : fs::directory_iterator(srcdir)) {
      const std::string ext = entry.path().extension().string();
      if (ext == ".c" || ext == ".cc" || ext == ".cpp") sources.push_back(entry.path());
    }
  }
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) raise(errc::compile_failed, "no sources under " + srcdir.string());

  std::string source_list;
  for (const auto& path : sources) {
    if (!source_list.empty()) source_list += ' ';
    source_list += path.string();
  }
  std::string flag_text = flags.canonical();
  std::string platform_text = flags.platform_canonical();
  if (!platform_text.empty()) flag_text += " " + platform_text;

  const fs::path output = binary_path(program);
  std::error_code ec;
  fs::remove(output, ec);
  const std::string cmd =
      expand_invocation(compiler_.invocation_template, source_list, output.string(), flag_text);

  ExecResult exec = run_command(cmd, workdir_.string(), {}, env.compile_timeout);
  if (exec.timed_out) raise(errc::timeout, "compilation exceeded " +
                                               std::to_string(env.compile_timeout) + "s: " + cmd);
  if (exec.exit_code == 127) raise(errc::compiler_not_found, cmd + "\n" + exec.output);

  CompileOutcome outcome;
  outcome.compile_time = exec.wall;
  outcome.log = exec.output;
  outcome.success = exec.exit_code == 0 && fs::exists(output) && fs::file_size(output) > 0;
  if (outcome.success) {
    outcome.bin_size = fs::file_size(output);
    outcome.obj_md5 = md5_file(output.string());
  }
  return outcome;
}

RunOutcome RealBackend::run(const ProgramDescriptor& program, const FlagCombination&,
                            int dataset_number, int repeats, const DriverEnv& env,
                            const RunOutputs* reference) {
  if (repeats < 1) raise(errc::bad_value, "repeats must be >= 1");
  DirLock lock(workdir_);
  const DatasetEntry& dataset = program.dataset(dataset_number);
  const fs::path binary = binary_path(program);
  if (!fs::exists(binary)) raise(errc::run_failed, "no compiled binary at " + binary.string());
  const std::string binary_name = binary.filename().string();

  std::vector<std::pair<std::string, std::string>> extra_env;
  long bound = env.loop_wrapper.value_or(dataset.loop_wrapper_bound);
  extra_env.emplace_back("CCC_LOOP_WRAPPER", std::to_string(bound));

  const std::string cmd = binary.string() + " " + dataset.command_line;

  RunOutcome outcome;
  outcome.output_correct = true;
  for (int repeat = 0; repeat < repeats; ++repeat) {
    auto before = snapshot_dir(workdir_, binary_name);
    ExecResult exec =
        run_command(cmd, workdir_.string(), extra_env, env.run_timeout, env.processor_num);
    if (exec.timed_out) raise(errc::timeout, "run exceeded " + std::to_string(env.run_timeout) +
                                                 "s: " + cmd);
    if (exec.exit_code != 0) {
      raise(errc::run_failed,
            "exit " + std::to_string(exec.exit_code) + " from: " + cmd + "\n" + exec.output);
    }
    RepeatTiming timing;
    timing.wall = exec.wall;
    timing.user = exec.user;
    timing.sys = exec.sys;
    outcome.times.push_back(timing);
    outcome.log += exec.output;

    // output files: created or changed during this repeat
    RunOutputs produced;
    auto after = snapshot_dir(workdir_, binary_name);
    for (const auto& [name, stat] : after) {
      auto it = before.find(name);
      if (it == before.end() || it->second != stat) {
        produced.files.emplace_back(name, md5_file((workdir_ / name).string()));
      }
    }
    std::sort(produced.files.begin(), produced.files.end());
    if (reference && !produced.matches(*reference)) outcome.output_correct = false;
    if (repeat + 1 < repeats) {
      for (const auto& [name, digest] : produced.files) {
        std::error_code ec;
        fs::remove(workdir_ / name, ec);
      }
    } else {
      outcome.outputs = produced;
    }
  }

  if (!env.counters_hook.empty()) {
    ExecResult hook = run_command(env.counters_hook, workdir_.string(), extra_env, 30.0);
    if (hook.exit_code == 0) {
      try {
        Packet packet = parse_packet_fields(hook.output);
        for (const auto& [key, value] : packet.fields()) {
          outcome.hardware_counters.emplace_back(key, parse_int(value));
        }
      } catch (const Error&) {
        // a broken hook never fails the run
      }
    }
  }
  return outcome;
}

}  // namespace ctune
