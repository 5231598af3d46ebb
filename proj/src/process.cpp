#include "ebda/codec.hpp"
#include "ebda/errors.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

extern char** environ;

namespace ebda {

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> words;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (char ch : command) {
    if (quote) {
      if (ch == quote) {
        quote = 0;
      } else {
        cur += ch;
      }
    } else if (ch == '"' || ch == '\'') {
      quote = ch;
      in_word = true;
    } else if (ch == ' ' || ch == '\t' || ch == '\n') {
      if (in_word) words.push_back(std::move(cur));
      cur.clear();
      in_word = false;
    } else {
      cur += ch;
      in_word = true;
    }
  }
  if (quote) throw ConfigError("unterminated quote in command: " + command);
  if (in_word) words.push_back(std::move(cur));
  return words;
}

std::string expand_placeholders(const std::string& text,
                                const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string::npos) break;
    const auto close = text.find('}', open);
    if (close == std::string::npos) break;
    const auto key = text.substr(open + 1, close - open - 1);
    out += text.substr(pos, open - pos);
    if (const auto it = values.find(key); it != values.end()) {
      out += it->second;
    } else {
      out += text.substr(open, close - open + 1);
    }
    pos = close + 1;
  }
  out += text.substr(pos);
  return out;
}

ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& log_path) {
  if (argv.empty()) throw SpawnError("empty command");

  std::string joined;
  for (const auto& a : argv) joined += (joined.empty() ? "" : " ") + a;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  {
    std::ofstream log(log_path, std::ios::app);
    log << "$ " << joined << "\n";
  }

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw SpawnError("cannot start '" + argv[0] + "' (command: " + joined + "): " + std::strerror(rc));
  }

  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw SpawnError("waitpid failed for '" + joined + "'");
  }

  ProcessResult result;
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  std::ifstream log(log_path);
  std::ostringstream text;
  text << log.rdbuf();
  result.output = text.str();
  return result;
}

}  // namespace ebda
