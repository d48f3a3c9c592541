#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcqe {

struct ProcessResult {
    int exit_code = -1;
    std::string output;  // combined stdout + stderr
};

// Runs a shell command, capturing combined output.
inline ProcessResult run_process(const std::string& command) {
    ProcessResult res;
    const std::string cmd = "( " + command + " ) 2>&1";
    std::FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("run_process: popen failed for: " + command);
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) res.output.append(buf, n);
    const int status = pclose(pipe);
    if (WIFEXITED(status))
        res.exit_code = WEXITSTATUS(status);
    else
        res.exit_code = -1;
    return res;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// Writes via a temp file in the same directory, then renames into place.
inline void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os.good()) throw std::runtime_error("atomic_write_file: cannot open " + tmp.string());
        os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        os.flush();
        if (!os.good()) throw std::runtime_error("atomic_write_file: write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "vcqe") {
        namespace fs = std::filesystem;
        std::string tmpl = (fs::temp_directory_path() / (prefix + ".XXXXXX")).string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("TempDir: mkdtemp failed");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

inline std::string env_or(const std::string& name, const std::string& fallback) {
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : fallback;
}

}  // namespace vcqe
