#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pabench/voxel_grid.hpp"

namespace pabench {

/// Per-case efficiency measurements. gpu_max_mb of 0 is legal (CPU-only
/// entries report no device memory).
struct EfficiencyRecord {
    std::string case_id;
    double runtime_seconds = 0.0;
    double gpu_max_mb = 0.0;
    int exit_status = 0;
    bool failed = false;    // nonzero exit or timeout
    bool timed_out = false;
};

class SpawnError : public Error {
public:
    using Error::Error;
};

/// Runs a command and reports wall-clock seconds from spawn to exit on the
/// monotonic clock. A nonzero exit status is recorded, not thrown. When a
/// timeout ceiling is given and exceeded, the child is killed and the
/// record is marked failed with runtime equal to the ceiling.
inline EfficiencyRecord measure_command(const std::vector<std::string>& argv,
                                        const std::string& case_id,
                                        std::optional<double> timeout_seconds =
                                            std::nullopt) {
    if (argv.empty()) throw SpawnError("empty command");

    // exec failure is reported through a CLOEXEC pipe: if the exec
    // succeeds the write end closes silently, otherwise errno arrives.
    int fds[2];
    if (pipe(fds) != 0) throw SpawnError("pipe failed");
    fcntl(fds[1], F_SETFD, FD_CLOEXEC);

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw SpawnError("fork failed");
    }
    if (pid == 0) {
        close(fds[0]);
        execvp(args[0], args.data());
        const int err = errno;
        ssize_t ignored = write(fds[1], &err, sizeof(err));
        (void)ignored;
        _exit(127);
    }
    close(fds[1]);

    EfficiencyRecord rec;
    rec.case_id = case_id;

    int status = 0;
    bool done = false;
    while (!done) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) {
            done = true;
            break;
        }
        if (r < 0) {
            close(fds[0]);
            throw SpawnError("waitpid failed");
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        if (timeout_seconds.has_value() && elapsed > *timeout_seconds) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            close(fds[0]);
            rec.runtime_seconds = *timeout_seconds;
            rec.failed = true;
            rec.timed_out = true;
            rec.exit_status = -1;
            return rec;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    rec.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();

    int exec_errno = 0;
    const ssize_t n = read(fds[0], &exec_errno, sizeof(exec_errno));
    close(fds[0]);
    if (n == sizeof(exec_errno)) {
        throw SpawnError("cannot execute " + argv[0] + ": " +
                         std::strerror(exec_errno));
    }

    if (WIFEXITED(status)) {
        rec.exit_status = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        rec.exit_status = 128 + WTERMSIG(status);
    }
    rec.failed = rec.exit_status != 0;
    return rec;
}

/// Reads a GPU sampler log: CSV with header "timestamp,used_mb", rows in
/// any order. Returns the maximum used_mb; an empty body means 0 (no GPU
/// activity recorded).
inline double ingest_gpu_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open GPU log " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(path + ": missing header row, expected timestamp,used_mb");
    }
    // Tolerate UTF-8 BOM and surrounding spaces in the header.
    std::string header = line;
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header.erase(0, 3);
    }
    header.erase(std::remove_if(header.begin(), header.end(),
                                [](unsigned char ch) { return std::isspace(ch); }),
                 header.end());
    if (header != "timestamp,used_mb") {
        throw Error(path + ": line 1: expected header timestamp,used_mb, got \"" +
                    line + "\"");
    }

    double max_mb = 0.0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error(path + ": line " + std::to_string(lineno) +
                        ": expected timestamp,used_mb");
        }
        const std::string value = line.substr(comma + 1);
        try {
            std::size_t used = 0;
            const double mb = std::stod(value, &used);
            // trailing garbage after the number is a parse error too
            for (std::size_t i = used; i < value.size(); ++i) {
                if (!std::isspace(static_cast<unsigned char>(value[i])) &&
                    value[i] != '\r') {
                    throw std::invalid_argument("trailing characters");
                }
            }
            max_mb = std::max(max_mb, mb);
        } catch (const std::exception&) {
            throw Error(path + ": line " + std::to_string(lineno) +
                        ": cannot parse used_mb value \"" + value + "\"");
        }
    }
    return max_mb;
}

enum class GpuPolicy : std::uint8_t {
    MeanOfMax, // average of per-case maxima (default)
    MaxOfMax,  // overall maximum
};

struct EfficiencySummary {
    double mean_runtime_seconds = 0.0;
    double gpu_stat_mb = 0.0;
    GpuPolicy policy = GpuPolicy::MeanOfMax;
    std::size_t cases = 0;
    std::size_t failed_cases = 0;
};

/// Per-team aggregation: mean runtime over all cases and the GPU statistic
/// under the configured policy.
inline EfficiencySummary aggregate_efficiency(
    const std::vector<EfficiencyRecord>& records,
    GpuPolicy policy = GpuPolicy::MeanOfMax) {
    if (records.empty()) throw Error("cannot aggregate an empty record list");
    EfficiencySummary s;
    s.policy = policy;
    s.cases = records.size();
    double rt_sum = 0.0, gpu_sum = 0.0, gpu_max = 0.0;
    for (const auto& r : records) {
        rt_sum += r.runtime_seconds;
        gpu_sum += r.gpu_max_mb;
        gpu_max = std::max(gpu_max, r.gpu_max_mb);
        if (r.failed) ++s.failed_cases;
    }
    s.mean_runtime_seconds = rt_sum / static_cast<double>(records.size());
    s.gpu_stat_mb = policy == GpuPolicy::MeanOfMax
                        ? gpu_sum / static_cast<double>(records.size())
                        : gpu_max;
    return s;
}

} // namespace pabench
