#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "gram/architecture.hpp"
#include "gram/errors.hpp"
#include "gram/log.hpp"
#include "gram/meta_graph.hpp"
#include "gram/profiler.hpp"

// Evaluation contract: something maps a candidate architecture to an accuracy
// in [0,1] and a latency in milliseconds. Built-in evaluators cover desk-scale
// verification; real training lives in an external process that speaks
// line-delimited JSON over stdin/stdout:
//
//   engine:    {"id": N, "protocol": 1, "architecture": {...}, "proxy_size": 500}
//   evaluator: {"id": N, "accuracy": 0.87, "latency_ms": 4.2}
//   engine:    {"id": null, "cmd": "shutdown"}
//
// One object per line, UTF-8, unknown fields ignored, ids must match.

namespace gram {

inline constexpr int kProtocolVersion = 1;

struct EvalResult {
    double accuracy = 0.0;    // eta, fraction in [0,1]
    double latency_ms = 0.0;  // tau

    void validate() const {
        if (!(std::isfinite(accuracy) && accuracy >= 0.0 && accuracy <= 1.0))
            throw value_error("accuracy must be a finite fraction in [0,1]");
        if (!(std::isfinite(latency_ms) && latency_ms >= 0.0))
            throw value_error("latency_ms must be finite and >= 0");
    }

    bool operator==(const EvalResult&) const = default;
};

// eta' = eta - gamma * tau. Not clamped; a slow model can score negative.
inline double penalized_score(const EvalResult& result, double gamma) {
    if (!(gamma >= 0.0)) throw range_error("gamma must be >= 0");
    result.validate();
    return result.accuracy - gamma * result.latency_ms;
}

// ---- built-in evaluators --------------------------------------------------------

struct MotifEdge {
    int dag = 0;
    int from = 0;
    int to = 0;
    auto operator<=>(const MotifEdge&) const = default;
};

// Deterministic toy objective with a planted edge set: reward scales with the
// fraction of the motif that was sampled and shrinks with off-motif clutter.
struct SyntheticMotifParams {
    std::vector<MotifEdge> motif;
    double base = 0.3;
    double gain = 0.6;
    double clutter = 0.2;
    double latency_ms = 0.0;
};

inline EvalResult evaluate_synthetic_motif(const SyntheticMotifParams& params,
                                           const SampledGraphSet& sampled) {
    std::set<MotifEdge> motif(params.motif.begin(), params.motif.end());
    std::uint64_t hits = 0, extras = 0, total = 0;
    for (std::size_t k = 0; k < sampled.dags.size(); ++k) {
        for (const Edge& e : sampled.dags[k].edges) {
            if (motif.count({static_cast<int>(k), e.from, e.to}))
                ++hits;
            else
                ++extras;
        }
        total += Dag::edge_count_for(sampled.nodes_per_dag);
    }
    double eta = params.base;
    if (!motif.empty()) eta += params.gain * static_cast<double>(hits) / static_cast<double>(motif.size());
    if (total > 0) eta -= params.clutter * static_cast<double>(extras) / static_cast<double>(total);
    eta = std::clamp(eta, 0.0, 1.0);
    return {eta, params.latency_ms};
}

// Constant accuracy; latency from the cost model. Exercises the latency
// penalty path without any training in the loop.
struct CostOnlyParams {
    double accuracy = 0.5;
    CostModel cost_model = CostModel::defaults();
};

inline EvalResult evaluate_cost_only(const CostOnlyParams& params, const ArchitectureSpec& spec) {
    return {params.accuracy, estimate_latency(spec, params.cost_model)};
}

// ---- external process evaluator --------------------------------------------------

struct ExternalProcessParams {
    std::string command;          // run through /bin/sh -c
    double timeout_s = 60.0;
    std::optional<int> proxy_size;  // forwarded as a hint in every request
};

// Owns one child evaluator process and the request/reply framing. Any protocol
// failure throws and poisons the session; the owner discards it and may spawn
// a fresh one. Never touches engine state.
class ExternalEvaluatorSession {
public:
    explicit ExternalEvaluatorSession(ExternalProcessParams params) : params_(std::move(params)) {
        if (params_.command.empty())
            throw protocol_error(protocol_error::kind::spawn_failed, -1, "empty evaluator command");
        if (!(params_.timeout_s > 0.0))
            throw protocol_error(protocol_error::kind::spawn_failed, -1, "timeout must be > 0");
        spawn();
    }

    ExternalEvaluatorSession(const ExternalEvaluatorSession&) = delete;
    ExternalEvaluatorSession& operator=(const ExternalEvaluatorSession&) = delete;

    ~ExternalEvaluatorSession() { terminate(); }

    bool alive() const { return pid_ > 0; }

    EvalResult evaluate(const nlohmann::json& architecture) {
        const long long id = next_id_++;
        nlohmann::json request{
            {"id", id}, {"protocol", kProtocolVersion}, {"architecture", architecture}};
        if (params_.proxy_size) request["proxy_size"] = *params_.proxy_size;
        write_line(request.dump(), id);
        const std::string line = read_line(id);

        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            fail();
            throw protocol_error(protocol_error::kind::malformed_reply, id,
                                 "evaluator reply is not valid JSON: " + line.substr(0, 120));
        }
        if (reply.contains("protocol") && (!reply["protocol"].is_number_integer() ||
                                           reply["protocol"].get<int>() != kProtocolVersion)) {
            const std::string got = reply["protocol"].dump();
            fail();
            throw protocol_error(protocol_error::kind::version_mismatch, id,
                                 "evaluator speaks protocol " + got);
        }
        if (!reply.contains("id") || !reply["id"].is_number_integer() ||
            reply["id"].get<long long>() != id) {
            const std::string got = reply.contains("id") ? reply["id"].dump() : "none";
            fail();
            throw protocol_error(protocol_error::kind::id_mismatch, id,
                                 "evaluator replied to id " + got + ", expected " + std::to_string(id));
        }
        EvalResult result;
        try {
            result.accuracy = reply.at("accuracy").get<double>();
            result.latency_ms = reply.at("latency_ms").get<double>();
            result.validate();
        } catch (const std::exception& e) {
            fail();
            throw protocol_error(protocol_error::kind::malformed_reply, id,
                                 std::string("evaluator reply rejected: ") + e.what());
        }
        return result;
    }

    // Polite shutdown: send the sentinel, close the pipe, reap the child.
    void shutdown() {
        if (pid_ <= 0) return;
        nlohmann::json bye{{"id", nullptr}, {"cmd", "shutdown"}};
        try {
            write_line(bye.dump(), -1);
        } catch (const protocol_error&) {
            // already gone; reaping below is all that is left
        }
        close_fd(in_fd_);
        reap(true);
    }

private:
    void spawn() {
        // A writer on a dead pipe should see EPIPE, not die by SIGPIPE.
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0)
            throw protocol_error(protocol_error::kind::spawn_failed, -1, "pipe() failed");
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw protocol_error(protocol_error::kind::spawn_failed, -1, "pipe() failed");
        }
        const pid_t pid = ::fork();
        if (pid < 0) {
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
            throw protocol_error(protocol_error::kind::spawn_failed, -1, "fork() failed");
        }
        if (pid == 0) {
            // Own process group so teardown can signal the shell and anything
            // it spawned in one shot.
            ::setpgid(0, 0);
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
            ::execl("/bin/sh", "sh", "-c", params_.command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        ::setpgid(pid, pid);  // mirror in the parent; loser of the race is a no-op
        ::close(to_child[0]);
        ::close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
        pid_ = pid;
        log_debug("spawned evaluator pid " + std::to_string(pid_) + ": " + params_.command);
    }

    void write_line(const std::string& payload, long long id) {
        if (pid_ <= 0)
            throw protocol_error(protocol_error::kind::process_exit, id, "evaluator session is closed");
        std::string line = payload;
        line.push_back('\n');
        std::size_t off = 0;
        while (off < line.size()) {
            const ssize_t n = ::write(in_fd_, line.data() + off, line.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                const int status = fail();
                throw protocol_error(protocol_error::kind::process_exit, id,
                                     "evaluator pipe closed while writing (" + exit_text(status) + ")");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(long long id) {
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::duration<double>(params_.timeout_s);
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) {
                fail();
                throw protocol_error(protocol_error::kind::timeout, id,
                                     "no evaluator reply within " + std::to_string(params_.timeout_s) +
                                         " s");
            }
            struct pollfd pfd{out_fd_, POLLIN, 0};
            const int rv = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
            if (rv < 0) {
                if (errno == EINTR) continue;
                fail();
                throw protocol_error(protocol_error::kind::process_exit, id, "poll() failed");
            }
            if (rv == 0) continue;  // timeout re-checked at loop head
            char chunk[4096];
            const ssize_t n = ::read(out_fd_, chunk, sizeof(chunk));
            if (n < 0) {
                if (errno == EINTR) continue;
                fail();
                throw protocol_error(protocol_error::kind::process_exit, id, "read() failed");
            }
            if (n == 0) {
                const int status = fail();
                throw protocol_error(protocol_error::kind::process_exit, id,
                                     "evaluator closed its output (" + exit_text(status) + ")");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    // Tears the session down after a fault; returns the child's wait status.
    int fail() {
        const int status = terminate();
        return status;
    }

    int terminate() {
        if (pid_ <= 0) return last_status_;
        close_fd(in_fd_);
        ::kill(-pid_, SIGTERM);
        const int status = reap(false);
        close_fd(out_fd_);
        return status;
    }

    int reap(bool patient) {
        int status = 0;
        if (patient) {
            // Give a well-behaved evaluator a moment to exit on its own.
            for (int i = 0; i < 100; ++i) {
                const pid_t r = ::waitpid(pid_, &status, WNOHANG);
                if (r == pid_) {
                    last_status_ = status;
                    ::kill(-pid_, SIGKILL);  // sweep up any stragglers it left
                    close_fd(out_fd_);
                    pid_ = -1;
                    return status;
                }
                ::usleep(10000);
            }
        }
        ::kill(-pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        last_status_ = status;
        close_fd(out_fd_);
        pid_ = -1;
        return status;
    }

    static std::string exit_text(int status) {
        if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
        if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
        return "unknown exit";
    }

    static void close_fd(int& fd) {
        if (fd >= 0) {
            ::close(fd);
            fd = -1;
        }
    }

    ExternalProcessParams params_;
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    int last_status_ = 0;
    long long next_id_ = 0;
    std::string buffer_;
};

// ---- binding ----------------------------------------------------------------------

struct EvaluatorBinding {
    enum class Kind { synthetic_motif, cost_only, external_process };

    Kind kind = Kind::cost_only;
    SyntheticMotifParams motif;
    CostOnlyParams cost;
    ExternalProcessParams external;

    void validate() const {
        if (kind == Kind::external_process) {
            if (external.command.empty()) throw config_error("external evaluator command is empty");
            if (!(external.timeout_s > 0.0)) throw config_error("external timeout_s must be > 0");
        }
        if (kind == Kind::cost_only &&
            !(cost.accuracy >= 0.0 && cost.accuracy <= 1.0))
            throw config_error("cost_only accuracy must be in [0,1]");
    }

    nlohmann::json to_json() const {
        switch (kind) {
            case Kind::synthetic_motif: {
                nlohmann::json edges = nlohmann::json::array();
                for (const auto& e : motif.motif) edges.push_back({e.dag, e.from, e.to});
                return {{"kind", "synthetic_motif"}, {"motif", edges},     {"base", motif.base},
                        {"gain", motif.gain},        {"clutter", motif.clutter},
                        {"latency_ms", motif.latency_ms}};
            }
            case Kind::cost_only:
                return {{"kind", "cost_only"},
                        {"accuracy", cost.accuracy},
                        {"cost_model", cost.cost_model.to_json()}};
            case Kind::external_process: {
                nlohmann::json j{{"kind", "external_process"},
                                 {"command", external.command},
                                 {"timeout_s", external.timeout_s}};
                if (external.proxy_size) j["proxy_size"] = *external.proxy_size;
                return j;
            }
        }
        throw state_error("unreachable evaluator kind");
    }

    static EvaluatorBinding from_json(const nlohmann::json& j) {
        EvaluatorBinding b;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "synthetic_motif") {
            b.kind = Kind::synthetic_motif;
            for (const auto& e : j.value("motif", nlohmann::json::array()))
                b.motif.motif.push_back(
                    {e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
            b.motif.base = j.value("base", b.motif.base);
            b.motif.gain = j.value("gain", b.motif.gain);
            b.motif.clutter = j.value("clutter", b.motif.clutter);
            b.motif.latency_ms = j.value("latency_ms", b.motif.latency_ms);
        } else if (kind == "cost_only") {
            b.kind = Kind::cost_only;
            b.cost.accuracy = j.value("accuracy", b.cost.accuracy);
            if (j.contains("cost_model")) b.cost.cost_model = CostModel::from_json(j.at("cost_model"));
        } else if (kind == "external_process") {
            b.kind = Kind::external_process;
            b.external.command = j.at("command").get<std::string>();
            b.external.timeout_s = j.value("timeout_s", b.external.timeout_s);
            if (j.contains("proxy_size") && !j.at("proxy_size").is_null())
                b.external.proxy_size = j.at("proxy_size").get<int>();
        } else {
            throw schema_error("unknown evaluator kind: " + kind);
        }
        return b;
    }
};

// Runtime wrapper over a binding. External sessions are spawned lazily and
// respawned after a fault, so one crashed iteration does not end the search.
class EvaluationSession {
public:
    explicit EvaluationSession(EvaluatorBinding binding) : binding_(std::move(binding)) {
        binding_.validate();
    }

    EvalResult evaluate(const ArchitectureSpec& spec, const SampledGraphSet& sampled) {
        switch (binding_.kind) {
            case EvaluatorBinding::Kind::synthetic_motif:
                return evaluate_synthetic_motif(binding_.motif, sampled);
            case EvaluatorBinding::Kind::cost_only:
                return evaluate_cost_only(binding_.cost, spec);
            case EvaluatorBinding::Kind::external_process: {
                if (!session_ || !session_->alive())
                    session_ = std::make_unique<ExternalEvaluatorSession>(binding_.external);
                try {
                    return session_->evaluate(export_json(spec));
                } catch (const protocol_error&) {
                    session_.reset();
                    throw;
                }
            }
        }
        throw state_error("unreachable evaluator kind");
    }

    void shutdown() {
        if (session_) {
            session_->shutdown();
            session_.reset();
        }
    }

private:
    EvaluatorBinding binding_;
    std::unique_ptr<ExternalEvaluatorSession> session_;
};

}  // namespace gram
