#pragma once

// Line-delimited JSON wire protocol between the engine and a learner
// process. One request per line, one response per line, strictly
// alternating. Keys are emitted in the documented order:
//
//   {"op":"train","labeled":[{"id","text","summary"}...],"validation":[...],"config":{...}}
//     -> {"ok":true,"model":"<token>","epochs":<int>}
//   {"op":"generate","model":"<token>","text":"...","stochastic":false}
//     -> {"ok":true,"summaries":["..."]}
//   {"op":"generate","model":"<token>","text":"...","stochastic":true,"n":<int>,"seed":<int>,"doc_id":"..."}
//     -> {"ok":true,"summaries":["...", ...]}
//   failures -> {"ok":false,"error":"<code>","message":"..."}

#include "bas/learner.hpp"

#include <json.hpp>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace bas::protocol {

using Json = nlohmann::ordered_json;

struct TrainRequest {
    std::vector<LabeledExample> labeled;
    std::vector<LabeledExample> validation;
    LearnerConfig config;

    bool operator==(const TrainRequest&) const = default;
};

struct GenerateRequest {
    std::string model;
    std::string text;
    bool stochastic = false;
    std::size_t n = 0;
    Seed seed = 0;
    std::string doc_id;

    bool operator==(const GenerateRequest&) const = default;
};

struct TrainResponse {
    std::string model;
    std::size_t epochs = 0;

    bool operator==(const TrainResponse&) const = default;
};

struct GenerateResponse {
    std::vector<std::string> summaries;

    bool operator==(const GenerateResponse&) const = default;
};

struct ErrorResponse {
    std::string error;
    std::string message;

    bool operator==(const ErrorResponse&) const = default;
};

using Request = std::variant<TrainRequest, GenerateRequest>;
using Response = std::variant<TrainResponse, GenerateResponse, ErrorResponse>;

namespace detail {

inline Json examples_to_json(const std::vector<LabeledExample>& xs) {
    Json arr = Json::array();
    for (const auto& x : xs) arr.push_back(Json{{"id", x.doc_id}, {"text", x.text}, {"summary", x.summary}});
    return arr;
}

template <typename T>
T get_field(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError(std::string("field '") + key + "' has the wrong type");
    }
}

inline std::vector<LabeledExample> examples_from_json(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) throw ProtocolError(std::string("field '") + key + "' must be an array");
    std::vector<LabeledExample> xs;
    for (const auto& e : *it) {
        xs.push_back({get_field<std::string>(e, "id"), get_field<std::string>(e, "text"),
                      get_field<std::string>(e, "summary")});
    }
    return xs;
}

inline Json parse_line(const std::string& line) {
    try {
        Json j = Json::parse(line);
        if (!j.is_object()) throw ProtocolError("message is not an object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    }
}

}  // namespace detail

inline Json config_to_json(const LearnerConfig& c) {
    return Json{{"beam_size", c.beam_size},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"dropout_rate", c.dropout_rate},
                {"base_seed", c.base_seed}};
}

inline LearnerConfig config_from_json(const Json& j) {
    LearnerConfig c;
    if (!j.is_object()) throw ProtocolError("config must be an object");
    if (j.contains("beam_size")) c.beam_size = detail::get_field<std::size_t>(j, "beam_size");
    if (j.contains("max_epochs")) c.max_epochs = detail::get_field<std::size_t>(j, "max_epochs");
    if (j.contains("patience")) c.patience = detail::get_field<std::size_t>(j, "patience");
    if (j.contains("dropout_rate")) c.dropout_rate = detail::get_field<double>(j, "dropout_rate");
    if (j.contains("base_seed")) c.base_seed = detail::get_field<Seed>(j, "base_seed");
    return c;
}

inline std::string encode(const Request& request) {
    Json j;
    if (const auto* t = std::get_if<TrainRequest>(&request)) {
        j["op"] = "train";
        j["labeled"] = detail::examples_to_json(t->labeled);
        j["validation"] = detail::examples_to_json(t->validation);
        j["config"] = config_to_json(t->config);
    } else {
        const auto& g = std::get<GenerateRequest>(request);
        j["op"] = "generate";
        j["model"] = g.model;
        j["text"] = g.text;
        j["stochastic"] = g.stochastic;
        if (g.stochastic) {
            j["n"] = g.n;
            j["seed"] = g.seed;
            j["doc_id"] = g.doc_id;
        }
    }
    return j.dump();
}

inline Request decode_request(const std::string& line) {
    const Json j = detail::parse_line(line);
    const auto op = detail::get_field<std::string>(j, "op");
    if (op == "train") {
        TrainRequest t;
        t.labeled = detail::examples_from_json(j, "labeled");
        t.validation = detail::examples_from_json(j, "validation");
        t.config = j.contains("config") ? config_from_json(j.at("config")) : LearnerConfig{};
        return t;
    }
    if (op == "generate") {
        GenerateRequest g;
        g.model = detail::get_field<std::string>(j, "model");
        g.text = detail::get_field<std::string>(j, "text");
        g.stochastic = j.contains("stochastic") && detail::get_field<bool>(j, "stochastic");
        if (g.stochastic) {
            g.n = detail::get_field<std::size_t>(j, "n");
            g.seed = detail::get_field<Seed>(j, "seed");
            g.doc_id = detail::get_field<std::string>(j, "doc_id");
        }
        return g;
    }
    throw ProtocolError("unknown op '" + op + "'");
}

inline std::string encode(const Response& response) {
    Json j;
    if (const auto* t = std::get_if<TrainResponse>(&response)) {
        j["ok"] = true;
        j["model"] = t->model;
        j["epochs"] = t->epochs;
    } else if (const auto* g = std::get_if<GenerateResponse>(&response)) {
        j["ok"] = true;
        j["summaries"] = g->summaries;
    } else {
        const auto& e = std::get<ErrorResponse>(response);
        j["ok"] = false;
        j["error"] = e.error;
        j["message"] = e.message;
    }
    return j.dump();
}

inline Response decode_response(const std::string& line) {
    const Json j = detail::parse_line(line);
    if (!detail::get_field<bool>(j, "ok")) {
        return ErrorResponse{detail::get_field<std::string>(j, "error"),
                             j.contains("message") ? detail::get_field<std::string>(j, "message") : std::string{}};
    }
    if (j.contains("summaries")) return GenerateResponse{detail::get_field<std::vector<std::string>>(j, "summaries")};
    if (j.contains("model")) {
        return TrainResponse{detail::get_field<std::string>(j, "model"), detail::get_field<std::size_t>(j, "epochs")};
    }
    throw ProtocolError("response carries neither 'model' nor 'summaries'");
}

/// Raises the library error matching a wire error code.
[[noreturn]] inline void rethrow(const ErrorResponse& e) {
    const std::string what = e.error + ": " + e.message;
    if (e.error == "arity") throw ArityError(what);
    if (e.error == "contract") throw ContractError(what);
    if (e.error == "protocol" || e.error == "stale_model") throw ProtocolError(what);
    if (e.error == "config") throw ConfigError(what);
    throw TransportError("learner failure " + what);
}

/// Serves one Learner over the protocol. Model tokens are the learner's own.
class Server {
public:
    explicit Server(Learner& learner) : learner_(learner) {}

    Response handle(const Request& request) {
        try {
            if (const auto* t = std::get_if<TrainRequest>(&request)) {
                current_ = learner_.train(t->labeled, t->validation, t->config);
                return TrainResponse{current_->token, current_->epochs};
            }
            const auto& g = std::get<GenerateRequest>(request);
            if (!current_ || g.model != current_->token) {
                return ErrorResponse{"stale_model", "unknown or stale model '" + g.model + "'"};
            }
            if (!g.stochastic) return GenerateResponse{{learner_.generate(*current_, g.text)}};
            return GenerateResponse{learner_.generate_stochastic(*current_, g.doc_id, g.text, g.n, g.seed).summaries};
        } catch (const Error& e) {
            return ErrorResponse{e.code(), e.what()};
        } catch (const std::exception& e) {
            return ErrorResponse{"internal", e.what()};
        }
    }

    std::string handle_line(const std::string& line) {
        try {
            return encode(handle(decode_request(line)));
        } catch (const Error& e) {
            return encode(ErrorResponse{e.code(), e.what()});
        }
    }

    /// Request loop until end of input.
    void serve(std::istream& in, std::ostream& out) {
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            out << handle_line(line) << '\n';
            out.flush();
        }
    }

private:
    Learner& learner_;
    std::optional<ModelHandle> current_;
};

/// Learner living in a child process started with `/bin/sh -c <command>`.
/// The child's stderr is inherited so its diagnostics stay visible.
class ProcessLearner final : public Learner {
public:
    explicit ProcessLearner(std::string command) : command_(std::move(command)) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0) throw TransportError(std::string("pipe: ") + std::strerror(errno));
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw TransportError(std::string("pipe: ") + std::strerror(errno));
        }
        pid_ = fork();
        if (pid_ < 0) throw TransportError(std::string("fork: ") + std::strerror(errno));
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    ProcessLearner(const ProcessLearner&) = delete;
    ProcessLearner& operator=(const ProcessLearner&) = delete;

    ~ProcessLearner() override {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    ModelHandle train(std::span<const LabeledExample> labeled, std::span<const LabeledExample> validation,
                      const LearnerConfig& config) override {
        if (labeled.empty()) throw ContractError("train needs a non-empty labeled set");
        TrainRequest req{{labeled.begin(), labeled.end()}, {validation.begin(), validation.end()}, config};
        const auto resp = round_trip(req);
        const auto* t = std::get_if<TrainResponse>(&resp);
        if (!t) throw ProtocolError("expected a train response");
        generation_ = trained_ ? generation_ + 1 : 0;
        trained_ = true;
        return ModelHandle{t->model, generation_, t->epochs};
    }

    std::string generate(const ModelHandle& model, const std::string& text) override {
        const auto resp = round_trip(GenerateRequest{model.token, text, false, 0, 0, {}});
        const auto* g = std::get_if<GenerateResponse>(&resp);
        if (!g || g->summaries.size() != 1) throw ProtocolError("expected exactly one summary");
        return g->summaries.front();
    }

    StochasticBatch generate_stochastic(const ModelHandle& model, const std::string& doc_id, const std::string& text,
                                        std::size_t n, Seed seed) override {
        if (n < 2) throw ArityError("stochastic generation needs n >= 2, got " + std::to_string(n));
        const auto resp = round_trip(GenerateRequest{model.token, text, true, n, seed, doc_id});
        const auto* g = std::get_if<GenerateResponse>(&resp);
        if (!g || g->summaries.size() != n) {
            throw ProtocolError("expected " + std::to_string(n) + " summaries for '" + doc_id + "'");
        }
        return StochasticBatch{doc_id, g->summaries};
    }

    /// Raw exchange, exposed for conformance tests.
    std::string exchange(const std::string& line) {
        write_line(line);
        return read_line();
    }

private:
    Response round_trip(const Request& request) {
        const auto resp = decode_response(exchange(encode(request)));
        if (const auto* e = std::get_if<ErrorResponse>(&resp)) rethrow(*e);
        return resp;
    }

    void write_line(const std::string& line) {
        std::string buf = line;
        buf.push_back('\n');
        std::size_t off = 0;
        while (off < buf.size()) {
            const ssize_t w = ::write(write_fd_, buf.data() + off, buf.size() - off);
            if (w < 0) {
                if (errno == EINTR) continue;
                throw TransportError(diagnose(std::string("write failed: ") + std::strerror(errno)));
            }
            off += static_cast<std::size_t>(w);
        }
    }

    std::string read_line() {
        for (;;) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            char chunk[65536];
            const ssize_t r = ::read(read_fd_, chunk, sizeof chunk);
            if (r < 0 && errno == EINTR) continue;
            if (r <= 0) throw TransportError(diagnose("learner closed its output", std::chrono::seconds(2)));
            buffer_.append(chunk, static_cast<std::size_t>(r));
        }
    }

    /// Appends the child's exit status if it has ended, waiting up to
    /// `grace` for it: a closed pipe usually means the child is exiting.
    std::string diagnose(const std::string& what, std::chrono::milliseconds grace = {}) {
        std::string msg = what + " (command: " + command_ + ")";
        int status = 0;
        pid_t reaped = pid_ > 0 ? waitpid(pid_, &status, WNOHANG) : -1;
        const auto deadline = std::chrono::steady_clock::now() + grace;
        while (reaped == 0 && std::chrono::steady_clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
            reaped = waitpid(pid_, &status, WNOHANG);
        }
        if (pid_ > 0 && reaped == pid_) {
            pid_ = -1;
            if (WIFEXITED(status)) msg += ", exit status " + std::to_string(WEXITSTATUS(status));
            if (WIFSIGNALED(status)) msg += ", killed by signal " + std::to_string(WTERMSIG(status));
        }
        return msg;
    }

    std::string command_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string buffer_;
    std::size_t generation_ = 0;
    bool trained_ = false;
};

}  // namespace bas::protocol
