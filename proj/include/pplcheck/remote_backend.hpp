#pragma once

// Client for the token log-probability wire protocol:
//
//   POST /v1/logprobs  {"model", "mode": "causal"|"masked", "context", "target"}
//     -> {"tokens": [..], "logprobs": [..], "token_count": n}
//   GET  /v1/models    -> {"models": [{"id", "modes", "context_window"}, ...]}
//   GET  /healthz      -> 200 when ready, 503 while loading
//
// Errors come back as 4xx/5xx with {"error": "..."}.

#include <algorithm>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "pplcheck/backend.hpp"
#include "pplcheck/error.hpp"

namespace pplcheck {

struct RemoteOptions {
  std::string base_url;  // e.g. http://127.0.0.1:8000
  std::string model;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{120000};
};

struct ServedModel {
  std::string id;
  std::vector<ScoringMode> modes;
  std::size_t context_window = 0;
};

class RemoteBackend final : public LmBackend {
 public:
  static constexpr std::ptrdiff_t kMaxInFlight = 1024;

  explicit RemoteBackend(RemoteOptions opts)
      : opts_(std::move(opts)),
        slots_(std::make_unique<std::counting_semaphore<kMaxInFlight>>(static_cast<std::ptrdiff_t>(
            std::clamp<std::size_t>(opts_.max_in_flight, 1, kMaxInFlight)))) {
    if (opts_.base_url.empty()) fail(ErrorKind::Validation, "remote backend needs a base URL");
    if (opts_.max_attempts < 1) fail(ErrorKind::Validation, "max_attempts must be >= 1");
  }

  std::string backend_id() const override { return "remote"; }
  std::string model_name() const override { return opts_.model; }
  // Capability is checked server-side (422 -> UnsupportedMode).
  bool supports(ScoringMode) const override { return true; }
  std::string tokenizer_note() const override {
    return "server tokenizer; context and target tokenized separately; single space between "
           "non-empty context and target; context truncated from the left";
  }

  const RemoteOptions& options() const { return opts_; }

  TokenLogProbs score(ScoringMode mode, std::string_view context,
                      std::string_view target) const override {
    const nlohmann::json body = {{"model", opts_.model},
                                 {"mode", to_string(mode)},
                                 {"context", context},
                                 {"target", target}};
    const auto res = request("POST", "/v1/logprobs", body.dump());
    check_status(res);
    try {
      const auto j = nlohmann::json::parse(res.body);
      auto tokens = j.at("tokens").get<std::vector<std::string>>();
      auto logprobs = j.at("logprobs").get<std::vector<double>>();
      const auto count = j.at("token_count").get<std::size_t>();
      if (count != tokens.size() || count != logprobs.size()) {
        fail(ErrorKind::Backend, "malformed response: token_count does not match tokens/logprobs");
      }
      try {
        return TokenLogProbs(std::move(tokens), std::move(logprobs));
      } catch (const Error& e) {
        fail(ErrorKind::Backend, std::string("malformed response: ") + e.what());
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Backend, std::string("malformed response: ") + e.what());
    }
  }

  std::vector<ServedModel> list_models() const {
    const auto res = request("GET", "/v1/models", {});
    check_status(res);
    std::vector<ServedModel> out;
    try {
      const auto body = nlohmann::json::parse(res.body);
      for (const auto& m : body.at("models")) {
        ServedModel sm;
        sm.id = m.at("id").get<std::string>();
        for (const auto& mode : m.value("modes", nlohmann::json::array())) {
          sm.modes.push_back(parse_scoring_mode(mode.get<std::string>()));
        }
        sm.context_window = m.value("context_window", std::size_t{0});
        out.push_back(std::move(sm));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Backend, std::string("malformed /v1/models response: ") + e.what());
    }
    return out;
  }

  bool healthy() const {
    httplib::Client cli = make_client();
    const auto res = cli.Get("/healthz");
    return res && res->status == 200;
  }

 private:
  struct Response {
    int status = 0;
    std::string body;
  };

  class SlotGuard {
   public:
    explicit SlotGuard(std::counting_semaphore<kMaxInFlight>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

   private:
    std::counting_semaphore<kMaxInFlight>& sem_;
  };

  httplib::Client make_client() const {
    httplib::Client cli(opts_.base_url);
    cli.set_connection_timeout(opts_.connect_timeout);
    cli.set_read_timeout(opts_.read_timeout);
    cli.set_write_timeout(opts_.read_timeout);
    return cli;
  }

  // Transport failures and 503 are retried with exponential backoff; other
  // statuses are returned as-is.
  Response request(const std::string& method, const std::string& path, const std::string& body) const {
    SlotGuard guard(*slots_);
    std::string last_error;
    auto delay = opts_.backoff;
    for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
      httplib::Client cli = make_client();
      auto res = method == "POST" ? cli.Post(path, body, "application/json") : cli.Get(path);
      if (res && res->status != 503) return {res->status, res->body};
      last_error = res ? "HTTP 503 (service loading)" : httplib::to_string(res.error());
      if (attempt < opts_.max_attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
    throw Error(ErrorKind::BackendUnavailable,
                "backend " + opts_.base_url + " unavailable after " + std::to_string(opts_.max_attempts) +
                    " attempt(s): " + last_error + "; retry after " + std::to_string(delay.count()) + " ms",
                delay);
  }

  static std::string error_message(const Response& res) {
    try {
      const auto j = nlohmann::json::parse(res.body);
      if (j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    return res.body;
  }

  static void check_status(const Response& res) {
    if (res.status >= 200 && res.status < 300) return;
    const std::string msg = "HTTP " + std::to_string(res.status) + ": " + error_message(res);
    switch (res.status) {
      case 400:
      case 404:
      case 413: fail(ErrorKind::Validation, msg);
      case 422: fail(ErrorKind::UnsupportedMode, msg);
      default: fail(ErrorKind::Backend, msg);
    }
  }

  RemoteOptions opts_;
  std::unique_ptr<std::counting_semaphore<kMaxInFlight>> slots_;
};

}  // namespace pplcheck
