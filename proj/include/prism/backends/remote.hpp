#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/backends/model.hpp"

namespace prism::backends {

enum class CassetteMode { off, record, replay };

CassetteMode cassette_mode_from_string(const std::string& s);

struct RemoteConfig {
  std::string api_base = "http://127.0.0.1:8000";
  std::string api_key;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
  int max_attempts = 3;
  int backoff_ms = 200;  // doubled after each failed attempt
  int timeout_s = 60;
  std::string cassette_path;
  CassetteMode cassette = CassetteMode::off;

  // PRISM_API_BASE, PRISM_API_KEY and PRISM_MODEL_VLM / PRISM_MODEL_LLM
  // override the fields when set. role is "vlm" or "llm".
  void apply_env(const std::string& role);
};

// Image payload for real perception servers. Anything else in raw_view is
// ignored by the remote backend: only the prompt text is sent.
class ImageView : public RawView {
 public:
  explicit ImageView(std::string data_url) : data_url_(std::move(data_url)) {}
  const std::string& data_url() const { return data_url_; }

 private:
  std::string data_url_;
};

// JSONL of {request_hash, request, response}; the hash is the SHA-256 of the
// request's compact JSON dump (keys sorted).
class Cassette {
 public:
  Cassette(std::string path, CassetteMode mode);
  static std::string hash(const nlohmann::json& request);
  const nlohmann::json* find(const std::string& request_hash) const;
  void append(const std::string& request_hash, const nlohmann::json& request, const nlohmann::json& response);
  CassetteMode mode() const { return mode_; }

 private:
  std::string path_;
  CassetteMode mode_;
  std::map<std::string, nlohmann::json> entries_;
  std::mutex mu_;
};

// POST /v1/chat/completions with retry, backoff and optional cassette.
class ChatClient {
 public:
  explicit ChatClient(RemoteConfig cfg);
  nlohmann::json post(const nlohmann::json& request);
  const RemoteConfig& config() const { return cfg_; }
  nlohmann::json base_request(nlohmann::json messages, int max_tokens) const;
  int attempts_made() const { return attempts_; }

 private:
  nlohmann::json send(const nlohmann::json& request);

  RemoteConfig cfg_;
  std::unique_ptr<Cassette> cassette_;
  int attempts_ = 0;
};

// choices[0].message.content, or ProtocolError.
std::string message_content(const nlohmann::json& response);
// choices[0].logprobs.content[*].logprob, or ProtocolError.
std::vector<double> token_logprob_list(const nlohmann::json& response);

class RemotePerception : public PerceptionModel {
 public:
  // vqa_template carries a {q} slot.
  RemotePerception(std::shared_ptr<ChatClient> client, std::string vqa_template);
  std::string describe(const std::string& prompt, const Observation& obs) override;
  std::string answer(const Question& q, const Observation& obs) override;
  std::string id() const override { return "remote:" + client_->config().model; }

 private:
  std::string ask(const std::string& text, const Observation& obs);
  std::shared_ptr<ChatClient> client_;
  std::string vqa_template_;
};

class RemoteReasoning : public ReasoningModel {
 public:
  explicit RemoteReasoning(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
  std::string complete(const std::string& prompt) override;
  std::string id() const override { return "remote:" + client_->config().model; }

 private:
  std::shared_ptr<ChatClient> client_;
};

// Scores a continuation by echoing it as the assistant turn and reading the
// per-token log-probabilities the server reports for it.
class RemoteScorer : public ScoringModel {
 public:
  explicit RemoteScorer(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
  std::vector<double> token_logprobs(const std::string& context, const std::string& continuation) override;
  std::string id() const override { return "remote:" + client_->config().model; }

 private:
  std::shared_ptr<ChatClient> client_;
};

}  // namespace prism::backends
