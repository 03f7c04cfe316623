#include "prism/backends/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/text.hpp"

namespace prism::backends {

CassetteMode cassette_mode_from_string(const std::string& s) {
  if (s == "off" || s.empty()) return CassetteMode::off;
  if (s == "record") return CassetteMode::record;
  if (s == "replay") return CassetteMode::replay;
  throw ConfigError("cassette mode must be off|record|replay, got '" + s + "'");
}

void RemoteConfig::apply_env(const std::string& role) {
  if (const char* v = std::getenv("PRISM_API_BASE")) api_base = v;
  if (const char* v = std::getenv("PRISM_API_KEY")) api_key = v;
  const char* model_var = role == "vlm" ? "PRISM_MODEL_VLM" : "PRISM_MODEL_LLM";
  if (const char* v = std::getenv(model_var)) model = v;
}

Cassette::Cassette(std::string path, CassetteMode mode) : path_(std::move(path)), mode_(mode) {
  if (mode_ == CassetteMode::off) return;
  std::ifstream in(path_);
  if (!in) {
    if (mode_ == CassetteMode::replay) throw BackendUnavailable("cassette not found: " + path_);
    return;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("request_hash") || !j.contains("response"))
      throw ProtocolError("bad cassette line in " + path_);
    entries_[j["request_hash"].get<std::string>()] = j["response"];
  }
}

std::string Cassette::hash(const nlohmann::json& request) { return util::sha256_hex(request.dump()); }

const nlohmann::json* Cassette::find(const std::string& request_hash) const {
  auto it = entries_.find(request_hash);
  return it == entries_.end() ? nullptr : &it->second;
}

void Cassette::append(const std::string& request_hash, const nlohmann::json& request, const nlohmann::json& response) {
  std::lock_guard lock(mu_);
  entries_[request_hash] = response;
  std::ofstream out(path_, std::ios::app);
  out << nlohmann::json{{"request_hash", request_hash}, {"request", request}, {"response", response}}.dump() << "\n";
}

ChatClient::ChatClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (cfg_.cassette != CassetteMode::off) {
    if (cfg_.cassette_path.empty()) throw ConfigError("cassette mode set without a cassette path");
    cassette_ = std::make_unique<Cassette>(cfg_.cassette_path, cfg_.cassette);
  }
}

nlohmann::json ChatClient::base_request(nlohmann::json messages, int max_tokens) const {
  return {{"model", cfg_.model},
          {"messages", std::move(messages)},
          {"temperature", cfg_.temperature},
          {"max_tokens", max_tokens},
          {"logprobs", false},
          {"top_logprobs", 0}};
}

nlohmann::json ChatClient::post(const nlohmann::json& request) {
  const std::string h = Cassette::hash(request);
  if (cassette_) {
    if (const auto* hit = cassette_->find(h)) return *hit;
    if (cassette_->mode() == CassetteMode::replay)
      throw BackendUnavailable("no cassette entry for request " + h.substr(0, 12));
  }
  auto response = send(request);
  if (cassette_ && cassette_->mode() == CassetteMode::record) cassette_->append(h, request, response);
  return response;
}

nlohmann::json ChatClient::send(const nlohmann::json& request) {
  httplib::Client cli(cfg_.api_base);
  cli.set_connection_timeout(cfg_.timeout_s);
  cli.set_read_timeout(cfg_.timeout_s);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  const std::string body = request.dump();
  std::string last_error;
  int delay = cfg_.backoff_ms;
  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay *= 2;
    }
    ++attempts_;
    auto res = cli.Post("/v1/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw ProtocolError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw ProtocolError("response is not JSON");
    return j;
  }
  throw BackendUnavailable(cfg_.api_base + " unreachable after " + std::to_string(cfg_.max_attempts) +
                           " attempts (" + last_error + ")");
}

std::string message_content(const nlohmann::json& r) {
  try {
    return r.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed completion response: ") + e.what());
  }
}

std::vector<double> token_logprob_list(const nlohmann::json& r) {
  std::vector<double> out;
  try {
    for (const auto& t : r.at("choices").at(0).at("logprobs").at("content")) out.push_back(t.at("logprob").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed logprob response: ") + e.what());
  }
  for (double v : out)
    if (!(v <= 0.0)) throw ProtocolError("server reported a log-probability above 0");
  return out;
}

RemotePerception::RemotePerception(std::shared_ptr<ChatClient> client, std::string vqa_template)
    : client_(std::move(client)), vqa_template_(std::move(vqa_template)) {}

std::string RemotePerception::ask(const std::string& text, const Observation& obs) {
  nlohmann::json content;
  if (const auto* img = dynamic_cast<const ImageView*>(obs.raw_view.get())) {
    content = nlohmann::json::array({{{"type", "image_url"}, {"image_url", {{"url", img->data_url()}}}},
                                     {{"type", "text"}, {"text", text}}});
  } else {
    content = text;
  }
  auto req = client_->base_request(nlohmann::json::array({{{"role", "user"}, {"content", content}}}),
                                   client_->config().max_tokens);
  return message_content(client_->post(req));
}

std::string RemotePerception::describe(const std::string& prompt, const Observation& obs) { return ask(prompt, obs); }

std::string RemotePerception::answer(const Question& q, const Observation& obs) {
  return ask(util::replace_all(vqa_template_, "{q}", q.text), obs);
}

std::string RemoteReasoning::complete(const std::string& prompt) {
  auto req = client_->base_request(nlohmann::json::array({{{"role", "user"}, {"content", prompt}}}),
                                   client_->config().max_tokens);
  return message_content(client_->post(req));
}

std::vector<double> RemoteScorer::token_logprobs(const std::string& context, const std::string& continuation) {
  auto req = client_->base_request(nlohmann::json::array({{{"role", "user"}, {"content", context}},
                                                          {{"role", "assistant"}, {"content", continuation}}}),
                                   1);
  req["logprobs"] = true;
  req["echo"] = true;
  return token_logprob_list(client_->post(req));
}

}  // namespace prism::backends
