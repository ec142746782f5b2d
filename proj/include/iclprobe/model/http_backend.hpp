// Client for the HTTP score protocol.
//
//   POST {base}/v1/score
//   request  {"prompt_tokens":[...],"top_k":k,"want_hidden":b}
//   response {"topk":[[id,logprob],...],"hidden_last":[...]|null,"model_dim":d|null}
#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <set>
#include <string>

// Eigen first: <resolv.h>, pulled in by httplib, defines a _res macro.
#include <Eigen/Core>

#include "httplib.h"
#include "json.hpp"

#include "iclprobe/model/backend.hpp"

namespace iclprobe {

struct HttpOptions {
  std::string base_url;
  int max_in_flight = 4;
  double timeout_s = 60.0;
  std::size_t vocab_size = 0;  // 0 disables the id range check
};

/// Validates a protocol response against the request that produced it.
inline ScoreResult parse_score_response(const std::string& body, const ScoreRequest& req, std::size_t vocab_size) {
  auto violation = [](const std::string& why) { fail(ErrorCode::ProtocolViolation, why); };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    violation(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("topk") || !j["topk"].is_array()) violation("response lacks a topk array");
  ScoreResult res;
  for (const auto& entry : j["topk"]) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer()) violation("malformed topk entry");
    const auto id = entry[0].get<std::int64_t>();
    if (id < 0 || (vocab_size && static_cast<std::size_t>(id) >= vocab_size)) {
      fail(ErrorCode::VocabMismatch, "backend returned token " + std::to_string(id) + " outside vocabulary of size " +
                                         std::to_string(vocab_size));
    }
    double lp = kNegInf;
    if (!entry[1].is_null()) {
      if (!entry[1].is_number()) violation("log-probability must be a number");
      lp = entry[1].get<double>();
    }
    if (std::isnan(lp) || lp > 1e-6) violation("log-probability " + format_double(lp) + " is not <= 0");
    res.topk.emplace_back(static_cast<TokenId>(id), std::min(lp, 0.0));
  }
  if (res.topk.empty()) violation("topk is empty");
  if (res.topk.size() > static_cast<std::size_t>(req.top_k)) violation("topk is longer than requested");
  std::set<TokenId> seen;
  for (std::size_t i = 0; i < res.topk.size(); ++i) {
    if (i && res.topk[i].second > res.topk[i - 1].second) violation("topk is not sorted by descending log-probability");
    if (!seen.insert(res.topk[i].first).second) violation("topk repeats a token");
  }
  const auto hidden = j.value("hidden_last", nlohmann::json());
  if (!hidden.is_null()) {
    if (!hidden.is_array()) violation("hidden_last must be an array or null");
    std::vector<double> h;
    for (const auto& v : hidden) {
      if (!v.is_number()) violation("hidden_last holds a non-number");
      h.push_back(v.get<double>());
    }
    const auto dim = j.value("model_dim", nlohmann::json());
    if (dim.is_number_integer() && dim.get<std::size_t>() != h.size()) {
      violation("hidden_last length differs from model_dim");
    }
    if (req.want_hidden) res.hidden_last = std::move(h);
  }
  return res;
}

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpOptions opt)
      : opt_(std::move(opt)), slots_(std::max(1, opt_.max_in_flight)) {
    const auto scheme_end = opt_.base_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = opt_.base_url.find('/', host_start);
    origin_ = opt_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : opt_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    if (origin_.size() <= host_start) fail(ErrorCode::InvalidConfig, "http backend needs a base url");
  }

  ScoreResult score(const ScoreRequest& req) const override {
    check_request(req, opt_.vocab_size);
    const nlohmann::json body = {
        {"prompt_tokens", req.prompt}, {"top_k", req.top_k}, {"want_hidden", req.want_hidden}};
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};

    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration<double>(opt_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto response = client.Post(prefix_ + "/v1/score", body.dump(), "application/json");
    if (!response) {
      fail(ErrorCode::BackendUnreachable, opt_.base_url + ": " + httplib::to_string(response.error()));
    }
    if (response->status != 200) {
      std::string message = response->body;
      try {
        message = nlohmann::json::parse(response->body).at("error").get<std::string>();
      } catch (const nlohmann::json::exception&) {
      }
      fail(ErrorCode::BackendError, "status " + std::to_string(response->status) + ": " + message);
    }
    return parse_score_response(response->body, req, opt_.vocab_size);
  }

  std::string kind() const override { return "http"; }

 private:
  HttpOptions opt_;
  std::string origin_;
  std::string prefix_;
  mutable std::counting_semaphore<> slots_;
};

}  // namespace iclprobe
