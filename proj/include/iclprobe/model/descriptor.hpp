// Backend descriptors as they appear in manifests and configs:
//   {"kind":"metadata"} | {"kind":"induction"}
//   {"kind":"tensor","path":"model.tnsa"}
//   {"kind":"http","url":"http://host:port","max_in_flight":4,"timeout_s":60}
#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "iclprobe/model/backend.hpp"
#include "iclprobe/model/http_backend.hpp"
#include "iclprobe/model/tensor_eval.hpp"

namespace iclprobe {

enum class BackendKind { InductionOracle, MetadataOracle, TensorEval, Http };

struct BackendDescriptor {
  BackendKind kind = BackendKind::MetadataOracle;
  std::string path;  // TensorEval
  std::string url;   // Http
  int max_in_flight = 4;
  double timeout_s = 60.0;
};

inline std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::InductionOracle: return "induction";
    case BackendKind::MetadataOracle: return "metadata";
    case BackendKind::TensorEval: return "tensor";
    case BackendKind::Http: return "http";
  }
  return "?";
}

/// Relative archive paths are resolved against `base_dir`.
template <typename Json>
BackendDescriptor descriptor_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  BackendDescriptor d;
  const auto kind = j.at("kind").template get<std::string>();
  if (kind == "metadata") {
    d.kind = BackendKind::MetadataOracle;
  } else if (kind == "induction") {
    d.kind = BackendKind::InductionOracle;
  } else if (kind == "tensor") {
    d.kind = BackendKind::TensorEval;
    if (!j.contains("path")) fail(ErrorCode::InvalidConfig, "tensor backend needs a path");
    std::filesystem::path p = j.at("path").template get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    d.path = p.lexically_normal().string();
  } else if (kind == "http") {
    d.kind = BackendKind::Http;
    if (!j.contains("url")) fail(ErrorCode::InvalidConfig, "http backend needs a url");
    d.url = j.at("url").template get<std::string>();
    d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    d.timeout_s = j.value("timeout_s", d.timeout_s);
  } else {
    fail(ErrorCode::InvalidConfig, "unknown backend kind " + kind);
  }
  return d;
}

inline nlohmann::ordered_json descriptor_to_json(const BackendDescriptor& d) {
  nlohmann::ordered_json j{{"kind", std::string(backend_kind_name(d.kind))}};
  if (d.kind == BackendKind::TensorEval) j["path"] = d.path;
  if (d.kind == BackendKind::Http) {
    j["url"] = d.url;
    j["max_in_flight"] = d.max_in_flight;
    j["timeout_s"] = d.timeout_s;
  }
  return j;
}

inline std::unique_ptr<Backend> make_backend(const BackendDescriptor& d, std::size_t vocab_size) {
  switch (d.kind) {
    case BackendKind::MetadataOracle: return std::make_unique<MetadataOracle>(vocab_size);
    case BackendKind::InductionOracle: return std::make_unique<InductionOracle>(vocab_size);
    case BackendKind::TensorEval: {
      auto backend = std::make_unique<TensorEvalBackend>(load_archive(d.path));
      if (vocab_size && backend->vocab_size() != vocab_size) {
        fail(ErrorCode::VocabMismatch, d.path + " has " + std::to_string(backend->vocab_size()) +
                                           " rows, vocabulary has " + std::to_string(vocab_size));
      }
      return backend;
    }
    case BackendKind::Http:
      return std::make_unique<HttpBackend>(HttpOptions{d.url, d.max_in_flight, d.timeout_s, vocab_size});
  }
  fail(ErrorCode::InvalidConfig, "unknown backend kind");
}

}  // namespace iclprobe
