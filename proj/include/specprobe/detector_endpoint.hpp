#pragma once

#include <cmath>
#include <string>

#include "specprobe/detector.hpp"
#include "specprobe/http_provider.hpp"

namespace specprobe {

inline constexpr double kProbSumTolerance = 1e-6;

/// Validates a classifier-endpoint response body and turns it into a
/// prediction whose confidence is the probability of the returned label.
inline Prediction parse_endpoint_response(const std::string& id, std::string_view body, const std::string& backend) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::EndpointSchemaError, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("label") || !j["label"].is_string() || !j.contains("probs") ||
      !j["probs"].is_object())
    throw Error(ErrorKind::EndpointSchemaError, "response must be {\"label\": string, \"probs\": object}",
                {{"body", std::string(body.substr(0, 300))}});
  DefectType label;
  const auto label_text = j["label"].get<std::string>();
  if (label_text == "CLEAN") label = DefectType::Clean;
  else if (label_text == "LV") label = DefectType::LV;
  else if (label_text == "US") label = DefectType::US;
  else if (label_text == "SF") label = DefectType::SF;
  else throw Error(ErrorKind::EndpointSchemaError, "unknown label '" + label_text + "'");

  const auto& probs = j["probs"];
  if (probs.size() != kLabels.size())
    throw Error(ErrorKind::EndpointSchemaError, fmt::format("probs must have 4 entries, got {}", probs.size()));
  double sum = 0.0;
  for (auto l : kLabels) {
    const std::string key(to_string(l));
    if (!probs.contains(key) || !probs[key].is_number())
      throw Error(ErrorKind::EndpointSchemaError, "probs missing class " + key);
    const double p = probs[key].get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::EndpointSchemaError, "probability out of [0,1] for " + key);
    sum += p;
  }
  if (std::fabs(sum - 1.0) > kProbSumTolerance)
    throw Error(ErrorKind::EndpointSchemaError, fmt::format("probabilities sum to {:.9f}", sum));
  return {id, label, probs[std::string(to_string(label))].get<double>(), backend, std::string(body)};
}

/// Client for a fine-tuned classifier served at POST <base>/classify.
class EndpointBackend : public DetectorBackend {
 public:
  explicit EndpointBackend(std::string base_url, std::string name = "classifier-endpoint")
      : url_(parse_url(base_url)), name_(std::move(name)) {
    if (url_.path.empty() || url_.path.back() != '/') url_.path += '/';
    url_.path += "classify";
  }

  std::string name() const override { return name_; }

  Prediction classify(const std::string& id, std::string_view description) override {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    const Json body{{"text", description}};
    auto res = client.Post(url_.path, body.dump(), "application/json");
    if (!res)
      throw Error(ErrorKind::ProviderError, "classifier endpoint unreachable: " + httplib::to_string(res.error()),
                  {{"retryable", true}});
    if (res->status != 200)
      throw Error(ErrorKind::ProviderError, fmt::format("classifier endpoint returned HTTP {}", res->status),
                  {{"status", res->status}, {"retryable", res->status == 429 || res->status >= 500}});
    return parse_endpoint_response(id, res->body, name_);
  }

 private:
  ParsedUrl url_;
  std::string name_;
};

}  // namespace specprobe
