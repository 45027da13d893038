#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "groupsynth/error.hpp"
#include "groupsynth/genclient.hpp"

namespace groupsynth {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path
};

Endpoint split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::ConfigError, "base_url '" + base_url + "' has no scheme");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  ep.path = prefix + "/chat/completions";
  return ep;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

json HttpBackend::request_body(std::string_view model, double temperature, std::string_view prompt) {
  return {{"model", model},
          {"temperature", temperature},
          {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
          {"response_format", {{"type", "json_object"}}}};
}

std::string HttpBackend::request_batch(std::string_view prompt, double temperature, std::uint64_t /*seed*/) {
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorKind::AuthError, "environment variable " + cfg_.api_key_env + " is not set");
  }
  const Endpoint ep = split_url(cfg_.base_url);

  httplib::Client client(ep.origin);
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(us);
  client.set_read_timeout(us);
  client.set_write_timeout(us);
  client.set_bearer_token_auth(key);

  const std::string body = request_body(cfg_.model_name, temperature, prompt).dump();
  auto res = client.Post(ep.path, body, "application/json");
  if (!res) throw TransportError(0, "request to " + ep.origin + ep.path + " failed: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) {
    throw Error(ErrorKind::AuthError, "backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(res->status, "HTTP " + std::to_string(res->status) + " from " + ep.origin + ep.path);
  }

  json doc;
  try {
    doc = json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedResponseError("choices", 0, std::string("unexpected completion envelope: ") + e.what());
  }
}

}  // namespace groupsynth
