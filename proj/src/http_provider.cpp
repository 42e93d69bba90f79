#include "snaplabel/detection.hpp"
#include "snaplabel/error.hpp"

#include <regex>

// After Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with it.
#include "httplib.h"

namespace snaplabel {

HttpProvider::HttpProvider(const std::string& endpoint, HttpOptions options)
    : options_(options) {
  static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint, m, kUrl))
    throw ConfigError("detector endpoint must look like http://host[:port]/path, got '" + endpoint + "'");
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
  if (options_.max_concurrency < 1) options_.max_concurrency = 1;
}

std::vector<Detection> HttpProvider::detect(const DetectionRequest& request) {
  const std::string body = request_to_json(request, options_.inline_images).dump();
  httplib::Client client(base_);
  const auto secs = static_cast<time_t>(options_.timeout_s);
  const auto usecs = static_cast<time_t>((options_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(path_, body, "application/json");
  if (!res)
    throw TransportError("POST " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    std::string detail = res->body.substr(0, 200);
    throw TransportError("POST " + base_ + path_ + " returned HTTP " + std::to_string(res->status) +
                         (detail.empty() ? "" : ": " + detail));
  }
  return parse_response(res->body, request.view_id, request.width, request.height);
}

}  // namespace snaplabel
