#include <cstdlib>
#include <string>

#include "adgen/metrics.hpp"
#include "httplib.h"

namespace adgen::metrics {

HttpJudge::HttpJudge(std::string url, std::string token) : url_(std::move(url)), token_(std::move(token)) {
  if (url_.rfind("http://", 0) != 0) {
    throw ValidationError("judge: only http:// endpoints are supported, got '" + url_ + "'");
  }
}

HttpJudge HttpJudge::from_environment() {
  const char* url = std::getenv("ADGEN_JUDGE_URL");
  const char* token = std::getenv("ADGEN_JUDGE_TOKEN");
  if (!url || !*url) throw ValidationError("judge: ADGEN_JUDGE_URL is not set");
  return HttpJudge(url, token ? token : "");
}

int HttpJudge::score(std::string_view prediction, std::string_view reference) {
  const std::size_t host_start = 7;
  const std::size_t slash = url_.find('/', host_start);
  const std::string origin = url_.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : url_.substr(slash);
  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  std::string body = "rubric: ";
  body += kJudgeRubric;
  body += "\nprediction: ";
  body += prediction;
  body += "\nreference: ";
  body += reference;
  body += "\n";
  const auto res = client.Post(path, headers, body, "text/plain");
  if (!res) throw JudgeUnavailableError("judge: request to " + url_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw JudgeUnavailableError("judge: " + url_ + " answered HTTP " + std::to_string(res->status));
  }
  const std::string& text = res->body;
  const std::size_t b = text.find_first_not_of(" \t\r\n");
  const std::size_t e = text.find_last_not_of(" \t\r\n");
  if (b == std::string::npos || e != b || text[b] < '1' || text[b] > '5') {
    throw JudgeUnavailableError("judge: response is not a score between 1 and 5");
  }
  return text[b] - '0';
}

}  // namespace adgen::metrics
