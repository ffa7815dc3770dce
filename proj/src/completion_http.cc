// Copyright 2026 The backvis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "backvis/completion.h"
#include "httplib.h"
#include "json.hpp"

namespace backvis {

HttpCompletionClient::HttpCompletionClient(HttpClientConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) throw InvalidArgument("client base URL is empty");
  if (config_.model.empty()) throw InvalidArgument("client model is empty");
}

std::string HttpCompletionClient::Complete(
    std::span<const ChatMessage> messages) {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  body["max_tokens"] = config_.max_tokens;
  nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
  for (const ChatMessage& m : messages) {
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);

  httplib::Client cli(config_.base_url);
  cli.set_connection_timeout(config_.timeout);
  cli.set_read_timeout(config_.timeout);
  cli.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  auto res = cli.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    std::string what = "request to " + config_.base_url + " failed: " +
                       httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout ||
        err == httplib::Error::Read) {
      throw ServiceTimeout(what);
    }
    throw ServiceError(what);
  }
  if (res->status != 200) {
    throw ServiceError("completion endpoint returned HTTP " +
                       std::to_string(res->status));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(std::string("malformed completion response: ") + e.what());
  }
}

}  // namespace backvis
