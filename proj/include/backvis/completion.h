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

// Chat-style text generation clients: ordered (role, content) messages in,
// text out. Used for first-word NLQ rewriting and for ICL predictions.

#ifndef BACKVIS_COMPLETION_H_
#define BACKVIS_COMPLETION_H_

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "backvis/error.h"

namespace backvis {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

class ServiceError : public Error {
 public:
  using Error::Error;
};

class ServiceTimeout : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

// Implementations must be safe to call from several threads at once.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  // Throws ServiceError (or ServiceTimeout) on failure.
  virtual std::string Complete(std::span<const ChatMessage> messages) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
};

// Retries ServiceError with exponential backoff; after the last attempt
// throws ServiceError carrying the final cause.
std::string CompleteWithRetry(CompletionClient& client,
                              std::span<const ChatMessage> messages,
                              const RetryPolicy& policy);

struct HttpClientConfig {
  std::string base_url;  // e.g. "https://api.openai.com"
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  double temperature = 0.0;
  int max_tokens = 200;
  std::chrono::seconds timeout{60};
};

// OpenAI-compatible chat completions endpoint.
class HttpCompletionClient : public CompletionClient {
 public:
  explicit HttpCompletionClient(HttpClientConfig config);
  std::string Complete(std::span<const ChatMessage> messages) override;

  const HttpClientConfig& config() const { return config_; }

 private:
  HttpClientConfig config_;
};

// Offline fixture mode: replays canned responses keyed by the content of
// the final message. File format: one {"prompt": ..., "response": ...}
// object per line.
class ReplayCompletionClient : public CompletionClient {
 public:
  explicit ReplayCompletionClient(std::map<std::string, std::string> responses);
  static ReplayCompletionClient FromFile(const std::filesystem::path& path);

  std::string Complete(std::span<const ChatMessage> messages) override;

 private:
  std::map<std::string, std::string> responses_;
};

class FunctionCompletionClient : public CompletionClient {
 public:
  using Fn = std::function<std::string(std::span<const ChatMessage>)>;
  explicit FunctionCompletionClient(Fn fn) : fn_(std::move(fn)) {}
  std::string Complete(std::span<const ChatMessage> messages) override {
    return fn_(messages);
  }

 private:
  Fn fn_;
};

// Runs fn(0..n-1) on at most `max_in_flight` threads. The first exception
// thrown by any call is rethrown after all workers stop.
void ParallelFor(std::size_t n, std::size_t max_in_flight,
                 const std::function<void(std::size_t)>& fn);

}  // namespace backvis

#endif  // BACKVIS_COMPLETION_H_
