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

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "backvis/text.h"
#include "json.hpp"

namespace backvis {

std::string CompleteWithRetry(CompletionClient& client,
                              std::span<const ChatMessage> messages,
                              const RetryPolicy& policy) {
  const int attempts = std::max(1, policy.max_attempts);
  auto backoff = policy.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      return client.Complete(messages);
    } catch (const ServiceError& e) {
      last_error = e.what();
    }
    if (attempt < attempts && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(backoff.count()) * policy.backoff_multiplier));
    }
  }
  throw ServiceError("completion failed after " + std::to_string(attempts) +
                     " attempts: " + last_error);
}

ReplayCompletionClient::ReplayCompletionClient(
    std::map<std::string, std::string> responses)
    : responses_(std::move(responses)) {}

ReplayCompletionClient ReplayCompletionClient::FromFile(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open replay file '" + path.string() + "'");
  std::map<std::string, std::string> responses;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (Trim(raw).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object() || !j.contains("prompt") || !j["prompt"].is_string() ||
        !j.contains("response") || !j["response"].is_string()) {
      throw FormatError("replay record needs string 'prompt' and 'response'",
                        line);
    }
    responses[j["prompt"].get<std::string>()] = j["response"].get<std::string>();
  }
  return ReplayCompletionClient(std::move(responses));
}

std::string ReplayCompletionClient::Complete(
    std::span<const ChatMessage> messages) {
  if (messages.empty()) throw ServiceError("replay: empty request");
  auto it = responses_.find(messages.back().content);
  if (it == responses_.end()) {
    throw ServiceError("replay: no canned response for prompt");
  }
  return it->second;
}

void ParallelFor(std::size_t n, std::size_t max_in_flight,
                 const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(n, std::max<std::size_t>(1, max_in_flight));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (!failed.load()) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace backvis
