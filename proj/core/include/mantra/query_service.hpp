#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mantra/datasets.hpp"
#include "mantra/training.hpp"

namespace mantra {

/// Display color of a label; depends only on the normalized name.
std::array<std::uint8_t, 3> label_color(std::string_view label);

std::string base64_encode(const void* data, std::size_t size);

struct HttpResponse {
  int status = 200;
  std::string body;  // always JSON
};

/// Request handlers over an immutable model snapshot and a set of scenes.
/// Transport-free so it can be exercised directly; `HttpServer` binds it to
/// sockets.
class QueryService {
 public:
  QueryService() = default;
  QueryService(std::shared_ptr<const ModelState> state, const SceneManifest& manifest);

  bool loaded() const noexcept { return state_ != nullptr; }
  std::string model_version() const;

  HttpResponse health() const;
  HttpResponse list_scenes() const;
  HttpResponse scene(std::string_view scene_id) const;
  HttpResponse query(std::string_view request_body) const;

  std::uint64_t requests_served() const noexcept { return requests_.load(); }
  void count_request() const noexcept { requests_.fetch_add(1); }

 private:
  std::shared_ptr<const ModelState> state_;
  std::vector<Scene> scenes_;  // manifest order
  std::map<std::string, std::size_t, std::less<>> by_id_;
  mutable std::atomic<std::uint64_t> requests_{0};
};

/// Bind address from MANTRA_BIND, default 127.0.0.1.
std::string default_bind_address();

class HttpServer {
 public:
  explicit HttpServer(const QueryService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mantra
