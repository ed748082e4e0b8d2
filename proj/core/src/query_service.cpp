#include "mantra/query_service.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "mantra/errors.hpp"

namespace mantra {

std::array<std::uint8_t, 3> label_color(std::string_view label) {
  const std::uint64_t h = stable_hash(normalize_label(label));
  // HSV with hue from the hash; saturation and value vary a little so that
  // neighbouring hues stay distinguishable.
  const double hue = static_cast<double>(h % 3600) / 10.0;
  const double s = 0.55 + 0.35 * static_cast<double>((h >> 16) % 100) / 99.0;
  const double v = 0.75 + 0.2 * static_cast<double>((h >> 32) % 100) / 99.0;
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(hue / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue / 60.0)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto q = [&](double u) { return static_cast<std::uint8_t>(std::lround((u + m) * 255.0)); };
  return {q(r), q(g), q(b)};
}

std::string base64_encode(const void* data, std::size_t size) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const auto* p = static_cast<const unsigned char*>(data);
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < size; i += 3) {
    const std::uint32_t n = (p[i] << 16) | (p[i + 1] << 8) | p[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < size) {
    std::uint32_t n = p[i] << 16;
    if (i + 1 < size) n |= p[i + 1] << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += i + 1 < size ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

namespace {

HttpResponse json_error(int status, const std::string& message) {
  return {status, nlohmann::json{{"error", message}}.dump()};
}

std::string encode_columns(const Matrix& points, int first) {
  std::vector<float> buf;
  buf.reserve(static_cast<std::size_t>(points.rows()) * 3);
  for (Eigen::Index r = 0; r < points.rows(); ++r)
    for (int c = first; c < first + 3; ++c) buf.push_back(static_cast<float>(points(r, c)));
  return base64_encode(buf.data(), buf.size() * sizeof(float));
}

}  // namespace

QueryService::QueryService(std::shared_ptr<const ModelState> state, const SceneManifest& manifest)
    : state_(std::move(state)) {
  for (const auto& e : manifest.entries) {
    Scene s = read_ply(manifest.resolve(e));
    s.scene_id = e.scene_id;
    s.source_id = e.source_id;
    by_id_.emplace(e.scene_id, scenes_.size());
    scenes_.push_back(std::move(s));
  }
}

std::string QueryService::model_version() const {
  if (!state_) return "";
  return "v" + std::to_string(kCheckpointVersion) + "-epoch" + std::to_string(state_->epoch) + "-" +
         to_string(state_->encoder->spec().kind);
}

HttpResponse QueryService::health() const {
  if (!state_) return {503, nlohmann::json{{"status", "loading"}}.dump()};
  return {200, nlohmann::json{{"status", "ok"}, {"model_version", model_version()}}.dump()};
}

HttpResponse QueryService::list_scenes() const {
  auto list = nlohmann::json::array();
  for (const auto& s : scenes_)
    list.push_back({{"scene_id", s.scene_id}, {"source_id", s.source_id}, {"point_count", s.size()}});
  return {200, list.dump()};
}

HttpResponse QueryService::scene(std::string_view scene_id) const {
  auto it = by_id_.find(scene_id);
  if (it == by_id_.end()) return json_error(404, "unknown scene " + std::string(scene_id));
  const Scene& s = scenes_[it->second];
  nlohmann::json body{{"scene_id", s.scene_id},
                      {"source_id", s.source_id},
                      {"point_count", s.size()},
                      {"encoding", "base64-f32le"},
                      {"xyz", encode_columns(s.points, 0)},
                      {"rgb", encode_columns(s.points, 3)}};
  return {200, body.dump()};
}

HttpResponse QueryService::query(std::string_view request_body) const {
  if (!state_) return json_error(503, "model not loaded");
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(request_body);
  } catch (const nlohmann::json::exception& e) {
    return json_error(422, std::string("malformed request: ") + e.what());
  }
  if (!req.is_object() || !req.contains("scene_id") || !req["scene_id"].is_string())
    return json_error(422, "request needs a string scene_id");
  const std::string scene_id = req["scene_id"].get<std::string>();
  auto it = by_id_.find(scene_id);
  if (it == by_id_.end()) return json_error(404, "unknown scene " + scene_id);

  if (!req.contains("labels") || !req["labels"].is_array() || req["labels"].empty())
    return json_error(422, "labels must be a nonempty array of strings");
  std::vector<LabelName> labels;
  try {
    for (const auto& l : req["labels"]) {
      if (!l.is_string()) return json_error(422, "labels must be strings");
      labels.emplace_back(l.get<std::string>());
    }
  } catch (const Error& e) {
    return json_error(422, e.what());
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const Segmentation seg =
        segment(state_->model, *state_->encoder, scenes_[it->second], labels, state_->config.model.temperature);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    auto names = nlohmann::json::array();
    auto colors = nlohmann::json::array();
    for (const auto& l : labels) {
      names.push_back(l.text());
      const auto c = label_color(l.text());
      colors.push_back({c[0], c[1], c[2]});
    }
    nlohmann::json body{{"scene_id", scene_id},
                        {"labels", names},
                        {"assignments", seg.assignments},
                        {"colors", colors},
                        {"timing_ms", ms}};
    return {200, body.dump()};
  } catch (const std::exception& e) {
    return json_error(500, e.what());
  }
}

std::string default_bind_address() {
  const char* env = std::getenv("MANTRA_BIND");
  return env && *env ? std::string(env) : std::string("127.0.0.1");
}

struct HttpServer::Impl {
  const QueryService& service;
  httplib::Server server;
  std::string host;
  explicit Impl(const QueryService& s) : service(s) {}
};

HttpServer::HttpServer(const QueryService& service) : impl_(std::make_unique<Impl>(service)) {
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  auto& svc = impl_->service;
  impl_->server.Get("/health", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    svc.count_request();
    reply(res, svc.health());
  });
  impl_->server.Get("/scenes", [&svc, reply](const httplib::Request&, httplib::Response& res) {
    svc.count_request();
    reply(res, svc.list_scenes());
  });
  impl_->server.Get(R"(/scenes/([^/]+))", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
    svc.count_request();
    reply(res, svc.scene(req.matches[1].str()));
  });
  impl_->server.Post("/query", [&svc, reply](const httplib::Request& req, httplib::Response& res) {
    svc.count_request();
    reply(res, svc.query(req.body));
  });
  impl_->server.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, json_error(500, what));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) fail(ErrorCode::IoError, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port))
    fail(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() {
  if (!impl_->server.listen_after_bind()) fail(ErrorCode::IoError, "server stopped with an error");
}

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace mantra
