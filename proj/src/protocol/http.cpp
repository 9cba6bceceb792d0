#include "kinoplan/protocol/http.hpp"

#include <cstdlib>

#include <httplib.h>

#include "kinoplan/core/error.hpp"

namespace kinoplan::protocol {

namespace {

template <typename Handler>
void route(httplib::Server& server, const char* path, Handler handler) {
  server.Post(path, [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      const Json out = handler(Json::parse(req.body));
      res.set_content(out.dump(), "application/json");
    } catch (const Json::parse_error& e) {
      res.status = 400;
      res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
    } catch (const SchemaError& e) {
      res.status = 422;
      res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

}  // namespace

std::optional<std::string> env_url(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::optional<std::string> resolve_url(const std::optional<std::string>& flag, const char* env_name) {
  if (flag && !flag->empty()) return flag;
  return env_url(env_name);
}

HttpJsonClient::HttpJsonClient(std::string base_url, double timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
  const auto scheme = base_url_.find("://");
  if (scheme == std::string::npos) throw ValidationError("service URL needs a scheme: " + base_url_);
  if (base_url_.compare(0, scheme, "http") != 0)
    throw ValidationError("only http:// service URLs are supported: " + base_url_);
  const auto slash = base_url_.find('/', scheme + 3);
  scheme_host_port_ = base_url_.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : base_url_.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

Json HttpJsonClient::post(const std::string& path, const Json& body) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  const std::string target = path_prefix_ + path;
  auto res = client.Post(target, body.dump(), "application/json");
  if (!res) throw BackendError("POST " + base_url_ + path + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw BackendError("POST " + base_url_ + path + " returned HTTP " + std::to_string(res->status) + ": " +
                       res->body.substr(0, 200));
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw BackendError("POST " + base_url_ + path + " returned invalid JSON: " + e.what());
  }
}

HttpPrior::HttpPrior(std::string base_url, std::size_t latent_dim, std::size_t pose_dim, double timeout_seconds)
    : client_(std::move(base_url), timeout_seconds), latent_dim_(latent_dim), pose_dim_(pose_dim) {}

Eigen::VectorXd HttpPrior::decode(const Eigen::VectorXd& latent) const {
  if (static_cast<std::size_t>(latent.size()) != latent_dim_) throw ValidationError("latent has wrong dimension");
  const Json res = client_.post("/decode", {{"latent", std::vector<double>(latent.data(), latent.data() + latent.size())}});
  if (!res.is_object() || !res.contains("pose") || !res.at("pose").is_array() || res.at("pose").size() != pose_dim_)
    throw SchemaError("decode response needs 'pose' with " + std::to_string(pose_dim_) + " numbers");
  Eigen::VectorXd pose(static_cast<Eigen::Index>(pose_dim_));
  for (std::size_t i = 0; i < pose_dim_; ++i) {
    if (!res.at("pose")[i].is_number()) throw SchemaError("decode response pose must be numeric");
    pose[static_cast<Eigen::Index>(i)] = res.at("pose")[i].get<double>();
  }
  return pose;
}

Eigen::VectorXd HttpPrior::encode(const Eigen::VectorXd&) const {
  return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(latent_dim_));
}

StubServer::StubServer(ProposerBackend* proposer, ScorerBackend* scorer, JudgeBackend* judge,
                       const ik::PosePrior* prior)
    : server_(std::make_unique<httplib::Server>()) {
  if (proposer) route(*server_, "/propose", [proposer](const Json& j) { return proposer->propose(j); });
  if (scorer) route(*server_, "/score", [scorer](const Json& j) { return scorer->score(j); });
  if (judge) route(*server_, "/judge", [judge](const Json& j) { return judge->judge(j); });
  if (prior)
    route(*server_, "/decode", [prior](const Json& j) {
      if (!j.contains("latent") || !j.at("latent").is_array()) throw SchemaError("decode needs 'latent'");
      const auto z = j.at("latent").get<std::vector<double>>();
      const Eigen::VectorXd pose = prior->decode(Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())));
      return Json{{"pose", std::vector<double>(pose.data(), pose.data() + pose.size())}};
    });
  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw BackendError("stub server could not bind a loopback port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

StubServer::~StubServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

}  // namespace kinoplan::protocol
