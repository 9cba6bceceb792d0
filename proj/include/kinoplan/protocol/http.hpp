#pragma once

// HTTP/1.1 + JSON transport for the model services.

#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "kinoplan/ik/prior.hpp"
#include "kinoplan/protocol/client.hpp"

namespace httplib {
class Server;
}

namespace kinoplan::protocol {

inline constexpr const char* kScorerUrlEnv = "SCORER_URL";
inline constexpr const char* kProposerUrlEnv = "PROPOSER_URL";
inline constexpr const char* kJudgeUrlEnv = "JUDGE_URL";

/// Value of an environment variable, empty values treated as unset.
std::optional<std::string> env_url(const char* name);

/// A flag value wins over the environment.
std::optional<std::string> resolve_url(const std::optional<std::string>& flag, const char* env_name);

/// POSTs JSON to `base_url + path`. Transport failures, non-2xx statuses
/// and unparsable bodies raise BackendError.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(std::string base_url, double timeout_seconds = 60.0);
  Json post(const std::string& path, const Json& body) const;
  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  double timeout_seconds_;
};

class HttpProposer final : public ProposerBackend {
 public:
  explicit HttpProposer(std::string base_url, double timeout_seconds = 120.0) : client_(std::move(base_url), timeout_seconds) {}
  Json propose(const Json& request) override { return client_.post("/propose", request); }

 private:
  HttpJsonClient client_;
};

class HttpScorer final : public ScorerBackend {
 public:
  explicit HttpScorer(std::string base_url, double timeout_seconds = 60.0) : client_(std::move(base_url), timeout_seconds) {}
  Json score(const Json& request) override { return client_.post("/score", request); }

 private:
  HttpJsonClient client_;
};

class HttpJudge final : public JudgeBackend {
 public:
  explicit HttpJudge(std::string base_url, double timeout_seconds = 120.0) : client_(std::move(base_url), timeout_seconds) {}
  Json judge(const Json& request) override { return client_.post("/judge", request); }

 private:
  HttpJsonClient client_;
};

/// Remote decoder behind POST /decode ({"latent": [...]} -> {"pose": [...]}).
/// No analytic Jacobian, so the IK solver falls back to finite differences.
/// encode is not part of the protocol and returns the zero latent.
class HttpPrior final : public ik::PosePrior {
 public:
  HttpPrior(std::string base_url, std::size_t latent_dim, std::size_t pose_dim, double timeout_seconds = 30.0);
  std::size_t latent_dim() const override { return latent_dim_; }
  std::size_t pose_dim() const override { return pose_dim_; }
  Eigen::VectorXd decode(const Eigen::VectorXd& latent) const override;
  Eigen::VectorXd encode(const Eigen::VectorXd& pose) const override;

 private:
  HttpJsonClient client_;
  std::size_t latent_dim_;
  std::size_t pose_dim_;
};

/// Serves in-process backends over loopback HTTP on an ephemeral port.
/// Null backends leave their endpoint unregistered (404).
class StubServer {
 public:
  StubServer(ProposerBackend* proposer, ScorerBackend* scorer, JudgeBackend* judge,
             const ik::PosePrior* prior = nullptr);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const { return port_; }
  std::string url() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace kinoplan::protocol
