#pragma once

#include "mpirisk/explain.hpp"
#include "mpirisk/features.hpp"
#include "mpirisk/forecast.hpp"
#include "mpirisk/gbdt.hpp"
#include "mpirisk/ingest.hpp"
#include "mpirisk/mpi_index.hpp"

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace httplib {
class Server;
}

namespace mpirisk {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string classifier;   // gbdt model JSON
    std::string forecaster;   // forecast model JSON
    std::string mpi_config;   // MpiConfig JSON
    std::string scaler;       // ScalerParams JSON
    std::string history;      // daily env CSV the models were built from
    std::string feature_spec; // optional FeatureSpec JSON; defaults otherwise
    std::size_t body_limit = 1 << 20;
    std::size_t cache_capacity = 32;
};

/// Relative paths resolve against `base_dir`.
ServiceConfig service_config_from_json(std::string_view text, const std::string& base_dir = ".");

struct ServiceArtifacts {
    TreeEnsemble classifier;
    ForecastModel forecaster;
    MpiConfig mpi;
    ScalerParams scaler;
    FeatureSpec feature_spec = FeatureSpec::defaults();
    EnvSeries history;
};

ServiceArtifacts load_artifacts(const ServiceConfig& config);

struct HttpResponse {
    int status = 200;
    std::string body;
};

inline constexpr int kMaxHorizon = 520;

/// Request handling independent of the transport. Artifacts are immutable
/// after construction; the only shared mutable state is the override cache.
class Service {
public:
    /// Throws Error(dimension) when artifacts disagree on feature names.
    explicit Service(ServiceArtifacts artifacts, std::size_t cache_capacity = 32);

    HttpResponse health() const;
    HttpResponse score(std::string_view body) const;
    HttpResponse forecast(std::string_view body) const;
    HttpResponse explain_global() const;
    HttpResponse explain_sample(std::string_view body) const;

    /// Dispatches on method and path; accepts both /v1/... and unversioned paths.
    HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

    const ResolvedThresholds& thresholds() const { return thresholds_; }
    const MpiConfig& mpi_config() const { return artifacts_.mpi; }
    std::size_t cache_size() const;

private:
    std::shared_ptr<const ForecastModel> model_for(const std::string& key, const MpiConfig& cfg) const;

    ServiceArtifacts artifacts_;
    ResolvedThresholds thresholds_{};
    std::string global_json_;
    std::size_t cache_capacity_;

    mutable std::mutex cache_mu_;
    mutable std::map<std::string, std::shared_ptr<const ForecastModel>> cache_;
    mutable std::deque<std::string> cache_order_;
};

/// Owns the listening socket.
class HttpServer {
public:
    HttpServer(const Service& service, std::size_t body_limit);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void run();
    void stop();

private:
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace mpirisk
