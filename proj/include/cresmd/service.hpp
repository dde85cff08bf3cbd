#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cresmd/degradation.hpp"
#include "cresmd/image.hpp"
#include "cresmd/model.hpp"

namespace httplib {
class Server;
}

namespace cresmd {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
// Standard alphabet with '=' padding; throws FormatError on anything else.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// {"width", "height", "channels", "pixels": base64 of interleaved 8-bit
// samples, row-major}.
nlohmann::json image_to_wire(const Image& image);
Image image_from_wire(const nlohmann::json& j, int max_dimension);

struct ServiceOptions {
  int max_dimension = 1024;
  bool cors = true;
};

struct ServiceReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Request handling, independent of the HTTP transport. The model is never
// modified after construction, so handlers may run concurrently.
class RestorationService {
 public:
  RestorationService(CResMDModel<float> model, std::string checkpoint_hash, ServiceOptions options = {});

  ServiceReply healthz() const;
  ServiceReply model_info() const;
  ServiceReply restore(const std::string& body) const;
  ServiceReply degrade(const std::string& body) const;

  // Registers the /api routes (and CORS headers when enabled).
  void mount(httplib::Server& server) const;

  const ServiceOptions& options() const { return options_; }

 private:
  CResMDModel<float> model_;
  std::string info_body_;
  ServiceOptions options_;
};

// Binds host:port (0 picks a free port), reports the bound port through
// `on_bound`, then blocks serving requests.
void run_server(const RestorationService& service, const std::string& host, int port,
                const std::function<void(int)>& on_bound);

}  // namespace cresmd
