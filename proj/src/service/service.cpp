#include "cresmd/service.hpp"

#include <array>
#include <cmath>
#include <iostream>

#include <httplib.h>

#include "cresmd/error.hpp"
#include "cresmd/rng.hpp"
#include "cresmd/synthesis.hpp"

namespace cresmd {
namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<int, 256> make_decode_table() {
  std::array<int, 256> t{};
  for (auto& v : t) v = -1;
  for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = i;
  return t;
}

constexpr auto kDecode = make_decode_table();

// A request the client got wrong; `field` names the offending JSON key.
class RequestError : public Error {
 public:
  RequestError(int status, std::string field, const std::string& message)
      : Error(message), status_(status), field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string field_;
};

ServiceReply json_reply(int status, const nlohmann::json& j) { return {status, j.dump(), "application/json"}; }

ServiceReply error_reply(int status, const std::string& message, const std::string& field = "") {
  nlohmann::json j{{"error", message}};
  if (!field.empty()) j["field"] = field;
  return json_reply(status, j);
}

nlohmann::json parse_body(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError(400, "", std::string("body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw RequestError(400, "", "body must be a JSON object");
  return j;
}

const nlohmann::json& require(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw RequestError(400, field, std::string("missing field '") + field + "'");
  return j.at(field);
}

double number_field(const nlohmann::json& j, const char* field, double fallback) {
  if (!j.contains(field) || j.at(field).is_null()) return fallback;
  if (!j.at(field).is_number()) throw RequestError(400, field, std::string("'") + field + "' must be a number");
  return j.at(field).get<double>();
}

Image wire_field(const nlohmann::json& j, int max_dimension) {
  try {
    return image_from_wire(require(j, "image"), max_dimension);
  } catch (const RequestError&) {
    throw;
  } catch (const FormatError& e) {
    throw RequestError(400, "image", e.what());
  }
}

template <typename Handler>
ServiceReply guarded(Handler&& handler) {
  try {
    return handler();
  } catch (const RequestError& e) {
    return error_reply(e.status(), e.what(), e.field());
  } catch (const RangeError& e) {
    return error_reply(400, e.what());
  } catch (const ShapeError& e) {
    return error_reply(400, e.what());
  } catch (const NumericError& e) {
    return error_reply(500, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64 length must be a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      if (ch == '=' && last && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = kDecode[static_cast<unsigned char>(ch)];
      if (d < 0 || pad > 0) throw FormatError("invalid base64 character at offset " + std::to_string(i + k));
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

nlohmann::json image_to_wire(const Image& image) {
  return {{"width", image.width},
          {"height", image.height},
          {"channels", image.channels},
          {"pixels", base64_encode(to_interleaved_u8(image))}};
}

Image image_from_wire(const nlohmann::json& j, int max_dimension) {
  if (!j.is_object()) throw RequestError(400, "image", "'image' must be an object");
  const auto dimension = [&](const char* field) {
    const auto& v = require(j, field);
    if (!v.is_number_integer()) throw RequestError(400, field, std::string("'") + field + "' must be an integer");
    return v.get<long long>();
  };
  const long long width = dimension("width");
  const long long height = dimension("height");
  const long long channels = dimension("channels");
  if (channels != 1 && channels != 3) throw RequestError(400, "channels", "'channels' must be 1 or 3");
  if (width <= 0 || height <= 0) throw RequestError(400, "width", "image dimensions must be positive");
  if (width > max_dimension || height > max_dimension) {
    throw RequestError(413, "image",
                       "image " + std::to_string(width) + "x" + std::to_string(height) +
                           " exceeds the maximum dimension " + std::to_string(max_dimension));
  }
  const auto& pixels = require(j, "pixels");
  if (!pixels.is_string()) throw RequestError(400, "pixels", "'pixels' must be a base64 string");
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(pixels.get_ref<const std::string&>());
  } catch (const FormatError& e) {
    throw RequestError(400, "pixels", e.what());
  }
  const auto expected = static_cast<std::size_t>(width * height * channels);
  if (bytes.size() != expected) {
    throw RequestError(400, "pixels",
                       "decoded " + std::to_string(bytes.size()) + " bytes, expected width*height*channels = " +
                           std::to_string(expected));
  }
  return from_interleaved_u8(bytes, static_cast<int>(channels), static_cast<int>(height), static_cast<int>(width));
}

RestorationService::RestorationService(CResMDModel<float> model, std::string checkpoint_hash,
                                       ServiceOptions options)
    : model_(std::move(model)), options_(options) {
  const auto counts = param_count(model_);
  nlohmann::json arch = model_.arch().to_json();
  arch["kind"] = model_kind_name(model_.kind());
  arch["parameters"] = {{"base", counts.base}, {"condition", counts.condition}};
  info_body_ = nlohmann::json{{"dims", model_.space().to_json()},
                              {"arch", arch},
                              {"checkpoint_hash", std::move(checkpoint_hash)},
                              {"max_dimension", options_.max_dimension}}
                   .dump();
}

ServiceReply RestorationService::healthz() const { return {200, "ok", "text/plain"}; }

ServiceReply RestorationService::model_info() const { return {200, info_body_, "application/json"}; }

ServiceReply RestorationService::restore(const std::string& body) const {
  return guarded([&] {
    const auto j = parse_body(body);
    const Image input = wire_field(j, options_.max_dimension);
    const auto& zj = require(j, "z");
    const std::size_t n = static_cast<std::size_t>(model_.arch().condition_dim);
    if (!zj.is_array() || zj.size() != n) {
      throw RequestError(400, "z", "'z' must be an array of " + std::to_string(n) + " numbers");
    }
    std::vector<double> z;
    for (const auto& v : zj) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw RequestError(400, "z", "'z' entries must be finite numbers");
      }
      z.push_back(v.get<double>());
    }
    if (input.channels != model_.arch().image_channels) {
      throw RequestError(400, "channels",
                         "model expects " + std::to_string(model_.arch().image_channels) + " channels");
    }
    return json_reply(200, {{"image", image_to_wire(restore_image(model_, input, z))}});
  });
}

ServiceReply RestorationService::degrade(const std::string& body) const {
  return guarded([&] {
    const auto j = parse_body(body);
    const Image input = wire_field(j, options_.max_dimension);
    DegradationSpec spec;
    spec.blur_r = number_field(j, "blur", 0.0);
    spec.noise_sigma = number_field(j, "noise", 0.0);
    if (j.contains("jpeg") && !j.at("jpeg").is_null()) {
      const auto& q = j.at("jpeg");
      if (q.is_string() && q.get<std::string>() == "none") {
        spec.jpeg_quality.reset();
      } else if (q.is_number_integer()) {
        spec.jpeg_quality = q.get<int>();
      } else {
        throw RequestError(400, "jpeg", "'jpeg' must be an integer quality or \"none\"");
      }
    }
    std::uint64_t seed = 0;
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) {
        throw RequestError(400, "seed", "'seed' must be a non-negative integer");
      }
      seed = j.at("seed").get<std::uint64_t>();
    }
    DegradationSpace::paper_3d().validate(spec);
    Rng rng(seed);
    return json_reply(200, {{"image", image_to_wire(cresmd::degrade(input, spec, rng))}});
  });
}

void RestorationService::mount(httplib::Server& server) const {
  const auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  server.Get("/api/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });
  server.Get("/api/model/info",
             [this, send](const httplib::Request&, httplib::Response& res) { send(res, model_info()); });
  server.Post("/api/restore",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, restore(req.body)); });
  server.Post("/api/degrade",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, degrade(req.body)); });
  if (options_.cors) {
    server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }
}

void run_server(const RestorationService& service, const std::string& host, int port,
                const std::function<void(int)>& on_bound) {
  httplib::Server server;
  service.mount(server);
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  if (on_bound) on_bound(bound);
  if (!server.listen_after_bind()) throw IoError("server stopped unexpectedly");
}

}  // namespace cresmd
