#include "cresmd/degradation.hpp"

#include <cmath>
#include <sstream>

#include "cresmd/error.hpp"

namespace cresmd {

std::string kind_name(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::kBlur: return "blur";
    case DegradationKind::kNoise: return "noise";
    case DegradationKind::kJpeg: return "jpeg";
  }
  return "unknown";
}

DegradationKind kind_from_name(const std::string& name) {
  if (name == "blur") return DegradationKind::kBlur;
  if (name == "noise") return DegradationKind::kNoise;
  if (name == "jpeg") return DegradationKind::kJpeg;
  throw FormatError("unknown degradation dimension '" + name + "'");
}

std::string DegradationSpec::describe() const {
  std::ostringstream out;
  out << "blur=" << blur_r << " noise=" << noise_sigma << " jpeg=";
  if (jpeg_quality) {
    out << *jpeg_quality;
  } else {
    out << "none";
  }
  return out.str();
}

int DegradationDimension::steps() const {
  if (kind == DegradationKind::kJpeg) {
    return static_cast<int>(std::lround((kJpegMaxQuality - kJpegMinQuality) / stride)) + 1;
  }
  return static_cast<int>(std::lround(max_level / stride));
}

double jpeg_condition(std::optional<int> quality) {
  if (!quality) return 0.0;
  return (110.0 - *quality) / 100.0;
}

DegradationSpace::DegradationSpace(std::vector<DegradationDimension> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw RangeError("degradation space needs at least one dimension");
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (dims_[j].kind == d.kind) throw RangeError("duplicate dimension '" + d.name() + "'");
    }
    if (!(d.stride > 0)) throw RangeError("dimension '" + d.name() + "' needs a positive stride");
    if (d.kind != DegradationKind::kJpeg && !(d.max_level > 0)) {
      throw RangeError("dimension '" + d.name() + "' needs a positive range");
    }
    if (d.kind == DegradationKind::kJpeg && static_cast<int>(d.stride) != d.stride) {
      throw RangeError("jpeg stride must be an integer quality step");
    }
  }
}

DegradationSpace DegradationSpace::paper_2d() {
  return DegradationSpace({{DegradationKind::kBlur, 4.0, 0.1}, {DegradationKind::kNoise, 50.0, 1.0}});
}

DegradationSpace DegradationSpace::paper_3d() {
  return DegradationSpace({{DegradationKind::kBlur, 4.0, 0.1},
                           {DegradationKind::kNoise, 50.0, 1.0},
                           {DegradationKind::kJpeg, 0.0, 2.0}});
}

DegradationSpace DegradationSpace::desk_2d() {
  return DegradationSpace({{DegradationKind::kBlur, 2.0, 0.1}, {DegradationKind::kNoise, 25.0, 1.0}});
}

std::optional<std::size_t> DegradationSpace::index_of(DegradationKind kind) const {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].kind == kind) return i;
  }
  return std::nullopt;
}

namespace {

void check_level(const std::string& name, double level, double max_level) {
  if (!std::isfinite(level) || level < 0.0 || level > max_level) {
    std::ostringstream msg;
    msg << name << " level " << level << " outside range [0, " << max_level << "]";
    throw RangeError(msg.str());
  }
}

}  // namespace

void DegradationSpace::validate(const DegradationSpec& spec) const {
  const auto blur = index_of(DegradationKind::kBlur);
  const auto noise = index_of(DegradationKind::kNoise);
  const auto jpeg = index_of(DegradationKind::kJpeg);
  if (blur) {
    check_level("blur", spec.blur_r, dims_[*blur].max_level);
  } else if (spec.blur_r != 0.0) {
    throw RangeError("blur level given but the space has no blur dimension");
  }
  if (noise) {
    check_level("noise", spec.noise_sigma, dims_[*noise].max_level);
  } else if (spec.noise_sigma != 0.0) {
    throw RangeError("noise level given but the space has no noise dimension");
  }
  if (spec.jpeg_quality) {
    if (!jpeg) throw RangeError("jpeg quality given but the space has no jpeg dimension");
    const int q = *spec.jpeg_quality;
    if (q < kJpegMinQuality || q > kJpegMaxQuality) {
      throw RangeError("jpeg quality " + std::to_string(q) + " outside range [10, 100]");
    }
  }
}

double DegradationSpace::condition_of(const DegradationSpec& spec, std::size_t dim_index) const {
  const auto& d = dims_.at(dim_index);
  switch (d.kind) {
    case DegradationKind::kBlur: return spec.blur_r / d.max_level;
    case DegradationKind::kNoise: return spec.noise_sigma / d.max_level;
    case DegradationKind::kJpeg: return jpeg_condition(spec.jpeg_quality);
  }
  return 0.0;
}

std::vector<double> DegradationSpace::encode(const DegradationSpec& spec) const {
  validate(spec);
  std::vector<double> z(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) z[i] = condition_of(spec, i);
  return z;
}

DegradationSpec DegradationSpace::decode(const std::vector<double>& condition) const {
  if (condition.size() != dims_.size()) {
    throw RangeError("condition has " + std::to_string(condition.size()) + " entries, space has " +
                     std::to_string(dims_.size()));
  }
  DegradationSpec spec;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    const double c = condition[i];
    switch (d.kind) {
      case DegradationKind::kBlur: spec.blur_r = c * d.max_level; break;
      case DegradationKind::kNoise: spec.noise_sigma = c * d.max_level; break;
      case DegradationKind::kJpeg:
        if (c > 0.0) spec.jpeg_quality = static_cast<int>(std::lround(110.0 - 100.0 * c));
        break;
    }
  }
  return spec;
}

nlohmann::json DegradationSpace::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : dims_) {
    nlohmann::json entry{{"name", d.name()}, {"stride", d.stride}};
    if (d.kind == DegradationKind::kJpeg) {
      entry["range"] = {kJpegMaxQuality, kJpegMinQuality};
      entry["none_sentinel"] = "condition 0 = no compression; q -> (110-q)/100";
    } else {
      entry["range"] = {0.0, d.max_level};
    }
    dims.push_back(std::move(entry));
  }
  return dims;
}

DegradationSpace DegradationSpace::named(const std::string& name) {
  if (name == "paper-3d") return paper_3d();
  if (name == "paper-2d") return paper_2d();
  if (name == "desk-2d") return desk_2d();
  throw RangeError("unknown space '" + name + "' (paper-3d, paper-2d, desk-2d)");
}

DegradationSpace DegradationSpace::from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    try {
      return named(j.get<std::string>());
    } catch (const RangeError& e) {
      throw FormatError(e.what());
    }
  }
  if (!j.is_array()) throw FormatError("degradation space must be an array of dimensions");
  std::vector<DegradationDimension> dims;
  try {
    for (const auto& entry : j) {
      DegradationDimension d;
      d.kind = kind_from_name(entry.at("name").get<std::string>());
      d.stride = entry.at("stride").get<double>();
      if (d.kind != DegradationKind::kJpeg) d.max_level = entry.at("range").at(1).get<double>();
      dims.push_back(d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad degradation space: ") + e.what());
  }
  return DegradationSpace(std::move(dims));
}

bool DegradationSpace::operator==(const DegradationSpace& other) const {
  if (dims_.size() != other.dims_.size()) return false;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& a = dims_[i];
    const auto& b = other.dims_[i];
    if (a.kind != b.kind || a.max_level != b.max_level || a.stride != b.stride) return false;
  }
  return true;
}

}  // namespace cresmd
