#include "cresmd/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "cresmd/error.hpp"

namespace cresmd {

Image Image::zeros(int channels, int height, int width) { return filled(channels, height, width, 0.0f); }

Image Image::filled(int channels, int height, int width, float value) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("image dimensions must be positive");
  }
  Image image;
  image.channels = channels;
  image.height = height;
  image.width = width;
  image.data.assign(static_cast<std::size_t>(channels) * height * width, value);
  return image;
}

std::uint8_t quantize_u8(float value) {
  const double v = std::clamp(static_cast<double>(value), 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(v));
}

std::vector<std::uint8_t> to_interleaved_u8(const Image& image) {
  std::vector<std::uint8_t> out(image.size());
  const std::size_t plane = image.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < image.channels; ++c) {
      out[p * image.channels + c] = quantize_u8(image.data[c * plane + p]);
    }
  }
  return out;
}

Image from_interleaved_u8(std::span<const std::uint8_t> pixels, int channels, int height, int width) {
  Image image = Image::zeros(channels, height, width);
  if (pixels.size() != image.size()) {
    throw FormatError("expected " + std::to_string(image.size()) + " pixel bytes, got " +
                      std::to_string(pixels.size()));
  }
  const std::size_t plane = image.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < channels; ++c) {
      image.data[c * plane + p] = static_cast<float>(pixels[p * channels + c]) / 255.0f;
    }
  }
  return image;
}

Image quantize_image(const Image& image) {
  Image out = image;
  for (float& v : out.data) v = static_cast<float>(quantize_u8(v)) / 255.0f;
  return out;
}

Image clamp_image(const Image& image) {
  Image out = image;
  for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = static_cast<char>(bytes_[pos_]);
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int(const char* field) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw FormatError(std::string("PPM header: ") + field + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw FormatError(std::string("PPM header: missing ") + field);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw FormatError("not a binary PPM/PGM (expected magic P6 or P5)");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader reader(bytes);
  reader.advance(2);
  const long width = reader.read_int("width");
  const long height = reader.read_int("height");
  const long maxval = reader.read_int("maxval");
  if (width <= 0 || height <= 0) throw FormatError("PPM header: dimensions must be positive");
  if (maxval != 255) throw FormatError("unsupported PPM maxval " + std::to_string(maxval) + " (only 255)");
  // Exactly one whitespace byte separates the header from the raster.
  if (reader.pos() >= bytes.size() || !std::isspace(bytes[reader.pos()])) {
    throw FormatError("PPM header: missing separator before pixel data");
  }
  reader.advance(1);
  const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - reader.pos() < expected) {
    throw FormatError("truncated PPM payload: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size() - reader.pos()));
  }
  return from_interleaved_u8(bytes.subspan(reader.pos(), expected), channels, static_cast<int>(height),
                             static_cast<int>(width));
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ShapeError("PPM export needs 1 or 3 channels, got " + std::to_string(image.channels));
  }
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto pixels = to_interleaved_u8(image);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

Image load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  try {
    return decode_ppm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_ppm(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace cresmd
