#include "chromseg/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <string>

namespace chromseg::netpbm {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
  int ch = in.get();
  for (;;) {
    while (ch != EOF && std::isspace(ch)) ch = in.get();
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
      continue;
    }
    break;
  }
  if (ch == EOF || !std::isdigit(ch)) throw FormatError(path.string() + ": malformed netpbm header");
  long value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > 65535) throw FormatError(path.string() + ": header value out of range");
    ch = in.get();
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (ch == EOF || !std::isspace(ch)) throw FormatError(path.string() + ": malformed netpbm header");
  return static_cast<int>(value);
}

struct Header {
  int width;
  int height;
};

Header read_header(std::istream& in, const std::filesystem::path& path, char kind) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != kind)
    throw FormatError(path.string() + ": expected binary P" + std::string(1, kind) + " file");
  Header h{};
  h.width = read_header_int(in, path);
  h.height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval <= 0 || maxval > 255) throw FormatError(path.string() + ": only 8-bit netpbm is supported");
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

Raster<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path, '5');
  Raster<std::uint8_t> img(h.height, h.width);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.size()))
    throw FormatError(path.string() + ": truncated PGM payload");
  return img;
}

void write_pgm(const std::filesystem::path& path, const Raster<std::uint8_t>& img) {
  auto out = open_out(path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path, '6');
  RgbImage img{h.height, h.width, std::vector<std::uint8_t>(static_cast<std::size_t>(h.height) * h.width * 3)};
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
    throw FormatError(path.string() + ": truncated PPM payload");
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  if (img.rgb.size() != static_cast<std::size_t>(img.height) * img.width * 3)
    throw StructuralError("write_ppm: pixel buffer does not match dims");
  auto out = open_out(path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace chromseg::netpbm
