#include "demux/saliency.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "demux/errors.hpp"

namespace demux::explain {

SaliencyMap::SaliencyMap(std::size_t classes, std::size_t len, std::size_t z, std::uint64_t s)
    : num_classes(classes), length(len), target(z), seed(s), values(classes * len, 0.0) {
  if (z >= classes) throw DomainError("target class " + std::to_string(z) + " out of range for " +
                                      std::to_string(classes) + " classes");
}

void write_saliency(const SaliencyMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path.string());
  out << "# z=" << map.target << " T=" << map.length << " C=" << map.num_classes << " seed=" << map.seed << "\n";
  char buf[40];
  for (std::size_t i = 0; i < map.num_classes; ++i) {
    for (std::size_t t = 0; t < map.length; ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", map.at(i, t));
      if (t) out << ',';
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError(DataError::Kind::Io, "write failed for " + path.string());
}

SaliencyMap read_saliency(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open saliency file " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError(DataError::Kind::EmptyFile, path.string() + " is empty");
  unsigned long long z = 0, t = 0, c = 0, seed = 0;
  if (std::sscanf(header.c_str(), "# z=%llu T=%llu C=%llu seed=%llu", &z, &t, &c, &seed) != 4) {
    throw DataError(DataError::Kind::Invalid, path.string() + ": bad header '" + header + "'");
  }
  if (c == 0 || t == 0 || z >= c) throw DataError(DataError::Kind::Invalid, path.string() + ": inconsistent header");
  SaliencyMap map(c, t, z, seed);
  std::string line;
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::getline(in, line)) {
      throw DataError(DataError::Kind::RaggedRows, path.string() + ": expected " + std::to_string(c) + " rows");
    }
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= t) {
        ++col;
        break;
      }
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || errno == ERANGE || !std::isfinite(v)) {
        throw DataError(DataError::Kind::NonNumeric,
                        path.string() + ":" + std::to_string(i + 2) + ": not a number '" + cell + "'");
      }
      map.at(i, col++) = v;
    }
    if (col != t) {
      throw DataError(DataError::Kind::RaggedRows,
                      path.string() + ":" + std::to_string(i + 2) + ": expected " + std::to_string(t) + " values");
    }
  }
  return map;
}

}  // namespace demux::explain
