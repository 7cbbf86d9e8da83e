#include "tlab/fieldio.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "tlab/errors.hpp"

namespace tl {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string double_bits_hex(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(b));
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  // Unique per thread and process: sweep workers may race on a shared cache entry.
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CacheError("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw CacheError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CacheError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_field_csv(const RadialField& u, const std::string& path) {
  std::string out = "r,re,im\n";
  for (int j = 0; j < u.size(); ++j)
    out += fmt17(u.grid->r(j)) + "," + fmt17(u.v[j].real()) + "," + fmt17(u.v[j].imag()) + "\n";
  write_file_atomic(path, out);
}

RadialField read_field_csv(GridPtr grid, const std::string& path) {
  std::istringstream is(read_file(path));
  std::string line;
  std::getline(is, line);
  RadialField u(grid);
  int j = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (j >= grid->M()) throw GridError("CSV has more rows than grid nodes");
    double r, re, im;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r, &re, &im) != 3)
      throw GridError("malformed CSV row: " + line);
    u.v[j++] = cplx(re, im);
  }
  if (j != grid->M()) throw GridError("CSV row count does not match grid");
  return u;
}

namespace {
template <class T>
void put(std::string& s, const T& v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(const std::string& s, std::size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw CacheError("truncated binary field");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}
}  // namespace

void write_field_binary(const RadialField& u, const std::string& path) {
  std::string s = "TLFD";
  put(s, kFieldFormatVersion);
  put(s, static_cast<std::int32_t>(u.grid->N()));
  put(s, static_cast<std::int32_t>(u.grid->M()));
  put(s, u.grid->rmax());
  for (const auto& z : u.v) {
    put(s, z.real());
    put(s, z.imag());
  }
  write_file_atomic(path, s);
}

RadialField read_field_binary(const std::string& path) {
  std::string s = read_file(path);
  if (s.size() < 4 || s.compare(0, 4, "TLFD") != 0) throw CacheError("not a field file: " + path);
  std::size_t pos = 4;
  auto ver = get<std::uint32_t>(s, pos);
  if (ver != kFieldFormatVersion) throw CacheError("unsupported field format version");
  int N = get<std::int32_t>(s, pos);
  int M = get<std::int32_t>(s, pos);
  double rmax = get<double>(s, pos);
  RadialField u(make_grid(N, M, rmax));
  for (int j = 0; j < M; ++j) {
    double re = get<double>(s, pos);
    double im = get<double>(s, pos);
    u.v[j] = cplx(re, im);
  }
  return u;
}

}  // namespace tl
