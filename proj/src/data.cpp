#include "hsicnn/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hsicnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct EnviHeader {
  int samples = 0, lines = 0, bands = 0;
  int data_type = 0;   // 4 = float32, 12 = u16
  int byte_order = 0;  // 0 = little endian
  std::string interleave;  // bip, bil, bsq
};

EnviHeader parse_envi_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ENVI header " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower(trim(line.substr(0, eq)));
    std::string val = trim(line.substr(eq + 1));
    // Brace-enclosed multi-line values (wavelength lists etc.) are skipped.
    if (!val.empty() && val.front() == '{') {
      while (val.find('}') == std::string::npos && std::getline(in, line)) val += line;
      continue;
    }
    kv[key] = val;
  }
  EnviHeader h;
  auto need_int = [&kv, &path](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error(path + ": ENVI header missing '" + key + "'");
    return std::stoi(it->second);
  };
  h.samples = need_int("samples");
  h.lines = need_int("lines");
  h.bands = need_int("bands");
  h.data_type = need_int("data type");
  h.byte_order = kv.count("byte order") ? std::stoi(kv["byte order"]) : 0;
  h.interleave = kv.count("interleave") ? lower(kv["interleave"]) : "bsq";
  if (h.samples < 1 || h.lines < 1 || h.bands < 1)
    throw std::runtime_error(path + ": ENVI header has non-positive extents");
  if (h.interleave != "bip" && h.interleave != "bil" && h.interleave != "bsq")
    throw std::runtime_error(path + ": unsupported interleave '" + h.interleave + "'");
  if (h.data_type != 4 && h.data_type != 12)
    throw std::runtime_error(path + ": unsupported ENVI data type " +
                             std::to_string(h.data_type) +
                             " (only 4=float32 and 12=u16)");
  if (h.byte_order != 0)
    throw std::runtime_error(path + ": only little-endian ENVI files are supported");
  return h;
}

std::vector<unsigned char> read_raw(const std::string& path, std::size_t expect) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open raw file " + path);
  const std::size_t have = static_cast<std::size_t>(in.tellg());
  if (have != expect)
    throw std::runtime_error(path + ": raw size " + std::to_string(have) +
                             " does not match header promise " + std::to_string(expect));
  std::vector<unsigned char> buf(expect);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect));
  if (!in) throw std::runtime_error(path + ": short read");
  return buf;
}

// Flat source index for pixel (y,x) band b under the given interleave.
std::size_t src_index(const EnviHeader& h, int y, int x, int b) {
  const std::size_t Y = static_cast<std::size_t>(y), X = static_cast<std::size_t>(x),
                    Bd = static_cast<std::size_t>(b);
  const std::size_t W = static_cast<std::size_t>(h.samples);
  const std::size_t HH = static_cast<std::size_t>(h.lines);
  const std::size_t NB = static_cast<std::size_t>(h.bands);
  if (h.interleave == "bip") return (Y * W + X) * NB + Bd;
  if (h.interleave == "bil") return (Y * NB + Bd) * W + X;
  return (Bd * HH + Y) * W + X;  // bsq
}

float fetch(const EnviHeader& h, const std::vector<unsigned char>& raw, int y, int x,
            int b) {
  const std::size_t i = src_index(h, y, x, b);
  if (h.data_type == 4) {
    float v;
    std::memcpy(&v, raw.data() + i * 4, 4);
    return v;
  }
  std::uint16_t v;
  std::memcpy(&v, raw.data() + i * 2, 2);
  return static_cast<float>(v);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

struct BinReader {
  std::ifstream in;
  std::string path;
  std::size_t offset = 0;

  void read_bytes(void* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw std::runtime_error(path + ": truncated at offset " + std::to_string(offset));
    offset += n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read_bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  void expect_magic(const char* magic) {
    char m[4];
    read_bytes(m, 4);
    if (std::memcmp(m, magic, 4) != 0)
      throw std::runtime_error(path + ": bad magic, expected " + std::string(magic, 4));
  }
  void expect_version(std::uint32_t want) {
    const std::uint32_t got = u32();
    if (got != want)
      throw std::runtime_error(path + ": unsupported version " + std::to_string(got));
  }
};

constexpr std::uint32_t kMaxExtent = 1u << 20;

}  // namespace

HSICube read_envi_cube(const std::string& header_path, const std::string& raw_path) {
  const EnviHeader h = parse_envi_header(header_path);
  const std::size_t elem = h.data_type == 4 ? 4 : 2;
  const std::size_t n =
      static_cast<std::size_t>(h.lines) * h.samples * static_cast<std::size_t>(h.bands);
  const std::vector<unsigned char> raw = read_raw(raw_path, n * elem);
  HSICube cube;
  cube.H = h.lines;
  cube.W = h.samples;
  cube.B = h.bands;
  cube.values.resize(n);
  for (int y = 0; y < cube.H; ++y)
    for (int x = 0; x < cube.W; ++x)
      for (int b = 0; b < cube.B; ++b) {
        const float v = fetch(h, raw, y, x, b);
        if (!std::isfinite(v))
          throw std::runtime_error(raw_path + ": non-finite reflectance value");
        cube.at(y, x, b) = v;
      }
  return cube;
}

LabelMap read_envi_labels(const std::string& header_path, const std::string& raw_path) {
  const EnviHeader h = parse_envi_header(header_path);
  if (h.bands != 1)
    throw std::runtime_error(header_path + ": label raster must have exactly 1 band");
  if (h.data_type != 12)
    throw std::runtime_error(header_path + ": label raster must be u16 (data type 12)");
  const std::size_t n = static_cast<std::size_t>(h.lines) * h.samples;
  const std::vector<unsigned char> raw = read_raw(raw_path, n * 2);
  LabelMap m;
  m.H = h.lines;
  m.W = h.samples;
  m.labels.resize(n);
  std::uint16_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint16_t v;
    std::memcpy(&v, raw.data() + i * 2, 2);
    m.labels[i] = v;
    max_label = std::max(max_label, v);
  }
  m.C = max_label;
  return m;
}

void write_hsic(const HSICube& cube, const std::string& path) {
  if (cube.values.size() != static_cast<std::size_t>(cube.H) * cube.W * cube.B)
    throw std::invalid_argument("write_hsic: storage does not match extents");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("HSIC", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(cube.H));
  put_u32(os, static_cast<std::uint32_t>(cube.W));
  put_u32(os, static_cast<std::uint32_t>(cube.B));
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(cube.values.data()),
           static_cast<std::streamsize>(cube.values.size() * 4));
  if (!os) throw std::runtime_error("write failed: " + path);
}

HSICube read_hsic(const std::string& path) {
  BinReader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw std::runtime_error("cannot open " + path);
  r.expect_magic("HSIC");
  r.expect_version(1);
  HSICube cube;
  const std::uint32_t H = r.u32(), W = r.u32(), B = r.u32();
  if (H == 0 || W == 0 || B == 0 || H > kMaxExtent || W > kMaxExtent || B > kMaxExtent)
    throw std::runtime_error(path + ": implausible extents");
  cube.H = static_cast<int>(H);
  cube.W = static_cast<int>(W);
  cube.B = static_cast<int>(B);
  cube.values.resize(static_cast<std::size_t>(H) * W * B);
  r.read_bytes(cube.values.data(), cube.values.size() * 4);
  for (float v : cube.values)
    if (!std::isfinite(v)) throw std::runtime_error(path + ": non-finite value in cube");
  return cube;
}

void write_hsil(const LabelMap& m, const std::string& path) {
  if (m.labels.size() != static_cast<std::size_t>(m.H) * m.W)
    throw std::invalid_argument("write_hsil: storage does not match extents");
  for (std::uint16_t v : m.labels)
    if (v > m.C)
      throw std::invalid_argument("write_hsil: label " + std::to_string(v) +
                                  " exceeds declared class count " + std::to_string(m.C));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("HSIL", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(m.H));
  put_u32(os, static_cast<std::uint32_t>(m.W));
  put_u32(os, static_cast<std::uint32_t>(m.C));
  os.write(reinterpret_cast<const char*>(m.labels.data()),
           static_cast<std::streamsize>(m.labels.size() * 2));
  if (!os) throw std::runtime_error("write failed: " + path);
}

LabelMap read_hsil(const std::string& path) {
  BinReader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw std::runtime_error("cannot open " + path);
  r.expect_magic("HSIL");
  r.expect_version(1);
  LabelMap m;
  const std::uint32_t H = r.u32(), W = r.u32(), C = r.u32();
  if (H == 0 || W == 0 || H > kMaxExtent || W > kMaxExtent || C > 65535)
    throw std::runtime_error(path + ": implausible extents");
  m.H = static_cast<int>(H);
  m.W = static_cast<int>(W);
  m.C = static_cast<int>(C);
  m.labels.resize(static_cast<std::size_t>(H) * W);
  r.read_bytes(m.labels.data(), m.labels.size() * 2);
  for (std::uint16_t v : m.labels)
    if (v > C)
      throw std::runtime_error(path + ": label " + std::to_string(v) +
                               " exceeds declared class count " + std::to_string(C));
  return m;
}

BandStats standardize(HSICube& cube, const std::vector<std::size_t>& train_pixels) {
  if (train_pixels.size() < 2)
    throw std::invalid_argument("standardize: need at least 2 training pixels");
  BandStats stats;
  stats.mean.assign(static_cast<std::size_t>(cube.B), 0.0f);
  stats.stddev.assign(static_cast<std::size_t>(cube.B), 1.0f);
  const double n = static_cast<double>(train_pixels.size());
  for (int b = 0; b < cube.B; ++b) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t p : train_pixels) {
      const double v = cube.values[p * cube.B + b];
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    double var = sumsq / n - mean * mean;
    if (var < 0.0) var = 0.0;
    const double sd = std::sqrt(var);
    stats.mean[static_cast<std::size_t>(b)] = static_cast<float>(mean);
    stats.stddev[static_cast<std::size_t>(b)] = sd < 1e-12 ? 1.0f : static_cast<float>(sd);
  }
  for (std::size_t p = 0; p < cube.pixel_count(); ++p)
    for (int b = 0; b < cube.B; ++b) {
      float& v = cube.values[p * cube.B + b];
      v = (v - stats.mean[static_cast<std::size_t>(b)]) /
          stats.stddev[static_cast<std::size_t>(b)];
    }
  return stats;
}

std::size_t SplitSpec::train_total() const {
  std::size_t n = 0;
  for (const auto& v : train) n += v.size();
  return n;
}

std::size_t SplitSpec::test_total() const {
  std::size_t n = 0;
  for (const auto& v : test) n += v.size();
  return n;
}

SplitSpec sample_split(const LabelMap& labels, const std::vector<int>& classes,
                       int n_per_class, std::uint32_t seed) {
  SplitSpec spec;
  spec.seed = seed;
  spec.n_train_per_class = n_per_class;
  spec.classes = classes;
  std::sort(spec.classes.begin(), spec.classes.end());
  std::mt19937 rng(seed);
  for (int cls : spec.classes) {
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
      if (labels.labels[i] == cls) pixels.push_back(i);
    if (pixels.empty())
      throw std::invalid_argument("sample_split: class " + std::to_string(cls) +
                                  " absent from label map");
    // Fisher-Yates prefix shuffle; first n go to train, rest to test.
    const std::size_t n_train =
        std::min(pixels.size(), static_cast<std::size_t>(n_per_class));
    for (std::size_t i = 0; i < n_train; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pixels.size() - 1);
      std::swap(pixels[i], pixels[pick(rng)]);
    }
    spec.train.emplace_back(pixels.begin(), pixels.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> rest(pixels.begin() + static_cast<long>(n_train),
                                  pixels.end());
    std::sort(rest.begin(), rest.end());
    spec.test.push_back(std::move(rest));
  }
  return spec;
}

std::vector<int> largest_classes(const LabelMap& labels, int n) {
  std::map<int, std::size_t> counts;
  for (std::uint16_t v : labels.labels)
    if (v > 0) ++counts[v];
  std::vector<std::pair<int, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(items.size()) < n)
    throw std::invalid_argument("largest_classes: map has only " +
                                std::to_string(items.size()) + " classes");
  std::vector<int> out;
  for (int i = 0; i < n; ++i) out.push_back(items[static_cast<std::size_t>(i)].first);
  std::sort(out.begin(), out.end());
  return out;
}

Tensor extract_patch(const HSICube& cube, int y, int x, int radius) {
  if (y < 0 || y >= cube.H || x < 0 || x >= cube.W)
    throw std::invalid_argument("extract_patch: pixel outside image");
  const int side = 2 * radius + 1;
  Tensor patch({side, side, cube.B});
  for (int dy = 0; dy < side; ++dy) {
    const int sy = y - radius + dy;
    if (sy < 0 || sy >= cube.H) continue;
    for (int dx = 0; dx < side; ++dx) {
      const int sx = x - radius + dx;
      if (sx < 0 || sx >= cube.W) continue;
      for (int b = 0; b < cube.B; ++b) patch.at(dy, dx, b) = cube.at(sy, sx, b);
    }
  }
  return patch;
}

Tensor apply_mirror(const Tensor& patch, MirrorVariant v) {
  const int h = patch.extent(0), w = patch.extent(1), c = patch.extent(2);
  if (v == MirrorVariant::diagonal && h != w)
    throw std::invalid_argument("apply_mirror: diagonal flip needs a square patch");
  if (v == MirrorVariant::orig) return patch;
  Tensor out(v == MirrorVariant::diagonal ? std::vector<int>{w, h, c} : patch.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        switch (v) {
          case MirrorVariant::horizontal:
            out.at(y, w - 1 - x, ch) = patch.at(y, x, ch);
            break;
          case MirrorVariant::vertical:
            out.at(h - 1 - y, x, ch) = patch.at(y, x, ch);
            break;
          case MirrorVariant::diagonal:
            out.at(x, y, ch) = patch.at(y, x, ch);
            break;
          default:
            break;
        }
      }
  return out;
}

}  // namespace hsicnn
