#include "mslab/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "mslab/errors.hpp"

namespace mslab {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

enum Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
  kInt64 = 1024,
  kUint64 = 1280,
};

std::size_t datatype_size(std::int16_t dt) {
  switch (dt) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64:
    case kInt64:
    case kUint64: return 8;
    default: return 0;
  }
}

void swap_bytes(unsigned char* p, std::size_t n) { std::reverse(p, p + n); }

template <typename T>
T get(const unsigned char* buf, std::size_t off, bool swap) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), buf + off, sizeof(T));
  if (swap) swap_bytes(b.data(), sizeof(T));
  return std::bit_cast<T>(b);
}

template <typename T>
void put(unsigned char* buf, std::size_t off, T v) {
  std::memcpy(buf + off, &v, sizeof(T));
}

// Whole-file reader over zlib (handles plain and gzip input alike).
class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path) : file_(gzopen(path.string().c_str(), "rb")) {
    if (!file_) throw InvalidInput("cannot open '" + path.string() + "'");
  }
  ~GzReader() {
    if (file_) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  // Reads up to n bytes; returns the count actually read.
  std::size_t read(unsigned char* dst, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n - done, 1u << 30));
      const int got = gzread(file_, dst + done, chunk);
      if (got < 0) {
        int err = 0;
        const char* msg = gzerror(file_, &err);
        throw ParseError(std::string("decompression failed: ") + msg, offset_ + done);
      }
      if (got == 0) break;
      done += static_cast<std::size_t>(got);
    }
    offset_ += done;
    return done;
  }

  void skip_to(std::size_t offset) {
    std::vector<unsigned char> tmp;
    if (offset < offset_) throw ParseError("vox_offset lies inside the header", 108);
    tmp.resize(offset - offset_);
    if (read(tmp.data(), tmp.size()) != tmp.size()) throw ParseError("file ends before vox_offset", offset_);
  }

  std::size_t offset() const { return offset_; }

 private:
  gzFile file_;
  std::size_t offset_ = 0;
};

NiftiHeader parse_header(const unsigned char* h) {
  NiftiHeader hdr;
  const auto size_native = get<std::int32_t>(h, 0, false);
  if (size_native == static_cast<std::int32_t>(kHeaderSize)) {
    hdr.swapped = false;
  } else if (get<std::int32_t>(h, 0, true) == static_cast<std::int32_t>(kHeaderSize)) {
    hdr.swapped = true;
  } else {
    throw ParseError("sizeof_hdr is not 348", 0);
  }
  const bool sw = hdr.swapped;
  std::memcpy(hdr.magic, h + 344, 4);
  if (!(hdr.magic[0] == 'n' && (hdr.magic[1] == '+' || hdr.magic[1] == 'i') && hdr.magic[2] == '1' &&
        hdr.magic[3] == '\0'))
    throw ParseError("bad NIfTI-1 magic", 344);
  if (hdr.magic[1] == 'i') throw UnsupportedFormat("two-file (.hdr/.img) NIfTI is not supported");
  for (int i = 0; i < 8; ++i) hdr.dim[i] = get<std::int16_t>(h, 40 + 2 * static_cast<std::size_t>(i), sw);
  hdr.datatype = get<std::int16_t>(h, 70, sw);
  hdr.bitpix = get<std::int16_t>(h, 72, sw);
  for (int i = 0; i < 8; ++i) hdr.pixdim[i] = get<float>(h, 76 + 4 * static_cast<std::size_t>(i), sw);
  hdr.vox_offset = get<float>(h, 108, sw);
  hdr.scl_slope = get<float>(h, 112, sw);
  hdr.scl_inter = get<float>(h, 116, sw);
  hdr.qform_code = get<std::int16_t>(h, 252, sw);
  hdr.sform_code = get<std::int16_t>(h, 254, sw);
  for (int i = 0; i < 3; ++i) hdr.quatern[i] = get<float>(h, 256 + 4 * static_cast<std::size_t>(i), sw);
  for (int i = 0; i < 3; ++i) hdr.qoffset[i] = get<float>(h, 268 + 4 * static_cast<std::size_t>(i), sw);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      hdr.srow[r][c] = get<float>(h, 280 + 16 * static_cast<std::size_t>(r) + 4 * static_cast<std::size_t>(c), sw);

  if (hdr.dim[0] < 1 || hdr.dim[0] > 7) throw ParseError("dim[0] out of range", 40);
  for (int i = 1; i <= hdr.dim[0]; ++i)
    if (hdr.dim[i] < 1) throw ParseError("non-positive dimension", 40 + 2 * static_cast<std::size_t>(i));
  if (!std::isfinite(hdr.vox_offset) || hdr.vox_offset < static_cast<float>(kHeaderSize))
    throw ParseError("invalid vox_offset", 108);
  return hdr;
}

// Orthonormal directions plus spacing from a 3x3 linear part; shear is rejected.
void split_linear(const Mat3& m, Vec3& spacing, Mat3& axes) {
  for (int c = 0; c < 3; ++c) {
    spacing[c] = m.col(c).norm();
    if (!(spacing[c] > 0.0)) throw UnsupportedFormat("affine has a zero column");
    axes.col(c) = m.col(c) / spacing[c];
  }
  if ((axes.transpose() * axes - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4)
    throw UnsupportedFormat("sheared voxel-to-world affine is not supported");
  // Snap to the nearest orthonormal matrix to drop float32 rounding.
  Eigen::JacobiSVD<Mat3> svd(axes, Eigen::ComputeFullU | Eigen::ComputeFullV);
  axes = svd.matrixU() * svd.matrixV().transpose();
}

AffineGeometry geometry_from_header(const NiftiHeader& h) {
  AffineGeometry g;
  for (int a = 0; a < 3; ++a) g.dims[a] = a < h.dim[0] ? static_cast<std::size_t>(h.dim[a + 1]) : 1;
  if (h.sform_code > 0) {
    Mat3 lin;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) lin(r, c) = static_cast<double>(h.srow[r][c]);
      g.origin[r] = static_cast<double>(h.srow[r][3]);
    }
    split_linear(lin, g.spacing, g.axes);
  } else if (h.qform_code > 0) {
    const double b = h.quatern[0], c = h.quatern[1], d = h.quatern[2];
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    Mat3 r;
    r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c), 2 * (b * c + a * d),
        a * a + c * c - b * b - d * d, 2 * (c * d - a * b), 2 * (b * d - a * c), 2 * (c * d + a * b),
        a * a + d * d - b * b - c * c;
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    r.col(2) *= qfac;
    Vec3 sp;
    for (int i = 0; i < 3; ++i) sp[i] = std::abs(static_cast<double>(h.pixdim[i + 1]));
    Vec3 unused;
    split_linear(r * sp.asDiagonal(), unused, g.axes);
    g.spacing = sp;
    g.origin = Vec3(h.qoffset[0], h.qoffset[1], h.qoffset[2]);
  } else {
    for (int i = 0; i < 3; ++i) {
      const double p = std::abs(static_cast<double>(h.pixdim[i + 1]));
      g.spacing[i] = p > 0.0 ? p : 1.0;
    }
  }
  for (int a = 0; a < 3; ++a)
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
      throw ParseError("invalid voxel spacing", 80 + 4 * static_cast<std::size_t>(a));
  return g;
}

double decode(const unsigned char* p, std::int16_t dt, bool swap) {
  switch (dt) {
    case kUint8: return static_cast<double>(p[0]);
    case kInt8: return static_cast<double>(static_cast<std::int8_t>(p[0]));
    case kInt16: return static_cast<double>(get<std::int16_t>(p, 0, swap));
    case kUint16: return static_cast<double>(get<std::uint16_t>(p, 0, swap));
    case kInt32: return static_cast<double>(get<std::int32_t>(p, 0, swap));
    case kUint32: return static_cast<double>(get<std::uint32_t>(p, 0, swap));
    case kFloat32: return static_cast<double>(get<float>(p, 0, swap));
    case kFloat64: return get<double>(p, 0, swap);
    case kInt64: return static_cast<double>(get<std::int64_t>(p, 0, swap));
    case kUint64: return static_cast<double>(get<std::uint64_t>(p, 0, swap));
    default: throw UnsupportedFormat("unsupported datatype " + std::to_string(dt));
  }
}

bool has_gz_suffix(const std::filesystem::path& p) { return p.extension() == ".gz"; }

}  // namespace

NiftiHeader read_header(const std::filesystem::path& path) {
  GzReader in(path);
  std::array<unsigned char, kHeaderSize> buf{};
  const std::size_t got = in.read(buf.data(), buf.size());
  if (got < buf.size()) throw ParseError("file shorter than the 348-byte header", got);
  return parse_header(buf.data());
}

Volume read_volume(const std::filesystem::path& path) {
  GzReader in(path);
  std::array<unsigned char, kHeaderSize> buf{};
  const std::size_t got = in.read(buf.data(), buf.size());
  if (got < buf.size()) throw ParseError("file shorter than the 348-byte header", got);
  const NiftiHeader h = parse_header(buf.data());

  const std::size_t esize = datatype_size(h.datatype);
  if (esize == 0) throw UnsupportedFormat("unsupported NIfTI datatype " + std::to_string(h.datatype));
  if (h.bitpix != static_cast<std::int16_t>(8 * esize)) throw ParseError("bitpix does not match datatype", 72);
  for (int i = 4; i <= h.dim[0]; ++i)
    if (h.dim[i] != 1) throw UnsupportedFormat("only scalar 3-D volumes are supported (dim[" + std::to_string(i) + "] > 1)");

  const AffineGeometry g = geometry_from_header(h);
  in.skip_to(static_cast<std::size_t>(h.vox_offset));
  const std::size_t count = g.voxel_count();
  std::vector<unsigned char> raw(count * esize);
  const std::size_t start = in.offset();
  const std::size_t n = in.read(raw.data(), raw.size());
  if (n != raw.size()) throw ParseError("file ends inside the voxel data", start + n);

  std::vector<double> data(count);
  const bool scale = h.scl_slope != 0.0f && std::isfinite(h.scl_slope) &&
                     !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
  for (std::size_t v = 0; v < count; ++v) {
    const double x = decode(raw.data() + v * esize, h.datatype, h.swapped);
    data[v] = scale ? static_cast<double>(h.scl_slope) * x + static_cast<double>(h.scl_inter) : x;
  }
  return Volume(g, std::move(data));
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  const auto& g = volume.geometry();
  for (int a = 0; a < 3; ++a)
    if (g.dims[a] > 32767) throw UnsupportedFormat("dimension exceeds the NIfTI-1 limit of 32767");

  std::vector<unsigned char> out(kDataOffset + 4 * volume.size(), 0);
  unsigned char* h = out.data();
  put<std::int32_t>(h, 0, static_cast<std::int32_t>(kHeaderSize));
  h[38] = 'r';
  put<std::int16_t>(h, 40, 3);
  for (int a = 0; a < 3; ++a) put<std::int16_t>(h, 42 + 2 * static_cast<std::size_t>(a), static_cast<std::int16_t>(g.dims[a]));
  for (int a = 4; a < 8; ++a) put<std::int16_t>(h, 40 + 2 * static_cast<std::size_t>(a), 1);
  put<std::int16_t>(h, 70, kFloat32);
  put<std::int16_t>(h, 72, 32);

  // qform: proper rotation plus qfac for left-handed grids.
  Mat3 r = g.axes;
  float qfac = 1.0f;
  if (r.determinant() < 0.0) {
    r.col(2) *= -1.0;
    qfac = -1.0f;
  }
  const Eigen::Quaterniond q(r);
  Eigen::Quaterniond qn = q.normalized();
  if (qn.w() < 0.0) qn.coeffs() *= -1.0;

  put<float>(h, 76, qfac);
  for (int a = 0; a < 3; ++a) put<float>(h, 80 + 4 * static_cast<std::size_t>(a), static_cast<float>(g.spacing[a]));
  for (int a = 4; a < 8; ++a) put<float>(h, 76 + 4 * static_cast<std::size_t>(a), 1.0f);
  put<float>(h, 108, static_cast<float>(kDataOffset));
  put<float>(h, 112, 1.0f);
  put<float>(h, 116, 0.0f);
  h[123] = 2;  // millimetres
  const char descrip[] = "mslab";
  std::memcpy(h + 148, descrip, sizeof(descrip) - 1);
  put<std::int16_t>(h, 252, 1);
  put<std::int16_t>(h, 254, 1);
  put<float>(h, 256, static_cast<float>(qn.x()));
  put<float>(h, 260, static_cast<float>(qn.y()));
  put<float>(h, 264, static_cast<float>(qn.z()));
  for (int a = 0; a < 3; ++a) put<float>(h, 268 + 4 * static_cast<std::size_t>(a), static_cast<float>(g.origin[a]));
  const Mat3 lin = g.axes * g.spacing.asDiagonal();
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 3; ++c)
      put<float>(h, 280 + 16 * static_cast<std::size_t>(row) + 4 * static_cast<std::size_t>(c), static_cast<float>(lin(row, c)));
    put<float>(h, 280 + 16 * static_cast<std::size_t>(row) + 12, static_cast<float>(g.origin[row]));
  }
  std::memcpy(h + 344, "n+1\0", 4);

  const auto data = volume.data();
  for (std::size_t v = 0; v < data.size(); ++v) put<float>(h, kDataOffset + 4 * v, static_cast<float>(data[v]));

  static std::atomic<unsigned> counter{0};
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "-" + std::to_string(std::random_device{}());
  try {
    if (has_gz_suffix(path)) {
      gzFile f = gzopen(tmp.string().c_str(), "wb6");
      if (!f) throw InvalidInput("cannot write '" + tmp.string() + "'");
      std::size_t done = 0;
      bool ok = true;
      while (done < out.size() && ok) {
        const auto chunk = static_cast<unsigned>(std::min<std::size_t>(out.size() - done, 1u << 30));
        ok = gzwrite(f, out.data() + done, chunk) == static_cast<int>(chunk);
        done += chunk;
      }
      if (gzclose(f) != Z_OK || !ok) throw InvalidInput("failed writing '" + tmp.string() + "'");
    } else {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw InvalidInput("cannot write '" + tmp.string() + "'");
      f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
      f.close();
      if (!f) throw InvalidInput("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

}  // namespace mslab
