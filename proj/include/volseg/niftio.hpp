#pragma once

// NIFTI-1 reader/writer. Handles single-file (.nii) and header/image pair
// (.hdr/.img) layouts, either byte order, and gzip-compressed streams.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "volseg/error.hpp"
#include "volseg/volcore.hpp"

namespace volseg::nifti {

enum class ByteOrder { kLittle, kBig };

enum class Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
};

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kSingleFileOffset = 352;

inline bool is_supported_datatype(int code) {
  return code == 2 || code == 4 || code == 8 || code == 16 || code == 64;
}

inline std::size_t datatype_bytes(Datatype t) {
  switch (t) {
    case Datatype::kUint8: return 1;
    case Datatype::kInt16: return 2;
    case Datatype::kInt32: return 4;
    case Datatype::kFloat32: return 4;
    case Datatype::kFloat64: return 8;
  }
  throw UnsupportedDatatype("datatype code " + std::to_string(static_cast<int>(t)));
}

inline Datatype to_datatype(int code) {
  if (!is_supported_datatype(code)) {
    throw UnsupportedDatatype("datatype code " + std::to_string(code) +
                              " (supported: 2 uint8, 4 int16, 8 int32, 16 float32, 64 float64)");
  }
  return static_cast<Datatype>(code);
}

/// The 348-byte NIFTI-1 header, field for field.
struct Header {
  std::int32_t sizeof_hdr = 348;
  std::array<char, 10> data_type{};
  std::array<char, 18> db_name{};
  std::int32_t extents = 0;
  std::int16_t session_error = 0;
  char regular = 'r';
  char dim_info = 0;
  std::array<std::int16_t, 8> dim{};
  float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
  std::int16_t intent_code = 0;
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::int16_t slice_start = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0;
  float scl_slope = 0;
  float scl_inter = 0;
  std::int16_t slice_end = 0;
  char slice_code = 0;
  char xyzt_units = 0;
  float cal_max = 0, cal_min = 0;
  float slice_duration = 0;
  float toffset = 0;
  std::int32_t glmax = 0, glmin = 0;
  std::array<char, 80> descrip{};
  std::array<char, 24> aux_file{};
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
  std::array<char, 16> intent_name{};
  std::array<char, 4> magic{};

  bool single_file() const { return std::memcmp(magic.data(), "n+1\0", 4) == 0; }
  bool pair_file() const { return std::memcmp(magic.data(), "ni1\0", 4) == 0; }
};

namespace detail {

template <typename T>
T byteswap_value(T v) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

inline bool host_is_little() { return std::endian::native == std::endian::little; }

inline bool needs_swap(ByteOrder order) {
  return (order == ByteOrder::kLittle) != host_is_little();
}

class FieldReader {
 public:
  FieldReader(std::span<const std::uint8_t> bytes, ByteOrder order)
      : bytes_(bytes), swap_(needs_swap(order)) {}

  template <typename T>
  T get(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    return swap_ && sizeof(T) > 1 ? byteswap_value(v) : v;
  }

  template <typename T, std::size_t N>
  void get(std::size_t offset, std::array<T, N>& out) const {
    for (std::size_t i = 0; i < N; ++i) out[i] = get<T>(offset + i * sizeof(T));
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class FieldWriter {
 public:
  FieldWriter(std::span<std::uint8_t> bytes, ByteOrder order)
      : bytes_(bytes), swap_(needs_swap(order)) {}

  template <typename T>
  void put(std::size_t offset, T v) {
    if (swap_ && sizeof(T) > 1) v = byteswap_value(v);
    std::memcpy(bytes_.data() + offset, &v, sizeof(T));
  }

  template <typename T, std::size_t N>
  void put(std::size_t offset, const std::array<T, N>& in) {
    for (std::size_t i = 0; i < N; ++i) put<T>(offset + i * sizeof(T), in[i]);
  }

 private:
  std::span<std::uint8_t> bytes_;
  bool swap_;
};

// Field offsets of the NIFTI-1 header.
template <typename Io, typename H>
void visit_header(Io& io, H& h) {
  auto field = [&io](std::size_t off, auto& value) {
    if constexpr (std::is_const_v<std::remove_reference_t<decltype(value)>>) {
      io.put(off, value);
    } else {
      using V = std::remove_reference_t<decltype(value)>;
      if constexpr (requires { value.size(); }) {
        io.get(off, value);
      } else {
        value = io.template get<V>(off);
      }
    }
  };
  field(0, h.sizeof_hdr);
  field(4, h.data_type);
  field(14, h.db_name);
  field(32, h.extents);
  field(36, h.session_error);
  field(38, h.regular);
  field(39, h.dim_info);
  field(40, h.dim);
  field(56, h.intent_p1);
  field(60, h.intent_p2);
  field(64, h.intent_p3);
  field(68, h.intent_code);
  field(70, h.datatype);
  field(72, h.bitpix);
  field(74, h.slice_start);
  field(76, h.pixdim);
  field(108, h.vox_offset);
  field(112, h.scl_slope);
  field(116, h.scl_inter);
  field(120, h.slice_end);
  field(122, h.slice_code);
  field(123, h.xyzt_units);
  field(124, h.cal_max);
  field(128, h.cal_min);
  field(132, h.slice_duration);
  field(136, h.toffset);
  field(140, h.glmax);
  field(144, h.glmin);
  field(148, h.descrip);
  field(228, h.aux_file);
  field(252, h.qform_code);
  field(254, h.sform_code);
  field(256, h.quatern_b);
  field(260, h.quatern_c);
  field(264, h.quatern_d);
  field(268, h.qoffset_x);
  field(272, h.qoffset_y);
  field(276, h.qoffset_z);
  field(280, h.srow_x);
  field(296, h.srow_y);
  field(312, h.srow_z);
  field(328, h.intent_name);
  field(344, h.magic);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gzip

inline bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

inline std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk;
  int rc = Z_OK;
  while (true) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_STREAM_END) {
      // Concatenated gzip members are legal; keep going if input remains.
      if (zs.avail_in > 0 && zs.avail_in >= 2 && zs.next_in[0] == 0x1f && zs.next_in[1] == 0x8b) {
        inflateReset(&zs);
        continue;
      }
      break;
    }
    if (rc != Z_OK) {
      inflateEnd(&zs);
      if (rc == Z_BUF_ERROR) throw TruncatedData("gzip stream ended early");
      throw IoError(std::string("gzip decode failed: ") + (zs.msg ? zs.msg : "unknown"));
    }
  }
  inflateEnd(&zs);
  return out;
}

inline std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> bytes, int level = 6) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw IoError("deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip encode failed");
  out.resize(zs.total_out);
  return out;
}

// ---------------------------------------------------------------------------
// Header codec

inline std::array<std::uint8_t, kHeaderSize> encode_header(const Header& h,
                                                           ByteOrder order = ByteOrder::kLittle) {
  std::array<std::uint8_t, kHeaderSize> bytes{};
  detail::FieldWriter w(bytes, order);
  detail::visit_header(w, std::as_const(h));
  return bytes;
}

/// Decodes the header, detecting byte order from sizeof_hdr.
inline Header decode_header(std::span<const std::uint8_t> bytes, ByteOrder* detected = nullptr) {
  if (bytes.size() < kHeaderSize) {
    throw TruncatedData("stream has " + std::to_string(bytes.size()) +
                        " bytes, NIFTI-1 header needs 348");
  }
  ByteOrder order;
  std::int32_t le;
  std::memcpy(&le, bytes.data(), 4);
  if (!detail::host_is_little()) le = detail::byteswap_value(le);
  if (le == 348) {
    order = ByteOrder::kLittle;
  } else if (detail::byteswap_value(le) == 348) {
    order = ByteOrder::kBig;
  } else {
    throw BadHeader("sizeof_hdr is not 348 in either byte order");
  }
  Header h;
  detail::FieldReader r(bytes, order);
  detail::visit_header(r, h);
  if (!h.single_file() && !h.pair_file()) {
    throw BadMagic("expected \"n+1\\0\" or \"ni1\\0\"");
  }
  if (detected) *detected = order;
  return h;
}

/// Voxel-to-world matrix implied by qform (quaternion + offsets + pixdim).
inline Affine qform_affine(const Header& h) {
  double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
  const double dx = std::abs(h.pixdim[1]) > 0 ? h.pixdim[1] : 1.0;
  const double dy = std::abs(h.pixdim[2]) > 0 ? h.pixdim[2] : 1.0;
  const double dz = (std::abs(h.pixdim[3]) > 0 ? h.pixdim[3] : 1.0) * qfac;
  Affine m{};
  m[0] = {(a * a + b * b - c * c - d * d) * dx, 2 * (b * c - a * d) * dy, 2 * (b * d + a * c) * dz,
          h.qoffset_x};
  m[1] = {2 * (b * c + a * d) * dx, (a * a + c * c - b * b - d * d) * dy, 2 * (c * d - a * b) * dz,
          h.qoffset_y};
  m[2] = {2 * (b * d - a * c) * dx, 2 * (c * d + a * b) * dy, (a * a + d * d - c * c - b * b) * dz,
          h.qoffset_z};
  m[3] = {0, 0, 0, 1};
  return m;
}

inline Affine sform_affine(const Header& h) {
  Affine m{};
  for (int j = 0; j < 4; ++j) {
    m[0][j] = h.srow_x[j];
    m[1][j] = h.srow_y[j];
    m[2][j] = h.srow_z[j];
  }
  m[3] = {0, 0, 0, 1};
  return m;
}

enum class AffineSource { kSform, kQform, kPixdim };

struct Image {
  Header header;
  ByteOrder byte_order = ByteOrder::kLittle;
  AffineSource affine_source = AffineSource::kPixdim;
  VoxelGrid grid;
};

namespace detail {

inline Dims header_dims(const Header& h) {
  if (h.dim[0] != 3 && h.dim[0] != 4) {
    throw BadHeader("dim[0] = " + std::to_string(h.dim[0]) + ", only 3D (or 4D with one volume) is supported");
  }
  if (h.dim[0] == 4 && h.dim[4] != 1) {
    throw BadHeader("4D input with dim[4] = " + std::to_string(h.dim[4]) + " volumes is not supported");
  }
  Dims d{};
  for (int i = 0; i < 3; ++i) {
    if (h.dim[i + 1] < 1) throw BadHeader("dim[" + std::to_string(i + 1) + "] must be >= 1");
    d[i] = static_cast<std::size_t>(h.dim[i + 1]);
  }
  return d;
}

template <typename T>
void decode_voxels(std::span<const std::uint8_t> raw, bool swap, std::vector<double>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    if (swap && sizeof(T) > 1) v = byteswap_value(v);
    out[i] = static_cast<double>(v);
  }
}

inline VoxelGrid build_grid(const Header& h, ByteOrder order, std::span<const std::uint8_t> payload,
                            AffineSource& source) {
  const Dims dims = header_dims(h);
  const Datatype type = to_datatype(h.datatype);
  const std::size_t n = dims[0] * dims[1] * dims[2];
  const std::size_t need = n * datatype_bytes(type);
  if (payload.size() < need) {
    throw TruncatedData("voxel payload has " + std::to_string(payload.size()) + " bytes, dims " +
                        dims_string(dims) + " need " + std::to_string(need));
  }
  std::vector<double> data(n);
  const bool swap = needs_swap(order);
  switch (type) {
    case Datatype::kUint8: decode_voxels<std::uint8_t>(payload, swap, data); break;
    case Datatype::kInt16: decode_voxels<std::int16_t>(payload, swap, data); break;
    case Datatype::kInt32: decode_voxels<std::int32_t>(payload, swap, data); break;
    case Datatype::kFloat32: decode_voxels<float>(payload, swap, data); break;
    case Datatype::kFloat64: decode_voxels<double>(payload, swap, data); break;
  }
  const double slope = h.scl_slope;
  const double inter = h.scl_inter;
  if (slope != 0.0 && std::isfinite(slope) && std::isfinite(inter)) {
    for (auto& v : data) v = slope * v + inter;
  }

  Spacing pix{};
  for (int i = 0; i < 3; ++i) {
    const double p = std::abs(static_cast<double>(h.pixdim[i + 1]));
    pix[i] = p > 0 && std::isfinite(p) ? p : 1.0;
  }

  Affine affine;
  if (h.sform_code > 0) {
    affine = sform_affine(h);
    source = AffineSource::kSform;
  } else if (h.qform_code > 0) {
    affine = qform_affine(h);
    source = AffineSource::kQform;
  } else {
    affine = diagonal_affine(pix);
    source = AffineSource::kPixdim;
  }
  // pixdim is authoritative for spacing unless the chosen affine disagrees
  // with it, in which case the affine's column norms win.
  Spacing spacing = pix;
  const Spacing norms = affine_column_norms(affine);
  for (int i = 0; i < 3; ++i) {
    if (!(norms[i] > 0)) throw BadHeader("affine column " + std::to_string(i) + " is zero");
    if (std::abs(norms[i] - pix[i]) > Geometry::kSpacingTolerance * pix[i]) spacing = norms;
  }
  return VoxelGrid(Geometry(dims, spacing, affine), std::move(data));
}

}  // namespace detail

/// Decodes a single-file NIFTI-1 stream, gzip-compressed or not.
inline Image read_nifti(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> inflated;
  if (is_gzip(bytes)) {
    inflated = gunzip(bytes);
    bytes = inflated;
  }
  ByteOrder order;
  Header h = decode_header(bytes, &order);
  if (!h.single_file()) {
    throw BadMagic("\"ni1\" header requires a separate image stream; use read_nifti_pair");
  }
  const double offset = h.vox_offset;
  if (!(offset >= static_cast<double>(kHeaderSize)) || offset != std::floor(offset)) {
    throw BadHeader("vox_offset " + std::to_string(offset) + " is invalid for a single-file image");
  }
  const auto off = static_cast<std::size_t>(offset);
  if (off > bytes.size()) throw TruncatedData("vox_offset lies past the end of the stream");
  AffineSource source;
  VoxelGrid grid = detail::build_grid(h, order, bytes.subspan(off), source);
  return Image{h, order, source, std::move(grid)};
}

/// Decodes a header/image pair (".hdr" + ".img").
inline Image read_nifti_pair(std::span<const std::uint8_t> header_bytes,
                             std::span<const std::uint8_t> image_bytes) {
  std::vector<std::uint8_t> hdr_inflated, img_inflated;
  if (is_gzip(header_bytes)) {
    hdr_inflated = gunzip(header_bytes);
    header_bytes = hdr_inflated;
  }
  if (is_gzip(image_bytes)) {
    img_inflated = gunzip(image_bytes);
    image_bytes = img_inflated;
  }
  ByteOrder order;
  Header h = decode_header(header_bytes, &order);
  const double offset = h.vox_offset;
  if (!(offset >= 0) || offset != std::floor(offset)) throw BadHeader("invalid vox_offset");
  const auto off = static_cast<std::size_t>(offset);
  if (off > image_bytes.size()) throw TruncatedData("vox_offset lies past the end of the image file");
  AffineSource source;
  VoxelGrid grid = detail::build_grid(h, order, image_bytes.subspan(off), source);
  return Image{h, order, source, std::move(grid)};
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline Image read_nifti_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const auto bytes = read_file_bytes(path);
  const std::string name = path.filename().string();
  const bool is_hdr = name.ends_with(".hdr") || name.ends_with(".hdr.gz");
  if (is_hdr) {
    std::string img = path.string();
    img.replace(img.rfind(".hdr"), 4, ".img");
    if (!std::filesystem::exists(img)) throw IoError("missing image file for pair header: " + img);
    return read_nifti_pair(bytes, read_file_bytes(img));
  }
  return read_nifti(bytes);
}

/// Reads a mask file; voxels with value > 0.5 are foreground.
inline LabelMask read_mask_file(const std::filesystem::path& path) {
  return LabelMask::from_grid(read_nifti_file(path).grid);
}

// ---------------------------------------------------------------------------
// Writer

struct WriteOptions {
  Datatype datatype = Datatype::kFloat32;
  bool compressed = false;
  ByteOrder byte_order = ByteOrder::kLittle;
};

namespace detail {

template <typename T>
void encode_voxels(std::span<const double> data, bool swap, std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    T v;
    if constexpr (std::is_integral_v<T>) {
      const double r = std::nearbyint(data[i]);
      const double lo = static_cast<double>(std::numeric_limits<T>::lowest());
      const double hi = static_cast<double>(std::numeric_limits<T>::max());
      v = static_cast<T>(std::isnan(r) ? 0.0 : std::clamp(r, lo, hi));
    } else {
      v = static_cast<T>(data[i]);
    }
    if (swap && sizeof(T) > 1) v = byteswap_value(v);
    std::memcpy(out.data() + i * sizeof(T), &v, sizeof(T));
  }
}

}  // namespace detail

/// Header describing `grid` as a single-file image of the given type.
inline Header make_header(const Geometry& g, Datatype type) {
  Header h;
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim = {3, static_cast<std::int16_t>(g.dims()[0]), static_cast<std::int16_t>(g.dims()[1]),
           static_cast<std::int16_t>(g.dims()[2]), 1, 1, 1, 1};
  h.datatype = static_cast<std::int16_t>(type);
  h.bitpix = static_cast<std::int16_t>(8 * datatype_bytes(type));
  h.pixdim = {1.0f, static_cast<float>(g.spacing()[0]), static_cast<float>(g.spacing()[1]),
              static_cast<float>(g.spacing()[2]), 0, 0, 0, 0};
  h.vox_offset = static_cast<float>(kSingleFileOffset);
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // mm
  h.qform_code = 0;
  h.sform_code = 1;
  const auto& a = g.affine();
  for (int j = 0; j < 4; ++j) {
    h.srow_x[j] = static_cast<float>(a[0][j]);
    h.srow_y[j] = static_cast<float>(a[1][j]);
    h.srow_z[j] = static_cast<float>(a[2][j]);
  }
  std::memcpy(h.magic.data(), "n+1\0", 4);
  return h;
}

inline std::vector<std::uint8_t> write_nifti(const VoxelGrid& grid, const WriteOptions& opts = {}) {
  const auto& dims = grid.dims();
  for (auto d : dims) {
    if (d > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max())) {
      throw InvalidArgument("dimension " + std::to_string(d) + " exceeds the NIFTI-1 limit of 32767");
    }
  }
  const std::size_t nbytes = datatype_bytes(opts.datatype);
  const Header h = make_header(grid.geometry(), opts.datatype);
  std::vector<std::uint8_t> out(kSingleFileOffset + grid.size() * nbytes, 0);
  const auto hdr = encode_header(h, opts.byte_order);
  std::copy(hdr.begin(), hdr.end(), out.begin());
  // Bytes 348..351 stay zero: no extensions.
  const bool swap = detail::needs_swap(opts.byte_order);
  std::span<std::uint8_t> payload(out.data() + kSingleFileOffset, grid.size() * nbytes);
  switch (opts.datatype) {
    case Datatype::kUint8: detail::encode_voxels<std::uint8_t>(grid.data(), swap, payload); break;
    case Datatype::kInt16: detail::encode_voxels<std::int16_t>(grid.data(), swap, payload); break;
    case Datatype::kInt32: detail::encode_voxels<std::int32_t>(grid.data(), swap, payload); break;
    case Datatype::kFloat32: detail::encode_voxels<float>(grid.data(), swap, payload); break;
    case Datatype::kFloat64: detail::encode_voxels<double>(grid.data(), swap, payload); break;
  }
  return opts.compressed ? gzip(out) : out;
}

inline std::vector<std::uint8_t> write_mask(const LabelMask& mask, bool compressed) {
  return write_nifti(mask.to_grid(), {Datatype::kUint8, compressed, ByteOrder::kLittle});
}

/// Writes to disk; ".gz" paths are compressed regardless of opts.compressed.
inline void write_nifti_file(const std::filesystem::path& path, const VoxelGrid& grid,
                             WriteOptions opts = {}) {
  if (path.string().ends_with(".gz")) opts.compressed = true;
  write_file_bytes(path, write_nifti(grid, opts));
}

inline void write_mask_file(const std::filesystem::path& path, const LabelMask& mask) {
  write_nifti_file(path, mask.to_grid(), {Datatype::kUint8, false, ByteOrder::kLittle});
}

}  // namespace volseg::nifti
