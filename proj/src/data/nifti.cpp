#include "contextstrip/data/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "contextstrip/core/error.hpp"

namespace cstrip::nifti {

namespace {

// Byte offsets of the header fields used here.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap(T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

class HeaderView {
 public:
  HeaderView(unsigned char* bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_ + offset, sizeof(T));
    return swap_ ? byteswap(v) : v;
  }
  template <typename T>
  void put(std::size_t offset, T v) {
    if (swap_) v = byteswap(v);
    std::memcpy(bytes_ + offset, &v, sizeof(T));
  }

 private:
  unsigned char* bytes_;
  bool swap_;
};

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUInt8:
      return 1;
    case kInt16:
    case kUInt16:
      return 2;
    case kFloat32:
      return 4;
    default:
      return 0;
  }
}

std::string datatype_name(std::int16_t datatype) {
  switch (datatype) {
    case kUInt8:
      return "uint8";
    case kInt16:
      return "int16";
    case kUInt16:
      return "uint16";
    case kFloat32:
      return "float32";
    case kFloat64:
      return "float64";
    case 1:
      return "binary";
    case 8:
      return "int32";
    case 32:
      return "complex64";
    case 128:
      return "rgb24";
    case 256:
      return "int8";
    case 768:
      return "uint32";
    case 1024:
      return "int64";
    default:
      return "code " + std::to_string(datatype);
  }
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> out;
  unsigned char chunk[1 << 16];
  for (;;) {
    const int n = gzread(file, chunk, sizeof(chunk));
    if (n < 0) {
      int err = 0;
      const std::string msg = gzerror(file, &err);
      gzclose(file);
      throw FormatError("'" + path.string() + "': decompression failed: " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), chunk, chunk + n);
  }
  gzclose(file);
  return out;
}

void write_all(const std::vector<unsigned char>& bytes, const std::filesystem::path& path,
               bool gzip) {
  if (gzip) {
    gzFile file = gzopen(path.c_str(), "wb6");
    if (file == nullptr) throw IoError("cannot create '" + path.string() + "'");
    const int n = gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int rc = gzclose(file);
    if (n != static_cast<int>(bytes.size()) || rc != Z_OK) {
      throw IoError("write to '" + path.string() + "' failed");
    }
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot create '" + path.string() + "'");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

bool ends_with_gz(const std::filesystem::path& path) {
  const std::string s = path.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

template <typename Int>
Int saturate(float v) {
  const double r = std::nearbyint(static_cast<double>(v));
  const double lo = static_cast<double>(std::numeric_limits<Int>::lowest());
  const double hi = static_cast<double>(std::numeric_limits<Int>::max());
  return static_cast<Int>(std::clamp(r, lo, hi));
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  auto bytes = read_all(path);
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
    throw FormatError(where + ": file shorter than the 348-byte header");
  }
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data() + kOffSizeofHdr, 4);
  bool swap = false;
  if (sizeof_hdr != kHeaderSize) {
    if (byteswap(sizeof_hdr) != kHeaderSize) {
      throw FormatError(where + ": sizeof_hdr is " + std::to_string(sizeof_hdr) +
                        " in either byte order, not a NIfTI-1 header");
    }
    swap = true;
  }
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0 &&
      std::memcmp(bytes.data() + kOffMagic, "ni1\0", 4) != 0) {
    throw FormatError(where + ": bad magic (expected \"n+1\" or \"ni1\")");
  }
  HeaderView h(bytes.data(), swap);
  const bool pair = std::memcmp(bytes.data() + kOffMagic, "ni1\0", 4) == 0;

  Image image;
  const auto ndim = h.get<std::int16_t>(kOffDim);
  if (ndim < 1 || ndim > 7) throw FormatError(where + ": dim[0]=" + std::to_string(ndim));
  for (int a = 0; a < 3; ++a) {
    const auto d = a < ndim ? h.get<std::int16_t>(kOffDim + 2 * (a + 1)) : std::int16_t{1};
    if (d <= 0) throw FormatError(where + ": dim[" + std::to_string(a + 1) + "] is not positive");
    image.extents[static_cast<std::size_t>(a)] = d;
    const float sp = std::abs(h.get<float>(kOffPixdim + 4 * (a + 1)));
    image.spacing[static_cast<std::size_t>(a)] = sp > 0.0f && std::isfinite(sp) ? sp : 1.0;
  }
  for (int a = 3; a < ndim; ++a) {
    if (h.get<std::int16_t>(kOffDim + 2 * (a + 1)) > 1) {
      throw FormatError(where + ": only 3-D images are supported (dim[" + std::to_string(a + 1) +
                        "] > 1)");
    }
  }
  image.datatype = h.get<std::int16_t>(kOffDatatype);
  const int bpv = bytes_per_voxel(image.datatype);
  if (bpv == 0) {
    throw FormatError(where + ": unsupported datatype " + datatype_name(image.datatype) +
                      " (supported: uint8, int16, uint16, float32)");
  }
  float slope = h.get<float>(kOffSclSlope);
  float inter = h.get<float>(kOffSclInter);
  const float vox_offset = h.get<float>(kOffVoxOffset);
  auto offset = static_cast<std::size_t>(std::max(0.0f, vox_offset));
  if (!pair && offset < static_cast<std::size_t>(kHeaderSize)) {
    throw FormatError(where + ": vox_offset " + std::to_string(vox_offset) +
                      " points inside the header");
  }
  if (pair) {
    // Header/image pair: voxels live in the sibling .img file.
    std::string img = path.string();
    const bool gz = ends_with_gz(path);
    if (gz) img.resize(img.size() - 3);
    if (img.size() < 4 || img.compare(img.size() - 4, 4, ".hdr") != 0) {
      throw FormatError(where + ": \"ni1\" header must come from a .hdr file");
    }
    img.replace(img.size() - 4, 4, ".img");
    if (gz && std::filesystem::exists(img + ".gz")) img += ".gz";
    bytes = read_all(img);
  }
  const std::size_t count =
      static_cast<std::size_t>(image.extents[0] * image.extents[1] * image.extents[2]);
  if (bytes.size() < offset + count * static_cast<std::size_t>(bpv)) {
    throw FormatError(where + ": truncated data section (" +
                      std::to_string(bytes.size() - std::min(bytes.size(), offset)) +
                      " bytes, need " + std::to_string(count * static_cast<std::size_t>(bpv)) + ")");
  }

  const bool scaled = slope != 0.0f && std::isfinite(slope);
  if (!std::isfinite(inter)) inter = 0.0f;

  image.values.resize(count);
  const unsigned char* data = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    float v = 0.0f;
    switch (image.datatype) {
      case kUInt8:
        v = data[i];
        break;
      case kInt16: {
        std::int16_t r;
        std::memcpy(&r, data + 2 * i, 2);
        v = swap ? byteswap(r) : r;
        break;
      }
      case kUInt16: {
        std::uint16_t r;
        std::memcpy(&r, data + 2 * i, 2);
        v = swap ? byteswap(r) : r;
        break;
      }
      case kFloat32: {
        float r;
        std::memcpy(&r, data + 4 * i, 4);
        v = swap ? byteswap(r) : r;
        break;
      }
    }
    image.values[i] = scaled ? slope * v + inter : v;
  }
  return image;
}

void write_image(const Image& image, const std::filesystem::path& path,
                 const WriteOptions& options) {
  const int bpv = bytes_per_voxel(options.datatype);
  if (bpv == 0) {
    throw FormatError("write_image: unsupported datatype " + datatype_name(options.datatype));
  }
  const std::size_t count =
      static_cast<std::size_t>(image.extents[0] * image.extents[1] * image.extents[2]);
  if (image.values.size() != count) {
    throw ValueError("write_image: " + std::to_string(image.values.size()) + " values for " +
                     std::to_string(count) + " voxels");
  }
  for (auto e : image.extents) {
    if (e <= 0 || e > std::numeric_limits<std::int16_t>::max()) {
      throw ValueError("write_image: extent " + std::to_string(e) + " not representable");
    }
  }

  std::vector<unsigned char> bytes(static_cast<std::size_t>(kVoxOffset) + count * static_cast<std::size_t>(bpv), 0);
  HeaderView h(bytes.data(), options.swap_bytes);
  h.put<std::int32_t>(kOffSizeofHdr, kHeaderSize);
  h.put<std::int16_t>(kOffDim, 3);
  for (int a = 0; a < 7; ++a) {
    const std::int16_t d = a < 3 ? static_cast<std::int16_t>(image.extents[static_cast<std::size_t>(a)]) : 1;
    h.put<std::int16_t>(kOffDim + 2 * (a + 1), d);
  }
  h.put<std::int16_t>(kOffDatatype, options.datatype);
  h.put<std::int16_t>(kOffBitpix, static_cast<std::int16_t>(8 * bpv));
  h.put<float>(kOffPixdim, 1.0f);
  for (int a = 0; a < 3; ++a) {
    h.put<float>(kOffPixdim + 4 * (a + 1), static_cast<float>(image.spacing[static_cast<std::size_t>(a)]));
  }
  h.put<float>(kOffVoxOffset, static_cast<float>(kVoxOffset));
  h.put<float>(kOffSclSlope, 0.0f);
  h.put<float>(kOffSclInter, 0.0f);
  bytes[kOffXyztUnits] = 2;  // millimetres
  const char descrip[] = "contextstrip";
  std::memcpy(bytes.data() + kOffDescrip, descrip, sizeof(descrip) - 1);
  // Scaled identity voxel-to-world transform.
  h.put<std::int16_t>(kOffQformCode, 0);
  h.put<std::int16_t>(kOffSformCode, 2);
  for (int r = 0; r < 3; ++r) {
    h.put<float>(kOffSrowX + 16 * r + 4 * r, static_cast<float>(image.spacing[static_cast<std::size_t>(r)]));
  }
  std::memcpy(bytes.data() + kOffMagic, "n+1\0", 4);

  unsigned char* data = bytes.data() + kVoxOffset;
  for (std::size_t i = 0; i < count; ++i) {
    const float v = image.values[i];
    switch (options.datatype) {
      case kUInt8:
        data[i] = saturate<std::uint8_t>(v);
        break;
      case kInt16: {
        auto r = saturate<std::int16_t>(v);
        if (options.swap_bytes) r = byteswap(r);
        std::memcpy(data + 2 * i, &r, 2);
        break;
      }
      case kUInt16: {
        auto r = saturate<std::uint16_t>(v);
        if (options.swap_bytes) r = byteswap(r);
        std::memcpy(data + 2 * i, &r, 2);
        break;
      }
      case kFloat32: {
        float r = options.swap_bytes ? byteswap(v) : v;
        std::memcpy(data + 4 * i, &r, 4);
        break;
      }
    }
  }
  write_all(bytes, path, options.gzip.value_or(ends_with_gz(path)));
}

Volume read_nifti(const std::filesystem::path& path) {
  Image image = read_image(path);
  Volume volume;
  volume.extents = image.extents;
  volume.spacing = image.spacing;
  volume.intensities = std::move(image.values);
  for (float v : volume.intensities) {
    if (!std::isfinite(v)) throw FormatError("'" + path.string() + "': non-finite intensity");
  }
  return volume;
}

std::vector<std::uint8_t> read_nifti_mask(const std::filesystem::path& path,
                                          const std::array<std::int64_t, 3>& expected_extents) {
  Image image = read_image(path);
  if (image.extents != expected_extents) {
    throw FormatError("'" + path.string() + "': mask extents differ from the intensity volume");
  }
  std::vector<std::uint8_t> labels(image.values.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float r = std::nearbyint(image.values[i]);
    if (r != 0.0f && r != 1.0f) {
      throw FormatError("'" + path.string() + "': mask value " + std::to_string(image.values[i]) +
                        " at voxel " + std::to_string(i) + " is not a 0/1 label");
    }
    labels[i] = static_cast<std::uint8_t>(r);
  }
  return labels;
}

void write_nifti(const Volume& volume, const std::filesystem::path& path, WriteOptions options) {
  Image image{volume.extents, volume.spacing, options.datatype, volume.intensities};
  write_image(image, path, options);
}

void write_nifti_mask(const Volume& volume, const std::filesystem::path& path,
                      WriteOptions options) {
  if (!volume.mask) throw ValueError("write_nifti_mask: volume '" + volume.subject_id + "' has no mask");
  options.datatype = kUInt8;
  Image image{volume.extents, volume.spacing, kUInt8,
              std::vector<float>(volume.mask->begin(), volume.mask->end())};
  write_image(image, path, options);
}

}  // namespace cstrip::nifti
