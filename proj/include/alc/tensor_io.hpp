#pragma once

// Dense tensor files (".alct") and dataset manifests.
//
// Tensor file layout, all integers little-endian:
//
//   offset  size        field
//   0       4           magic "ALCT"
//   4       1           version (=1)
//   5       1           dtype code: 0=u8, 1=u16, 2=u32, 3=f32
//   6       1           ndim (1..4)
//   7       4*ndim      dims, u32 each, all >= 1
//   ...     prod(dims)*sizeof(dtype)   row-major payload
//
// Images are u8 [H, W, 3], label maps u8/u16/u32 [H, W], superpixel maps
// u16/u32 [H, W] and probability maps f32 [H, W, C].

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "alc/error.hpp"

namespace alc {

namespace fs = std::filesystem;

enum class DType : std::uint8_t { U8 = 0, U16 = 1, U32 = 2, F32 = 3 };

constexpr std::size_t dtype_size(DType t) noexcept {
  switch (t) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::U32: return 4;
    case DType::F32: return 4;
  }
  return 0;
}

constexpr const char* dtype_name(DType t) noexcept {
  switch (t) {
    case DType::U8: return "u8";
    case DType::U16: return "u16";
    case DType::U32: return "u32";
    case DType::F32: return "f32";
  }
  return "?";
}

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return DType::U8;
  else if constexpr (std::is_same_v<T, std::uint16_t>) return DType::U16;
  else if constexpr (std::is_same_v<T, std::uint32_t>) return DType::U32;
  else if constexpr (std::is_same_v<T, float>) return DType::F32;
  else static_assert(sizeof(T) == 0, "unsupported tensor element type");
}

inline constexpr std::array<char, 4> kTensorMagic{'A', 'L', 'C', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kMaxDims = 4;

namespace detail {

template <typename T>
T byteswap_if_big(T v) noexcept {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

inline void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(std::span<const std::byte> in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// A dense row-major array whose payload is kept in file (little-endian)
/// byte order, so reading and writing never touch the values.
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(DType dtype, std::vector<std::uint32_t> dims, std::vector<std::byte> payload)
      : dtype_(dtype), dims_(std::move(dims)), payload_(std::move(payload)) {
    if (dims_.empty() || dims_.size() > kMaxDims)
      throw Error(Errc::DimMismatch, "ndim must be in 1..4, got " + std::to_string(dims_.size()));
    for (auto d : dims_)
      if (d == 0) throw Error(Errc::DimMismatch, "dims must all be >= 1");
    if (payload_.size() != element_count() * dtype_size(dtype_))
      throw Error(Errc::DimMismatch, "payload length does not match dims");
  }

  template <typename T>
  static DenseTensor from_values(std::vector<std::uint32_t> dims, std::span<const T> values) {
    std::vector<std::byte> payload(values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T le = detail::byteswap_if_big(values[i]);
      std::memcpy(payload.data() + i * sizeof(T), &le, sizeof(T));
    }
    return DenseTensor(dtype_of<T>(), std::move(dims), std::move(payload));
  }

  template <typename T>
  static DenseTensor from_values(std::vector<std::uint32_t> dims, const std::vector<T>& values) {
    return from_values<T>(std::move(dims), std::span<const T>(values));
  }

  DType dtype() const noexcept { return dtype_; }
  const std::vector<std::uint32_t>& dims() const noexcept { return dims_; }
  std::span<const std::byte> payload() const noexcept { return payload_; }

  std::size_t element_count() const noexcept {
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
  }

  /// Decoded copy of the payload. T must match dtype exactly.
  template <typename T>
  std::vector<T> values() const {
    if (dtype_of<T>() != dtype_)
      throw Error(Errc::DimMismatch, std::string("tensor dtype is ") + dtype_name(dtype_) +
                                         ", requested " + dtype_name(dtype_of<T>()));
    std::vector<T> out(element_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
      T v;
      std::memcpy(&v, payload_.data() + i * sizeof(T), sizeof(T));
      out[i] = detail::byteswap_if_big(v);
    }
    return out;
  }

  /// Integer payloads widened to u32 (u8, u16, u32 accepted).
  std::vector<std::uint32_t> integer_values() const {
    switch (dtype_) {
      case DType::U8: { auto v = values<std::uint8_t>(); return {v.begin(), v.end()}; }
      case DType::U16: { auto v = values<std::uint16_t>(); return {v.begin(), v.end()}; }
      case DType::U32: return values<std::uint32_t>();
      case DType::F32: break;
    }
    throw Error(Errc::DimMismatch, "expected an integer tensor, got f32");
  }

  std::size_t header_size() const noexcept { return 7 + 4 * dims_.size(); }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  DType dtype_ = DType::U8;
  std::vector<std::uint32_t> dims_;
  std::vector<std::byte> payload_;
};

inline std::vector<std::byte> encode_tensor(const DenseTensor& t) {
  std::vector<std::byte> out;
  out.reserve(t.header_size() + t.payload().size());
  for (char c : kTensorMagic) out.push_back(static_cast<std::byte>(c));
  out.push_back(static_cast<std::byte>(kTensorVersion));
  out.push_back(static_cast<std::byte>(t.dtype()));
  out.push_back(static_cast<std::byte>(t.dims().size()));
  for (auto d : t.dims()) detail::put_u32(out, d);
  out.insert(out.end(), t.payload().begin(), t.payload().end());
  return out;
}

inline DenseTensor decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < 7 || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin(),
                                      [](char c, std::byte b) { return static_cast<std::byte>(c) == b; }))
    throw Error(Errc::BadMagic, "missing ALCT magic");
  const auto version = std::to_integer<std::uint8_t>(bytes[4]);
  if (version != kTensorVersion)
    throw Error(Errc::UnsupportedVersion, "version " + std::to_string(version));
  const auto code = std::to_integer<std::uint8_t>(bytes[5]);
  if (code > 3) throw Error(Errc::UnsupportedVersion, "unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const auto ndim = std::to_integer<std::uint8_t>(bytes[6]);
  if (ndim < 1 || ndim > kMaxDims)
    throw Error(Errc::DimMismatch, "ndim " + std::to_string(ndim) + " outside 1..4");
  const std::size_t header = 7 + 4 * std::size_t{ndim};
  if (bytes.size() < header) throw Error(Errc::TruncatedPayload, "header cut short");

  std::vector<std::uint32_t> dims(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = detail::get_u32(bytes.subspan(7 + 4 * i, 4));
    if (dims[i] == 0) throw Error(Errc::DimMismatch, "zero-length dimension");
    count *= dims[i];
  }
  const std::size_t expected = count * dtype_size(dtype);
  const std::size_t actual = bytes.size() - header;
  if (actual < expected)
    throw Error(Errc::TruncatedPayload, "payload has " + std::to_string(actual) + " bytes, dims need " +
                                            std::to_string(expected));
  if (actual > expected)
    throw Error(Errc::DimMismatch, std::to_string(actual - expected) + " trailing bytes after payload");
  std::vector<std::byte> payload(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return DenseTensor(dtype, std::move(dims), std::move(payload));
}

inline std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

inline void write_file_bytes(const fs::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

inline void write_text_file(const fs::path& path, std::string_view text) {
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

inline DenseTensor read_tensor(const fs::path& path) { return decode_tensor(read_file_bytes(path)); }

inline void write_tensor(const fs::path& path, const DenseTensor& t) { write_file_bytes(path, encode_tensor(t)); }

// ---------------------------------------------------------------------------
// Manifest

struct ManifestImage {
  std::string image_id;
  std::string image_path;
  std::optional<std::string> gt_label_path;
  std::string pseudo_label_path;
  std::string superpixel_path;
  std::optional<std::string> prob_path;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  friend bool operator==(const ManifestImage&, const ManifestImage&) = default;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::optional<std::uint32_t> ignore_id;
  std::vector<ManifestImage> images;
  fs::path base_dir;  // directory the manifest was loaded from; paths resolve against it
  fs::path source;    // manifest file, when loaded from disk

  fs::path resolve(const std::string& rel) const {
    fs::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["class_names"] = m.class_names;
  j["ignore_id"] = m.ignore_id ? nlohmann::json(*m.ignore_id) : nlohmann::json("none");
  j["images"] = nlohmann::json::array();
  for (const auto& im : m.images) {
    nlohmann::json e{{"image_id", im.image_id},
                     {"image_path", im.image_path},
                     {"pseudo_label_path", im.pseudo_label_path},
                     {"superpixel_path", im.superpixel_path},
                     {"width", im.width},
                     {"height", im.height}};
    if (im.gt_label_path) e["gt_label_path"] = *im.gt_label_path;
    if (im.prob_path) e["prob_path"] = *im.prob_path;
    j["images"].push_back(std::move(e));
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j, fs::path base_dir) {
  try {
    DatasetManifest m;
    m.base_dir = std::move(base_dir);
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    const auto& ig = j.contains("ignore_id") ? j.at("ignore_id") : nlohmann::json("none");
    if (ig.is_string()) {
      if (ig.get<std::string>() != "none")
        throw Error(Errc::ManifestParse, "ignore_id must be an integer or \"none\"");
    } else {
      m.ignore_id = ig.get<std::uint32_t>();
    }
    for (const auto& e : j.at("images")) {
      ManifestImage im;
      im.image_id = e.at("image_id").get<std::string>();
      im.image_path = e.at("image_path").get<std::string>();
      im.pseudo_label_path = e.at("pseudo_label_path").get<std::string>();
      im.superpixel_path = e.at("superpixel_path").get<std::string>();
      if (e.contains("gt_label_path") && !e["gt_label_path"].is_null())
        im.gt_label_path = e["gt_label_path"].get<std::string>();
      if (e.contains("prob_path") && !e["prob_path"].is_null()) im.prob_path = e["prob_path"].get<std::string>();
      im.width = e.at("width").get<std::uint32_t>();
      im.height = e.at("height").get<std::uint32_t>();
      m.images.push_back(std::move(im));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ManifestParse, ex.what());
  }
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ManifestParse, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ManifestParse, ex.what());
  }
  auto m = manifest_from_json(j, fs::absolute(path).parent_path());
  m.source = fs::absolute(path);
  return m;
}

inline void save_manifest(const fs::path& path, const DatasetManifest& m) {
  write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Validation

inline constexpr double kProbRowTolerance = 1e-5;

struct Violation {
  std::string image_id;  // empty for manifest-level problems
  std::string kind;
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool clean() const noexcept { return violations.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : violations)
      arr.push_back({{"image_id", v.image_id}, {"kind", v.kind}, {"detail", v.detail}});
    return {{"clean", clean()}, {"violations", arr}};
  }
};

namespace detail {

inline std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct ValidationContext {
  const DatasetManifest& m;
  const ManifestImage& im;
  ValidationReport& report;

  void add(std::string kind, std::string detail) {
    report.violations.push_back({im.image_id, std::move(kind), std::move(detail)});
  }

  std::optional<DenseTensor> load(const std::string& rel, const char* what) {
    const auto path = m.resolve(rel);
    if (!fs::exists(path)) {
      add("missing file", std::string(what) + " " + path.string());
      return std::nullopt;
    }
    try {
      return read_tensor(path);
    } catch (const Error& e) {
      add("unreadable tensor", std::string(what) + ": " + e.what());
      return std::nullopt;
    }
  }

  bool check_plane(const DenseTensor& t, const char* what, std::size_t channels) {
    std::vector<std::uint32_t> want{im.height, im.width};
    if (channels) want.push_back(static_cast<std::uint32_t>(channels));
    if (t.dims() != want) {
      std::string got;
      for (auto d : t.dims()) got += (got.empty() ? "" : "x") + std::to_string(d);
      add("dim mismatch", std::string(what) + " has dims " + got);
      return false;
    }
    return true;
  }
};

}  // namespace detail

/// Checks a manifest against the files it references. Violations are data:
/// this never throws for bad content, only reports it.
inline ValidationReport validate_manifest(const DatasetManifest& m) {
  ValidationReport report;
  const std::size_t num_classes = m.class_names.size();
  if (num_classes < 2)
    report.violations.push_back({"", "too few classes", std::to_string(num_classes) + " class names"});

  std::set<std::string> seen;
  for (const auto& im : m.images) {
    detail::ValidationContext ctx{m, im, report};
    if (!seen.insert(im.image_id).second) ctx.add("duplicate image_id", im.image_id);
    if (im.width == 0 || im.height == 0) ctx.add("dim mismatch", "zero width or height");

    if (auto t = ctx.load(im.image_path, "image")) {
      if (ctx.check_plane(*t, "image", 3) && t->dtype() != DType::U8) ctx.add("bad dtype", "image must be u8");
    }

    auto check_labels = [&](const std::string& rel, const char* what) {
      auto t = ctx.load(rel, what);
      if (!t || !ctx.check_plane(*t, what, 0)) return;
      if (t->dtype() == DType::F32) {
        ctx.add("bad dtype", std::string(what) + " must be an integer tensor");
        return;
      }
      std::map<std::uint32_t, std::size_t> bad;
      for (auto v : t->integer_values())
        if (v >= num_classes && !(m.ignore_id && v == *m.ignore_id)) ++bad[v];
      for (auto [v, n] : bad)
        ctx.add("label id out of range", std::string(what) + " value " + std::to_string(v) + " at " +
                                             std::to_string(n) + " pixels with " + std::to_string(num_classes) +
                                             " classes");
    };
    check_labels(im.pseudo_label_path, "pseudo label");
    if (im.gt_label_path) check_labels(*im.gt_label_path, "gt label");

    if (auto t = ctx.load(im.superpixel_path, "superpixel")) {
      if (ctx.check_plane(*t, "superpixel", 0) && t->dtype() != DType::U16 && t->dtype() != DType::U32)
        ctx.add("bad dtype", "superpixel map must be u16 or u32");
    }

    if (im.prob_path) {
      auto t = ctx.load(*im.prob_path, "prob");
      if (t && ctx.check_plane(*t, "prob", num_classes)) {
        if (t->dtype() != DType::F32) {
          ctx.add("bad dtype", "prob map must be f32");
        } else {
          const auto v = t->values<float>();
          std::size_t reported = 0;
          for (std::size_t px = 0; px * num_classes < v.size(); ++px) {
            double sum = 0.0;
            bool negative = false;
            bool finite = true;
            for (std::size_t c = 0; c < num_classes; ++c) {
              const double p = v[px * num_classes + c];
              if (!std::isfinite(p)) finite = false;
              if (p < 0.0) negative = true;
              sum += p;
            }
            // Report only the first few offending rows per image.
            if (reported >= 8) break;
            const std::string where = "pixel (" + std::to_string(px % im.width) + "," +
                                      std::to_string(px / im.width) + ")";
            if (!finite) {
              ctx.add("non-finite probability", where);
              ++reported;
            } else if (negative) {
              ctx.add("negative probability", where);
              ++reported;
            } else if (std::abs(sum - 1.0) > kProbRowTolerance) {
              ctx.add("row sum out of tolerance", where + ": row sum " + detail::fmt_real(sum) +
                                                      (sum > 1.0 ? " exceeds" : " falls short of") +
                                                      " tolerance");
              ++reported;
            }
          }
        }
      }
    }
  }
  return report;
}

}  // namespace alc
