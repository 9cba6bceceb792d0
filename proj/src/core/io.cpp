#include "kinoplan/core/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kinoplan/core/error.hpp"

namespace kinoplan::io {

namespace {

constexpr const char* kMotionMagic = "kinoplan-motion";
constexpr const char* kMatrixMagic = "kinoplan-matrices";
constexpr const char* kSkeletonFormat = "kinoplan-skeleton";
constexpr char kBinaryMagic[8] = {'K', 'P', 'M', 'O', 'T', 'I', 'O', 'N'};
constexpr std::uint32_t kVersion = 1;

double parse_double(std::string_view token) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw FormatError("invalid number '" + std::string(token) + "'");
  return value;
}

std::size_t parse_size(std::string_view token) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw FormatError("invalid count '" + std::string(token) + "'");
  return value;
}

/// Splits on single spaces; the writers never emit anything else.
std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t end = line.find(' ', start);
    const std::size_t stop = end == std::string_view::npos ? line.size() : end;
    if (stop > start) out.push_back(line.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : text_(text) {}

  std::vector<std::string_view> next(const char* what) {
    if (pos_ >= text_.size()) throw FormatError(std::string("unexpected end of file, expected ") + what);
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string::npos) end = text_.size();
    std::string_view line(text_.data() + pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    return split(line);
  }

  bool done() const { return pos_ >= text_.size(); }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
};

void expect_keyword(const std::vector<std::string_view>& tokens, std::string_view keyword, std::size_t count) {
  if (tokens.size() != count || tokens[0] != keyword)
    throw FormatError("expected '" + std::string(keyword) + "' line");
}

void write_row(std::string& out, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c) out += ' ';
    out += format_double(row[c]);
  }
  out += '\n';
}

template <typename T>
void append_pod(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "binary writer assumes little endian");
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_pod(const std::vector<std::uint8_t>& in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size()) throw FormatError("binary motion truncated");
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

Vec3 vec3_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string(what) + " must be an array of 3 numbers");
  Vec3 v;
  for (int c = 0; c < 3; ++c) {
    if (!j[static_cast<std::size_t>(c)].is_number())
      throw FormatError(std::string(what) + " must contain numbers");
    v[c] = j[static_cast<std::size_t>(c)].get<double>();
  }
  return v;
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw FormatError("failed writing " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  const std::string s = read_text(path);
  return {s.begin(), s.end()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  write_text(path, std::string(bytes.begin(), bytes.end()));
}

std::string format_double(double value) {
  if (!std::isfinite(value)) throw FormatError("cannot serialize non-finite value");
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw FormatError("number formatting failed");
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- skeleton

Json skeleton_to_json(const Skeleton& skeleton) {
  Json joints = Json::array();
  for (std::size_t j = 0; j < skeleton.joint_count(); ++j)
    joints.push_back({{"name", skeleton.name(j)},
                      {"parent", skeleton.parent(j)},
                      {"offset", vec3_to_json(skeleton.offset(j))}});
  Json keys = Json::array();
  for (std::size_t k : skeleton.key_joints()) keys.push_back(skeleton.name(k));
  return {{"format", kSkeletonFormat}, {"version", kVersion}, {"joints", joints}, {"key_joints", keys}};
}

Skeleton skeleton_from_json(const Json& doc) {
  try {
    if (doc.at("format") != kSkeletonFormat) throw FormatError("not a skeleton document");
    if (doc.at("version") != kVersion) throw FormatError("unsupported skeleton version");
    std::vector<std::string> names;
    std::vector<int> parents;
    std::vector<Vec3> offsets;
    for (const auto& j : doc.at("joints")) {
      names.push_back(j.at("name").get<std::string>());
      parents.push_back(j.at("parent").get<int>());
      offsets.push_back(vec3_from_json(j.at("offset"), "offset"));
    }
    std::vector<std::size_t> keys;
    for (const auto& k : doc.at("key_joints")) {
      const auto name = k.get<std::string>();
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw FormatError("key joint '" + name + "' is not a joint");
      keys.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    return Skeleton(std::move(names), std::move(parents), std::move(offsets), std::move(keys));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("skeleton document: ") + e.what());
  }
}

std::string write_skeleton(const Skeleton& skeleton) { return skeleton_to_json(skeleton).dump(2) + "\n"; }

Skeleton read_skeleton(const std::string& text) {
  try {
    return skeleton_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("skeleton JSON: ") + e.what());
  }
}

Skeleton load_skeleton(const std::filesystem::path& path) { return read_skeleton(read_text(path)); }

void save_skeleton(const std::filesystem::path& path, const Skeleton& skeleton) {
  write_text(path, write_skeleton(skeleton));
}

// ------------------------------------------------------------------ motion

std::string write_motion_text(const Motion& motion) {
  const std::size_t dim = motion.frames.empty() ? 0 : motion.frames.front().dimension();
  std::string out = std::string(kMotionMagic) + " " + std::to_string(kVersion) + "\n";
  out += "fps " + format_double(motion.fps) + "\n";
  out += "frames " + std::to_string(motion.frames.size()) + "\n";
  out += "dim " + std::to_string(dim) + "\n";
  for (const auto& frame : motion.frames) {
    if (frame.dimension() != dim) throw FormatError("motion frames differ in dimension");
    write_row(out, frame.to_vector().transpose());
  }
  return out;
}

Motion read_motion_text(const std::string& text) {
  LineReader lines(text);
  auto header = lines.next("header");
  if (header.size() != 2 || header[0] != kMotionMagic) throw FormatError("not a motion file");
  if (parse_size(header[1]) != kVersion) throw FormatError("unsupported motion version");
  auto fps = lines.next("fps");
  expect_keyword(fps, "fps", 2);
  auto frames = lines.next("frames");
  expect_keyword(frames, "frames", 2);
  auto dim = lines.next("dim");
  expect_keyword(dim, "dim", 2);
  const std::size_t count = parse_size(frames[1]);
  const std::size_t width = parse_size(dim[1]);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(width));
  for (std::size_t f = 0; f < count; ++f) {
    const auto tokens = lines.next("frame row");
    if (tokens.size() != width) throw FormatError("frame " + std::to_string(f) + " has wrong width");
    for (std::size_t c = 0; c < width; ++c)
      rows(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = parse_double(tokens[c]);
  }
  if (!lines.done()) throw FormatError("trailing data after motion frames");
  return Motion::from_matrix(rows, parse_double(fps[1]));
}

std::vector<std::uint8_t> write_motion_binary(const Motion& motion) {
  const std::size_t dim = motion.frames.empty() ? 0 : motion.frames.front().dimension();
  std::vector<std::uint8_t> out(kBinaryMagic, kBinaryMagic + 8);
  append_pod<std::uint32_t>(out, kVersion);
  append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(motion.frames.size()));
  append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  append_pod<std::uint32_t>(out, 0);
  append_pod<double>(out, motion.fps);
  for (const auto& frame : motion.frames) {
    if (frame.dimension() != dim) throw FormatError("motion frames differ in dimension");
    const Eigen::VectorXd v = frame.to_vector();
    for (Eigen::Index c = 0; c < v.size(); ++c) append_pod<double>(out, v[c]);
  }
  return out;
}

Motion read_motion_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kBinaryMagic, 8) != 0)
    throw FormatError("not a binary motion file");
  std::size_t offset = 8;
  if (read_pod<std::uint32_t>(bytes, offset) != kVersion) throw FormatError("unsupported binary motion version");
  const auto count = read_pod<std::uint32_t>(bytes, offset);
  const auto dim = read_pod<std::uint32_t>(bytes, offset);
  read_pod<std::uint32_t>(bytes, offset);
  const double fps = read_pod<double>(bytes, offset);
  if (bytes.size() != offset + static_cast<std::size_t>(count) * dim * sizeof(double))
    throw FormatError("binary motion size does not match its header");
  Eigen::MatrixXd rows(count, dim);
  for (std::uint32_t f = 0; f < count; ++f)
    for (std::uint32_t c = 0; c < dim; ++c) rows(f, c) = read_pod<double>(bytes, offset);
  return Motion::from_matrix(rows, fps);
}

Motion load_motion(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return read_motion_binary(read_bytes(path));
  return read_motion_text(read_text(path));
}

void save_motion(const std::filesystem::path& path, const Motion& motion) {
  if (path.extension() == ".bin")
    write_bytes(path, write_motion_binary(motion));
  else
    write_text(path, write_motion_text(motion));
}

// ------------------------------------------------------------------- plans

Json keyframe_to_json(const Keyframe& key) {
  Json j = Json::object();
  for (std::size_t k = 0; k < kKeyJointCount; ++k) j[std::string(kKeyJointNames[k])] = vec3_to_json(key.positions[k]);
  return j;
}

Keyframe keyframe_from_json(const Json& doc, KeyframeMode mode) {
  if (!doc.is_object()) throw FormatError("keyframe must be an object");
  if (doc.size() != kKeyJointCount) throw FormatError("keyframe must list exactly 5 key joints");
  Keyframe key;
  key.mode = mode;
  for (std::size_t k = 0; k < kKeyJointCount; ++k) {
    const std::string name(kKeyJointNames[k]);
    if (!doc.contains(name)) throw FormatError("keyframe is missing '" + name + "'");
    key.positions[k] = vec3_from_json(doc.at(name), name.c_str());
  }
  if (!key.all_finite()) throw FormatError("keyframe has non-finite coordinates");
  return key;
}

Json plan_to_json(const KeyframePlan& plan) {
  const KeyframeMode mode = plan.frames.empty() ? KeyframeMode::absolute : plan.frames.front().mode;
  Json frames = Json::array();
  for (const auto& f : plan.frames) {
    if (f.mode != mode) throw FormatError("plan JSON needs a single keyframe mode");
    frames.push_back(keyframe_to_json(f));
  }
  return {{"prompt", plan.prompt},
          {"mode", mode == KeyframeMode::delta ? "delta" : "absolute"},
          {"segment_length", plan.segment_length},
          {"frames", frames}};
}

KeyframePlan plan_from_json(const Json& doc) {
  try {
    KeyframePlan plan;
    plan.prompt = doc.at("prompt").get<std::string>();
    const auto mode_name = doc.at("mode").get<std::string>();
    if (mode_name != "delta" && mode_name != "absolute") throw FormatError("mode must be 'delta' or 'absolute'");
    const KeyframeMode mode = mode_name == "delta" ? KeyframeMode::delta : KeyframeMode::absolute;
    plan.segment_length = doc.value("segment_length", 2);
    if (plan.segment_length < 1) throw FormatError("segment_length must be positive");
    for (const auto& f : doc.at("frames")) plan.frames.push_back(keyframe_from_json(f, mode));
    return plan;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("plan document: ") + e.what());
  }
}

std::string write_plan(const KeyframePlan& plan) { return plan_to_json(plan).dump(2) + "\n"; }

KeyframePlan read_plan(const std::string& text) {
  try {
    return plan_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("plan JSON: ") + e.what());
  }
}

KeyframePlan load_plan(const std::filesystem::path& path) { return read_plan(read_text(path)); }

void save_plan(const std::filesystem::path& path, const KeyframePlan& plan) { write_text(path, write_plan(plan)); }

// ---------------------------------------------------------------- matrices

std::string write_matrices(const std::vector<NamedMatrix>& matrices) {
  std::string out = std::string(kMatrixMagic) + " " + std::to_string(kVersion) + "\n";
  for (const auto& [name, m] : matrices) {
    if (name.empty() || name.find_first_of(" \n") != std::string::npos)
      throw FormatError("matrix names must be non-empty without whitespace");
    out += "matrix " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) write_row(out, m.row(r));
  }
  return out;
}

std::vector<NamedMatrix> read_matrices(const std::string& text) {
  LineReader lines(text);
  auto header = lines.next("header");
  if (header.size() != 2 || header[0] != kMatrixMagic) throw FormatError("not a matrix file");
  if (parse_size(header[1]) != kVersion) throw FormatError("unsupported matrix file version");
  std::vector<NamedMatrix> out;
  while (!lines.done()) {
    auto decl = lines.next("matrix declaration");
    expect_keyword(decl, "matrix", 4);
    const std::size_t rows = parse_size(decl[2]), cols = parse_size(decl[3]);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto tokens = lines.next("matrix row");
      if (tokens.size() != cols) throw FormatError("matrix row has wrong width");
      for (std::size_t c = 0; c < cols; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(tokens[c]);
    }
    out.emplace_back(std::string(decl[1]), std::move(m));
  }
  return out;
}

const Eigen::MatrixXd& find_matrix(const std::vector<NamedMatrix>& matrices, const std::string& name) {
  for (const auto& [n, m] : matrices)
    if (n == name) return m;
  throw FormatError("matrix '" + name + "' not found");
}

}  // namespace kinoplan::io
