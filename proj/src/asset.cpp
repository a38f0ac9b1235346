#include "corrsim/asset.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

#include "corrsim/error.hpp"

namespace corrsim {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line.substr(0, line.find('#')));
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

class LineParser {
 public:
  LineParser(int line_no, std::vector<std::string> tokens)
      : line_no_(line_no), tokens_(std::move(tokens)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kAssetParse, "line " + std::to_string(line_no_) + ": " + what);
  }

  bool done() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const { return tokens_.at(pos_); }

  std::string word(const char* what) {
    if (done()) fail(std::string("expected ") + what);
    return tokens_[pos_++];
  }

  void expect(const std::string& keyword) {
    const std::string w = word(keyword.c_str());
    if (w != keyword) fail("expected '" + keyword + "', got '" + w + "'");
  }

  double number(const char* what) {
    const std::string w = word(what);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      fail(std::string("invalid number for ") + what + ": '" + w + "'");
    }
    return value;
  }

  int integer(const char* what) {
    const std::string w = word(what);
    int value = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      fail(std::string("invalid integer for ") + what + ": '" + w + "'");
    }
    return value;
  }

  Vec3 vec3(const char* what) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = number(what);
    return v;
  }

  void finish() const {
    if (!done()) fail("unexpected trailing token '" + tokens_[pos_] + "'");
  }

  int line() const { return line_no_; }

 private:
  int line_no_;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

struct PendingPart {
  Part part;
  std::optional<double> q;
  int line = 0;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

}  // namespace

ArticulatedObject parse_asset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header = false;
  bool ended = false;
  std::string name;
  std::vector<PendingPart> parts;

  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    LineParser p(line_no, std::move(tokens));
    if (ended) p.fail("content after 'end'");
    const std::string keyword = p.word("statement");
    if (!header) {
      if (keyword != "articulated-object") p.fail("missing 'articulated-object' header");
      const int version = p.integer("schema version");
      if (version != kAssetSchemaVersion) {
        p.fail("unsupported schema version " + std::to_string(version));
      }
      p.finish();
      header = true;
      continue;
    }
    if (keyword == "name") {
      name = p.word("name");
      p.finish();
    } else if (keyword == "part") {
      PendingPart pending;
      pending.line = line_no;
      pending.part.id = p.integer("part id");
      const std::string kind = p.word("part kind");
      if (!p.done() && p.peek() != "origin") pending.part.name = p.word("part name");
      if (kind == "static") {
        pending.part.movable = false;
      } else if (kind == "prismatic" || kind == "revolute") {
        Joint j;
        j.kind = kind == "prismatic" ? JointKind::kPrismatic : JointKind::kRevolute;
        p.expect("origin");
        j.origin = p.vec3("origin");
        p.expect("axis");
        j.axis = p.vec3("axis");
        if (std::abs(j.axis.norm() - 1.0) > 1e-9) p.fail("joint axis is not unit length");
        p.expect("range");
        j.q_lo = p.number("range lower limit");
        j.q_hi = p.number("range upper limit");
        if (!(j.q_lo < j.q_hi)) p.fail("joint range lower limit must be below upper limit");
        if (!p.done()) {
          p.expect("q");
          pending.q = p.number("q");
          if (*pending.q < j.q_lo || *pending.q > j.q_hi) p.fail("q outside joint range");
        }
        pending.part.movable = true;
        pending.part.joint = j;
      } else {
        p.fail("unknown part kind '" + kind + "'");
      }
      p.finish();
      for (const auto& other : parts) {
        if (other.part.id == pending.part.id) p.fail("duplicate part id");
      }
      parts.push_back(std::move(pending));
    } else if (keyword == "box") {
      if (parts.empty()) p.fail("'box' before any 'part'");
      Box b;
      b.center = p.vec3("box center");
      b.half_extents = p.vec3("box half extents");
      if ((b.half_extents.array() <= 0.0).any()) p.fail("box half extents must be positive");
      const double x = p.number("quaternion x");
      const double y = p.number("quaternion y");
      const double z = p.number("quaternion z");
      const double w = p.number("quaternion w");
      b.orientation = Quat(w, x, y, z);
      if (std::abs(b.orientation.norm() - 1.0) > 1e-6) p.fail("box quaternion is not unit");
      p.finish();
      parts.back().part.geometry.push_back(b);
    } else if (keyword == "end") {
      p.finish();
      ended = true;
    } else {
      p.fail("unknown statement '" + keyword + "'");
    }
  }
  if (!header) throw Error(ErrorCode::kAssetParse, "line 1: missing 'articulated-object' header");
  if (!ended) {
    throw Error(ErrorCode::kAssetParse, "line " + std::to_string(line_no) + ": missing 'end'");
  }

  std::vector<Part> out;
  std::map<int, double> config;
  for (auto& pending : parts) {
    if (pending.part.geometry.empty()) {
      throw Error(ErrorCode::kAssetParse,
                  "line " + std::to_string(pending.line) + ": part has no boxes");
    }
    if (pending.q) config[pending.part.id] = *pending.q;
    out.push_back(std::move(pending.part));
  }
  try {
    return ArticulatedObject(std::move(out), std::move(config), name);
  } catch (const Error& e) {
    throw Error(ErrorCode::kAssetParse, "line " + std::to_string(line_no) + ": " + e.what());
  }
}

ArticulatedObject load_asset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open asset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_asset(ss.str());
}

std::string write_asset(const ArticulatedObject& object) {
  std::ostringstream os;
  os << "articulated-object " << kAssetSchemaVersion << "\n";
  if (!object.name().empty()) os << "name " << object.name() << "\n";
  for (const auto& part : object.parts()) {
    os << "part " << part.id << " ";
    if (!part.movable) {
      os << "static";
      if (!part.name.empty()) os << " " << part.name;
    } else {
      const Joint& j = *part.joint;
      os << to_string(j.kind);
      if (!part.name.empty()) os << " " << part.name;
      os << " origin " << fmt(j.origin) << " axis " << fmt(j.axis) << " range " << fmt(j.q_lo)
         << " " << fmt(j.q_hi) << " q " << fmt(object.q(part.id));
    }
    os << "\n";
    for (const auto& b : part.geometry) {
      const auto& c = b.orientation.coeffs();  // x y z w
      os << "box " << fmt(b.center) << "  " << fmt(b.half_extents) << "  " << fmt(c[0]) << " "
         << fmt(c[1]) << " " << fmt(c[2]) << " " << fmt(c[3]) << "\n";
    }
  }
  os << "end\n";
  return os.str();
}

void save_asset(const ArticulatedObject& object, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write asset " + path.string());
  out << write_asset(object);
}

}  // namespace corrsim
