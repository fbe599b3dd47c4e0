#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "wgpinn/network.hpp"

namespace wgpinn {

namespace {

constexpr const char* kMagic = "wgpinn-checkpoint";
constexpr int kVersion = 1;

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw ContractViolation("checkpoint: bad number '" + token + "'");
  }
  return v;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const std::string& expected_tag) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw ContractViolation("checkpoint: unexpected end of file, wanted '" + expected_tag + "'");
    }
    ++line_no_;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (!expected_tag.empty() && tag != expected_tag) {
      fail("expected '" + expected_tag + "', found '" + tag + "'");
    }
    last_tag_ = tag;
    return ss;
  }

  std::string peek_tag() {
    const auto pos = in_.tellg();
    std::string line;
    if (!std::getline(in_, line)) return {};
    in_.seekg(pos);
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    return tag;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ContractViolation("checkpoint line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  int line_no_ = 0;
  std::string last_tag_;
};

std::vector<double> read_numbers(std::istringstream& ss, std::size_t n, const LineReader& reader) {
  std::vector<double> out;
  out.reserve(n);
  std::string tok;
  while (out.size() < n && ss >> tok) out.push_back(parse_hexfloat(tok));
  if (out.size() != n) reader.fail("expected " + std::to_string(n) + " numbers");
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const NetworkParams& params,
                      const std::map<std::string, std::string>& meta) {
  params.validate();
  out << kMagic << ' ' << kVersion << '\n';
  for (const auto& [key, value] : meta) out << "meta " << key << ' ' << value << '\n';
  out << "layers " << params.layer_sizes.size();
  for (auto n : params.layer_sizes) out << ' ' << n;
  out << '\n';
  out << "alphas " << params.alphas.size();
  for (double a : params.alphas) out << ' ' << hexfloat(a);
  out << '\n';
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const Matrix& w = params.weights[i];
    out << "weight " << i << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Index r = 0; r < w.rows(); ++r) {
      out << "row";
      for (Index c = 0; c < w.cols(); ++c) out << ' ' << hexfloat(w(r, c));
      out << '\n';
    }
    const Vector& b = params.biases[i];
    out << "bias " << i << ' ' << b.size() << '\n' << "row";
    for (Index r = 0; r < b.size(); ++r) out << ' ' << hexfloat(b[r]);
    out << '\n';
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  LineReader reader(in);
  Checkpoint cp;
  {
    auto ss = reader.next(kMagic);
    int version = 0;
    ss >> version;
    if (version != kVersion) reader.fail("unsupported checkpoint version " + std::to_string(version));
  }
  while (reader.peek_tag() == "meta") {
    auto ss = reader.next("meta");
    std::string key, value;
    ss >> key;
    std::getline(ss >> std::ws, value);
    cp.meta[key] = value;
  }
  NetworkParams& p = cp.params;
  {
    auto ss = reader.next("layers");
    std::size_t n = 0;
    ss >> n;
    p.layer_sizes.resize(n);
    for (auto& s : p.layer_sizes) {
      if (!(ss >> s)) reader.fail("truncated layer list");
    }
    if (n < 3) reader.fail("need at least one hidden layer");
  }
  {
    auto ss = reader.next("alphas");
    std::size_t n = 0;
    ss >> n;
    p.alphas = read_numbers(ss, n, reader);
  }
  const std::size_t layers = p.layer_sizes.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    auto ws = reader.next("weight");
    std::size_t idx = 0;
    Index rows = 0, cols = 0;
    ws >> idx >> rows >> cols;
    if (idx != i || rows < 1 || cols < 1) reader.fail("bad weight header");
    Matrix w(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      auto rs = reader.next("row");
      const auto vals = read_numbers(rs, static_cast<std::size_t>(cols), reader);
      for (Index c = 0; c < cols; ++c) w(r, c) = vals[static_cast<std::size_t>(c)];
    }
    auto bs = reader.next("bias");
    Index len = 0;
    bs >> idx >> len;
    if (idx != i || len < 1) reader.fail("bad bias header");
    auto rs = reader.next("row");
    const auto vals = read_numbers(rs, static_cast<std::size_t>(len), reader);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::Map<const Vector>(vals.data(), len));
  }
  reader.next("end");
  p.validate();
  return cp;
}

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  write_checkpoint(out, params, meta);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace wgpinn
