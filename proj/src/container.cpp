#include "eventfeat/container.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include "eventfeat/error.hpp"
#include "eventfeat/event_io.hpp"

namespace eventfeat {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void text(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void vector(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  template <typename Derived>
  void matrix(const Eigen::MatrixBase<Derived>& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void section(const char (&tag)[5], const Writer& payload) {
    raw(tag, 4);
    u64(payload.bytes_.size());
    raw(payload.bytes_.data(), payload.bytes_.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  std::int64_t i64() { return scalar<std::int64_t>(); }
  double f64() { return scalar<double>(); }
  std::string text() {
    const auto n = u64();
    const auto s = take(n);
    return std::string(reinterpret_cast<const char*>(s.data()), s.size());
  }
  Eigen::VectorXd vector() {
    const auto n = u64();
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  Eigen::MatrixXd matrix() {
    const auto rows = u64();
    const auto cols = u64();
    if (rows != 0 && cols > (bytes_.size() - pos_) / 8 / rows) {
      throw Error(ErrorCode::kFormat, "matrix larger than its section");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
    return m;
  }
  std::span<const std::uint8_t> take(std::uint64_t n) {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::kFormat, "container truncated");
    const auto out = bytes_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }

 private:
  template <typename T>
  T scalar() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_svm(Writer& w, const LinearSvmModel& m) {
  w.u64(m.classes.size());
  for (int c : m.classes) w.i64(c);
  w.f64(m.reg_c);
  w.matrix(m.weights);
  w.vector(m.bias);
  w.vector(m.feature_mean);
  w.vector(m.feature_scale);
}

LinearSvmModel read_svm(Reader& r) {
  LinearSvmModel m;
  const auto n = r.u64();
  if (n > 1u << 20) throw Error(ErrorCode::kFormat, "implausible class count");
  for (std::uint64_t i = 0; i < n; ++i) m.classes.push_back(static_cast<int>(r.i64()));
  m.reg_c = r.f64();
  m.weights = r.matrix();
  m.bias = r.vector();
  m.feature_mean = r.vector();
  m.feature_scale = r.vector();
  const auto k = static_cast<Eigen::Index>(m.classes.size());
  if (m.weights.rows() != k || m.bias.size() != k || m.feature_mean.size() != m.weights.cols() ||
      m.feature_scale.size() != m.weights.cols()) {
    throw Error(ErrorCode::kFormat, "classifier section dimensions disagree");
  }
  return m;
}

}  // namespace

Eigen::Index ModelContainer::volume_dim() const {
  return kind == Formulation::kInverse ? dictionary.dim() : transform.dim();
}

Eigen::Index ModelContainer::num_basis() const {
  return kind == Formulation::kInverse ? dictionary.size() : transform.size();
}

BasisView ModelContainer::basis_view() const {
  return kind == Formulation::kInverse ? make_basis_view(dictionary) : make_basis_view(transform);
}

NativeEncoder ModelContainer::native_encoder() const {
  NativeEncoder n;
  n.kind = kind;
  n.dictionary = dictionary;
  n.transform = transform;
  n.inverse = inverse_hyperparams(config);
  n.lambda0 = config.direct.lambda0;
  return n;
}

std::vector<std::uint8_t> save_container(const ModelContainer& model) {
  Writer out;
  out.raw(kContainerMagic, sizeof kContainerMagic);

  Writer conf;
  conf.text(serialize_config(model.config));
  out.section("CONF", conf);

  Writer whit;
  whit.f64(model.whitening.epsilon);
  whit.vector(model.whitening.mean);
  whit.matrix(model.whitening.transform);
  out.section("WHIT", whit);

  Writer basis;
  basis.u8(model.kind == Formulation::kInverse ? 0 : 1);
  if (model.kind == Formulation::kInverse) {
    basis.matrix(model.dictionary.atoms);
  } else {
    basis.matrix(model.transform.rows);
  }
  out.section("BASI", basis);

  if (model.svm) {
    Writer svm;
    write_svm(svm, *model.svm);
    out.section("SVMM", svm);
  }
  return out.take();
}

ModelContainer load_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kContainerMagic ||
      std::memcmp(bytes.data(), kContainerMagic, sizeof kContainerMagic) != 0) {
    throw Error(ErrorCode::kFormat, "missing EVFT0001 magic");
  }
  Reader in(bytes.subspan(sizeof kContainerMagic));
  ModelContainer model;
  bool have_conf = false, have_whit = false, have_basis = false;
  while (!in.done()) {
    const auto tag_bytes = in.take(4);
    const std::string tag(reinterpret_cast<const char*>(tag_bytes.data()), 4);
    const auto length = in.u64();
    Reader section(in.take(length));
    if (tag == "CONF") {
      model.config = parse_config(section.text());
      have_conf = true;
    } else if (tag == "WHIT") {
      model.whitening.epsilon = section.f64();
      model.whitening.mean = section.vector();
      model.whitening.transform = section.matrix();
      have_whit = true;
    } else if (tag == "BASI") {
      const auto kind = section.u8();
      if (kind > 1) throw Error(ErrorCode::kFormat, "unknown basis kind");
      model.kind = kind == 0 ? Formulation::kInverse : Formulation::kDirect;
      if (model.kind == Formulation::kInverse) {
        model.dictionary.atoms = section.matrix();
      } else {
        model.transform.rows = section.matrix();
      }
      have_basis = true;
    } else if (tag == "SVMM") {
      model.svm = read_svm(section);
    } else {
      throw Error(ErrorCode::kFormat, "unknown section '" + tag + "'");
    }
    if (!section.done()) throw Error(ErrorCode::kFormat, "trailing bytes in section " + tag);
  }
  if (!have_conf || !have_whit || !have_basis) {
    throw Error(ErrorCode::kFormat, "container lacks a required section");
  }
  const Eigen::Index d = model.volume_dim();
  if (model.whitening.mean.size() != d || model.whitening.transform.rows() != d ||
      model.whitening.transform.cols() != d) {
    throw Error(ErrorCode::kFormat, "whitening and basis dimensions disagree");
  }
  if (accumulation_config(model.config).volume_dim() != d) {
    throw Error(ErrorCode::kFormat, "config volume size does not match the stored basis");
  }
  if (model.svm && model.svm->dim() != 4 * model.num_basis()) {
    throw Error(ErrorCode::kFormat, "classifier width is not 4K");
  }
  return model;
}

void save_container_file(const std::string& path, const ModelContainer& model) {
  const auto bytes = save_container(model);
  write_file_bytes(path, bytes);
}

ModelContainer load_container_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return load_container(bytes);
}

namespace {

template <typename A, typename B>
bool same(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

bool identical(const ModelContainer& a, const ModelContainer& b) {
  if (serialize_config(a.config) != serialize_config(b.config)) return false;
  if (a.kind != b.kind || a.whitening.epsilon != b.whitening.epsilon) return false;
  if (!same(a.whitening.mean, b.whitening.mean) ||
      !same(a.whitening.transform, b.whitening.transform)) {
    return false;
  }
  if (a.kind == Formulation::kInverse ? !same(a.dictionary.atoms, b.dictionary.atoms)
                                      : !same(a.transform.rows, b.transform.rows)) {
    return false;
  }
  if (a.svm.has_value() != b.svm.has_value()) return false;
  if (a.svm) {
    const auto& x = *a.svm;
    const auto& y = *b.svm;
    if (x.classes != y.classes || x.reg_c != y.reg_c || !same(x.weights, y.weights) ||
        !same(x.bias, y.bias) || !same(x.feature_mean, y.feature_mean) ||
        !same(x.feature_scale, y.feature_scale)) {
      return false;
    }
  }
  return true;
}

}  // namespace eventfeat
